"""Aggregation policies for joining boolean child results.

single     exactly one result, returned as-is
unanimous  true iff every result is true
veto       false iff at least one result is false; same truth table as
           unanimous, kept separate so the engine can report which child
           vetoed
majority   true iff strictly more than half the results are true
"""

from __future__ import annotations

from typing import Sequence

POLICIES = ("single", "unanimous", "veto", "majority")


class AggregationError(ValueError):
    pass


def aggregate(policy: str, results: Sequence[bool]) -> bool:
    if policy not in POLICIES:
        raise AggregationError(f"unknown aggregation policy {policy!r}")
    for value in results:
        if not isinstance(value, bool):
            raise AggregationError(f"aggregation needs boolean results, got {value!r}")
    if policy == "single":
        if len(results) != 1:
            raise AggregationError(f"policy 'single' needs exactly one result, got {len(results)}")
        return results[0]
    if not results:
        raise AggregationError(f"policy {policy!r} needs at least one result")
    if policy in ("unanimous", "veto"):
        return all(results)
    return sum(1 for value in results if value) * 2 > len(results)
