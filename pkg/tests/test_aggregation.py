"""Aggregation policy truth tables, checked exhaustively against oracles."""

import itertools

import pytest

from procline.engine.aggregate import POLICIES, AggregationError, aggregate

from oracles import fold_and, strict_majority


def all_tuples(max_len):
    for n in range(1, max_len + 1):
        yield from itertools.product((False, True), repeat=n)


def test_single_returns_its_only_result():
    assert aggregate("single", [True]) is True
    assert aggregate("single", [False]) is False


def test_single_rejects_other_arities():
    with pytest.raises(AggregationError, match="exactly one"):
        aggregate("single", [])
    with pytest.raises(AggregationError, match="exactly one"):
        aggregate("single", [True, True])


def test_unanimous_and_veto_match_fold_and_exhaustively():
    for tup in all_tuples(10):
        expected = fold_and(list(tup))
        assert aggregate("unanimous", list(tup)) == expected
        assert aggregate("veto", list(tup)) == expected


def test_majority_matches_oracle_exhaustively():
    for tup in all_tuples(10):
        assert aggregate("majority", list(tup)) == strict_majority(list(tup))


def test_majority_needs_strict_excess():
    assert aggregate("majority", [True, False]) is False
    assert aggregate("majority", [True, True, False, False]) is False
    assert aggregate("majority", [True, True, False]) is True


def test_empty_rejected_for_multi_policies():
    for policy in ("unanimous", "veto", "majority"):
        with pytest.raises(AggregationError):
            aggregate(policy, [])


def test_non_boolean_rejected():
    with pytest.raises(AggregationError, match="boolean"):
        aggregate("unanimous", [True, 1])
    with pytest.raises(AggregationError, match="boolean"):
        aggregate("majority", ["yes"])


def test_unknown_policy_rejected():
    with pytest.raises(AggregationError, match="unknown"):
        aggregate("quorum", [True])
    assert set(POLICIES) == {"single", "unanimous", "veto", "majority"}
