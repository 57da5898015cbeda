"""Configuration-space operations: exhaustive enumeration and pairwise sampling.

Brute force is deliberate; model sizes are desk scale and the enumerator
doubles as the ground truth for the sampler.
"""

from __future__ import annotations

from itertools import combinations

from .model import Configuration, FeatureModel
from .rules import required_data_fields, validate_configuration


def enumerate_configurations(model: FeatureModel, limit: int | None = None) -> list[Configuration]:
    """All valid configurations in lexicographic order of their sorted id lists.

    In a valid configuration the selected optional data units are exactly the
    access closure of the selected leaves (data-closure forces them in,
    write-before-read throws unused ones out), so only leaf subsets need to
    be explored.
    """
    leaves = sorted(model.leaves())
    found: list[Configuration] = []
    for size in range(len(leaves) + 1):
        for combo in combinations(leaves, size):
            cfg = Configuration(frozenset(combo) | required_data_fields(model, Configuration(frozenset(combo))))
            if validate_configuration(model, cfg).valid:
                found.append(cfg)
    found.sort(key=lambda c: c.sorted())
    if limit is not None:
        return found[:limit]
    return found


def achievable_pairs(model: FeatureModel, configs: list[Configuration] | None = None) -> set[tuple[str, str, bool, bool]]:
    """Leaf-pair value combinations realized by at least one valid configuration.

    Entries are (f, g, f_on, g_on) with f < g lexicographically.
    """
    if configs is None:
        configs = enumerate_configurations(model)
    leaves = sorted(model.leaves())
    pairs: set[tuple[str, str, bool, bool]] = set()
    for cfg in configs:
        sel = cfg.selected
        for f, g in combinations(leaves, 2):
            pairs.add((f, g, f in sel, g in sel))
    return pairs


def sample_pairwise(model: FeatureModel) -> list[Configuration]:
    """Greedy pairwise sample: valid configurations covering every achievable
    leaf-pair value combination.

    One configuration is added at a time, picking the candidate that covers
    the most not-yet-covered combinations; ties break lexicographically on
    the sorted id list. The result is deterministic.
    """
    candidates = enumerate_configurations(model)
    target = achievable_pairs(model, candidates)
    leaves = sorted(model.leaves())

    def combos_of(cfg: Configuration) -> set[tuple[str, str, bool, bool]]:
        sel = cfg.selected
        return {(f, g, f in sel, g in sel) for f, g in combinations(leaves, 2)}

    remaining = set(target)
    chosen: list[Configuration] = []
    pool = [(cfg, combos_of(cfg)) for cfg in candidates]
    while remaining:
        best: tuple[int, tuple[str, ...]] | None = None
        best_cfg = None
        best_combos: set | None = None
        for cfg, combos in pool:
            gain = len(combos & remaining)
            if gain == 0:
                continue
            key = (-gain, cfg.sorted())
            if best is None or key < best:
                best = key
                best_cfg = cfg
                best_combos = combos
        if best_cfg is None:
            break  # nothing can cover what's left; caller-visible via coverage check
        chosen.append(best_cfg)
        remaining -= best_combos or set()
    return chosen
