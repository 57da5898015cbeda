"""Configuration validation for three-layer feature models.

Rules, each with a stable id used in reports:

  mandatory-activity          every mandatory activity has >= 1 selected
                              implementation
  group-cardinality           each group's selected-member count lies within
                              its cardinality
  requires / excludes         cross-tree constraints over identifiers or
                              group counts
  conditional-group-requires  (#G1 op n) implies (#G2 op m)
  data-closure                optional data accessed by a selected
                              implementation is selected
  write-before-read           every selected optional data unit has a
                              selected writer and a selected reader, and
                              some writer's activity strictly precedes some
                              reader's activity in the control flow
  unknown-identifier          the configuration references an id the model
                              does not know
"""

from __future__ import annotations

from .model import (
    MANDATORY,
    Configuration,
    FeatureModel,
    GroupCountPredicate,
    ValidationReport,
    Violation,
)

RULE_MANDATORY = "mandatory-activity"
RULE_CARDINALITY = "group-cardinality"
RULE_REQUIRES = "requires"
RULE_EXCLUDES = "excludes"
RULE_CONDITIONAL = "conditional-group-requires"
RULE_CLOSURE = "data-closure"
RULE_WRITE_BEFORE_READ = "write-before-read"
RULE_UNKNOWN = "unknown-identifier"


def required_data_fields(model: FeatureModel, cfg: Configuration) -> frozenset[str]:
    """Optional data units the selected implementations access (closure).

    Both read and write edges pull a unit in: collecting the data and using
    it are two halves of the same requirement.
    """
    units: set[str] = set()
    selected = cfg.selected
    for edge in model.access_edges:
        if edge.implementation in selected:
            units.update(model.units_for_path(edge.field_path))
    return frozenset(units)


def validate_configuration(model: FeatureModel, cfg: Configuration) -> ValidationReport:
    """Check a configuration against rules (a)-(f); violations are data."""
    violations: list[Violation] = []
    leaves = set(model.leaves())
    units = set(model.optional_units())
    selected = set(cfg.selected)

    for ident in sorted(selected):
        if ident not in leaves and ident not in units:
            violations.append(Violation(RULE_UNKNOWN, (ident,), f"{ident!r} is not a selectable leaf or optional data path"))
    if violations:
        return ValidationReport(False, violations)

    # (a) mandatory activities are implemented
    for act in model.activities:
        if act.optionality == MANDATORY and not (set(act.implementations) & selected):
            violations.append(Violation(
                RULE_MANDATORY, (act.id,),
                f"mandatory activity {act.id!r} has no selected implementation",
            ))

    # (b) group cardinalities
    for grp in model.groups():
        count = len(set(grp.members) & selected)
        if not (grp.cardinality.min <= count <= grp.cardinality.max):
            violations.append(Violation(
                RULE_CARDINALITY, (grp.id,),
                f"group {grp.id!r} has {count} selected members, allowed {grp.cardinality.min}-{grp.cardinality.max}",
            ))

    # (c) requires / excludes, (d) conditional group requires
    for con in model.constraints:
        lhs = _side_holds(model, con.lhs, selected)
        rhs = _side_holds(model, con.rhs, selected)
        if con.kind == "requires" and lhs and not rhs:
            violations.append(Violation(
                RULE_REQUIRES, (_side_name(con.lhs), _side_name(con.rhs)),
                f"{_side_name(con.lhs)} requires {_side_name(con.rhs)}",
            ))
        elif con.kind == "excludes" and lhs and rhs:
            violations.append(Violation(
                RULE_EXCLUDES, (_side_name(con.lhs), _side_name(con.rhs)),
                f"{_side_name(con.lhs)} excludes {_side_name(con.rhs)}",
            ))
        elif con.kind == "conditional_group_requires" and lhs and not rhs:
            violations.append(Violation(
                RULE_CONDITIONAL, (_side_name(con.lhs), _side_name(con.rhs)),
                f"when {_side_name(con.lhs)} holds, {_side_name(con.rhs)} must hold",
            ))

    # (e) data closure
    needed = required_data_fields(model, cfg)
    for unit in sorted(needed - selected):
        users = sorted(
            e.implementation for e in model.access_edges
            if e.implementation in selected and unit in model.units_for_path(e.field_path)
        )
        violations.append(Violation(
            RULE_CLOSURE, (unit, *users),
            f"optional data {unit!r} is accessed by {', '.join(users)} but not selected",
        ))

    # (f) write before read
    precedes = model.precedes()
    for unit in sorted(selected & units):
        writers = sorted({
            e.implementation for e in model.access_edges
            if e.mode == "write" and e.implementation in selected
            and unit in model.units_for_path(e.field_path)
        })
        readers = sorted({
            e.implementation for e in model.access_edges
            if e.mode == "read" and e.implementation in selected
            and unit in model.units_for_path(e.field_path)
        })
        if not writers or not readers:
            missing = "writer" if not writers else "reader"
            violations.append(Violation(
                RULE_WRITE_BEFORE_READ, (unit,),
                f"selected optional data {unit!r} has no selected {missing}",
            ))
            continue
        ordered = any(
            (model.activity_of(w), model.activity_of(r)) in precedes
            for w in writers for r in readers
        )
        if not ordered:
            violations.append(Violation(
                RULE_WRITE_BEFORE_READ, (unit, *writers, *readers),
                f"no selected writer of {unit!r} precedes a selected reader in the control flow",
            ))

    return ValidationReport(not violations, violations)


def _side_holds(model: FeatureModel, side, selected: set[str]) -> bool:
    if isinstance(side, GroupCountPredicate):
        grp = model.group(side.group)
        count = len(set(grp.members) & selected) if grp else 0
        return side.holds(count)
    # Identifier: an activity counts as selected when one of its
    # implementations is; leaves and data paths by membership.
    for act in model.activities:
        if act.id == side:
            return bool(set(act.implementations) & selected)
    return side in selected


def _side_name(side) -> str:
    if isinstance(side, GroupCountPredicate):
        return f"#{side.group} {side.op} {side.count}"
    return str(side)
