"""Core types for three-layer feature models of process product lines.

A model has exactly three layers: the process root, its activities, and the
activity's implementation / aggregation-code leaves. Variability on top of
the tree comes from feature groups with cardinalities, cross-tree
constraints, and an optional data schema whose optional parts are selected
alongside leaves.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.-]*$")

PROCESS = "process"
ACTIVITY = "activity"
IMPLEMENTATION = "implementation"
AGGREGATION = "aggregation_code"

MANDATORY = "mandatory"
OPTIONAL = "optional"

IMPLEMENTATION_GROUP = "implementation_group"
AGGREGATION_GROUP = "aggregation_group"

COUNT_OPS = (">", ">=", "=", "<=", "<")


class ModelError(ValueError):
    """Raised for malformed feature-model documents.

    ``where`` is a dotted/indexed path into the source document so the
    first offending element can be located.
    """

    def __init__(self, message: str, where: str = "") -> None:
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class FeatureNode:
    id: str
    kind: str                      # process | activity | implementation | aggregation_code
    optionality: str               # mandatory | optional (leaves are optional by nature)
    children: tuple[FeatureNode, ...] = ()


@dataclass(frozen=True)
class Cardinality:
    min: int
    max: int


@dataclass(frozen=True)
class FeatureGroup:
    id: str
    owner_activity: str
    role: str                      # implementation_group | aggregation_group
    members: tuple[str, ...]
    cardinality: Cardinality


@dataclass(frozen=True)
class GroupCountPredicate:
    """Predicate over the number of selected members of one group."""

    group: str
    op: str                        # one of COUNT_OPS
    count: int

    def holds(self, selected_count: int) -> bool:
        if self.op == ">":
            return selected_count > self.count
        if self.op == ">=":
            return selected_count >= self.count
        if self.op == "=":
            return selected_count == self.count
        if self.op == "<=":
            return selected_count <= self.count
        return selected_count < self.count


# A constraint side is either a feature/data identifier or a group-count
# predicate. Plain strings keep requires/excludes readable.
Side = "str | GroupCountPredicate"


@dataclass(frozen=True)
class CrossTreeConstraint:
    kind: str                      # requires | excludes | conditional_group_requires
    lhs: str | GroupCountPredicate
    rhs: str | GroupCountPredicate


@dataclass(frozen=True)
class FieldDecl:
    name: str
    type: str                      # scalar type name or record name
    optionality: str = MANDATORY


@dataclass(frozen=True)
class RecordDecl:
    name: str
    fields: tuple[FieldDecl, ...]


@dataclass(frozen=True)
class AssociationDecl:
    owner: str
    member: str
    optionality: str = MANDATORY


@dataclass(frozen=True)
class DataSchemaDecl:
    records: tuple[RecordDecl, ...]
    associations: tuple[AssociationDecl, ...] = ()

    def record(self, name: str) -> RecordDecl | None:
        for rec in self.records:
            if rec.name == name:
                return rec
        return None


@dataclass(frozen=True)
class DataAccessEdge:
    implementation: str
    field_path: str
    mode: str                      # read | write


@dataclass(frozen=True)
class Activity:
    id: str
    optionality: str
    implementations: tuple[str, ...]
    aggregation_codes: tuple[str, ...] = ()
    groups: tuple[FeatureGroup, ...] = ()


@dataclass(frozen=True)
class FeatureModel:
    process: str
    activities: tuple[Activity, ...]
    constraints: tuple[CrossTreeConstraint, ...] = ()
    data_schema: DataSchemaDecl = DataSchemaDecl(records=())
    access_edges: tuple[DataAccessEdge, ...] = ()
    flow: tuple[tuple[str, str], ...] = ()

    # -- derived views -------------------------------------------------

    def root(self) -> FeatureNode:
        """The three-layer tree: process -> activities -> leaves."""
        acts = []
        for act in self.activities:
            leaves = tuple(
                FeatureNode(i, IMPLEMENTATION, OPTIONAL) for i in act.implementations
            ) + tuple(
                FeatureNode(a, AGGREGATION, OPTIONAL) for a in act.aggregation_codes
            )
            acts.append(FeatureNode(act.id, ACTIVITY, act.optionality, leaves))
        return FeatureNode(self.process, PROCESS, MANDATORY, tuple(acts))

    def leaves(self) -> tuple[str, ...]:
        out: list[str] = []
        for act in self.activities:
            out.extend(act.implementations)
            out.extend(act.aggregation_codes)
        return tuple(out)

    def implementation_leaves(self) -> tuple[str, ...]:
        out: list[str] = []
        for act in self.activities:
            out.extend(act.implementations)
        return tuple(out)

    def activity_of(self, leaf: str) -> str | None:
        for act in self.activities:
            if leaf in act.implementations or leaf in act.aggregation_codes:
                return act.id
        return None

    def groups(self) -> tuple[FeatureGroup, ...]:
        out: list[FeatureGroup] = []
        for act in self.activities:
            out.extend(act.groups)
        return tuple(out)

    def group(self, group_id: str) -> FeatureGroup | None:
        for grp in self.groups():
            if grp.id == group_id:
                return grp
        return None

    # -- optional data units -------------------------------------------

    def optional_units(self) -> tuple[str, ...]:
        """Selectable optional parts of the data schema, by dotted path.

        An optional field is addressed as ``record.field``; an optional
        association is addressed by its member record name (record names
        are unique, so the path is unambiguous).
        """
        units: list[str] = []
        for assoc in self.data_schema.associations:
            if assoc.optionality == OPTIONAL:
                units.append(assoc.member)
        for rec in self.data_schema.records:
            for fld in rec.fields:
                if fld.optionality == OPTIONAL:
                    units.append(f"{rec.name}.{fld.name}")
        return tuple(units)

    def units_for_path(self, path: str) -> tuple[str, ...]:
        """Optional units a dotted access path depends on.

        Walking ``company.commercialRegisterNo`` crosses the optional field
        itself; walking ``carInformation.numberPlate`` crosses the optional
        association to carInformation. A path may cross several.
        """
        cache = self.__dict__.setdefault("_units_cache", {})
        if path in cache:
            return cache[path]
        units: list[str] = []
        parts = path.split(".")
        head = parts[0]
        for assoc in self.data_schema.associations:
            if assoc.member == head and assoc.optionality == OPTIONAL:
                units.append(head)
        rec = self.data_schema.record(head)
        current = rec
        for i, part in enumerate(parts[1:], start=1):
            if current is None:
                break
            fld = next((f for f in current.fields if f.name == part), None)
            if fld is None:
                break
            prefix = ".".join(parts[:i])
            if fld.optionality == OPTIONAL:
                units.append(f"{prefix}.{part}")
            nested = self.data_schema.record(fld.type)
            if nested is not None:
                for assoc in self.data_schema.associations:
                    if assoc.member == fld.type and assoc.optionality == OPTIONAL:
                        if fld.type not in units:
                            units.append(fld.type)
            current = nested
        result = tuple(units)
        cache[path] = result
        return result

    def path_resolves(self, path: str) -> bool:
        parts = path.split(".")
        head = parts[0]
        current = self.data_schema.record(head)
        if current is None:
            return False
        for part in parts[1:]:
            fld = next((f for f in current.fields if f.name == part), None)
            if fld is None:
                return False
            current = self.data_schema.record(fld.type)
            if current is None and part is not parts[-1]:
                return False
        return True

    # -- control-flow precedence ---------------------------------------

    def precedes(self) -> frozenset[tuple[str, str]]:
        """Strict activity precedence: transitive closure of the flow edges.

        Without explicit flow edges the document order of activities is a
        chain, which matches models whose process is a straight line.
        """
        # Frozen dataclass: cache via __dict__, validation calls this per config.
        cached = self.__dict__.get("_precedes_cache")
        if cached is not None:
            return cached
        edges = set(self.flow)
        if not edges:
            ids = [a.id for a in self.activities]
            edges = {(ids[i], ids[i + 1]) for i in range(len(ids) - 1)}
        succ: dict[str, set[str]] = {}
        for a, b in edges:
            succ.setdefault(a, set()).add(b)
        closure: set[tuple[str, str]] = set()
        for start in {a.id for a in self.activities}:
            frontier = list(succ.get(start, ()))
            seen: set[str] = set()
            while frontier:
                nxt = frontier.pop()
                if nxt in seen:
                    continue
                seen.add(nxt)
                closure.add((start, nxt))
                frontier.extend(succ.get(nxt, ()))
        result = frozenset(closure)
        self.__dict__["_precedes_cache"] = result
        return result


@dataclass(frozen=True)
class Configuration:
    """A selection of implementation/aggregation leaves and optional data paths."""

    selected: frozenset[str]

    @staticmethod
    def of(*ids: str) -> "Configuration":
        return Configuration(frozenset(ids))

    def sorted(self) -> tuple[str, ...]:
        return tuple(sorted(self.selected))


@dataclass(frozen=True)
class Violation:
    rule: str                      # stable rule id, see rules module
    subjects: tuple[str, ...]
    message: str


@dataclass
class ValidationReport:
    valid: bool
    violations: list[Violation] = field(default_factory=list)

    def rules(self) -> set[str]:
        return {v.rule for v in self.violations}

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "violations": [
                {"rule": v.rule, "subjects": list(v.subjects), "message": v.message}
                for v in self.violations
            ],
        }
