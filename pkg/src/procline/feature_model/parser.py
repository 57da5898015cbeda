"""Feature-model document parsing and canonical emission.

The on-disk format is a single JSON object:

    {
      "process": "ParkingPermit",
      "activities": [
        {"id": "...", "optionality": "mandatory|optional",
         "implementations": [...], "aggregation_codes": [...],
         "groups": [{"id": "...", "role": "...", "members": [...],
                     "cardinality": {"min": 0, "max": 2}}]}
      ],
      "constraints": [...],
      "data_schema": {"records": [...], "associations": [...]},
      "access_edges": [...],
      "flow": [["ActA", "ActB"], ...]          # optional; precedence edges
    }

Parsing is strict: the first offending element is reported with its path
into the document. ``emit_feature_model`` produces a canonically ordered
document such that parse(emit(m)) == m.
"""

from __future__ import annotations

import json
from typing import Any

from .model import (
    ACTIVITY,
    AGGREGATION_GROUP,
    COUNT_OPS,
    IDENT_RE,
    IMPLEMENTATION_GROUP,
    MANDATORY,
    OPTIONAL,
    Activity,
    AssociationDecl,
    Cardinality,
    CrossTreeConstraint,
    DataAccessEdge,
    DataSchemaDecl,
    FeatureGroup,
    FeatureModel,
    FieldDecl,
    GroupCountPredicate,
    ModelError,
    RecordDecl,
)

SCALAR_TYPES = {"string", "integer", "number", "boolean"}


def _expect(cond: bool, message: str, where: str) -> None:
    if not cond:
        raise ModelError(message, where)


def _ident(value: Any, where: str) -> str:
    _expect(isinstance(value, str), "identifier must be a string", where)
    _expect(bool(IDENT_RE.match(value)), f"invalid identifier {value!r}", where)
    return value


def _optionality(value: Any, where: str) -> str:
    _expect(value in (MANDATORY, OPTIONAL), f"optionality must be 'mandatory' or 'optional', got {value!r}", where)
    return value


def parse_feature_model(doc: dict | str | bytes) -> FeatureModel:
    """Parse a feature-model document (dict or JSON text) into a FeatureModel.

    Raises ModelError on the first structural problem, including dangling
    identifier references and layer violations.
    """
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    _expect(isinstance(doc, dict), "document must be a JSON object", "$")
    unknown = set(doc) - {"process", "activities", "constraints", "data_schema", "access_edges", "flow"}
    _expect(not unknown, f"unknown top-level keys: {sorted(unknown)}", "$")

    process = _ident(doc.get("process"), "process")

    raw_acts = doc.get("activities")
    _expect(isinstance(raw_acts, list) and raw_acts, "activities must be a non-empty list", "activities")

    seen: set[str] = {process}
    activities: list[Activity] = []
    for ai, raw in enumerate(raw_acts):
        where = f"activities[{ai}]"
        _expect(isinstance(raw, dict), "activity must be an object", where)
        act_id = _ident(raw.get("id"), f"{where}.id")
        _expect(act_id not in seen, f"duplicate identifier {act_id!r}", f"{where}.id")
        seen.add(act_id)
        optionality = _optionality(raw.get("optionality", MANDATORY), f"{where}.optionality")

        impls: list[str] = []
        for ii, leaf in enumerate(raw.get("implementations", [])):
            leaf_id = _ident(leaf, f"{where}.implementations[{ii}]")
            _expect(leaf_id not in seen, f"duplicate identifier {leaf_id!r}", f"{where}.implementations[{ii}]")
            seen.add(leaf_id)
            impls.append(leaf_id)
        aggs: list[str] = []
        for ci, leaf in enumerate(raw.get("aggregation_codes", [])):
            leaf_id = _ident(leaf, f"{where}.aggregation_codes[{ci}]")
            _expect(leaf_id not in seen, f"duplicate identifier {leaf_id!r}", f"{where}.aggregation_codes[{ci}]")
            seen.add(leaf_id)
            aggs.append(leaf_id)

        groups: list[FeatureGroup] = []
        for gi, rawg in enumerate(raw.get("groups", [])):
            gwhere = f"{where}.groups[{gi}]"
            _expect(isinstance(rawg, dict), "group must be an object", gwhere)
            gid = _ident(rawg.get("id"), f"{gwhere}.id")
            _expect(gid not in seen, f"duplicate identifier {gid!r}", f"{gwhere}.id")
            seen.add(gid)
            role = rawg.get("role")
            _expect(role in (IMPLEMENTATION_GROUP, AGGREGATION_GROUP), f"unknown group role {role!r}", f"{gwhere}.role")
            members = rawg.get("members")
            _expect(isinstance(members, list) and members, "group members must be a non-empty list", f"{gwhere}.members")
            pool = impls if role == IMPLEMENTATION_GROUP else aggs
            for mi, member in enumerate(members):
                _expect(
                    member in pool,
                    f"group member {member!r} is not a {role.split('_')[0]} leaf of activity {act_id!r}",
                    f"{gwhere}.members[{mi}]",
                )
            _expect(len(set(members)) == len(members), "duplicate group members", f"{gwhere}.members")
            card = rawg.get("cardinality")
            _expect(isinstance(card, dict), "cardinality must be an object {min,max}", f"{gwhere}.cardinality")
            cmin, cmax = card.get("min"), card.get("max")
            _expect(isinstance(cmin, int) and isinstance(cmax, int), "cardinality min/max must be integers", f"{gwhere}.cardinality")
            _expect(0 <= cmin <= cmax <= len(members), f"cardinality {cmin}-{cmax} out of range for {len(members)} members", f"{gwhere}.cardinality")
            groups.append(FeatureGroup(gid, act_id, role, tuple(sorted(members)), Cardinality(cmin, cmax)))

        activities.append(Activity(act_id, optionality, tuple(impls), tuple(aggs), tuple(groups)))

    schema = _parse_schema(doc.get("data_schema", {"records": []}))
    model = FeatureModel(process, tuple(activities), (), schema, (), ())

    # Identifier universe for constraint / edge reference checks.
    known_features = set(seen)
    known_units = set(model.optional_units())

    constraints: list[CrossTreeConstraint] = []
    for ci, raw in enumerate(doc.get("constraints", [])):
        where = f"constraints[{ci}]"
        _expect(isinstance(raw, dict), "constraint must be an object", where)
        kind = raw.get("kind")
        _expect(kind in ("requires", "excludes", "conditional_group_requires"), f"unknown constraint kind {kind!r}", f"{where}.kind")
        lhs = _parse_side(raw.get("lhs"), model, known_features, known_units, f"{where}.lhs")
        rhs = _parse_side(raw.get("rhs"), model, known_features, known_units, f"{where}.rhs")
        if kind == "conditional_group_requires":
            _expect(isinstance(lhs, GroupCountPredicate) and isinstance(rhs, GroupCountPredicate),
                    "conditional_group_requires takes group-count predicates on both sides", where)
        constraints.append(CrossTreeConstraint(kind, lhs, rhs))

    edges: list[DataAccessEdge] = []
    for ei, raw in enumerate(doc.get("access_edges", [])):
        where = f"access_edges[{ei}]"
        _expect(isinstance(raw, dict), "access edge must be an object", where)
        impl = raw.get("implementation")
        _expect(impl in set(model.implementation_leaves()), f"unknown implementation {impl!r}", f"{where}.implementation")
        path = raw.get("path")
        _expect(isinstance(path, str) and bool(path), "path must be a non-empty string", f"{where}.path")
        _expect(model.path_resolves(path), f"path {path!r} does not resolve in the data schema", f"{where}.path")
        mode = raw.get("mode")
        _expect(mode in ("read", "write"), f"mode must be 'read' or 'write', got {mode!r}", f"{where}.mode")
        edges.append(DataAccessEdge(impl, path, mode))

    flow: list[tuple[str, str]] = []
    act_ids = {a.id for a in activities}
    for fi, raw in enumerate(doc.get("flow", [])):
        where = f"flow[{fi}]"
        _expect(isinstance(raw, list) and len(raw) == 2, "flow edge must be a [from, to] pair", where)
        src, dst = raw
        _expect(src in act_ids, f"unknown activity {src!r}", f"{where}[0]")
        _expect(dst in act_ids, f"unknown activity {dst!r}", f"{where}[1]")
        _expect(src != dst, "flow edge endpoints must differ", where)
        flow.append((src, dst))

    model = FeatureModel(
        process,
        tuple(activities),
        tuple(constraints),
        schema,
        tuple(edges),
        tuple(flow),
    )
    closure = model.precedes()
    for a, b in closure:
        _expect((b, a) not in closure, f"flow contains a cycle through {a!r} and {b!r}", "flow")
    return model


def _parse_side(raw: Any, model: FeatureModel, features: set[str], units: set[str], where: str):
    if isinstance(raw, str):
        _expect(raw in features or raw in units, f"unknown identifier {raw!r}", where)
        return raw
    _expect(isinstance(raw, dict), "constraint side must be an identifier or a group-count predicate", where)
    group = raw.get("group")
    _expect(model.group(group) is not None, f"unknown group {group!r}", f"{where}.group")
    op = raw.get("op")
    _expect(op in COUNT_OPS, f"unknown count operator {op!r}", f"{where}.op")
    count = raw.get("count")
    _expect(isinstance(count, int) and count >= 0, "count must be a non-negative integer", f"{where}.count")
    return GroupCountPredicate(group, op, count)


def _parse_schema(raw: Any) -> DataSchemaDecl:
    _expect(isinstance(raw, dict), "data_schema must be an object", "data_schema")
    records: list[RecordDecl] = []
    names: set[str] = set()
    for ri, rawr in enumerate(raw.get("records", [])):
        where = f"data_schema.records[{ri}]"
        _expect(isinstance(rawr, dict), "record must be an object", where)
        name = _ident(rawr.get("name"), f"{where}.name")
        _expect("." not in name, "record names must not contain dots", f"{where}.name")
        _expect(name not in names, f"duplicate record {name!r}", f"{where}.name")
        names.add(name)
        fields: list[FieldDecl] = []
        fnames: set[str] = set()
        for fi, rawf in enumerate(rawr.get("fields", [])):
            fwhere = f"{where}.fields[{fi}]"
            _expect(isinstance(rawf, dict), "field must be an object", fwhere)
            fname = _ident(rawf.get("name"), f"{fwhere}.name")
            _expect("." not in fname, "field names must not contain dots", f"{fwhere}.name")
            _expect(fname not in fnames, f"duplicate field {fname!r}", f"{fwhere}.name")
            fnames.add(fname)
            ftype = rawf.get("type")
            _expect(isinstance(ftype, str) and bool(ftype), "field type must be a string", f"{fwhere}.type")
            fopt = _optionality(rawf.get("optionality", MANDATORY), f"{fwhere}.optionality")
            fields.append(FieldDecl(fname, ftype, fopt))
        records.append(RecordDecl(name, tuple(fields)))

    for rec in records:
        for fld in rec.fields:
            if fld.type not in SCALAR_TYPES and fld.type not in names:
                raise ModelError(
                    f"field type {fld.type!r} is neither a scalar type nor a record",
                    f"data_schema.records[{rec.name}].fields[{fld.name}]",
                )

    associations: list[AssociationDecl] = []
    for ai, rawa in enumerate(raw.get("associations", [])):
        where = f"data_schema.associations[{ai}]"
        _expect(isinstance(rawa, dict), "association must be an object", where)
        owner = rawa.get("owner")
        member = rawa.get("member")
        _expect(owner in names, f"unknown owner record {owner!r}", f"{where}.owner")
        _expect(member in names, f"unknown member record {member!r}", f"{where}.member")
        opt = _optionality(rawa.get("optionality", MANDATORY), f"{where}.optionality")
        associations.append(AssociationDecl(owner, member, opt))

    return DataSchemaDecl(tuple(records), tuple(associations))


# -- emission -----------------------------------------------------------


def emit_feature_model(model: FeatureModel) -> dict:
    """Canonical document for a model; parse(emit(m)) == m."""
    doc: dict[str, Any] = {
        "process": model.process,
        "activities": [
            {
                "id": act.id,
                "optionality": act.optionality,
                "implementations": list(act.implementations),
                "aggregation_codes": list(act.aggregation_codes),
                "groups": [
                    {
                        "id": grp.id,
                        "role": grp.role,
                        "members": list(grp.members),
                        "cardinality": {"min": grp.cardinality.min, "max": grp.cardinality.max},
                    }
                    for grp in act.groups
                ],
            }
            for act in model.activities
        ],
        "constraints": [
            {"kind": c.kind, "lhs": _emit_side(c.lhs), "rhs": _emit_side(c.rhs)}
            for c in model.constraints
        ],
        "data_schema": {
            "records": [
                {
                    "name": rec.name,
                    "fields": [
                        {"name": f.name, "type": f.type, "optionality": f.optionality}
                        for f in rec.fields
                    ],
                }
                for rec in model.data_schema.records
            ],
            "associations": [
                {"owner": a.owner, "member": a.member, "optionality": a.optionality}
                for a in model.data_schema.associations
            ],
        },
        "access_edges": [
            {"implementation": e.implementation, "path": e.field_path, "mode": e.mode}
            for e in model.access_edges
        ],
    }
    if model.flow:
        doc["flow"] = [list(edge) for edge in model.flow]
    return doc


def _emit_side(side):
    if isinstance(side, GroupCountPredicate):
        return {"group": side.group, "op": side.op, "count": side.count}
    return side


def dumps_feature_model(model: FeatureModel) -> str:
    return json.dumps(emit_feature_model(model), indent=2, sort_keys=True) + "\n"
