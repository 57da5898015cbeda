"""Typed variable documents over a composed record schema.

Documents are plain dict trees keyed by record/field names. Dotted paths
address values; a path may start at any record whose placement in the
document is unique (e.g. ``company.commercialRegisterNo`` resolves through
the ``application`` root). Two reserved top-level keys, ``_results`` and
``_selections``, hold engine bookkeeping and are exempt from schema checks.

Absent optional subtrees stay absent: an optional record that was never
written does not appear as an empty object.
"""

from __future__ import annotations

import json
from typing import Any

from ..records import SCALARS, RecordDef

RESERVED_ROOTS = ("_results", "_selections")

MISSING = object()


class SchemaError(ValueError):
    pass


class DocumentError(ValueError):
    pass


class ProductSchema:
    def __init__(self, records: tuple[RecordDef, ...] | list[RecordDef]) -> None:
        self.records = {r.name: r for r in records}
        if len(self.records) != len(records):
            raise SchemaError("duplicate record names in schema")
        referenced: set[str] = set()
        for rec in records:
            for fld in rec.fields:
                if fld.type in SCALARS:
                    continue
                if fld.type not in self.records:
                    raise SchemaError(f"field {rec.name}.{fld.name} has unknown type {fld.type!r}")
                referenced.add(fld.type)
        self.roots = tuple(sorted(set(self.records) - referenced))
        # unique placement chains for path resolution rooted at record names
        self._placements: dict[str, list[tuple[str, ...]]] = {name: [] for name in self.records}
        for root in self.roots:
            self._walk_placements(root, (root,), set())
        orphaned = sorted(n for n, chains in self._placements.items() if not chains)
        if orphaned:
            # every non-referenced record is a root, so an unplaced record
            # can only sit on a reference cycle
            raise SchemaError(f"record nesting cycle through {orphaned}")

    def _walk_placements(self, record: str, chain: tuple[str, ...], seen: set[str]) -> None:
        if record in seen:
            raise SchemaError(f"record nesting cycle through {record!r}")
        self._placements[record].append(chain)
        for fld in self.records[record].fields:
            if fld.type in self.records:
                self._walk_placements(fld.type, chain + (fld.name,), seen | {record})

    # -- path resolution -------------------------------------------------

    def resolve(self, path: str) -> tuple[str, ...]:
        """Expand a dotted path to its concrete key chain from a root.

        The first segment may name a root or any uniquely placed record;
        the remaining segments walk fields.
        """
        parts = path.split(".")
        head = parts[0]
        if head in RESERVED_ROOTS:
            return tuple(parts)
        placements = self._placements.get(head)
        if not placements:
            raise SchemaError(f"path {path!r} does not start at a known record")
        if len(placements) > 1:
            raise SchemaError(f"record {head!r} is reachable via multiple placements; path {path!r} is ambiguous")
        chain = list(placements[0])
        record = self.records[head]
        for i, part in enumerate(parts[1:]):
            fld = record.field_named(part)
            if fld is None:
                raise SchemaError(f"record {record.name!r} has no field {part!r} (path {path!r})")
            chain.append(part)
            if fld.type in SCALARS:
                if i != len(parts) - 2:
                    raise SchemaError(f"path {path!r} descends into scalar field {part!r}")
                return tuple(chain)
            record = self.records[fld.type]
        return tuple(chain)

    def terminal_type(self, path: str) -> str:
        """Scalar type name or record name the path points at."""
        parts = path.split(".")
        record = self.records.get(parts[0])
        if record is None:
            raise SchemaError(f"path {path!r} does not start at a known record")
        if len(parts) == 1:
            return record.name
        for i, part in enumerate(parts[1:]):
            fld = record.field_named(part)
            if fld is None:
                raise SchemaError(f"record {record.name!r} has no field {part!r}")
            if fld.type in SCALARS:
                if i != len(parts) - 2:
                    raise SchemaError(f"path {path!r} descends into scalar field {part!r}")
                return fld.type
            record = self.records[fld.type]
        return record.name

    def optional_paths(self) -> frozenset[str]:
        """Optional fields as record-rooted dotted paths (record fields with
        required=false), plus record-typed optional members by record name."""
        out: set[str] = set()
        for rec in self.records.values():
            for fld in rec.fields:
                if fld.required:
                    continue
                if fld.type in SCALARS:
                    out.add(f"{rec.name}.{fld.name}")
                else:
                    out.add(fld.type)
        return frozenset(out)

    # -- validation --------------------------------------------------------

    def check_value(self, path: str, value: Any) -> None:
        kind = self.terminal_type(path)
        if kind in SCALARS:
            if not _scalar_ok(kind, value):
                raise DocumentError(f"value for {path!r} must be {kind}, got {type(value).__name__}")
        else:
            if not isinstance(value, dict):
                raise DocumentError(f"value for {path!r} must be an object of record {kind!r}")
            self._check_instance(kind, value, path)

    def _check_instance(self, record_name: str, value: dict, where: str) -> None:
        record = self.records[record_name]
        known = {f.name for f in record.fields}
        unknown = sorted(set(value) - known)
        if unknown:
            raise DocumentError(f"{where}: unknown fields {unknown} for record {record_name!r}")
        for fld in record.fields:
            if fld.name not in value:
                if fld.required and fld.type in SCALARS:
                    raise DocumentError(f"{where}: required field {record_name}.{fld.name} is missing")
                if fld.required and fld.type not in SCALARS:
                    raise DocumentError(f"{where}: required member {record_name}.{fld.name} is missing")
                continue
            sub = value[fld.name]
            if fld.type in SCALARS:
                if not _scalar_ok(fld.type, sub):
                    raise DocumentError(
                        f"{where}.{fld.name}: expected {fld.type}, got {type(sub).__name__}"
                    )
            else:
                if not isinstance(sub, dict):
                    raise DocumentError(f"{where}.{fld.name}: expected object of record {fld.type!r}")
                self._check_instance(fld.type, sub, f"{where}.{fld.name}")

    def check_document(self, doc: dict, required_roots: tuple[str, ...] = ()) -> None:
        if not isinstance(doc, dict):
            raise DocumentError("document must be an object")
        for key, value in doc.items():
            if key in RESERVED_ROOTS:
                continue
            if key not in self.roots:
                raise DocumentError(f"unknown document root {key!r} (roots: {list(self.roots)})")
            if not isinstance(value, dict):
                raise DocumentError(f"root {key!r} must be an object")
            self._check_instance(key, value, key)
        for root in required_roots:
            if root not in doc:
                raise DocumentError(f"required document root {root!r} is missing")


def _scalar_ok(kind: str, value: Any) -> bool:
    if kind == "string":
        return isinstance(value, str)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return False


# -- document access -------------------------------------------------------


def get_path(doc: dict, chain: tuple[str, ...]) -> Any:
    current: Any = doc
    for part in chain:
        if not isinstance(current, dict) or part not in current:
            return MISSING
        current = current[part]
    return current


def apply_write(doc: dict, chain: tuple[str, ...], value: Any) -> None:
    current = doc
    for part in chain[:-1]:
        nxt = current.get(part)
        if nxt is None:
            nxt = {}
            current[part] = nxt
        elif not isinstance(nxt, dict):
            raise DocumentError(f"cannot descend through scalar at {part!r}")
        current = nxt
    current[chain[-1]] = value


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"))
