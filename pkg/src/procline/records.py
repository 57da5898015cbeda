"""Record definitions shared by the composer and the engine.

A record is a named set of typed fields. A field's type is either a scalar
(string, integer, number, boolean) or the name of another record, which
nests that record. Records referenced by no field are document roots.
"""

from __future__ import annotations

from dataclasses import dataclass, field

SCALARS = {"string", "integer", "number", "boolean"}


@dataclass(frozen=True)
class RecordField:
    name: str
    type: str
    required: bool = True
    origins: tuple[str, ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class RecordDef:
    name: str
    fields: tuple[RecordField, ...]
    origins: tuple[str, ...] = field(default=(), compare=False)

    def field_named(self, name: str) -> RecordField | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None


def schema_to_doc(records: list[RecordDef] | tuple[RecordDef, ...]) -> dict:
    return {
        "records": [
            {
                "name": rec.name,
                "fields": [
                    {"name": f.name, "type": f.type, "required": f.required}
                    for f in sorted(rec.fields, key=lambda f: f.name)
                ],
            }
            for rec in sorted(records, key=lambda r: r.name)
        ]
    }


def record_from_doc(doc: dict, origin: str = "") -> RecordDef:
    """Parse one record document: {"name": ..., "fields": [...]}."""
    if not isinstance(doc, dict) or not isinstance(doc.get("name"), str):
        raise ValueError(f"record document needs a string 'name': {doc!r}")
    origins = (origin,) if origin else ()
    fields = []
    seen: set[str] = set()
    for raw in doc.get("fields", []):
        fname, ftype = raw.get("name"), raw.get("type")
        if not isinstance(fname, str) or not isinstance(ftype, str):
            raise ValueError(f"record {doc['name']!r}: field needs string 'name' and 'type': {raw!r}")
        if "." in fname:
            raise ValueError(f"record {doc['name']!r}: field name {fname!r} may not contain dots")
        if fname in seen:
            raise ValueError(f"record {doc['name']!r}: duplicate field {fname!r}")
        seen.add(fname)
        fields.append(RecordField(fname, ftype, bool(raw.get("required", True)), origins))
    return RecordDef(doc["name"], tuple(fields), origins)


def schema_from_doc(doc: dict) -> tuple[RecordDef, ...]:
    records = []
    for raw in doc.get("records", []):
        fields = tuple(
            RecordField(f["name"], f["type"], bool(f.get("required", True)))
            for f in raw.get("fields", [])
        )
        records.append(RecordDef(raw["name"], fields))
    return tuple(sorted(records, key=lambda r: r.name))
