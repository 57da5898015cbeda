"""Feature artifact trees and their superimposition.

Each feature ships a folder of artifacts. Composition walks the selected
folders (base first) and merges them path by path: records merge by field
union, config by key union, plugin manifests by entry union, and anything
else must collide only with an identical copy. Conflicts name the features
they came from.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

from ..records import RecordDef, RecordField, record_from_doc

RECORD_DIR = "records"
PROCESS_DIR = "processes"
CONFIG_FILE = "config.json"
MANIFEST_FILE = "manifest.json"


class ComposeError(ValueError):
    def __init__(self, message: str, offenders: tuple[str, ...] = ()) -> None:
        self.offenders = offenders
        if offenders:
            message = f"{message} (from features: {', '.join(offenders)})"
        super().__init__(message)


@dataclass(frozen=True)
class RecordLeaf:
    path: tuple[str, ...]
    record: RecordDef
    origins: tuple[str, ...]


@dataclass(frozen=True)
class ProcessLeaf:
    path: tuple[str, ...]
    doc: dict
    origins: tuple[str, ...]

    def __eq__(self, other):
        return isinstance(other, ProcessLeaf) and self.path == other.path and self.doc == other.doc


@dataclass(frozen=True)
class ConfigLeaf:
    path: tuple[str, ...]
    values: dict
    origins: tuple[str, ...]

    def __eq__(self, other):
        return isinstance(other, ConfigLeaf) and self.values == other.values


@dataclass(frozen=True)
class ManifestLeaf:
    path: tuple[str, ...]
    plugins: tuple[dict, ...]
    aggregations: tuple[dict, ...]
    origins: tuple[str, ...]

    def __eq__(self, other):
        return (isinstance(other, ManifestLeaf)
                and self.plugins == other.plugins
                and self.aggregations == other.aggregations)


@dataclass(frozen=True)
class OpaqueLeaf:
    path: tuple[str, ...]
    data: bytes
    origins: tuple[str, ...]

    def __eq__(self, other):
        return isinstance(other, OpaqueLeaf) and self.path == other.path and self.data == other.data


Leaf = RecordLeaf | ProcessLeaf | ConfigLeaf | ManifestLeaf | OpaqueLeaf
ArtifactTree = dict  # path tuple -> Leaf


def build_artifact_tree(folder: str | Path, origin: str | None = None) -> ArtifactTree:
    """Read one feature folder into a tree of typed leaves."""
    root = Path(folder)
    if not root.is_dir():
        raise ComposeError(f"feature folder {root} does not exist")
    origin = origin or root.name
    tree: ArtifactTree = {}
    for file in sorted(p for p in root.rglob("*") if p.is_file()):
        rel = file.relative_to(root).parts
        tree[rel] = _read_leaf(file, rel, origin)
    return tree


def _read_leaf(file: Path, rel: tuple[str, ...], origin: str) -> Leaf:
    name = file.name
    if rel[0] == RECORD_DIR and name.endswith(".record.json"):
        expected = name[: -len(".record.json")]
        doc = _read_json(file)
        record = record_from_doc(doc, origin=origin)
        if record.name != expected:
            raise ComposeError(
                f"{'/'.join(rel)} declares record {record.name!r}; "
                f"the file name requires {expected!r}",
                (origin,),
            )
        return RecordLeaf(rel, record, (origin,))
    if rel[0] == PROCESS_DIR and name.endswith(".process.json"):
        expected = name[: -len(".process.json")]
        doc = _read_json(file)
        if doc.get("id") != expected:
            raise ComposeError(
                f"{'/'.join(rel)} declares process id {doc.get('id')!r}; "
                f"the file name requires {expected!r}",
                (origin,),
            )
        return ProcessLeaf(rel, doc, (origin,))
    if rel == (CONFIG_FILE,):
        doc = _read_json(file)
        if not isinstance(doc, dict):
            raise ComposeError(f"{'/'.join(rel)} must hold a JSON object", (origin,))
        return ConfigLeaf(rel, doc, (origin,))
    if rel == (MANIFEST_FILE,):
        doc = _read_json(file)
        return _manifest_leaf(rel, doc, origin)
    return OpaqueLeaf(rel, file.read_bytes(), (origin,))


def _read_json(file: Path) -> dict:
    try:
        return json.loads(file.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ComposeError(f"{file}: not valid JSON: {exc}") from exc


def _manifest_leaf(rel: tuple[str, ...], doc: dict, origin: str) -> ManifestLeaf:
    if not isinstance(doc, dict):
        raise ComposeError(f"{'/'.join(rel)} must hold a JSON object", (origin,))
    plugins = []
    for entry in doc.get("plugins", ()):
        missing = [k for k in ("plugin_id", "variation_point", "implementation_process") if k not in entry]
        if missing:
            raise ComposeError(f"plugin entry {entry} lacks {missing}", (origin,))
        plugins.append({
            "plugin_id": entry["plugin_id"],
            "variation_point": entry["variation_point"],
            "implementation_process": entry["implementation_process"],
            "label": entry.get("label", entry["plugin_id"]),
        })
    aggregations = []
    for entry in doc.get("aggregations", ()):
        missing = [k for k in ("variation_point", "policy") if k not in entry]
        if missing:
            raise ComposeError(f"aggregation entry {entry} lacks {missing}", (origin,))
        aggregations.append({
            "variation_point": entry["variation_point"],
            "policy": entry["policy"],
        })
    return ManifestLeaf(rel, tuple(plugins), tuple(aggregations), (origin,))


def superimpose(base: ArtifactTree, addition: ArtifactTree) -> ArtifactTree:
    """Merge two trees; the result is independent of merge order."""
    merged = dict(base)
    for path, leaf in addition.items():
        if path not in merged:
            merged[path] = leaf
            continue
        merged[path] = _merge_leaf(merged[path], leaf)
    return merged


def _merge_leaf(left: Leaf, right: Leaf) -> Leaf:
    where = "/".join(left.path)
    offenders = tuple(left.origins) + tuple(right.origins)
    if type(left) is not type(right):
        raise ComposeError(f"{where}: artifact kinds differ", offenders)
    if isinstance(left, RecordLeaf):
        return _merge_records(left, right, where)
    if isinstance(left, ConfigLeaf):
        return _merge_config(left, right, where)
    if isinstance(left, ManifestLeaf):
        return _merge_manifest(left, right, where)
    if isinstance(left, OpaqueLeaf):
        if left.data != right.data:
            raise ComposeError(f"{where}: files differ and cannot be merged", offenders)
        return replace(left, origins=offenders)
    # two processes with the same id cannot be merged structurally
    if isinstance(left, ProcessLeaf):
        if left.doc == right.doc:
            return replace(left, origins=offenders)
        raise ComposeError(f"{where}: process defined twice with different content", offenders)
    raise ComposeError(f"{where}: unmergeable artifact", offenders)


def _merge_records(left: RecordLeaf, right: RecordLeaf, where: str) -> RecordLeaf:
    fields: dict[str, RecordField] = {f.name: f for f in left.record.fields}
    for f in right.record.fields:
        seen = fields.get(f.name)
        if seen is None:
            fields[f.name] = f
            continue
        if seen.type != f.type or seen.required != f.required:
            raise ComposeError(
                f"{where}: field {f.name!r} declared as "
                f"{seen.type}/{'required' if seen.required else 'optional'} and "
                f"{f.type}/{'required' if f.required else 'optional'}",
                tuple(seen.origins) + tuple(f.origins),
            )
        fields[f.name] = replace(seen, origins=tuple(seen.origins) + tuple(f.origins))
    merged = RecordDef(
        name=left.record.name,
        fields=tuple(fields[n] for n in sorted(fields)),
        origins=tuple(left.record.origins) + tuple(right.record.origins),
    )
    return RecordLeaf(left.path, merged, tuple(left.origins) + tuple(right.origins))


def _merge_config(left: ConfigLeaf, right: ConfigLeaf, where: str) -> ConfigLeaf:
    values = dict(left.values)
    for key, value in right.values.items():
        if key in values and values[key] != value:
            raise ComposeError(
                f"{where}: key {key!r} set to both {values[key]!r} and {value!r}",
                tuple(left.origins) + tuple(right.origins),
            )
        values[key] = value
    return ConfigLeaf(left.path, values, tuple(left.origins) + tuple(right.origins))


def _merge_manifest(left: ManifestLeaf, right: ManifestLeaf, where: str) -> ManifestLeaf:
    plugins: dict[str, dict] = {p["plugin_id"]: p for p in left.plugins}
    for p in right.plugins:
        seen = plugins.get(p["plugin_id"])
        if seen is not None and seen != p:
            raise ComposeError(
                f"{where}: plugin {p['plugin_id']!r} declared twice with different content",
                tuple(left.origins) + tuple(right.origins),
            )
        plugins[p["plugin_id"]] = p
    aggregations: dict[str, dict] = {a["variation_point"]: a for a in left.aggregations}
    for a in right.aggregations:
        seen = aggregations.get(a["variation_point"])
        if seen is not None and seen != a:
            raise ComposeError(
                f"{where}: variation point {a['variation_point']!r} gets two different "
                f"aggregation policies ({seen['policy']!r} and {a['policy']!r})",
                tuple(left.origins) + tuple(right.origins),
            )
        aggregations[a["variation_point"]] = a
    return ManifestLeaf(
        left.path,
        tuple(plugins[k] for k in sorted(plugins)),
        tuple(aggregations[k] for k in sorted(aggregations)),
        tuple(left.origins) + tuple(right.origins),
    )
