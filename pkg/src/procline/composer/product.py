"""Deriving a product from a configuration: compose, emit, load.

A product bundle is the fully merged artifact set for one valid
configuration. Derivation composes nothing unless the configuration
validates, so an invalid selection can never leave a partial product
behind. Emission is deterministic byte-for-byte; loading round-trips it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..binding import PluginDescriptor
from ..engine.aggregate import POLICIES
from ..engine.definition import ProcessDefinition, ProcessError, parse_process
from ..engine.schema import ProductSchema, SchemaError
from ..feature_model.model import Configuration, FeatureModel
from ..feature_model.rules import validate_configuration
from ..records import RecordDef, record_from_doc, schema_from_doc, schema_to_doc
from .tree import (
    CONFIG_FILE,
    MANIFEST_FILE,
    PROCESS_DIR,
    RECORD_DIR,
    ArtifactTree,
    ComposeError,
    ConfigLeaf,
    ManifestLeaf,
    OpaqueLeaf,
    ProcessLeaf,
    RecordLeaf,
    build_artifact_tree,
    superimpose,
)

BASE_FOLDER = "base"

SCHEMA_FILE = "schema.json"
PLUGINS_FILE = "plugins.json"
AGGREGATION_FILE = "aggregation.json"
CONFIGURATION_FILE = "configuration.json"


class ProductError(ValueError):
    pass


class InvalidConfiguration(ComposeError):
    def __init__(self, report) -> None:
        self.report = report
        lines = "; ".join(f"{v.rule}: {v.message}" for v in report.violations)
        super().__init__(f"configuration is not valid: {lines}")


@dataclass(frozen=True)
class ProductBundle:
    configuration: tuple[str, ...]
    records: tuple[RecordDef, ...]
    processes: tuple[ProcessDefinition, ...]
    plugins: tuple[PluginDescriptor, ...]
    aggregation_selection: dict
    config: dict
    opaque: dict
    composed_tree: ArtifactTree = field(compare=False, hash=False, default_factory=dict)

    def process(self, process_id: str) -> ProcessDefinition:
        for p in self.processes:
            if p.id == process_id:
                return p
        raise KeyError(process_id)

    def schema(self) -> ProductSchema:
        return ProductSchema(self.records)


def compose_product(
    model: FeatureModel,
    configuration: Configuration,
    features_root: str | Path,
) -> ProductBundle:
    report = validate_configuration(model, configuration)
    if not report.valid:
        raise InvalidConfiguration(report)

    root = Path(features_root)
    selected_leaves = sorted(
        f for f in configuration.selected if f in set(model.leaves())
    )
    folders = [BASE_FOLDER] + selected_leaves
    tree: ArtifactTree = {}
    for folder in folders:
        tree = superimpose(tree, build_artifact_tree(root / folder, origin=folder))
    return bundle_from_tree(tree, tuple(sorted(configuration.selected)))


def bundle_from_tree(tree: ArtifactTree, configuration: tuple[str, ...]) -> ProductBundle:
    records: list[RecordDef] = []
    processes: list[ProcessDefinition] = []
    plugins: list[PluginDescriptor] = []
    aggregation_selection: dict[str, str] = {}
    config: dict = {}
    opaque: dict[tuple[str, ...], bytes] = {}

    for path in sorted(tree):
        leaf = tree[path]
        if isinstance(leaf, RecordLeaf):
            records.append(leaf.record)
        elif isinstance(leaf, ProcessLeaf):
            try:
                processes.append(parse_process(leaf.doc))
            except ProcessError as exc:
                raise ComposeError(f"{'/'.join(path)}: {exc}", leaf.origins) from exc
        elif isinstance(leaf, ManifestLeaf):
            for entry in leaf.plugins:
                plugins.append(PluginDescriptor(
                    plugin_id=entry["plugin_id"],
                    variation_point=entry["variation_point"],
                    implementation_process=entry["implementation_process"],
                    label=entry["label"],
                ))
            for entry in leaf.aggregations:
                if entry["policy"] not in POLICIES:
                    raise ComposeError(
                        f"unknown aggregation policy {entry['policy']!r} "
                        f"for {entry['variation_point']!r}",
                        leaf.origins,
                    )
                aggregation_selection[entry["variation_point"]] = entry["policy"]
        elif isinstance(leaf, ConfigLeaf):
            config.update(leaf.values)
        elif isinstance(leaf, OpaqueLeaf):
            opaque[path] = leaf.data

    records.sort(key=lambda r: r.name)
    seen = set()
    for rec in records:
        if rec.name in seen:
            raise ComposeError(f"record {rec.name!r} composed twice", rec.origins)
        seen.add(rec.name)
    processes.sort(key=lambda p: p.id)
    by_id = {p.id: p for p in processes}
    if len(by_id) != len(processes):
        dupes = sorted({p.id for p in processes if sum(q.id == p.id for q in processes) > 1})
        raise ComposeError(f"duplicate process ids after composition: {dupes}")
    plugins.sort(key=lambda p: p.plugin_id)
    for desc in plugins:
        if desc.implementation_process not in by_id:
            raise ComposeError(
                f"plugin {desc.plugin_id!r} names process {desc.implementation_process!r}, "
                f"which is not part of this product"
            )

    try:
        ProductSchema(records)
    except SchemaError as exc:
        raise ComposeError(f"composed records do not form a usable schema: {exc}") from exc

    return ProductBundle(
        configuration=configuration,
        records=tuple(records),
        processes=tuple(processes),
        plugins=tuple(plugins),
        aggregation_selection=aggregation_selection,
        config=config,
        opaque=opaque,
        composed_tree=tree,
    )


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def emit_product(bundle: ProductBundle, outdir: str | Path) -> Path:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / SCHEMA_FILE).write_text(_dump(schema_to_doc(bundle.records)), "utf-8")
    proc_dir = out / PROCESS_DIR
    proc_dir.mkdir(exist_ok=True)
    for proc in bundle.processes:
        (proc_dir / f"{proc.id}.process.json").write_text(_dump(proc.to_doc()), "utf-8")
    (out / PLUGINS_FILE).write_text(
        _dump({"plugins": [p.to_dict() for p in bundle.plugins]}), "utf-8")
    (out / AGGREGATION_FILE).write_text(
        _dump({"aggregation_selection": bundle.aggregation_selection}), "utf-8")
    (out / CONFIG_FILE).write_text(_dump(bundle.config), "utf-8")
    (out / CONFIGURATION_FILE).write_text(
        _dump({"selected": list(bundle.configuration)}), "utf-8")
    for path, data in sorted(bundle.opaque.items()):
        target = out.joinpath(*path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(data)
    return out


@dataclass(frozen=True)
class LoadedProduct:
    root: Path
    configuration: tuple[str, ...]
    schema: ProductSchema
    records: tuple[RecordDef, ...]
    definitions: dict
    plugins: tuple[PluginDescriptor, ...]
    aggregation_selection: dict
    config: dict


def _load_json(path: Path) -> dict:
    if not path.is_file():
        raise ProductError(f"{path}: missing product file")
    try:
        doc = json.loads(path.read_text("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ProductError(f"{path}: corrupt product file: {exc}") from exc
    if not isinstance(doc, dict):
        raise ProductError(f"{path}: expected a JSON object")
    return doc


def load_product(product_dir: str | Path) -> LoadedProduct:
    root = Path(product_dir)
    if not root.is_dir():
        raise ProductError(f"{root}: product directory does not exist")

    schema_doc = _load_json(root / SCHEMA_FILE)
    try:
        records = schema_from_doc(schema_doc)
        schema = ProductSchema(records)
    except (SchemaError, KeyError, TypeError) as exc:
        raise ProductError(f"{root / SCHEMA_FILE}: corrupt product file: {exc}") from exc

    definitions = {}
    proc_dir = root / PROCESS_DIR
    if proc_dir.is_dir():
        for file in sorted(proc_dir.glob("*.process.json")):
            try:
                proc = parse_process(json.loads(file.read_text("utf-8")))
            except (json.JSONDecodeError, ProcessError) as exc:
                raise ProductError(f"{file}: corrupt product file: {exc}") from exc
            if proc.id != file.name[: -len(".process.json")]:
                raise ProductError(f"{file}: process id {proc.id!r} does not match file name")
            definitions[proc.id] = proc

    plugins_doc = _load_json(root / PLUGINS_FILE)
    plugins = []
    for entry in plugins_doc.get("plugins", ()):
        try:
            plugins.append(PluginDescriptor(
                plugin_id=entry["plugin_id"],
                variation_point=entry["variation_point"],
                implementation_process=entry["implementation_process"],
                label=entry.get("label", entry["plugin_id"]),
            ))
        except (KeyError, TypeError) as exc:
            raise ProductError(f"{root / PLUGINS_FILE}: corrupt product file: {exc}") from exc

    agg_doc = _load_json(root / AGGREGATION_FILE)
    aggregation_selection = agg_doc.get("aggregation_selection", {})
    if not isinstance(aggregation_selection, dict):
        raise ProductError(f"{root / AGGREGATION_FILE}: aggregation_selection must be an object")
    for vp, policy in aggregation_selection.items():
        if policy not in POLICIES:
            raise ProductError(
                f"{root / AGGREGATION_FILE}: unknown aggregation policy {policy!r} for {vp!r}")

    config = _load_json(root / CONFIG_FILE) if (root / CONFIG_FILE).is_file() else {}

    configuration: tuple[str, ...] = ()
    conf_path = root / CONFIGURATION_FILE
    if conf_path.is_file():
        configuration = tuple(_load_json(conf_path).get("selected", ()))

    return LoadedProduct(
        root=root,
        configuration=configuration,
        schema=schema,
        records=records,
        definitions=definitions,
        plugins=tuple(plugins),
        aggregation_selection=aggregation_selection,
        config=config,
    )
