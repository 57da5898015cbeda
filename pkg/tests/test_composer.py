"""Feature folder composition: superimposition, conflicts, emit/load."""

import itertools
import json

import pytest

from procline.composer.product import (
    InvalidConfiguration,
    ProductError,
    bundle_from_tree,
    compose_product,
    emit_product,
    load_product,
)
from procline.composer.tree import (
    ComposeError,
    ConfigLeaf,
    OpaqueLeaf,
    build_artifact_tree,
    superimpose,
)
from procline.feature_model import Configuration, parse_feature_model


def write_feature(root, name, files):
    folder = root / name
    folder.mkdir(parents=True, exist_ok=True)
    for rel, content in files.items():
        target = folder / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(content, bytes):
            target.write_bytes(content)
        else:
            target.write_text(json.dumps(content, indent=1))
    return folder


def record_doc(name, *fields):
    return {"name": name, "fields": [
        {"name": n, "type": t, "required": req} for n, t, req in fields]}


FLOW = {
    "id": "flow", "kind": "core", "start_inputs": ["app"],
    "nodes": [
        {"id": "s", "type": "start_event"},
        {"id": "fill", "type": "user_task", "form_ref": "f", "outputs": ["app.kind"]},
        {"id": "e", "type": "end_event"},
    ],
    "edges": [{"from": "s", "to": "fill"}, {"from": "fill", "to": "e"}],
}


@pytest.fixture
def features(tmp_path):
    write_feature(tmp_path, "base", {
        "records/app.record.json": record_doc("app", ("kind", "string", True)),
        "processes/flow.process.json": FLOW,
        "config.json": {"core": "flow"},
        "notes.txt": b"shared\n",
    })
    write_feature(tmp_path, "x", {
        "records/app.record.json": record_doc("app", ("extra", "string", False)),
        "config.json": {"feature.x": True},
        "notes.txt": b"shared\n",
    })
    write_feature(tmp_path, "y", {
        "records/app.record.json": record_doc("app", ("other", "integer", False)),
        "config.json": {"feature.y": True},
        "manifest.json": {
            "plugins": [{"plugin_id": "p.y", "variation_point": "vp",
                         "implementation_process": "impl-y"}],
            "aggregations": [{"variation_point": "vp", "policy": "unanimous"}],
        },
        "processes/impl-y.process.json": {
            "id": "impl-y", "kind": "implementation",
            "nodes": [
                {"id": "s", "type": "start_event"},
                {"id": "t", "type": "user_task", "form_ref": "yf", "outputs": []},
                {"id": "e", "type": "end_event"},
            ],
            "edges": [{"from": "s", "to": "t"}, {"from": "t", "to": "e"}],
        },
    })
    return tmp_path


def tree_for(features, name):
    return build_artifact_tree(features / name, origin=name)


class TestTreeReading:
    def test_missing_folder(self, tmp_path):
        with pytest.raises(ComposeError, match="does not exist"):
            build_artifact_tree(tmp_path / "nope")

    def test_record_name_must_match_file(self, tmp_path):
        write_feature(tmp_path, "f", {
            "records/app.record.json": record_doc("application", ("k", "string", True))})
        with pytest.raises(ComposeError, match="requires 'app'"):
            build_artifact_tree(tmp_path / "f")

    def test_process_id_must_match_file(self, tmp_path):
        write_feature(tmp_path, "f", {"processes/flow.process.json": FLOW | {"id": "x"}})
        with pytest.raises(ComposeError, match="requires 'flow'"):
            build_artifact_tree(tmp_path / "f")

    def test_invalid_json_named(self, tmp_path):
        folder = write_feature(tmp_path, "f", {})
        (folder / "config.json").write_text("{nope")
        with pytest.raises(ComposeError, match="not valid JSON"):
            build_artifact_tree(folder)

    def test_manifest_entries_validated(self, tmp_path):
        write_feature(tmp_path, "f", {
            "manifest.json": {"plugins": [{"plugin_id": "p"}]}})
        with pytest.raises(ComposeError, match="lacks"):
            build_artifact_tree(tmp_path / "f")


class TestSuperimpose:
    def test_record_fields_union_sorted(self, features):
        merged = superimpose(tree_for(features, "base"), tree_for(features, "x"))
        rec = merged[("records", "app.record.json")].record
        assert [f.name for f in rec.fields] == ["extra", "kind"]
        assert rec.field_named("extra").required is False

    def test_merge_order_independent(self, features):
        trees = [tree_for(features, n) for n in ("base", "x", "y")]
        bundles = []
        for order in itertools.permutations(trees):
            tree = {}
            for t in order:
                tree = superimpose(tree, t)
            bundles.append(bundle_from_tree(tree, ("x", "y")))
        assert all(b == bundles[0] for b in bundles)

    def test_field_conflict_names_features(self, features):
        write_feature(features, "clash", {
            "records/app.record.json": record_doc("app", ("kind", "integer", True))})
        with pytest.raises(ComposeError) as err:
            superimpose(tree_for(features, "base"), tree_for(features, "clash"))
        assert "kind" in str(err.value)
        assert set(err.value.offenders) >= {"base", "clash"}

    def test_config_value_conflict(self, features):
        write_feature(features, "clash", {"config.json": {"core": "other"}})
        with pytest.raises(ComposeError, match="'core'"):
            superimpose(tree_for(features, "base"), tree_for(features, "clash"))

    def test_config_same_value_merges(self):
        a = {("config.json",): ConfigLeaf(("config.json",), {"k": 1}, ("a",))}
        b = {("config.json",): ConfigLeaf(("config.json",), {"k": 1, "m": 2}, ("b",))}
        merged = superimpose(a, b)
        assert merged[("config.json",)].values == {"k": 1, "m": 2}

    def test_manifest_plugin_union_and_duplicate_check(self, features):
        write_feature(features, "z", {
            "manifest.json": {"plugins": [
                {"plugin_id": "p.z", "variation_point": "vp",
                 "implementation_process": "impl-y"}]},
        })
        merged = superimpose(tree_for(features, "y"), tree_for(features, "z"))
        ids = [p["plugin_id"] for p in merged[("manifest.json",)].plugins]
        assert ids == ["p.y", "p.z"]

        write_feature(features, "dup", {
            "manifest.json": {"plugins": [
                {"plugin_id": "p.y", "variation_point": "vp",
                 "implementation_process": "something-else"}]},
        })
        with pytest.raises(ComposeError, match="p.y"):
            superimpose(tree_for(features, "y"), tree_for(features, "dup"))

    def test_conflicting_policies_for_same_vp(self, features):
        write_feature(features, "maj", {
            "manifest.json": {"aggregations": [
                {"variation_point": "vp", "policy": "majority"}]},
        })
        with pytest.raises(ComposeError, match="unanimous.*majority|majority.*unanimous"):
            superimpose(tree_for(features, "y"), tree_for(features, "maj"))

    def test_opaque_identical_only(self, features):
        merged = superimpose(tree_for(features, "base"), tree_for(features, "x"))
        assert merged[("notes.txt",)].data == b"shared\n"
        write_feature(features, "clash", {"notes.txt": b"different\n"})
        with pytest.raises(ComposeError, match="cannot be merged"):
            superimpose(tree_for(features, "base"), tree_for(features, "clash"))

    def test_process_redefinition_rejected(self, features):
        write_feature(features, "clash", {
            "processes/flow.process.json": FLOW | {"start_inputs": []}})
        with pytest.raises(ComposeError, match="defined twice"):
            superimpose(tree_for(features, "base"), tree_for(features, "clash"))

    def test_kind_mismatch_at_same_path(self):
        path = ("config.json",)
        a = {path: ConfigLeaf(path, {}, ("a",))}
        b = {path: OpaqueLeaf(path, b"raw", ("b",))}
        with pytest.raises(ComposeError, match="kinds differ"):
            superimpose(a, b)


MODEL_DOC = {
    "process": "P",
    "activities": [
        {"id": "Fill", "optionality": "mandatory", "implementations": ["x"]},
        {"id": "Side", "optionality": "optional", "implementations": ["y"]},
    ],
}


class TestComposeProduct:
    def model(self):
        return parse_feature_model(MODEL_DOC)

    def test_valid_configuration_composes(self, features):
        bundle = compose_product(self.model(), Configuration.of("x"), features)
        assert bundle.configuration == ("x",)
        assert [r.name for r in bundle.records] == ["app"]
        rec = bundle.records[0]
        assert [f.name for f in rec.fields] == ["extra", "kind"]
        assert bundle.config["feature.x"] is True
        assert bundle.plugins == ()

    def test_optional_feature_adds_plugin(self, features):
        bundle = compose_product(self.model(), Configuration.of("x", "y"), features)
        assert [p.plugin_id for p in bundle.plugins] == ["p.y"]
        assert bundle.aggregation_selection == {"vp": "unanimous"}
        assert {p.id for p in bundle.processes} == {"flow", "impl-y"}

    def test_invalid_configuration_refused_with_report(self, features):
        with pytest.raises(InvalidConfiguration) as err:
            compose_product(self.model(), Configuration.of("y"), features)
        assert err.value.report.valid is False
        assert "mandatory-activity" in err.value.report.rules()

    def test_unknown_feature_refused(self, features):
        with pytest.raises(InvalidConfiguration):
            compose_product(self.model(), Configuration.of("x", "ghost"), features)

    def test_plugin_without_its_process_rejected(self, features):
        write_feature(features, "y2", {
            "manifest.json": {"plugins": [
                {"plugin_id": "p.lost", "variation_point": "vp",
                 "implementation_process": "never-composed"}]},
        })
        doc = {"process": "P", "activities": [
            {"id": "Fill", "optionality": "mandatory", "implementations": ["x"]},
            {"id": "Side", "optionality": "optional", "implementations": ["y2"]},
        ]}
        with pytest.raises(ComposeError, match="never-composed"):
            compose_product(parse_feature_model(doc), Configuration.of("x", "y2"), features)


class TestEmitLoad:
    def test_round_trip(self, features, tmp_path):
        model = parse_feature_model(MODEL_DOC)
        bundle = compose_product(model, Configuration.of("x", "y"), features)
        out = emit_product(bundle, tmp_path / "product")
        loaded = load_product(out)
        assert loaded.configuration == ("x", "y")
        assert loaded.records == bundle.records
        assert set(loaded.definitions) == {"flow", "impl-y"}
        assert loaded.plugins == bundle.plugins
        assert loaded.aggregation_selection == {"vp": "unanimous"}
        assert loaded.config == bundle.config
        # opaque artifacts land at their tree paths
        assert (out / "notes.txt").read_bytes() == b"shared\n"

    def test_emission_is_deterministic(self, features, tmp_path):
        model = parse_feature_model(MODEL_DOC)
        bundle = compose_product(model, Configuration.of("x", "y"), features)
        emit_product(bundle, tmp_path / "one")
        emit_product(bundle, tmp_path / "two")
        for file in sorted((tmp_path / "one").rglob("*")):
            if file.is_file():
                twin = tmp_path / "two" / file.relative_to(tmp_path / "one")
                assert twin.read_bytes() == file.read_bytes()

    def test_corrupt_schema_names_the_file(self, features, tmp_path):
        model = parse_feature_model(MODEL_DOC)
        bundle = compose_product(model, Configuration.of("x"), features)
        out = emit_product(bundle, tmp_path / "product")
        (out / "schema.json").write_text("{broken")
        with pytest.raises(ProductError, match="schema.json"):
            load_product(out)

    def test_missing_product_files(self, tmp_path):
        with pytest.raises(ProductError, match="does not exist"):
            load_product(tmp_path / "nowhere")
        (tmp_path / "empty").mkdir()
        with pytest.raises(ProductError, match="missing product file"):
            load_product(tmp_path / "empty")
