"""Release acceptance suite.

One test per criterion, named after the behavior it locks in. Each test
prints a single summary line so a verbose run reads as a checklist. The
rest of the test tree covers units; this file covers the promises.
"""

import hashlib
import itertools
import json
import random
import threading
import time

from pathlib import Path

from genmodels import random_model_doc
from oracles import (
    doc_leaves,
    doc_units,
    fold_and,
    naive_achievable_pairs,
    naive_validate,
    pair_coverage,
    strict_majority,
)

from procline.binding import (
    PluginDescriptor,
    apply_startup_exclusions,
    register_from_bundle,
)
from procline.composer import (
    build_artifact_tree,
    bundle_from_tree,
    compose_product,
    emit_product,
    superimpose,
    ConfigLeaf,
    ManifestLeaf,
    OpaqueLeaf,
    ProcessLeaf,
    RecordLeaf,
)
from procline.engine.aggregate import aggregate
from procline.engine.definition import parse_process
from procline.engine.journal import Journal, replay
from procline.engine.runtime import COMPLETED, INCIDENT, Engine, VersionConflict
from procline.engine.schema import ProductSchema, canonical_json
from procline.feature_model import (
    Configuration,
    enumerate_configurations,
    parse_feature_model,
    sample_pairwise,
    validate_configuration,
)
from procline.records import RecordDef, RecordField
from procline.scenario.golden import CORE_PROCESS, GRANT_FLOW, REJECT_FLOW, engine_for_bundle
from procline.scenario.handlers import HANDLERS
from procline.scenario.pack import compose_named, load_scenario_model, named_configuration
from procline.scenario.stubs import CommercialRegisterStub, NotificationGatewayStub

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures" / "parking-permit"
FEATURES = FIXTURES / "features"


def _passed(label: str, detail: str = "") -> None:
    line = f"acceptance [{label}]: PASS"
    if detail:
        line += f" ({detail})"
    print(line)


# -- 1: the conditional aggregation rule ---------------------------------------


def test_dual_check_selection_requires_an_aggregation_code():
    started = time.perf_counter()
    model = load_scenario_model(FIXTURES)

    both_checks = Configuration.of(
        "AutomaticCheck", "ManualCheckForm", "RegisterNoForm", "PlainIssueForm",
        "company.commercialRegisterNo",
    )
    report = validate_configuration(model, both_checks)
    assert not report.valid
    assert report.rules() == {"conditional-group-requires"}
    assert any("CheckApplication" in v.message for v in report.violations)

    fixed = Configuration(both_checks.selected | {"UnanimousAgg"})
    assert validate_configuration(model, fixed).valid

    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    _passed("conditional aggregation rule", f"{elapsed * 1000:.0f} ms")


# -- 2: validator equals exhaustive rule evaluation ----------------------------


def test_validator_matches_exhaustive_evaluation_on_100_random_models():
    started = time.perf_counter()
    subsets = 0
    for seed in range(100):
        doc = random_model_doc(seed)
        assert len(doc_leaves(doc)) <= 12
        model = parse_feature_model(doc)
        idents = sorted(doc_leaves(doc) + doc_units(doc))
        for size in range(len(idents) + 1):
            for combo in itertools.combinations(idents, size):
                subset = set(combo)
                expected, _rules = naive_validate(doc, subset)
                got = validate_configuration(model, Configuration(frozenset(subset)))
                assert got.valid == expected, (seed, sorted(subset))
                subsets += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    _passed("validator vs exhaustive evaluator",
            f"{subsets} subsets across 100 models in {elapsed:.1f} s")


# -- 3: record composition and fold-order independence -------------------------


def test_register_number_feature_extends_company_and_fold_order_is_immaterial():
    # the register-number form adds exactly one field to the base company
    dual = compose_named("dual-check", FIXTURES)
    company = next(r for r in dual.records if r.name == "company")
    assert sorted(f.name for f in company.fields) == ["address", "commercialRegisterNo", "name"]
    assert company.field_named("commercialRegisterNo").required

    plain = compose_named("sms-reject", FIXTURES)
    base_company = next(r for r in plain.records if r.name == "company")
    assert sorted(f.name for f in base_company.fields) == ["address", "name"]

    # composing the same five folders in any order gives one bundle
    cfg = named_configuration("sms-reject", FIXTURES)
    model = load_scenario_model(FIXTURES)
    folders = ["base"] + sorted(cfg.selected & set(model.leaves()))
    assert len(folders) == 5

    reference = None
    orders = 0
    for order in itertools.permutations(folders):
        tree = {}
        for folder in order:
            tree = superimpose(tree, build_artifact_tree(FEATURES / folder, origin=folder))
        bundle = bundle_from_tree(tree, cfg.sorted())
        if reference is None:
            reference = bundle
        assert bundle == reference, order
        orders += 1
    assert orders == 120
    _passed("composition and fold order", "120 permutations of 5 folders")


# -- 4: emitted products carry selected artifacts only -------------------------


def _folder_contributions(tree) -> set[tuple]:
    """Name-level keys for everything a feature folder can put in a product."""
    keys: set[tuple] = set()
    for path, leaf in tree.items():
        if isinstance(leaf, RecordLeaf):
            keys.add(("record", leaf.record.name))
            keys |= {("field", leaf.record.name, f.name) for f in leaf.record.fields}
        elif isinstance(leaf, ProcessLeaf):
            keys.add(("process", leaf.doc["id"]))
        elif isinstance(leaf, ManifestLeaf):
            keys |= {("plugin", p["plugin_id"]) for p in leaf.plugins}
            keys |= {("agg", a["variation_point"], a["policy"]) for a in leaf.aggregations}
        elif isinstance(leaf, ConfigLeaf):
            keys |= {("config", k) for k in leaf.values}
        elif isinstance(leaf, OpaqueLeaf):
            keys.add(("file", "/".join(path), hashlib.sha256(leaf.data).hexdigest()))
    return keys


def _emitted_contributions(outdir: Path) -> set[tuple]:
    """The same key shape, recovered from the files a product ships."""
    keys: set[tuple] = set()
    for file in sorted(p for p in outdir.rglob("*") if p.is_file()):
        rel = file.relative_to(outdir)
        name = "/".join(rel.parts)
        if name == "schema.json":
            for rec in json.loads(file.read_text())["records"]:
                keys.add(("record", rec["name"]))
                keys |= {("field", rec["name"], f["name"]) for f in rec["fields"]}
        elif name == "plugins.json":
            doc = json.loads(file.read_text())
            keys |= {("plugin", p["plugin_id"]) for p in doc["plugins"]}
        elif name == "aggregation.json":
            doc = json.loads(file.read_text())
            keys |= {("agg", vp, pol)
                     for vp, pol in doc["aggregation_selection"].items()}
        elif name == "config.json":
            keys |= {("config", k) for k in json.loads(file.read_text())}
        elif name == "configuration.json":
            continue  # the product's own selection record, not an artifact
        elif rel.parts[0] == "processes":
            keys.add(("process", json.loads(file.read_text())["id"]))
        else:
            keys.add(("file", name, hashlib.sha256(file.read_bytes()).hexdigest()))
    return keys


def test_no_unselected_feature_artifact_reaches_any_emitted_product(tmp_path):
    model = load_scenario_model(FIXTURES)
    leaves = set(model.leaves())
    contrib = {
        folder: _folder_contributions(build_artifact_tree(FEATURES / folder, origin=folder))
        for folder in ["base", *sorted(leaves)]
    }

    configs = enumerate_configurations(model)
    assert len(configs) == 104

    for index, cfg in enumerate(configs):
        bundle = compose_product(model, cfg, FEATURES)
        outdir = tmp_path / f"product-{index:03d}"
        emit_product(bundle, outdir)

        selected_leaves = cfg.selected & leaves
        allowed = {"base"} | selected_leaves

        # provenance of every composed artifact stays inside the selection
        for leaf in bundle.composed_tree.values():
            assert set(leaf.origins) <= allowed, (cfg.sorted(), leaf.path, leaf.origins)

        # every feature folder plants a marker key; it must track selection
        emitted_config = json.loads((outdir / "config.json").read_text())
        for leaf_name in leaves:
            assert ((f"feature.{leaf_name}" in emitted_config)
                    == (leaf_name in selected_leaves)), (cfg.sorted(), leaf_name)

        # everything on disk is traceable to base or a selected feature,
        # and nothing only an unselected feature provides shows up
        emitted = _emitted_contributions(outdir)
        allowed_keys = set().union(*(contrib[f] for f in allowed))
        assert emitted <= allowed_keys, (cfg.sorted(), emitted - allowed_keys)
        for unselected in leaves - selected_leaves:
            stray = (contrib[unselected] - allowed_keys) & emitted
            assert not stray, (cfg.sorted(), unselected, stray)
    _passed("exclusion soundness", f"{len(configs)} emitted products scanned")


# -- 5: compose-time, startup, and runtime binding agree -----------------------


def _run_scenario_route(bundle, data, script, exclusions=None, selections=None):
    registry = register_from_bundle(bundle.plugins)
    if exclusions:
        registry, _warnings = apply_startup_exclusions(registry, exclusions)
    register = CommercialRegisterStub(bundle.config.get("register.entries", {}))
    gateway = NotificationGatewayStub()
    engine = Engine(
        definitions={p.id: p for p in bundle.processes},
        schema=bundle.schema(),
        registry=registry,
        handlers=HANDLERS,
        aggregation_selection=bundle.aggregation_selection,
        config=bundle.config,
        services={"register": register, "notifications": gateway},
        sleep=lambda _t: None,
    )
    iid = engine.start_instance(CORE_PROCESS, data, selections=selections)
    engine.run_to_quiescence(iid)
    for _ in range(20):
        tasks = engine.open_tasks()
        if not tasks:
            break
        task = tasks[0]
        engine.complete_user_task(task.task_id, script[task.form_ref])
    root = engine.instances[iid]
    assert root.state == COMPLETED
    return canonical_json(root.variables), sorted(gateway.outbox(), key=str)


def _fanout_core(selection_ref=None):
    vp = {
        "id": "fan", "type": "variation_point", "registry_ref": "slot",
        "aggregation_policy_ref": "slot", "mapper_inputs": ["request"],
        "result_path": "verdict.ok", "decision_path": "verdict.ok",
    }
    if selection_ref:
        vp["selection_variable_ref"] = selection_ref
    return parse_process({
        "id": "core", "kind": "core", "start_inputs": ["request"],
        "nodes": [{"id": "s", "type": "start_event"}, vp, {"id": "e", "type": "end_event"}],
        "edges": [{"from": "s", "to": "fan"}, {"from": "fan", "to": "e"}],
    })


def _auto_impl(proc_id, handler_key):
    return parse_process({
        "id": proc_id, "kind": "implementation",
        "nodes": [
            {"id": "s", "type": "start_event"},
            {"id": "work", "type": "automated_task", "handler": handler_key,
             "outputs": ["verdict.ok"]},
            {"id": "e", "type": "end_event"},
        ],
        "edges": [{"from": "s", "to": "work"}, {"from": "work", "to": "e"}],
    })


def _user_impl(proc_id):
    return parse_process({
        "id": proc_id, "kind": "implementation",
        "nodes": [
            {"id": "s", "type": "start_event"},
            {"id": "ask", "type": "user_task", "form_ref": f"{proc_id}-form",
             "outputs": ["verdict.ok"]},
            {"id": "e", "type": "end_event"},
        ],
        "edges": [{"from": "s", "to": "ask"}, {"from": "ask", "to": "e"}],
    })


FANOUT_SCHEMA = ProductSchema((
    RecordDef("request", (RecordField("n", "integer"),)),
    RecordDef("verdict", (RecordField("ok", "boolean"),)),
))


def _fanout_doc(plugin_ids, values, registry, selection=None, selection_ref=None):
    definitions = {"core": _fanout_core(selection_ref)}
    handlers = {}
    for pid in plugin_ids:
        proc = pid.replace(".", "-")
        definitions[proc] = _auto_impl(proc, f"h-{proc}")
        handlers[f"h-{proc}"] = lambda ctx, v=values[pid]: {"verdict.ok": v}
    engine = Engine(
        definitions=definitions, schema=FANOUT_SCHEMA, registry=registry,
        handlers=handlers, aggregation_selection={"slot": "unanimous"},
        sleep=lambda _t: None,
    )
    iid = engine.start_instance(
        "core", {"request": {"n": 7}},
        selections={"slot": selection} if selection is not None else None,
    )
    assert engine.run_to_quiescence(iid) == COMPLETED
    return canonical_json(engine.instances[iid].variables)


def _descriptors(plugin_ids):
    return [
        PluginDescriptor(plugin_id=pid, variation_point="slot",
                         implementation_process=pid.replace(".", "-"))
        for pid in plugin_ids
    ]


def test_binding_time_routes_produce_identical_documents():
    model = load_scenario_model(FIXTURES)
    reject_script = {"manual-check": {"decision.justified": False}, "notify-clerk": {}}

    # S = {sms}: dedicated product, startup exclusion, runtime selection
    sms_only = [
        _run_scenario_route(compose_named("sms-reject", FIXTURES),
                            REJECT_FLOW["data"], reject_script),
        _run_scenario_route(compose_named("all-notify", FIXTURES),
                            REJECT_FLOW["data"], reject_script,
                            exclusions={"notification": ["notification.mail",
                                                         "notification.clerk"]}),
        _run_scenario_route(compose_named("all-notify", FIXTURES),
                            REJECT_FLOW["data"], reject_script,
                            selections={"notification": ["notification.sms"]}),
    ]
    docs = {doc for doc, _outbox in sms_only}
    assert len(docs) == 1, docs
    for _doc, outbox in sms_only:
        assert [m["channel"] for m in outbox] == ["sms"]

    # S = {sms, clerk}: same three routes
    all_notify = named_configuration("all-notify", FIXTURES)
    sms_clerk_cfg = Configuration(all_notify.selected - {"notification.mail"})
    assert validate_configuration(model, sms_clerk_cfg).valid
    sms_clerk = [
        _run_scenario_route(compose_product(model, sms_clerk_cfg, FEATURES),
                            REJECT_FLOW["data"], reject_script),
        _run_scenario_route(compose_named("all-notify", FIXTURES),
                            REJECT_FLOW["data"], reject_script,
                            exclusions={"notification": ["notification.mail"]}),
        _run_scenario_route(compose_named("all-notify", FIXTURES),
                            REJECT_FLOW["data"], reject_script,
                            selections={"notification": ["notification.clerk",
                                                         "notification.sms"]}),
    ]
    docs = {doc for doc, _outbox in sms_clerk}
    assert len(docs) == 1, docs
    for _doc, outbox in sms_clerk:
        assert [m["channel"] for m in outbox] == ["sms"]

    # 50 random plugin subsets on synthetic fan-out models
    rng = random.Random(91211)
    for _trial in range(50):
        k = rng.randint(2, 6)
        universe = [f"imp.{i}" for i in range(k)]
        chosen = sorted(rng.sample(universe, rng.randint(1, k)))
        values = {pid: rng.random() < 0.6 for pid in universe}
        excluded = [pid for pid in universe if pid not in chosen]

        full = register_from_bundle(_descriptors(universe))
        only_chosen = register_from_bundle(_descriptors(chosen))
        trimmed, _warnings = apply_startup_exclusions(full, {"slot": excluded})

        via_compose = _fanout_doc(universe, values, only_chosen)
        via_startup = _fanout_doc(universe, values, trimmed)
        via_runtime = _fanout_doc(universe, values, full,
                                  selection=chosen, selection_ref="slot")
        assert via_compose == via_startup == via_runtime, chosen
        assert json.loads(via_compose)["_results"]["slot"].keys() == set(chosen)
    _passed("binding-time equivalence", "2 scenario sets + 50 random subsets")


# -- 6: aggregation ignores completion order -----------------------------------


def test_aggregation_decision_is_independent_of_completion_schedule():
    assignment = {"review.a": True, "review.b": False, "review.c": True, "review.d": True}
    plugin_ids = sorted(assignment)
    expected = {
        "unanimous": fold_and(list(assignment.values())),
        "veto": fold_and(list(assignment.values())),
        "majority": strict_majority(list(assignment.values())),
    }

    for policy in ("unanimous", "veto", "majority"):
        decisions = set()
        for trial in range(1000):
            definitions = {"core": _fanout_core()}
            for pid in plugin_ids:
                definitions[pid.replace(".", "-")] = _user_impl(pid.replace(".", "-"))
            engine = Engine(
                definitions=definitions, schema=FANOUT_SCHEMA,
                registry=register_from_bundle(_descriptors(plugin_ids)),
                aggregation_selection={"slot": policy},
                sleep=lambda _t: None,
            )
            iid = engine.start_instance("core", {"request": {"n": 1}})
            engine.run_to_quiescence(iid)

            tasks = list(engine.open_tasks())
            assert len(tasks) == 4
            random.Random(trial).shuffle(tasks)
            for task in tasks:
                child = engine.instance_snapshot(task.instance_id)
                value = assignment[child["plugin_id"]]
                engine.complete_user_task(task.task_id, {"verdict.ok": value})

            root = engine.instances[iid]
            assert root.state == COMPLETED
            decisions.add(root.variables["verdict"]["ok"])
        assert decisions == {expected[policy]}, policy

    # and the policy table itself equals fold-AND for every input up to length 10
    for length in range(1, 11):
        for bits in itertools.product((False, True), repeat=length):
            values = list(bits)
            assert aggregate("unanimous", values) is fold_and(values)
            assert aggregate("veto", values) is fold_and(values)
            assert aggregate("majority", values) is strict_majority(values)
    _passed("aggregation determinism", "3 policies x 1000 schedules + exhaustive table")


# -- 7: optimistic writes under contention ---------------------------------------


def test_concurrent_writers_lose_nothing_and_replay_matches_live(tmp_path):
    schema = ProductSchema((
        RecordDef("slots", tuple(
            RecordField(f"f{j}", "integer", required=False) for j in range(8))),
    ))
    idle = parse_process({
        "id": "idle", "kind": "core", "start_inputs": ["slots"],
        "nodes": [
            {"id": "s", "type": "start_event"},
            {"id": "hold", "type": "user_task", "form_ref": "hold-form", "outputs": []},
            {"id": "e", "type": "end_event"},
        ],
        "edges": [{"from": "s", "to": "hold"}, {"from": "hold", "to": "e"}],
    })
    engine = Engine(definitions={"idle": idle}, schema=schema,
                    journal=Journal(tmp_path), sleep=lambda _t: None)

    def keep_writing(iid, path, value):
        expected = 0
        while True:
            try:
                engine.commit_variable_write(iid, expected, path, value)
                return
            except VersionConflict as conflict:
                expected = conflict.current

    rng = random.Random(40117)
    plan = []
    for trial in range(500):
        iid = engine.start_instance("idle", {"slots": {}})
        writers = rng.randint(2, 8)
        threads = [
            threading.Thread(target=keep_writing,
                             args=(iid, f"slots.f{j}", trial * 10 + j))
            for j in range(writers)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        plan.append((iid, writers, trial))

    for iid, writers, trial in plan:
        snap = engine.instance_snapshot(iid)
        assert snap["version"] == writers, (iid, snap["version"], writers)
        assert snap["variables"]["slots"] == {
            f"f{j}": trial * 10 + j for j in range(writers)
        }, iid

    engine.journal.close()
    state = replay(tmp_path / Journal.FILENAME)
    assert set(state.instances) == set(engine.instances)
    for iid in engine.instances:
        assert canonical_json(state.snapshot(iid)) == canonical_json(
            engine.instance_snapshot(iid)), iid
    _passed("optimistic locking", "500 instances, 2-8 writers each, replay byte-equal")


# -- 8: pairwise sampling reaches full coverage ----------------------------------


def test_pairwise_sample_covers_every_achievable_pair():
    started = time.perf_counter()

    model = load_scenario_model(FIXTURES)
    doc = json.loads((FIXTURES / "model.json").read_text("utf-8"))
    sample = sample_pairwise(model)
    for cfg in sample:
        assert validate_configuration(model, cfg).valid
        ok, _rules = naive_validate(doc, set(cfg.selected))
        assert ok, cfg.sorted()
    target = naive_achievable_pairs(doc)
    assert len(target) == 242
    assert pair_coverage(doc, [set(c.selected) for c in sample], target) == 1.0
    assert len(sample) <= 20

    for seed in range(50):
        rdoc = random_model_doc(1000 + seed)
        rmodel = parse_feature_model(rdoc)
        rsample = sample_pairwise(rmodel)
        for cfg in rsample:
            ok, _rules = naive_validate(rdoc, set(cfg.selected))
            assert ok, (seed, cfg.sorted())
        rtarget = naive_achievable_pairs(rdoc)
        covered = pair_coverage(rdoc, [set(c.selected) for c in rsample], rtarget)
        assert covered == 1.0, (seed, covered)

    elapsed = time.perf_counter() - started
    assert elapsed < 60.0
    _passed("pairwise coverage",
            f"scenario model ({len(sample)} configs) + 50 random models in {elapsed:.1f} s")


# -- 9: retry budget, one incident, resume ---------------------------------------


def test_failing_register_burns_retry_budget_raises_one_incident_then_resumes():
    bundle = compose_named("dual-check", FIXTURES)
    register = CommercialRegisterStub(bundle.config["register.entries"], fail_times=3)
    engine, stubs = engine_for_bundle(bundle, register=register, sleep=lambda _t: None)

    iid = engine.start_instance(CORE_PROCESS, GRANT_FLOW["data"])
    engine.run_to_quiescence(iid)

    assert register.calls == 3  # the whole budget, no more
    incidents = engine.open_incidents()
    assert len(incidents) == 1
    assert incidents[0].kind == "handler-failure"
    assert incidents[0].attempts == 3

    # the manual half of the dual check is unaffected; answer it
    manual = [t for t in engine.open_tasks() if t.form_ref == "manual-check"]
    assert len(manual) == 1
    engine.complete_user_task(manual[0].task_id, {"decision.justified": True})
    assert engine.instances[iid].state == INCIDENT

    engine.resolve_incident(incidents[0].incident_id, "resume")
    assert register.calls == 4  # exactly one fresh attempt, which succeeds
    assert engine.open_incidents() == []

    issue = [t for t in engine.open_tasks() if t.form_ref == "issue-permit"]
    assert len(issue) == 1
    engine.complete_user_task(issue[0].task_id, {"permit.issued": True})
    assert engine.instances[iid].state == COMPLETED
    assert stubs["notifications"].outbox() == []
    _passed("retry and incident", "3 attempts, 1 incident, resume on attempt 4")
