"""Feature-model parsing, emission, and configuration validation."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from procline.feature_model import (
    Configuration,
    ModelError,
    RULE_CARDINALITY,
    RULE_CLOSURE,
    RULE_CONDITIONAL,
    RULE_EXCLUDES,
    RULE_MANDATORY,
    RULE_REQUIRES,
    RULE_UNKNOWN,
    RULE_WRITE_BEFORE_READ,
    emit_feature_model,
    parse_feature_model,
    required_data_fields,
    validate_configuration,
)

from genmodels import random_model_doc
from oracles import naive_validate

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures" / "parking-permit"


@pytest.fixture(scope="module")
def scenario_model():
    return parse_feature_model((FIXTURES / "model.json").read_text())


def minimal_doc():
    return {
        "process": "P",
        "activities": [
            {"id": "A", "optionality": "mandatory", "implementations": ["x"]},
        ],
    }


# -- parsing ---------------------------------------------------------------


def test_parse_scenario_model_activities(scenario_model):
    assert {a.id for a in scenario_model.activities} == {
        "ApplyForm",
        "CheckApplication",
        "IssuePermit",
        "NotifyCraftsperson",
    }
    assert scenario_model.process == "ParkingPermit"


def test_parse_scenario_layers(scenario_model):
    root = scenario_model.root()
    assert root.kind == "process"
    assert all(child.kind == "activity" for child in root.children)
    for act in root.children:
        for leaf in act.children:
            assert leaf.kind in ("implementation", "aggregation_code")
            assert leaf.children == ()


def test_parse_minimal_model():
    model = parse_feature_model(minimal_doc())
    assert model.leaves() == ("x",)
    assert model.activities[0].optionality == "mandatory"


def test_parse_reports_dangling_constraint_reference():
    doc = minimal_doc()
    doc["constraints"] = [{"kind": "requires", "lhs": "x", "rhs": "ghost"}]
    with pytest.raises(ModelError) as err:
        parse_feature_model(doc)
    assert "ghost" in str(err.value)
    assert "constraints[0]" in str(err.value)


def test_parse_reports_dangling_access_edge():
    doc = minimal_doc()
    doc["data_schema"] = {"records": [{"name": "r", "fields": [{"name": "v", "type": "string"}]}]}
    doc["access_edges"] = [{"implementation": "x", "path": "r.missing", "mode": "read"}]
    with pytest.raises(ModelError) as err:
        parse_feature_model(doc)
    assert "r.missing" in str(err.value)


def test_parse_rejects_group_member_outside_activity():
    doc = minimal_doc()
    doc["activities"].append({"id": "B", "optionality": "optional", "implementations": ["y"]})
    doc["activities"][0]["groups"] = [{
        "id": "A.G",
        "role": "implementation_group",
        "members": ["y"],
        "cardinality": {"min": 0, "max": 1},
    }]
    with pytest.raises(ModelError) as err:
        parse_feature_model(doc)
    assert "y" in str(err.value)


def test_parse_rejects_bad_cardinality():
    doc = minimal_doc()
    doc["activities"][0]["groups"] = [{
        "id": "A.G",
        "role": "implementation_group",
        "members": ["x"],
        "cardinality": {"min": 2, "max": 1},
    }]
    with pytest.raises(ModelError):
        parse_feature_model(doc)


def test_parse_rejects_duplicate_identifier():
    doc = minimal_doc()
    doc["activities"].append({"id": "B", "implementations": ["x"]})
    with pytest.raises(ModelError) as err:
        parse_feature_model(doc)
    assert "duplicate" in str(err.value)


def test_parse_reports_json_position():
    with pytest.raises(ModelError) as err:
        parse_feature_model('{"process": "P",}')
    assert "line 1" in str(err.value)


def test_parse_rejects_flow_cycle():
    doc = minimal_doc()
    doc["activities"].append({"id": "B", "optionality": "optional", "implementations": ["y"]})
    doc["flow"] = [["A", "B"], ["B", "A"]]
    with pytest.raises(ModelError) as err:
        parse_feature_model(doc)
    assert "cycle" in str(err.value)


def test_emit_round_trip_scenario(scenario_model):
    assert parse_feature_model(emit_feature_model(scenario_model)) == scenario_model


def test_emit_round_trip_random_models():
    for seed in range(25):
        model = parse_feature_model(random_model_doc(seed))
        assert parse_feature_model(emit_feature_model(model)) == model


def test_emit_round_trip_survives_json(scenario_model):
    text = json.dumps(emit_feature_model(scenario_model))
    assert parse_feature_model(text) == scenario_model


# -- required data fields ----------------------------------------------------


def test_closure_automatic_check(scenario_model):
    got = required_data_fields(scenario_model, Configuration.of("AutomaticCheck"))
    assert got == frozenset({"company.commercialRegisterNo"})


def test_closure_complex_form(scenario_model):
    got = required_data_fields(scenario_model, Configuration.of("ComplexForm"))
    assert got == frozenset({"company.commercialRegisterNo", "carInformation"})


def test_closure_simple_form_empty(scenario_model):
    assert required_data_fields(scenario_model, Configuration.of("SimpleForm")) == frozenset()


def test_closure_is_monotone(scenario_model):
    small = required_data_fields(scenario_model, Configuration.of("RegisterNoForm"))
    big = required_data_fields(
        scenario_model, Configuration.of("RegisterNoForm", "ComplexForm", "AutomaticCheck")
    )
    assert small <= big


# -- validation: contract examples -------------------------------------------


def dual_check(*extra: str) -> Configuration:
    return Configuration(frozenset({
        "RegisterNoForm",
        "ManualCheckForm",
        "AutomaticCheck",
        "PlainIssueForm",
        "company.commercialRegisterNo",
        *extra,
    }))


def test_both_checks_without_aggregation_rejected(scenario_model):
    report = validate_configuration(scenario_model, dual_check())
    assert not report.valid
    assert RULE_CONDITIONAL in report.rules()


def test_both_checks_with_unanimous_valid(scenario_model):
    report = validate_configuration(scenario_model, dual_check("UnanimousAgg"))
    assert report.valid
    assert report.violations == []


def test_simple_manual_mail_plain_valid(scenario_model):
    cfg = Configuration.of("SimpleForm", "ManualCheckForm", "notification.mail", "PlainIssueForm")
    assert validate_configuration(scenario_model, cfg).valid


def test_writer_without_reader_breaks_write_before_read(scenario_model):
    cfg = Configuration.of(
        "RegisterNoForm", "ManualCheckForm", "PlainIssueForm", "company.commercialRegisterNo"
    )
    report = validate_configuration(scenario_model, cfg)
    assert not report.valid
    assert RULE_WRITE_BEFORE_READ in report.rules()


def test_reader_without_selected_data_breaks_closure(scenario_model):
    cfg = Configuration.of("RegisterNoForm", "AutomaticCheck", "UnanimousAgg", "PlainIssueForm")
    report = validate_configuration(scenario_model, cfg)
    assert not report.valid
    assert RULE_CLOSURE in report.rules()


def test_missing_mandatory_activity(scenario_model):
    cfg = Configuration.of("SimpleForm", "ManualCheckForm")
    report = validate_configuration(scenario_model, cfg)
    assert RULE_MANDATORY in report.rules()
    assert any("IssuePermit" in v.subjects for v in report.violations)


def test_cardinality_violation(scenario_model):
    cfg = Configuration.of(
        "SimpleForm", "RegisterNoForm", "ManualCheckForm", "PlainIssueForm"
    )
    report = validate_configuration(scenario_model, cfg)
    assert RULE_CARDINALITY in report.rules()


def test_unknown_identifier_reported(scenario_model):
    cfg = Configuration.of("SimpleForm", "NoSuchLeaf")
    report = validate_configuration(scenario_model, cfg)
    assert not report.valid
    assert report.rules() == {RULE_UNKNOWN}


def test_requires_and_excludes():
    doc = {
        "process": "P",
        "activities": [
            {"id": "A", "implementations": ["a1", "a2"]},
            {"id": "B", "optionality": "optional", "implementations": ["b1"]},
        ],
        "constraints": [
            {"kind": "requires", "lhs": "a1", "rhs": "b1"},
            {"kind": "excludes", "lhs": "a2", "rhs": "b1"},
        ],
    }
    model = parse_feature_model(doc)
    rep = validate_configuration(model, Configuration.of("a1"))
    assert RULE_REQUIRES in rep.rules()
    assert validate_configuration(model, Configuration.of("a1", "b1")).valid
    rep = validate_configuration(model, Configuration.of("a2", "b1"))
    assert RULE_EXCLUDES in rep.rules()
    assert validate_configuration(model, Configuration.of("a2")).valid


def test_validation_report_is_data_not_exception(scenario_model):
    report = validate_configuration(scenario_model, Configuration.of())
    assert not report.valid
    body = report.to_dict()
    assert body["valid"] is False
    assert all({"rule", "subjects", "message"} <= set(v) for v in body["violations"])


# -- agreement with the independent evaluator ---------------------------------


def test_validator_agrees_with_naive_evaluator_on_random_subsets():
    import random

    from oracles import doc_leaves, doc_units

    rng = random.Random(20318)
    for seed in range(40):
        doc = random_model_doc(seed)
        model = parse_feature_model(doc)
        idents = doc_leaves(doc) + doc_units(doc)
        for _ in range(120):
            subset = {i for i in idents if rng.random() < 0.4}
            expected, _rules = naive_validate(doc, subset)
            got = validate_configuration(model, Configuration(frozenset(subset)))
            assert got.valid == expected, (seed, sorted(subset), got.violations)
