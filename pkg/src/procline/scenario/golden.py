"""End-to-end permit flows with scripted task completions.

These drive a composed product through the engine exactly the way the HTTP
service would, but in process, with the register and notification stubs
wired in. Tests pin the resulting documents and outboxes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..binding import register_from_bundle
from ..composer import ProductBundle
from ..engine.journal import Journal
from ..engine.runtime import Engine
from .handlers import HANDLERS
from .pack import compose_named
from .stubs import CommercialRegisterStub, NotificationGatewayStub

CORE_PROCESS = "parking-permit"

GRANT_FLOW = {
    "configuration": "dual-check",
    "data": {
        "application": {
            "applicant": {"name": "Ada Muster", "contact": "ada@example.test"},
            "company": {
                "name": "Muster Handwerk GmbH",
                "address": "Handwerkerhof 7",
                "commercialRegisterNo": "HRB-12345",
            },
        },
    },
    "script": {
        "manual-check": {"decision.justified": True},
        "issue-permit": {"permit.issued": True},
    },
}

REJECT_FLOW = {
    "configuration": "sms-reject",
    "data": {
        "application": {
            "applicant": {"name": "Bela Beispiel", "contact": "+49-555-0199"},
            "company": {"name": "Schreinerei Beispiel", "address": "Werkstattweg 2"},
        },
    },
    "script": {
        "manual-check": {"decision.justified": False},
    },
}


@dataclass
class GoldenResult:
    state: str
    variables: dict
    outbox: list[dict]
    instance_id: str
    engine: Engine


def engine_for_bundle(
    bundle: ProductBundle,
    journal_dir: str | Path | None = None,
    register: CommercialRegisterStub | None = None,
    notifications: NotificationGatewayStub | None = None,
    **engine_kwargs,
) -> tuple[Engine, dict]:
    register = register or CommercialRegisterStub(bundle.config.get("register.entries", {}))
    notifications = notifications or NotificationGatewayStub()
    engine = Engine(
        definitions={p.id: p for p in bundle.processes},
        schema=bundle.schema(),
        registry=register_from_bundle(bundle.plugins),
        handlers=HANDLERS,
        aggregation_selection=bundle.aggregation_selection,
        config=bundle.config,
        services={"register": register, "notifications": notifications},
        journal=Journal(journal_dir),
        **engine_kwargs,
    )
    return engine, {"register": register, "notifications": notifications}


def run_golden_flow(
    flow: dict,
    root: str | Path | None = None,
    selections: dict | None = None,
    **engine_kwargs,
) -> GoldenResult:
    bundle = compose_named(flow["configuration"], root)
    engine, stubs = engine_for_bundle(bundle, **engine_kwargs)
    iid = engine.start_instance(CORE_PROCESS, flow["data"], selections=selections)
    engine.run_to_quiescence(iid)
    script = flow["script"]
    for _ in range(20):
        tasks = engine.open_tasks()
        if not tasks:
            break
        task = tasks[0]
        if task.form_ref not in script:
            raise AssertionError(f"flow has no answer for task {task.form_ref!r}")
        engine.complete_user_task(task.task_id, script[task.form_ref])
    root_inst = engine.instances[iid]
    return GoldenResult(
        state=root_inst.state,
        variables=root_inst.variables,
        outbox=stubs["notifications"].outbox(),
        instance_id=iid,
        engine=engine,
    )
