"""HTTP facade over a deployed product.

All state changes are journalled before the response is acknowledged; a
service restarted on the same journal directory resumes where it stopped.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .binding import (
    SelectionError,
    apply_startup_exclusions,
    register_from_bundle,
)
from .composer import LoadedProduct, load_product
from .engine.journal import Journal, replay
from .engine.runtime import (
    Engine,
    EngineError,
    IncidentStateError,
    OutputError,
    StartError,
    TaskStateError,
    UnknownEntity,
)
from .engine.schema import DocumentError
from .records import schema_to_doc
from .scenario.handlers import HANDLERS
from .scenario.stubs import CommercialRegisterStub, NotificationGatewayStub

log = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    product_dir: str | os.PathLike
    journal_dir: str | os.PathLike | None = None
    exclusions: dict[str, list[str]] = field(default_factory=dict)
    retry_attempts: int = 3
    retry_backoff: float = 0.1
    ui_dir: str | os.PathLike | None = None


@dataclass
class Runtime:
    product: LoadedProduct
    engine: Engine
    register: CommercialRegisterStub
    notifications: NotificationGatewayStub
    exclusion_warnings: list[str]


def build_runtime(config: ServiceConfig) -> Runtime:
    product = load_product(config.product_dir)

    registry = register_from_bundle(product.plugins)
    registry, warnings = apply_startup_exclusions(registry, config.exclusions)
    for warning in warnings:
        log.warning("%s", warning)

    register = CommercialRegisterStub(product.config.get("register.entries", {}))
    notifications = NotificationGatewayStub()
    wiring = dict(
        definitions=product.definitions,
        schema=product.schema,
        registry=registry,
        handlers=HANDLERS,
        aggregation_selection=product.aggregation_selection,
        config=product.config,
        services={"register": register, "notifications": notifications},
        retry_attempts=config.retry_attempts,
        retry_backoff=config.retry_backoff,
    )

    journal_path = Path(config.journal_dir) / Journal.FILENAME if config.journal_dir else None
    if journal_path is not None and journal_path.is_file():
        state = replay(journal_path)
        engine = Engine.restore(state, journal=Journal(config.journal_dir), **wiring)
        engine.resume_all()
        log.info("resumed %d instances from %s", len(engine.instances), journal_path)
    else:
        engine = Engine(journal=Journal(config.journal_dir), **wiring)

    return Runtime(product, engine, register, notifications, warnings)


class StartRequest(BaseModel):
    definition_id: str | None = None
    data: dict
    selections: dict[str, list[str]] | None = None


class CompleteRequest(BaseModel):
    outputs: dict[str, Any] = {}


class ResolveRequest(BaseModel):
    action: str


def create_app(config: ServiceConfig) -> FastAPI:
    runtime = build_runtime(config)
    engine = runtime.engine
    app = FastAPI(title="procline", version="0.1.0")
    app.state.runtime = runtime

    core_ids = sorted(
        pid for pid, proc in runtime.product.definitions.items() if proc.kind == "core"
    )

    def _pick_definition(requested: str | None) -> str:
        if requested:
            return requested
        if len(core_ids) == 1:
            return core_ids[0]
        raise HTTPException(422, f"definition_id required; deployed core processes: {core_ids}")

    @app.get("/v1/health")
    def health():
        return {
            "status": "ok",
            "product": str(runtime.product.root),
            "configuration": list(runtime.product.configuration),
            "core_processes": core_ids,
        }

    @app.get("/v1/schema")
    def schema():
        return schema_to_doc(runtime.product.records)

    @app.post("/v1/instances", status_code=201)
    def start_instance(req: StartRequest):
        definition_id = _pick_definition(req.definition_id)
        try:
            iid = engine.start_instance(definition_id, req.data, selections=req.selections)
        except (StartError, DocumentError, SelectionError) as exc:
            raise HTTPException(422, str(exc))
        state = engine.run_to_quiescence(iid)
        return {"instance_id": iid, "state": state}

    @app.get("/v1/instances/{instance_id}")
    def get_instance(instance_id: str):
        try:
            return engine.instance_snapshot(instance_id)
        except UnknownEntity as exc:
            raise HTTPException(404, str(exc))

    @app.get("/v1/tasks")
    def list_tasks(state: str = Query("open")):
        return [t.to_dict() for t in engine.open_tasks(state=state)]

    @app.post("/v1/tasks/{task_id}/complete")
    def complete_task(task_id: str, req: CompleteRequest):
        try:
            engine.complete_user_task(task_id, req.outputs)
        except UnknownEntity as exc:
            raise HTTPException(404, str(exc))
        except TaskStateError as exc:
            raise HTTPException(409, str(exc))
        except (OutputError, DocumentError) as exc:
            raise HTTPException(422, str(exc))
        task = engine.tasks[task_id]
        owner = engine.instances[task.instance_id]
        root = engine.instances[owner.root_id]
        return {
            "task_id": task_id,
            "instance_id": owner.id,
            "state": owner.state,
            "root_instance_id": root.id,
            "root_state": root.state,
        }

    @app.get("/v1/variation-points/{vp}/plugins")
    def list_plugins(vp: str):
        return [d.to_dict() for d in engine.registry.available(vp)]

    @app.get("/v1/incidents")
    def list_incidents(state: str = Query("open")):
        return [i.to_dict() for i in engine.open_incidents(state=state)]

    @app.post("/v1/incidents/{incident_id}/resolve")
    def resolve_incident(incident_id: str, req: ResolveRequest):
        try:
            state = engine.resolve_incident(incident_id, req.action)
        except UnknownEntity as exc:
            raise HTTPException(404, str(exc))
        except IncidentStateError as exc:
            raise HTTPException(409, str(exc))
        except EngineError as exc:
            raise HTTPException(422, str(exc))
        return {"incident_id": incident_id, "state": state}

    @app.get("/v1/outbox")
    def outbox():
        return runtime.notifications.outbox()

    if config.ui_dir and Path(config.ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(config.ui_dir), html=True), name="ui")

    return app
