"""Process engine: instances, tokens, variation-point fan-out, optimistic
variable writes, retries, incidents, and journalled state.

Concurrency model: children of one variation point run concurrently
(automated children on worker threads), everything else is sequential per
instance. Variable commits go through a versioned compare-and-swap; writers
never hold the document lock while computing. Lock ordering is child before
parent, except when creating brand-new children whose locks nobody else can
hold yet, so the engine stays deadlock-free.
"""

from __future__ import annotations

import copy
import logging
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

from ..binding import PluginRegistry, resolve_invocation
from .aggregate import POLICIES, AggregationError, aggregate
from .definition import (
    AUTOMATED_TASK,
    CORE,
    END,
    GATEWAY,
    IMPLEMENTATION,
    START,
    USER_TASK,
    VARIATION_POINT,
    ProcessDefinition,
    ProcessNode,
)
from .expr import ExpressionError
from .journal import Journal, snapshot_view
from .schema import (
    MISSING,
    RESERVED_ROOTS,
    DocumentError,
    ProductSchema,
    SchemaError,
    apply_write,
    get_path,
)

log = logging.getLogger(__name__)

RUNNING = "running"
WAITING_USER = "waiting_user"
INCIDENT = "incident"
COMPLETED = "completed"

RESUME = "resume"
CANCEL_CHILD = "cancel_child"

DEFAULT_RETRY_ATTEMPTS = 3
DEFAULT_RETRY_BACKOFF = 0.1
COMMIT_RETRY_BUDGET = 10


class EngineError(Exception):
    pass


class DeployError(EngineError):
    pass


class StartError(EngineError):
    pass


class UnknownEntity(EngineError, KeyError):
    pass


class VersionConflict(EngineError):
    def __init__(self, message: str, current: int) -> None:
        self.current = current
        super().__init__(message)


class TaskStateError(EngineError):
    pass


class OutputError(EngineError):
    pass


class IncidentStateError(EngineError):
    pass


@dataclass
class TaskEntry:
    task_id: str
    instance_id: str
    node_id: str
    form_ref: str
    outputs: tuple[str, ...]
    label: str
    state: str = "open"             # open | completed | cancelled

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "instance_id": self.instance_id,
            "node_id": self.node_id,
            "form_ref": self.form_ref,
            "outputs": list(self.outputs),
            "label": self.label,
            "state": self.state,
        }


@dataclass
class IncidentEntry:
    incident_id: str
    instance_id: str
    node_id: str
    kind: str
    error: str
    attempts: int
    state: str = "open"             # open | resolved

    def to_dict(self) -> dict:
        return {
            "incident_id": self.incident_id,
            "instance_id": self.instance_id,
            "node_id": self.node_id,
            "kind": self.kind,
            "error": self.error,
            "attempts": self.attempts,
            "state": self.state,
        }


@dataclass
class HandlerContext:
    instance_id: str
    node_id: str
    plugin_id: str | None
    attempt: int
    variables: dict
    config: Mapping[str, Any]
    services: Mapping[str, Any]


Handler = Callable[[HandlerContext], "dict[str, Any] | None"]


class _Instance:
    __slots__ = (
        "id", "definition", "variables", "version", "state", "tokens",
        "parent_id", "vp_node", "plugin_id", "root_id", "cancelled",
        "selections", "spawned", "doc_lock", "exec_lock",
    )

    def __init__(self, iid: str, definition: ProcessDefinition, variables: dict,
                 parent_id: str | None = None, vp_node: str | None = None,
                 plugin_id: str | None = None, root_id: str | None = None) -> None:
        self.id = iid
        self.definition = definition
        self.variables = variables
        self.version = 0
        self.state = RUNNING
        self.tokens: set[str] = set()
        self.parent_id = parent_id
        self.vp_node = vp_node
        self.plugin_id = plugin_id
        self.root_id = root_id or iid
        self.cancelled = False
        self.selections: dict[str, list[str]] = {}
        self.spawned: dict[str, list[str]] = {}
        self.doc_lock = threading.Lock()
        self.exec_lock = threading.RLock()

    def as_dict(self) -> dict:
        return {
            "instance_id": self.id,
            "definition_id": self.definition.id,
            "parent_id": self.parent_id,
            "vp_node": self.vp_node,
            "plugin_id": self.plugin_id,
            "state": self.state,
            "variables": self.variables,
            "version": self.version,
            "tokens": list(self.tokens),
            "cancelled": self.cancelled,
            "selections": self.selections,
        }


class Engine:
    """Runtime over a deployed product: definitions + schema + plugins."""

    def __init__(
        self,
        *,
        definitions: Mapping[str, ProcessDefinition],
        schema: ProductSchema,
        registry: PluginRegistry | None = None,
        handlers: Mapping[str, Handler] | None = None,
        aggregation_selection: Mapping[str, str] | None = None,
        config: Mapping[str, Any] | None = None,
        services: Mapping[str, Any] | None = None,
        journal: Journal | None = None,
        retry_attempts: int = DEFAULT_RETRY_ATTEMPTS,
        retry_backoff: float = DEFAULT_RETRY_BACKOFF,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.definitions = dict(definitions)
        self.schema = schema
        self.registry = registry or PluginRegistry()
        self.handlers = dict(handlers or {})
        self.aggregation_selection = dict(aggregation_selection or {})
        self.config = dict(config or {})
        self.services = dict(services or {})
        self.journal = journal or Journal(None)
        self.retry_attempts = retry_attempts
        self.retry_backoff = retry_backoff
        self.sleep = sleep

        self.instances: dict[str, _Instance] = {}
        self.tasks: dict[str, TaskEntry] = {}
        self.incidents: dict[str, IncidentEntry] = {}
        self._table_lock = threading.RLock()
        self._threads: dict[str, list[threading.Thread]] = {}
        self._instance_seq = 0
        self._task_seq = 0
        self._incident_seq = 0

        _deploy_checks(self.definitions, self.schema, self.registry,
                       self.handlers, self.aggregation_selection)

    # -- id generation ----------------------------------------------------

    def _next_instance_id(self) -> str:
        with self._table_lock:
            self._instance_seq += 1
            return f"i-{self._instance_seq:08d}"

    def _next_task_id(self) -> str:
        with self._table_lock:
            self._task_seq += 1
            return f"t-{self._task_seq:08d}"

    def _next_incident_id(self) -> str:
        with self._table_lock:
            self._incident_seq += 1
            return f"inc-{self._incident_seq:08d}"

    # -- lookup helpers -----------------------------------------------------

    def _instance(self, instance_id: str) -> _Instance:
        try:
            return self.instances[instance_id]
        except KeyError:
            raise UnknownEntity(f"unknown instance {instance_id!r}") from None

    def _task(self, task_id: str) -> TaskEntry:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise UnknownEntity(f"unknown task {task_id!r}") from None

    def open_tasks(self, state: str = "open") -> list[TaskEntry]:
        with self._table_lock:
            return sorted(
                (t for t in self.tasks.values() if t.state == state),
                key=lambda t: t.task_id,
            )

    def open_incidents(self, state: str = "open") -> list[IncidentEntry]:
        with self._table_lock:
            return sorted(
                (i for i in self.incidents.values() if i.state == state),
                key=lambda i: i.incident_id,
            )

    def instance_snapshot(self, instance_id: str) -> dict:
        inst = self._instance(instance_id)
        with self._table_lock:
            tasks = {t.task_id: t.to_dict() for t in self.tasks.values()}
            incidents = {i.incident_id: i.to_dict() for i in self.incidents.values()}
        return snapshot_view(inst.as_dict(), tasks, incidents)

    # -- lifecycle -----------------------------------------------------------

    def start_instance(
        self,
        definition_id: str,
        data: dict,
        selections: Mapping[str, list[str]] | None = None,
    ) -> str:
        definition = self.definitions.get(definition_id)
        if definition is None:
            raise StartError(f"unknown process definition {definition_id!r}")
        if definition.kind != CORE:
            raise StartError(f"{definition_id!r} is not a core process")

        try:
            self.schema.check_document(data, required_roots=definition.start_inputs)
        except DocumentError as exc:
            raise StartError(str(exc)) from exc

        selection_keys = {
            n.selection_variable_ref: n
            for n in definition.variation_points()
            if n.selection_variable_ref
        }
        normalized: dict[str, list[str]] = {}
        for key, chosen in (selections or {}).items():
            node = selection_keys.get(key)
            if node is None:
                raise StartError(
                    f"no variation point accepts a runtime selection named {key!r}"
                )
            resolve_invocation(self.registry, node.registry_ref, frozenset(chosen))
            normalized[key] = sorted(set(chosen))

        variables = copy.deepcopy(dict(data))
        iid = self._next_instance_id()
        inst = _Instance(iid, definition, variables)
        inst.selections = normalized
        start = definition.start_node()
        inst.tokens = {start.id}
        with self._table_lock:
            self.instances[iid] = inst
            self._threads.setdefault(iid, [])
        self.journal.append(iid, "instance_created", {
            "definition_id": definition.id,
            "variables": copy.deepcopy(variables),
            "selections": normalized,
            "tokens": sorted(inst.tokens),
        }, 0)
        return iid

    def run_to_quiescence(self, instance_id: str) -> str:
        inst = self._instance(instance_id)
        self._advance(inst)
        self._drain_threads(inst.root_id)
        return inst.state

    # -- optimistic variable writes ------------------------------------------

    def commit_variable_write(self, instance_id: str, expected_version: int,
                              field_path: "str | tuple[str, ...]", value: Any) -> int:
        """CAS write: fails with VersionConflict unless expected_version matches.

        ``field_path`` is a dotted schema path; internal callers may pass a
        pre-resolved key chain instead (plugin ids under ``_results`` can
        themselves contain dots, so those never round-trip through a string).
        """
        inst = self._instance(instance_id)
        if isinstance(field_path, str):
            chain = self._resolve_path(field_path)
            dotted = field_path
        else:
            chain = tuple(field_path)
            dotted = ".".join(chain)
        if chain[0] not in RESERVED_ROOTS:
            self.schema.check_value(dotted, value)
        with inst.doc_lock:
            if inst.version != expected_version:
                raise VersionConflict(
                    f"instance {instance_id} is at version {inst.version}, "
                    f"write expected {expected_version}",
                    current=inst.version,
                )
            apply_write(inst.variables, chain, value)
            inst.version += 1
            self.journal.append(instance_id, "variable_written", {
                "path": list(chain),
                "dotted": dotted,
                "value": value,
            }, inst.version)
            return inst.version

    def _commit_retry(self, inst: _Instance, field_path: "str | tuple[str, ...]",
                      value: Any) -> int:
        for _ in range(COMMIT_RETRY_BUDGET):
            expected = inst.version
            try:
                return self.commit_variable_write(inst.id, expected, field_path, value)
            except VersionConflict:
                continue
        raise EngineError(
            f"write to {field_path!r} on {inst.id} lost {COMMIT_RETRY_BUDGET} version races"
        )

    def _resolve_path(self, dotted: str) -> tuple[str, ...]:
        parts = dotted.split(".")
        if parts[0] in RESERVED_ROOTS:
            return tuple(parts)
        return self.schema.resolve(dotted)

    # -- user tasks -----------------------------------------------------------

    def complete_user_task(self, task_id: str, outputs: Mapping[str, Any]) -> str:
        with self._table_lock:
            task = self._task(task_id)
            if task.state != "open":
                raise TaskStateError(f"task {task_id} is {task.state}, not open")
            inst = self._instance(task.instance_id)
        declared = set(task.outputs)
        undeclared = sorted(set(outputs) - declared)
        if undeclared:
            raise OutputError(
                f"task {task_id} declares outputs {sorted(declared)}; "
                f"got undeclared fields {undeclared}"
            )
        for path, value in outputs.items():
            chain = self._resolve_path(path)
            if chain[0] not in RESERVED_ROOTS:
                try:
                    self.schema.check_value(path, value)
                except (DocumentError, SchemaError) as exc:
                    raise OutputError(str(exc)) from exc

        with inst.exec_lock:
            with self._table_lock:
                if task.state != "open":
                    raise TaskStateError(f"task {task_id} is {task.state}, not open")
                task.state = "completed"
            for path, value in sorted(outputs.items()):
                self._commit_retry(inst, path, value)
            self.journal.append(inst.id, "task_completed", {"task_id": task_id}, inst.version)
            node = inst.definition.node(task.node_id)
            self._move_token(inst, node)
            self._advance(inst)
        self._drain_threads(inst.root_id)
        return inst.state

    # -- incidents --------------------------------------------------------------

    def resolve_incident(self, incident_id: str, action: str) -> str:
        if action not in (RESUME, CANCEL_CHILD):
            raise IncidentStateError(f"unknown resolution action {action!r}")
        with self._table_lock:
            incident = self.incidents.get(incident_id)
            if incident is None:
                raise UnknownEntity(f"unknown incident {incident_id!r}")
            if incident.state != "open":
                raise IncidentStateError(f"incident {incident_id} is already resolved")
            inst = self._instance(incident.instance_id)
            if action == CANCEL_CHILD and inst.parent_id is None:
                raise IncidentStateError(
                    f"incident {incident_id} is not on a child instance; cannot cancel"
                )
            incident.state = "resolved"
        self.journal.append(inst.id, "incident_resolved",
                            {"incident_id": incident_id, "action": action}, inst.version)
        if action == RESUME:
            self._advance(inst)
            if inst.parent_id and inst.state == COMPLETED:
                pass  # completion already propagated to the parent
        else:
            self._cancel_child(inst)
        self._drain_threads(inst.root_id)
        root = self.instances[inst.root_id]
        return root.state

    def _cancel_child(self, child: _Instance) -> None:
        with child.exec_lock:
            if child.state == COMPLETED:
                raise IncidentStateError(f"instance {child.id} already completed")
            child.cancelled = True
            child.tokens.clear()
            with self._table_lock:
                for task in self.tasks.values():
                    if task.instance_id == child.id and task.state == "open":
                        task.state = "cancelled"
                        self.journal.append(child.id, "task_cancelled",
                                            {"task_id": task.task_id}, child.version)
            self.journal.append(child.id, "child_cancelled", {"child_id": child.id}, child.version)
            self._set_state(child, COMPLETED)
        parent = self.instances.get(child.parent_id) if child.parent_id else None
        if parent is not None:
            self._advance(parent)

    # -- scheduler ---------------------------------------------------------------

    def _advance(self, inst: _Instance) -> None:
        with inst.exec_lock:
            progressed = True
            while progressed and inst.state != COMPLETED:
                progressed = False
                for node_id in sorted(inst.tokens):
                    if self._blocked(inst.id, node_id):
                        continue  # token stays put until its incident is resolved
                    node = inst.definition.node(node_id)
                    if self._execute_node(inst, node):
                        progressed = True
                        break  # token set changed; re-derive
            self._refresh_state(inst)

    def _execute_node(self, inst: _Instance, node: ProcessNode) -> bool:
        if node.type == START:
            self._move_token(inst, node)
            return True
        if node.type == END:
            inst.tokens.discard(node.id)
            self.journal.append(inst.id, "tokens", {"tokens": sorted(inst.tokens)}, inst.version)
            if not inst.tokens:
                self._complete_instance(inst)
            return True
        if node.type == GATEWAY:
            return self._execute_gateway(inst, node)
        if node.type == USER_TASK:
            return self._execute_user_task(inst, node)
        if node.type == AUTOMATED_TASK:
            return self._execute_automated(inst, node)
        if node.type == VARIATION_POINT:
            return self._execute_variation_point(inst, node)
        raise EngineError(f"unexpected node type {node.type}")

    def _move_token(self, inst: _Instance, node: ProcessNode, target: str | None = None) -> None:
        if target is None:
            target = inst.definition.outgoing(node.id)[0].target
        inst.tokens.discard(node.id)
        inst.tokens.add(target)
        self.journal.append(inst.id, "tokens", {"tokens": sorted(inst.tokens)}, inst.version)

    def _execute_gateway(self, inst: _Instance, node: ProcessNode) -> bool:
        def lookup(path: str):
            value = get_path(inst.variables, self._resolve_path(path))
            if value is MISSING:
                raise ExpressionError(f"path {path!r} is absent from the document")
            return value

        taken: list[str] = []
        try:
            for edge in inst.definition.outgoing(node.id):
                if edge.guard.evaluate(lookup):
                    taken.append(edge.target)
        except (ExpressionError, SchemaError) as exc:
            self._open_incident(inst, node, "guard-eval", str(exc), attempts=0)
            return False
        if len(taken) != 1:
            self._open_incident(
                inst, node, "guard-eval",
                f"expected exactly one open branch, got {len(taken)}", attempts=0,
            )
            return False
        self._move_token(inst, node, taken[0])
        return True

    def _execute_user_task(self, inst: _Instance, node: ProcessNode) -> bool:
        with self._table_lock:
            for task in self.tasks.values():
                if task.instance_id == inst.id and task.node_id == node.id and task.state == "open":
                    return False  # already waiting on this task
            task_id = self._next_task_id()
            entry = TaskEntry(
                task_id=task_id,
                instance_id=inst.id,
                node_id=node.id,
                form_ref=node.form_ref or "",
                outputs=node.outputs,
                label=node.label or node.id,
            )
            self.tasks[task_id] = entry
        self.journal.append(inst.id, "task_opened", {
            "task_id": task_id,
            "node_id": node.id,
            "form_ref": entry.form_ref,
            "outputs": list(entry.outputs),
            "label": entry.label,
        }, inst.version)
        return False

    def _execute_automated(self, inst: _Instance, node: ProcessNode) -> bool:
        attempts = self.retry_attempts
        last_error: Exception | None = None
        for attempt in range(1, attempts + 1):
            ctx = HandlerContext(
                instance_id=inst.id,
                node_id=node.id,
                plugin_id=inst.plugin_id,
                attempt=attempt,
                variables=copy.deepcopy(inst.variables),
                config=self.config,
                services=self.services,
            )
            try:
                handler = self.handlers[node.handler]
                outputs = handler(ctx) or {}
                undeclared = sorted(set(outputs) - set(node.outputs))
                if undeclared:
                    raise OutputError(
                        f"handler {node.handler!r} wrote undeclared fields {undeclared}"
                    )
                for path, value in sorted(outputs.items()):
                    self._commit_retry(inst, path, value)
                self._move_token(inst, node)
                return True
            except Exception as exc:  # handler failures become incidents
                last_error = exc
                if attempt < attempts:
                    self.sleep(self.retry_backoff)
        self._open_incident(inst, node, "handler-failure", repr(last_error), attempts=attempts)
        return False

    def _execute_variation_point(self, inst: _Instance, node: ProcessNode) -> bool:
        children_ids = inst.spawned.get(node.id)
        if children_ids is None:
            return self._spawn_children(inst, node)
        children = [self.instances[cid] for cid in children_ids]
        if not all(c.state == COMPLETED for c in children):
            return False
        return self._join_children(inst, node, children)

    def _selection_for(self, inst: _Instance, node: ProcessNode) -> frozenset[str] | None:
        if not node.selection_variable_ref:
            return None
        chosen = inst.selections.get(node.selection_variable_ref)
        if chosen is None:
            return None
        return frozenset(chosen)

    def _spawn_children(self, inst: _Instance, node: ProcessNode) -> bool:
        plugins = resolve_invocation(
            self.registry, node.registry_ref, self._selection_for(inst, node)
        )
        if not plugins:
            # untyped pass-through: nothing composed or everything excluded
            inst.spawned[node.id] = []
            self._move_token(inst, node)
            return True

        inst.spawned[node.id] = []
        to_run: list[_Instance] = []
        for desc in plugins:
            definition = self.definitions[desc.implementation_process]
            variables: dict = {}
            for path in node.mapper_inputs:
                chain = self._resolve_path(path)
                value = get_path(inst.variables, chain)
                if value is not MISSING:
                    apply_write(variables, chain, copy.deepcopy(value))
            child_id = self._next_instance_id()
            child = _Instance(
                child_id, definition, variables,
                parent_id=inst.id, vp_node=node.id, plugin_id=desc.plugin_id,
                root_id=inst.root_id,
            )
            child.tokens = {definition.start_node().id}
            with self._table_lock:
                self.instances[child_id] = child
            inst.spawned[node.id].append(child_id)
            self.journal.append(inst.id, "child_spawned", {
                "vp_node": node.id,
                "child_id": child_id,
                "plugin_id": desc.plugin_id,
            }, inst.version)
            self.journal.append(child_id, "instance_created", {
                "definition_id": definition.id,
                "parent_id": inst.id,
                "vp_node": node.id,
                "plugin_id": desc.plugin_id,
                "variables": copy.deepcopy(variables),
                "tokens": sorted(child.tokens),
            }, 0)
            to_run.append(child)

        for child in to_run:
            if child.definition.task_node().type == AUTOMATED_TASK:
                thread = threading.Thread(
                    target=self._advance, args=(child,),
                    name=f"child-{child.id}", daemon=True,
                )
                with self._table_lock:
                    self._threads.setdefault(inst.root_id, []).append(thread)
                thread.start()
            else:
                self._advance(child)
        return False

    def _join_children(self, inst: _Instance, node: ProcessNode, children: list[_Instance]) -> bool:
        survivors = [c for c in children if not c.cancelled]
        if node.result_path is None:
            self._move_token(inst, node)
            return True

        vp_key = node.registry_ref or node.id
        results_map = inst.variables.get("_results", {}).get(vp_key, {})
        if not survivors:
            self._open_incident(
                inst, node, "no-results-after-cancel",
                "every child of a result-producing variation point was cancelled",
                attempts=0,
            )
            return False
        missing = sorted(c.plugin_id for c in survivors if c.plugin_id not in results_map)
        if missing:
            self._open_incident(
                inst, node, "missing-result",
                f"children {missing} completed without writing {node.result_path!r}",
                attempts=0,
            )
            return False

        ordered = [(pid, results_map[pid]) for pid in sorted(results_map)]
        values = [value for _pid, value in ordered]
        policy = self.aggregation_selection.get(
            node.aggregation_policy_ref or node.registry_ref or node.id
        )
        if policy is None:
            if len(values) == 1:
                policy = "single"
            else:
                self._open_incident(
                    inst, node, "aggregation-missing",
                    f"{len(values)} results but no aggregation policy selected",
                    attempts=0,
                )
                return False
        try:
            decision = aggregate(policy, values)
        except AggregationError as exc:
            self._open_incident(inst, node, "aggregation-error", str(exc), attempts=0)
            return False
        vetoed_by = [pid for pid, value in ordered if policy == "veto" and value is False]
        self._commit_retry(inst, node.decision_path, decision)
        self.journal.append(inst.id, "children_joined", {
            "vp_node": node.id,
            "results": dict(ordered),
            "policy": policy,
            "decision": decision,
            "vetoed_by": vetoed_by,
        }, inst.version)
        self._move_token(inst, node)
        return True

    # -- completion and state -------------------------------------------------

    def _complete_instance(self, inst: _Instance) -> None:
        self.journal.append(inst.id, "instance_completed", {}, inst.version)
        self._set_state(inst, COMPLETED)
        if inst.parent_id is None:
            return
        parent = self.instances[inst.parent_id]
        vp = parent.definition.node(inst.vp_node)
        if vp.result_path is not None and not inst.cancelled:
            value = get_path(inst.variables, self._resolve_path(vp.result_path))
            if value is not MISSING:
                vp_key = vp.registry_ref or vp.id
                self._commit_retry(parent, ("_results", vp_key, inst.plugin_id), value)
        self._advance(parent)

    def _set_state(self, inst: _Instance, state: str) -> None:
        if inst.state == state:
            return
        inst.state = state
        self.journal.append(inst.id, "state", {"state": state}, inst.version)

    def _derive_state(self, inst: _Instance) -> str:
        if inst.state == COMPLETED:
            return COMPLETED
        with self._table_lock:
            own_incident = any(
                i.instance_id == inst.id and i.state == "open"
                for i in self.incidents.values()
            )
            own_waiting = any(
                t.instance_id == inst.id and t.state == "open"
                for t in self.tasks.values()
            )
        if own_incident:
            return INCIDENT
        child_states = {
            self.instances[cid].state
            for ids in inst.spawned.values() for cid in ids
            if self.instances[cid].state != COMPLETED
        }
        if INCIDENT in child_states:
            return INCIDENT
        if own_waiting or WAITING_USER in child_states:
            return WAITING_USER
        if RUNNING in child_states:
            return RUNNING
        return RUNNING

    def _refresh_state(self, inst: _Instance) -> None:
        if inst.state != COMPLETED:
            self._set_state(inst, self._derive_state(inst))
        if inst.parent_id:
            parent = self.instances[inst.parent_id]
            if parent.state != COMPLETED:
                self._set_state(parent, self._derive_state(parent))

    def _blocked(self, instance_id: str, node_id: str) -> bool:
        with self._table_lock:
            return any(
                i.instance_id == instance_id and i.node_id == node_id and i.state == "open"
                for i in self.incidents.values()
            )

    def _open_incident(self, inst: _Instance, node: ProcessNode, kind: str,
                       error: str, attempts: int) -> None:
        with self._table_lock:
            incident_id = self._next_incident_id()
            entry = IncidentEntry(
                incident_id=incident_id,
                instance_id=inst.id,
                node_id=node.id,
                kind=kind,
                error=error,
                attempts=attempts,
            )
            self.incidents[incident_id] = entry
        self.journal.append(inst.id, "incident_opened", {
            "incident_id": incident_id,
            "node_id": node.id,
            "kind": kind,
            "error": error,
            "attempts": attempts,
        }, inst.version)

    def _drain_threads(self, root_id: str) -> None:
        while True:
            with self._table_lock:
                pending = self._threads.get(root_id, [])
                thread = pending.pop() if pending else None
            if thread is None:
                return
            thread.join()

    # -- restart ---------------------------------------------------------------

    @classmethod
    def restore(cls, replay_state, **kwargs) -> "Engine":
        """Rebuild a live engine from a journal replay.

        ``kwargs`` are the same wiring arguments as the constructor; the
        journal handed in should be a fresh writer appending to the same
        file the replay came from.
        """
        engine = cls(**kwargs)
        for iid, snap in replay_state.instances.items():
            definition = engine.definitions[snap["definition_id"]]
            inst = _Instance(
                iid, definition, copy.deepcopy(snap["variables"]),
                parent_id=snap.get("parent_id"), vp_node=snap.get("vp_node"),
                plugin_id=snap.get("plugin_id"),
            )
            inst.version = snap["version"]
            inst.state = snap["state"]
            inst.tokens = set(snap["tokens"])
            inst.cancelled = snap["cancelled"]
            inst.selections = dict(snap.get("selections", {}))
            inst.spawned = {vp: list(ids) for vp, ids in snap["children"].items()}
            engine.instances[iid] = inst
        # root linkage and counters
        for inst in engine.instances.values():
            root = inst
            while root.parent_id:
                root = engine.instances[root.parent_id]
            inst.root_id = root.id
            engine._threads.setdefault(root.id, [])
        for task in replay_state.tasks.values():
            engine.tasks[task["task_id"]] = TaskEntry(
                task_id=task["task_id"],
                instance_id=task["instance_id"],
                node_id=task["node_id"],
                form_ref=task.get("form_ref", ""),
                outputs=tuple(task.get("outputs", ())),
                label=task.get("label", ""),
                state=task["state"],
            )
        for inc in replay_state.incidents.values():
            engine.incidents[inc["incident_id"]] = IncidentEntry(
                incident_id=inc["incident_id"],
                instance_id=inc["instance_id"],
                node_id=inc["node_id"],
                kind=inc["kind"],
                error=inc["error"],
                attempts=inc["attempts"],
                state=inc["state"],
            )
        engine._instance_seq = _max_counter(engine.instances, "i-")
        engine._task_seq = _max_counter(engine.tasks, "t-")
        engine._incident_seq = _max_counter(engine.incidents, "inc-")
        return engine

    def resume_all(self) -> None:
        """Drive every unfinished root instance to quiescence (post-restart)."""
        for inst in list(self.instances.values()):
            if inst.parent_id is None and inst.state == RUNNING:
                self.run_to_quiescence(inst.id)


def _max_counter(table: Mapping[str, Any], prefix: str) -> int:
    best = 0
    for key in table:
        if key.startswith(prefix):
            try:
                best = max(best, int(key[len(prefix):]))
            except ValueError:
                continue
    return best


def _deploy_checks(definitions, schema: ProductSchema, registry: PluginRegistry,
                   handlers, aggregation_selection) -> None:
    for policy in aggregation_selection.values():
        if policy not in POLICIES:
            raise DeployError(f"unknown aggregation policy {policy!r}")

    for vp in registry.variation_points():
        for desc in registry.registered_for(vp):
            impl = definitions.get(desc.implementation_process)
            if impl is None:
                raise DeployError(
                    f"plugin {desc.plugin_id!r} references missing process "
                    f"{desc.implementation_process!r}"
                )
            if impl.kind != IMPLEMENTATION:
                raise DeployError(
                    f"plugin {desc.plugin_id!r} references {impl.id!r}, "
                    f"which is not an implementation process"
                )

    def resolve(path: str, where: str) -> None:
        parts = path.split(".")
        if parts[0] in RESERVED_ROOTS:
            return
        try:
            schema.resolve(path)
        except SchemaError as exc:
            raise DeployError(f"{where}: {exc}") from exc

    for definition in definitions.values():
        for root in definition.start_inputs:
            if root not in schema.roots:
                raise DeployError(
                    f"process {definition.id!r} requires start input {root!r}, "
                    f"which is not a document root (roots: {list(schema.roots)})"
                )
        for node in definition.nodes:
            where = f"process {definition.id!r} node {node.id!r}"
            for out in node.outputs:
                resolve(out, where)
            if node.type == AUTOMATED_TASK and node.handler not in handlers:
                raise DeployError(f"{where}: unknown handler {node.handler!r}")
            if node.type == VARIATION_POINT:
                for path in node.mapper_inputs:
                    resolve(path, where)
                if node.result_path:
                    resolve(node.result_path, where)
                if node.decision_path:
                    resolve(node.decision_path, where)
        for edge in definition.edges:
            if edge.guard is not None:
                for path in edge.guard.paths():
                    resolve(path, f"process {definition.id!r} guard {edge.guard.source!r}")
