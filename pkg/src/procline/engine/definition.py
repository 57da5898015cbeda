"""Process definitions: parsing, structural validation, guard probing.

A process document is JSON:

    {
      "id": "parking-permit",
      "kind": "core" | "implementation",
      "start_inputs": ["application"],            # core only, optional
      "guard_domains": {"decision.justified": [true, false]},   # optional
      "nodes": [...],
      "edges": [{"from": "a", "to": "b", "guard": "expr"?}]
    }

Node types: start_event, end_event, exclusive_gateway, user_task,
automated_task, variation_point. Guards appear only on gateway outgoing
edges and must be exhaustive and mutually exclusive, which is checked at
parse time by probing every combination of a finite per-path domain
(declared via guard_domains or derived from the guards' own literals).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Any

from .expr import Expression, ExpressionError, parse_expression

START = "start_event"
END = "end_event"
GATEWAY = "exclusive_gateway"
USER_TASK = "user_task"
AUTOMATED_TASK = "automated_task"
VARIATION_POINT = "variation_point"

NODE_TYPES = {START, END, GATEWAY, USER_TASK, AUTOMATED_TASK, VARIATION_POINT}

CORE = "core"
IMPLEMENTATION = "implementation"

PROBE_CAP = 10_000


class ProcessError(ValueError):
    def __init__(self, message: str, where: str = "") -> None:
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True)
class ProcessNode:
    id: str
    type: str
    form_ref: str | None = None
    outputs: tuple[str, ...] = ()
    handler: str | None = None
    registry_ref: str | None = None
    aggregation_policy_ref: str | None = None
    selection_variable_ref: str | None = None
    mapper_inputs: tuple[str, ...] = ()
    result_path: str | None = None
    decision_path: str | None = None
    label: str | None = None


@dataclass(frozen=True)
class ProcessEdge:
    source: str
    target: str
    guard: Expression | None = None


@dataclass(frozen=True)
class ProcessDefinition:
    id: str
    kind: str
    nodes: tuple[ProcessNode, ...]
    edges: tuple[ProcessEdge, ...]
    start_inputs: tuple[str, ...] = ()
    guard_domains: dict = field(default_factory=dict, compare=False, hash=False)

    def node(self, node_id: str) -> ProcessNode:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def outgoing(self, node_id: str) -> tuple[ProcessEdge, ...]:
        return tuple(e for e in self.edges if e.source == node_id)

    def start_node(self) -> ProcessNode:
        return next(n for n in self.nodes if n.type == START)

    def variation_points(self) -> tuple[ProcessNode, ...]:
        return tuple(n for n in self.nodes if n.type == VARIATION_POINT)

    def task_node(self) -> ProcessNode:
        """The single task of an implementation-shaped process."""
        return next(n for n in self.nodes if n.type in (USER_TASK, AUTOMATED_TASK))

    def to_doc(self) -> dict:
        doc: dict[str, Any] = {"id": self.id, "kind": self.kind}
        if self.start_inputs:
            doc["start_inputs"] = list(self.start_inputs)
        if self.guard_domains:
            doc["guard_domains"] = self.guard_domains
        nodes = []
        for n in self.nodes:
            raw: dict[str, Any] = {"id": n.id, "type": n.type}
            if n.form_ref:
                raw["form_ref"] = n.form_ref
            if n.outputs:
                raw["outputs"] = list(n.outputs)
            if n.handler:
                raw["handler"] = n.handler
            if n.registry_ref:
                raw["registry_ref"] = n.registry_ref
            if n.aggregation_policy_ref:
                raw["aggregation_policy_ref"] = n.aggregation_policy_ref
            if n.selection_variable_ref:
                raw["selection_variable_ref"] = n.selection_variable_ref
            if n.mapper_inputs:
                raw["mapper_inputs"] = list(n.mapper_inputs)
            if n.result_path:
                raw["result_path"] = n.result_path
            if n.decision_path:
                raw["decision_path"] = n.decision_path
            if n.label:
                raw["label"] = n.label
            nodes.append(raw)
        doc["nodes"] = nodes
        edges = []
        for e in self.edges:
            raw = {"from": e.source, "to": e.target}
            if e.guard is not None:
                raw["guard"] = e.guard.source
            edges.append(raw)
        doc["edges"] = edges
        return doc


def _expect(cond: bool, message: str, where: str) -> None:
    if not cond:
        raise ProcessError(message, where)


def parse_process(doc: dict | str | bytes) -> ProcessDefinition:
    """Parse and structurally validate a process document."""
    if isinstance(doc, (str, bytes)):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ProcessError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    _expect(isinstance(doc, dict), "document must be a JSON object", "$")

    proc_id = doc.get("id")
    _expect(isinstance(proc_id, str) and bool(proc_id), "process id must be a non-empty string", "id")
    kind = doc.get("kind", CORE)
    _expect(kind in (CORE, IMPLEMENTATION), f"kind must be 'core' or 'implementation', got {kind!r}", "kind")

    start_inputs = tuple(doc.get("start_inputs", ()))
    for si in start_inputs:
        _expect(isinstance(si, str), "start_inputs entries must be strings", "start_inputs")
    guard_domains = doc.get("guard_domains", {})
    _expect(isinstance(guard_domains, dict), "guard_domains must be an object", "guard_domains")

    raw_nodes = doc.get("nodes")
    _expect(isinstance(raw_nodes, list) and raw_nodes, "nodes must be a non-empty list", "nodes")
    nodes: list[ProcessNode] = []
    ids: set[str] = set()
    for ni, raw in enumerate(raw_nodes):
        where = f"nodes[{ni}]"
        _expect(isinstance(raw, dict), "node must be an object", where)
        nid = raw.get("id")
        _expect(isinstance(nid, str) and bool(nid), "node id must be a non-empty string", f"{where}.id")
        _expect(nid not in ids, f"duplicate node id {nid!r}", f"{where}.id")
        ids.add(nid)
        ntype = raw.get("type")
        _expect(ntype in NODE_TYPES, f"unknown node type {ntype!r}", f"{where}.type")

        outputs = tuple(raw.get("outputs", ()))
        for out in outputs:
            _expect(isinstance(out, str) and bool(out), "outputs entries must be non-empty strings", f"{where}.outputs")
        if ntype == USER_TASK:
            _expect(isinstance(raw.get("form_ref"), str) and bool(raw.get("form_ref")),
                    "user_task needs a form_ref", f"{where}.form_ref")
        if ntype == AUTOMATED_TASK:
            _expect(isinstance(raw.get("handler"), str) and bool(raw.get("handler")),
                    "automated_task needs a handler", f"{where}.handler")
        if ntype == VARIATION_POINT:
            _expect(isinstance(raw.get("registry_ref"), str) and bool(raw.get("registry_ref")),
                    "variation_point needs a registry_ref", f"{where}.registry_ref")
            has_result = raw.get("result_path") is not None
            has_decision = raw.get("decision_path") is not None
            _expect(has_result == has_decision,
                    "result_path and decision_path come together", where)

        nodes.append(ProcessNode(
            id=nid,
            type=ntype,
            form_ref=raw.get("form_ref"),
            outputs=outputs,
            handler=raw.get("handler"),
            registry_ref=raw.get("registry_ref"),
            aggregation_policy_ref=raw.get("aggregation_policy_ref"),
            selection_variable_ref=raw.get("selection_variable_ref"),
            mapper_inputs=tuple(raw.get("mapper_inputs", ())),
            result_path=raw.get("result_path"),
            decision_path=raw.get("decision_path"),
            label=raw.get("label"),
        ))

    by_id = {n.id: n for n in nodes}
    raw_edges = doc.get("edges")
    _expect(isinstance(raw_edges, list), "edges must be a list", "edges")
    edges: list[ProcessEdge] = []
    for ei, raw in enumerate(raw_edges):
        where = f"edges[{ei}]"
        _expect(isinstance(raw, dict), "edge must be an object", where)
        src, dst = raw.get("from"), raw.get("to")
        _expect(src in by_id, f"unknown source node {src!r}", f"{where}.from")
        _expect(dst in by_id, f"unknown target node {dst!r}", f"{where}.to")
        guard_text = raw.get("guard")
        guard = None
        if guard_text is not None:
            _expect(by_id[src].type == GATEWAY, "guards are allowed only on gateway outgoing edges", f"{where}.guard")
            try:
                guard = parse_expression(guard_text)
            except ExpressionError as exc:
                raise ProcessError(f"bad guard: {exc}", f"{where}.guard") from exc
        edges.append(ProcessEdge(src, dst, guard))

    definition = ProcessDefinition(proc_id, kind, tuple(nodes), tuple(edges), start_inputs, guard_domains)
    _check_structure(definition)
    _check_guards(definition)
    if kind == IMPLEMENTATION:
        check_implementation_shape(definition)
    return definition


def _check_structure(d: ProcessDefinition) -> None:
    starts = [n for n in d.nodes if n.type == START]
    _expect(len(starts) == 1, f"expected exactly one start_event, found {len(starts)}", "nodes")
    ends = [n for n in d.nodes if n.type == END]
    _expect(len(ends) >= 1, "expected at least one end_event", "nodes")

    incoming: dict[str, int] = {n.id: 0 for n in d.nodes}
    outgoing: dict[str, int] = {n.id: 0 for n in d.nodes}
    for e in d.edges:
        incoming[e.target] += 1
        outgoing[e.source] += 1

    start = starts[0]
    _expect(incoming[start.id] == 0, "start_event must have no incoming edges", f"nodes[{start.id}]")
    _expect(outgoing[start.id] == 1, "start_event must have exactly one outgoing edge", f"nodes[{start.id}]")
    for n in d.nodes:
        if n.type == END:
            _expect(outgoing[n.id] == 0, "end_event must have no outgoing edges", f"nodes[{n.id}]")
        elif n.type == GATEWAY:
            _expect(outgoing[n.id] >= 2, "exclusive_gateway needs at least two outgoing edges", f"nodes[{n.id}]")
            for e in d.edges:
                if e.source == n.id:
                    _expect(e.guard is not None, "gateway outgoing edges need guards", f"nodes[{n.id}]")
        elif n.type != START:
            _expect(outgoing[n.id] == 1, f"{n.type} must have exactly one outgoing edge", f"nodes[{n.id}]")

    # reachability from the start node
    seen = {start.id}
    frontier = [start.id]
    succ: dict[str, list[str]] = {}
    for e in d.edges:
        succ.setdefault(e.source, []).append(e.target)
    while frontier:
        for nxt in succ.get(frontier.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    unreachable = sorted(set(n.id for n in d.nodes) - seen)
    _expect(not unreachable, f"unreachable nodes: {unreachable}", "nodes")


def check_implementation_shape(d: ProcessDefinition) -> None:
    """start -> one task (user or automated) -> end, nothing else."""
    kinds = sorted(n.type for n in d.nodes)
    ok = len(d.nodes) == 3 and kinds.count(START) == 1 and kinds.count(END) == 1 and (
        USER_TASK in kinds or AUTOMATED_TASK in kinds
    )
    if ok:
        task = d.task_node()
        start = d.start_node()
        end = next(n for n in d.nodes if n.type == END)
        wanted = {(start.id, task.id), (task.id, end.id)}
        ok = {(e.source, e.target) for e in d.edges} == wanted
    if not ok:
        raise ProcessError(
            f"implementation process {d.id!r} must be start -> task -> end",
            "nodes",
        )


# -- guard probing --------------------------------------------------------


def _derived_domain(path: str, guards: list[Expression]) -> list:
    literals: list = []
    bare = False
    for g in guards:
        literals.extend(g.literals_for(path))
        if path in g.bare_paths():
            bare = True
    values: list = []
    numbers = sorted({v for v in literals if isinstance(v, (int, float)) and not isinstance(v, bool)})
    strings = [v for v in literals if isinstance(v, str)]
    booleans = any(isinstance(v, bool) for v in literals)
    if numbers:
        for i, c in enumerate(numbers):
            values.extend([c - 1, c, c + 1])
            if i + 1 < len(numbers):
                values.append((c + numbers[i + 1]) / 2)
    if strings:
        values.extend(sorted(set(strings)))
        values.append("\x00none-of-the-known-strings")
    if booleans or bare or (not numbers and not strings):
        values.extend([True, False])
    seen: list = []
    for v in values:
        if not any(type(v) is type(s) and v == s for s in seen):
            seen.append(v)
    return seen


def _check_guards(d: ProcessDefinition) -> None:
    for node in d.nodes:
        if node.type != GATEWAY:
            continue
        out = [e for e in d.edges if e.source == node.id]
        guards = [e.guard for e in out]
        paths = sorted({p for g in guards for p in g.paths()})
        _expect(bool(paths), "gateway guards reference no document paths", f"nodes[{node.id}]")
        domains: list[list] = []
        for path in paths:
            declared = d.guard_domains.get(path)
            domain = list(declared) if declared else _derived_domain(path, guards)
            _expect(bool(domain), f"empty probe domain for {path!r}", f"nodes[{node.id}]")
            domains.append(domain)
        combos = 1
        for dom in domains:
            combos *= len(dom)
        _expect(
            combos <= PROBE_CAP,
            f"guard probe domain too large ({combos} assignments; declare guard_domains)",
            f"nodes[{node.id}]",
        )
        for assignment in itertools.product(*domains):
            env = dict(zip(paths, assignment))
            hits = []
            for e in out:
                try:
                    if e.guard.evaluate(lambda p: env[p]):
                        hits.append(e.target)
                except ExpressionError as exc:
                    raise ProcessError(
                        f"guard {e.guard.source!r} not evaluable over probe {env}: {exc}",
                        f"nodes[{node.id}]",
                    ) from exc
            witness = ", ".join(f"{k}={v!r}" for k, v in env.items())
            _expect(
                len(hits) != 0,
                f"guards are not exhaustive (no edge taken when {witness})",
                f"nodes[{node.id}]",
            )
            _expect(
                len(hits) == 1,
                f"guards overlap (edges to {hits} all taken when {witness})",
                f"nodes[{node.id}]",
            )
