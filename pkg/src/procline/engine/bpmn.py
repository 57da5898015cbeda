"""Importer for a small BPMN-XML subset.

Supported elements: process, startEvent, endEvent, exclusiveGateway,
userTask, serviceTask, callActivity (with a multiInstanceLoopCharacteristics
marker), sequenceFlow with conditionExpression. Anything else is rejected
by name. Namespaces are matched on local names so vendor exports with the
standard BPMN namespace work unchanged.

Attribute mapping to the native format:

    userTask      formRef, outputs (space-separated), label
    serviceTask   handler, outputs, label
    callActivity  registryRef, aggregationPolicyRef, selectionVariableRef,
                  mapperInputs (space-separated), resultPath, decisionPath
    process       id, kind, startInputs (space-separated)
"""

from __future__ import annotations

import xml.etree.ElementTree as ET

from .definition import ProcessDefinition, ProcessError, parse_process

IGNORED = {"documentation", "incoming", "outgoing"}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _split(value: str | None) -> list[str]:
    return value.split() if value else []


def import_bpmn_subset(xml_text: str | bytes) -> ProcessDefinition:
    """Translate a BPMN-XML document into a ProcessDefinition."""
    try:
        root = ET.fromstring(xml_text)
    except ET.ParseError as exc:
        raise ProcessError(f"invalid XML: {exc}") from exc

    if _local(root.tag) == "definitions":
        candidates = [el for el in root if _local(el.tag) == "process"]
        for el in root:
            if _local(el.tag) not in {"process"} | IGNORED:
                raise ProcessError(f"unsupported element <{_local(el.tag)}>")
        if len(candidates) != 1:
            raise ProcessError(f"expected exactly one <process>, found {len(candidates)}")
        process = candidates[0]
    elif _local(root.tag) == "process":
        process = root
    else:
        raise ProcessError(f"unsupported root element <{_local(root.tag)}>")

    doc: dict = {
        "id": process.get("id") or "",
        "kind": process.get("kind", "core"),
    }
    start_inputs = _split(process.get("startInputs"))
    if start_inputs:
        doc["start_inputs"] = start_inputs

    nodes: list[dict] = []
    edges: list[dict] = []
    for el in process:
        tag = _local(el.tag)
        if tag in IGNORED:
            continue
        nid = el.get("id") or ""
        if tag == "startEvent":
            nodes.append({"id": nid, "type": "start_event"})
        elif tag == "endEvent":
            nodes.append({"id": nid, "type": "end_event"})
        elif tag == "exclusiveGateway":
            nodes.append({"id": nid, "type": "exclusive_gateway"})
        elif tag == "userTask":
            node = {"id": nid, "type": "user_task", "form_ref": el.get("formRef")}
            outputs = _split(el.get("outputs"))
            if outputs:
                node["outputs"] = outputs
            if el.get("name"):
                node["label"] = el.get("name")
            nodes.append(node)
        elif tag == "serviceTask":
            node = {"id": nid, "type": "automated_task", "handler": el.get("handler")}
            outputs = _split(el.get("outputs"))
            if outputs:
                node["outputs"] = outputs
            if el.get("name"):
                node["label"] = el.get("name")
            nodes.append(node)
        elif tag == "callActivity":
            markers = [c for c in el if _local(c.tag) == "multiInstanceLoopCharacteristics"]
            extras = [c for c in el if _local(c.tag) not in IGNORED | {"multiInstanceLoopCharacteristics"}]
            if extras:
                raise ProcessError(f"unsupported element <{_local(extras[0].tag)}> inside callActivity {nid!r}")
            if not markers:
                raise ProcessError(
                    f"callActivity {nid!r} without a multi-instance marker is not supported"
                )
            node = {
                "id": nid,
                "type": "variation_point",
                "registry_ref": el.get("registryRef"),
            }
            if el.get("aggregationPolicyRef"):
                node["aggregation_policy_ref"] = el.get("aggregationPolicyRef")
            if el.get("selectionVariableRef"):
                node["selection_variable_ref"] = el.get("selectionVariableRef")
            inputs = _split(el.get("mapperInputs"))
            if inputs:
                node["mapper_inputs"] = inputs
            if el.get("resultPath"):
                node["result_path"] = el.get("resultPath")
            if el.get("decisionPath"):
                node["decision_path"] = el.get("decisionPath")
            if el.get("name"):
                node["label"] = el.get("name")
            nodes.append(node)
        elif tag == "sequenceFlow":
            edge = {"from": el.get("sourceRef"), "to": el.get("targetRef")}
            for child in el:
                ctag = _local(child.tag)
                if ctag == "conditionExpression":
                    edge["guard"] = (child.text or "").strip()
                elif ctag not in IGNORED:
                    raise ProcessError(f"unsupported element <{ctag}> inside sequenceFlow")
            edges.append(edge)
        else:
            raise ProcessError(f"unsupported element <{tag}>")

    doc["nodes"] = nodes
    doc["edges"] = edges
    return parse_process(doc)
