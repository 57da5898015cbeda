"""Append-only execution journal and its mechanical replay.

One line-delimited JSON record per state change:

    {"seq": 17, "instance_id": "i-00000001", "event": "variable_written",
     "payload": {...}, "version": 3}

``seq`` is strictly increasing per journal file. Replay folds the records
back into instance/task/incident snapshots without consulting the engine,
so a journal is sufficient to reconstruct the state it describes.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Any, Iterator

from .schema import canonical_json


class JournalCorruption(ValueError):
    def __init__(self, message: str, last_good_seq: int | None = None) -> None:
        self.last_good_seq = last_good_seq
        if last_good_seq is not None:
            message = f"{message} (last good seq {last_good_seq})"
        super().__init__(message)


class Journal:
    """Writer with a process-wide monotone sequence, one file per runtime."""

    FILENAME = "journal.ndjson"

    def __init__(self, directory: str | os.PathLike | None) -> None:
        self._lock = threading.Lock()
        self._seq = 0
        self._fh = None
        self.path: Path | None = None
        if directory is not None:
            directory = Path(directory)
            directory.mkdir(parents=True, exist_ok=True)
            self.path = directory / self.FILENAME
            if self.path.exists():
                for record in iter_records(self.path):
                    self._seq = record["seq"]
            self._fh = self.path.open("a", encoding="utf-8")

    def append(self, instance_id: str, event: str, payload: dict, version: int) -> dict:
        with self._lock:
            self._seq += 1
            record = {
                "seq": self._seq,
                "instance_id": instance_id,
                "event": event,
                "payload": payload,
                "version": version,
            }
            if self._fh is not None:
                self._fh.write(canonical_json(record) + "\n")
                self._fh.flush()
            return record

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None


def iter_records(path: str | os.PathLike) -> Iterator[dict]:
    """Yield records, raising JournalCorruption on damage."""
    last_seq = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.rstrip("\n")
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                raise JournalCorruption(
                    f"line {lineno} is not valid JSON ({exc.msg}); journal truncated or damaged",
                    last_good_seq=last_seq,
                ) from exc
            seq = record.get("seq")
            if not isinstance(seq, int) or seq != last_seq + 1:
                raise JournalCorruption(
                    f"line {lineno} has seq {seq!r}, expected {last_seq + 1}",
                    last_good_seq=last_seq,
                )
            last_seq = seq
            yield record


def replay(path: str | os.PathLike) -> "ReplayState":
    """Fold a journal into snapshots; raises JournalCorruption on damage."""
    state = ReplayState()
    for record in iter_records(path):
        state.apply(record)
    return state


class ReplayState:
    """Mechanically reconstructed runtime state."""

    def __init__(self) -> None:
        self.instances: dict[str, dict] = {}
        self.tasks: dict[str, dict] = {}
        self.incidents: dict[str, dict] = {}
        self.last_seq = 0
        # per-instance document history: version -> canonical doc json
        self.doc_history: dict[str, dict[int, str]] = {}

    def apply(self, record: dict) -> None:
        self.last_seq = record["seq"]
        iid = record["instance_id"]
        event = record["event"]
        payload = record["payload"]
        if event == "instance_created":
            doc = json.loads(canonical_json(payload["variables"]))
            self.instances[iid] = {
                "instance_id": iid,
                "definition_id": payload["definition_id"],
                "parent_id": payload.get("parent_id"),
                "vp_node": payload.get("vp_node"),
                "plugin_id": payload.get("plugin_id"),
                "state": "running",
                "variables": doc,
                "version": 0,
                "tokens": payload.get("tokens", []),
                "cancelled": False,
                "selections": payload.get("selections", {}),
                "children": {},
            }
            self.doc_history[iid] = {0: canonical_json(doc)}
        elif event == "variable_written":
            inst = self.instances[iid]
            chain = payload["path"].split(".") if isinstance(payload["path"], str) else payload["path"]
            current = inst["variables"]
            for part in chain[:-1]:
                current = current.setdefault(part, {})
            current[chain[-1]] = payload["value"]
            inst["version"] = record["version"]
            self.doc_history[iid][record["version"]] = canonical_json(inst["variables"])
        elif event == "tokens":
            self.instances[iid]["tokens"] = list(payload["tokens"])
        elif event == "state":
            self.instances[iid]["state"] = payload["state"]
        elif event == "task_opened":
            task = dict(payload)
            task["instance_id"] = iid
            task["state"] = "open"
            self.tasks[payload["task_id"]] = task
        elif event == "task_completed":
            self.tasks[payload["task_id"]]["state"] = "completed"
        elif event == "task_cancelled":
            self.tasks[payload["task_id"]]["state"] = "cancelled"
        elif event == "child_spawned":
            inst = self.instances[iid]
            inst["children"].setdefault(payload["vp_node"], []).append(payload["child_id"])
        elif event == "children_joined":
            pass  # decisions land via variable_written; kept for audit
        elif event == "incident_opened":
            incident = dict(payload)
            incident["instance_id"] = iid
            incident["state"] = "open"
            self.incidents[payload["incident_id"]] = incident
        elif event == "incident_resolved":
            self.incidents[payload["incident_id"]]["state"] = "resolved"
        elif event == "child_cancelled":
            self.instances[iid]["cancelled"] = True
        elif event == "instance_completed":
            self.instances[iid]["state"] = "completed"
        else:
            raise JournalCorruption(f"unknown event {event!r} at seq {record['seq']}")

    def open_tasks(self) -> list[dict]:
        return sorted(
            (t for t in self.tasks.values() if t["state"] == "open"),
            key=lambda t: t["task_id"],
        )

    def snapshot(self, instance_id: str) -> dict:
        inst = self.instances[instance_id]
        return snapshot_view(inst, self.tasks, self.incidents)


def snapshot_view(inst: dict, tasks: dict[str, dict], incidents: dict[str, dict]) -> dict:
    """Canonical comparable view of one instance."""
    open_tasks = sorted(
        t["task_id"] for t in tasks.values()
        if t["instance_id"] == inst["instance_id"] and t["state"] == "open"
    )
    open_incidents = sorted(
        i["incident_id"] for i in incidents.values()
        if i["instance_id"] == inst["instance_id"] and i["state"] == "open"
    )
    return {
        "instance_id": inst["instance_id"],
        "definition_id": inst["definition_id"],
        "parent_id": inst.get("parent_id"),
        "vp_node": inst.get("vp_node"),
        "plugin_id": inst.get("plugin_id"),
        "state": inst["state"],
        "variables": inst["variables"],
        "version": inst["version"],
        "tokens": sorted(inst["tokens"]),
        "cancelled": inst["cancelled"],
        "selections": inst.get("selections", {}),
        "open_tasks": open_tasks,
        "open_incidents": open_incidents,
    }
