"""Test doubles for the external systems the permit handlers talk to."""

from __future__ import annotations

import threading
import time


class CommercialRegisterStub:
    """In-memory commercial register.

    ``fail_times`` makes the next N lookups raise, which is how tests drive
    the retry and incident paths. ``latency`` stretches lookups to widen
    concurrency windows.
    """

    def __init__(self, entries: dict[str, str] | None = None,
                 latency: float = 0.0, fail_times: int = 0) -> None:
        self.entries = dict(entries or {})
        self.latency = latency
        self.fail_times = fail_times
        self.calls = 0
        self._lock = threading.Lock()

    def lookup(self, company_name: str) -> str | None:
        with self._lock:
            self.calls += 1
            if self.fail_times > 0:
                self.fail_times -= 1
                raise RuntimeError("commercial register unreachable")
        if self.latency:
            time.sleep(self.latency)
        return self.entries.get(company_name)


class NotificationGatewayStub:
    """Collects outgoing notifications instead of sending them."""

    def __init__(self) -> None:
        self.messages: list[dict] = []
        self._lock = threading.Lock()

    def send(self, **message) -> None:
        with self._lock:
            self.messages.append(message)

    def outbox(self) -> list[dict]:
        with self._lock:
            return list(self.messages)

    def reset(self) -> None:
        with self._lock:
            self.messages.clear()
