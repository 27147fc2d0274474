"""Structured run log: one record per state mutation, one JSON object per line."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable


@dataclass
class EventRecord:
    tick: int
    component: str
    event: str
    details: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "tick": self.tick,
                "component": self.component,
                "event": self.event,
                "details": dict(sorted(self.details.items())),
            },
            separators=(",", ":"),
        )


@dataclass
class EventLog:
    """Append-only record list; an optional sink receives each line as emitted."""

    records: list[EventRecord] = field(default_factory=list)
    sink: Callable[[str], None] | None = None

    def emit(self, tick: int, component: str, event: str, **details) -> None:
        record = EventRecord(tick, component, event, details)
        self.records.append(record)
        if self.sink is not None:
            self.sink(record.to_json())

    def lines(self) -> list[str]:
        return [record.to_json() for record in self.records]
