"""Simulation clock and the timestamped event trace emitted by every engine."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

# Record kinds accepted by EventTrace.emit.
KIND_STATE = "state-change"
KIND_SAMPLE = "current-sample"
KIND_JOINT = "joint-event"
KIND_ACTION = "action"
KIND_ERROR = "error"

_KINDS = (KIND_STATE, KIND_SAMPLE, KIND_JOINT, KIND_ACTION, KIND_ERROR)


class TraceError(ValueError):
    """An emitted record violated a trace invariant."""


@dataclass
class SimClock:
    """Discrete simulation clock; time is always tick_count * dt."""

    dt_s: float = 0.010
    ticks: int = 0

    @property
    def now(self) -> float:
        return self.ticks * self.dt_s

    def tick(self) -> float:
        self.ticks += 1
        return self.now

    def advance(self, seconds: float) -> float:
        """Advance by whole ticks covering at least `seconds` (no-op for <= 0)."""
        if seconds > 0:
            n = int(seconds / self.dt_s)
            if n * self.dt_s < seconds:
                n += 1
            self.ticks += n
        return self.now


@dataclass(frozen=True)
class TraceEvent:
    time_s: float
    subject: str
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {"time_s": self.time_s, "subject": self.subject, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )


@dataclass
class EventTrace:
    """Ordered telemetry records.

    Invariants enforced at emit time: timestamps never decrease, and every
    state-change record names two adjacent states on the actuation path.
    """

    events: list[TraceEvent] = field(default_factory=list)

    def emit(self, time_s: float, subject: str, kind: str, payload: dict) -> TraceEvent:
        if kind not in _KINDS:
            raise TraceError(f"unknown event kind: {kind!r}")
        if self.events and time_s < self.events[-1].time_s:
            raise TraceError(f"timestamp regressed: {time_s} after {self.events[-1].time_s}")
        if kind == KIND_STATE:
            src, dst = payload["from"], payload["to"]
            if abs(_STATE_INDEX[src] - _STATE_INDEX[dst]) != 1:
                raise TraceError(f"non-adjacent state change {src} -> {dst}")
        ev = TraceEvent(time_s, subject, kind, dict(payload))
        self.events.append(ev)
        return ev

    def by_kind(self, kind: str, subject: str | None = None) -> list[TraceEvent]:
        return [
            e for e in self.events
            if e.kind == kind and (subject is None or e.subject == subject)
        ]

    def state_sequence(self, subject: str) -> list[str]:
        """States visited by `subject`: the first record's origin, then each target."""
        changes = self.by_kind(KIND_STATE, subject)
        if not changes:
            return []
        return [changes[0].payload["from"]] + [e.payload["to"] for e in changes]

    def commanded_subjects(self) -> set[str]:
        """Subjects that moved under their own servo command (not back-drive)."""
        return {
            e.subject for e in self.events
            if e.kind == KIND_STATE and e.payload.get("via") == "command"
        }

    def max_current_ma(self, subject: str | None = None) -> float:
        samples = self.by_kind(KIND_SAMPLE, subject)
        return max((e.payload["current_ma"] for e in samples), default=0.0)

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)


# Filled in by couplesim.connector at import time to avoid a circular import;
# maps state wire names to their path index for the adjacency check.
_STATE_INDEX: dict[str, int] = {}


def _register_states(index: dict[str, int]) -> None:
    _STATE_INDEX.clear()
    _STATE_INDEX.update(index)
