"""Pairwise face protocols: single-sided coupling and both decoupling routes.

Every procedure here is driven from exactly one of the two mated faces.
Coupling: the initiator (starting flush, female-locked) walks its latch out
to MALE_LOCK into the peer's recess; the peer never moves.  Decoupling from
the male side simply reverses that walk.  Decoupling from the female side
exploits back-drivability: the controlled female latch drives itself to
MALE_LOCK while dragging the torque-free peer from MALE_LOCK down to
FEMALE_LOCK through the engagement (role reversal), then finishes with the
ordinary male-side retreat.  A locked joint is pure mechanics: it survives
any power state on either side and is only destroyed by these procedures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .config import DEFAULT_CONFIG, SimConfig
from .connector import (
    Connector,
    ConnectorState,
    TransitionOutcome,
    command_transition,
)
from .trace import KIND_ACTION, KIND_ERROR, KIND_JOINT, EventTrace, SimClock


class FaceKind(Enum):
    ACTIVE = "active"    # carries a latch and servo
    PASSIVE = "passive"  # permanently flush female recess, no actuator
    BLANK = "blank"      # structural surface, cannot joint

    @classmethod
    def from_wire(cls, name: str) -> "FaceKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown face kind: {name!r}") from None


@dataclass
class Face:
    """One module face. `addr` is globally unique ("<module>:<face>" in a world)."""

    addr: str
    kind: FaceKind
    connector: Connector | None = None
    joint: "Joint | None" = None

    def __post_init__(self) -> None:
        if (self.kind is FaceKind.ACTIVE) != (self.connector is not None):
            raise ValueError(f"{self.addr}: active faces carry a connector, others must not")

    @property
    def flat(self) -> bool:
        """Flush with the module surface (safe to slide past)."""
        if self.kind is FaceKind.ACTIVE:
            return self.connector.state.flat
        return True  # passive and blank faces have no moving parts

    @property
    def open_female(self) -> bool:
        """Accepts an incoming male latch right now."""
        if self.joint is not None:
            return False
        if self.kind is FaceKind.PASSIVE:
            return True
        return self.kind is FaceKind.ACTIVE and self.connector.state is ConnectorState.FEMALE_LOCK

    def can_actuate(self) -> bool:
        return self.kind is FaceKind.ACTIVE and self.connector.servo.powered


@dataclass
class Misalignment:
    """Residual placement error at coupling time, in the face plane.

    Out-of-plane error (gap, roll, pitch) is taken out by whatever presses
    the two surfaces flush, so only in-plane offsets and yaw remain.
    """

    dx_mm: float = 0.0
    dy_mm: float = 0.0
    dyaw_deg: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dx_mm, self.dy_mm, self.dyaw_deg)


@dataclass
class Joint:
    """A live mechanical coupling between two faces."""

    male: Face
    female: Face
    locked: bool = True
    electrical: bool = True
    relative_yaw: int = 0

    def __post_init__(self) -> None:
        if self.relative_yaw % 90 != 0 or not 0 <= self.relative_yaw < 360:
            raise ValueError(f"relative yaw must be one of 0/90/180/270, got {self.relative_yaw}")

    @property
    def key(self) -> tuple[str, str]:
        return (self.male.addr, self.female.addr)

    def faces(self) -> tuple[Face, Face]:
        return (self.male, self.female)


class Failure(Enum):
    MISALIGNED = "misaligned"
    NOT_ADJACENT = "not-adjacent"
    TARGET_NOT_FEMALE = "target-not-female"
    INITIATOR_UNPOWERED = "initiator-unpowered"
    INITIATOR_BUSY = "initiator-busy"
    BLANK_FACE = "blank-face"
    NO_JOINT = "no-joint"
    MALE_UNPOWERED = "male-unpowered"
    FEMALE_SIDE_NOT_ACTIVE = "female-side-not-active"
    FEMALE_UNPOWERED = "female-unpowered"
    BACK_DRIVE_RESISTED = "back-drive-resisted"


@dataclass
class ProtocolResult:
    ok: bool
    failure: Failure | None = None
    joint: Joint | None = None
    # States visited by the commanded side and by the uncommanded side
    # (the latter only ever moves by back-drive).
    initiator_states: list[ConnectorState] = field(default_factory=list)
    peer_states: list[ConnectorState] = field(default_factory=list)


def check_alignment(mis: Misalignment, config: SimConfig = DEFAULT_CONFIG) -> bool:
    """True when the residual error is inside the capture envelope.

    The boundary is closed: exactly 2.5 mm / 2.5 deg passes.  Yaw is judged
    against the nearest quarter-turn, since the hook pattern repeats every
    90 degrees.
    """
    values = mis.as_tuple()
    if not all(math.isfinite(v) for v in values):
        return False
    residual_yaw = mis.dyaw_deg % 90.0
    if residual_yaw > 45.0:
        residual_yaw -= 90.0
    return (abs(mis.dx_mm) <= config.xy_tolerance_mm
            and abs(mis.dy_mm) <= config.xy_tolerance_mm
            and abs(residual_yaw) <= config.yaw_tolerance_deg)


def _fail(trace: EventTrace | None, clock: SimClock, subject: str, op: str,
          failure: Failure, **extra) -> ProtocolResult:
    if trace is not None:
        trace.emit(clock.now, subject, KIND_ERROR, {"op": op, "reason": failure.value, **extra})
    return ProtocolResult(False, failure)


def couple(initiator: Face, target: Face, mis: Misalignment | None = None,
           config: SimConfig = DEFAULT_CONFIG, *,
           trace: EventTrace | None = None,
           clock: SimClock | None = None,
           relative_yaw: int = 0) -> ProtocolResult:
    """Single-sided coupling: the initiator alone walks out to MALE_LOCK.

    The target face contributes nothing but its recess; it may be passive or
    an unpowered latch.  A residual out of tolerance presents as resistance
    on the protruding stage, so the current monitor aborts the attempt and
    the initiator retreats home with no joint formed.
    """
    mis = mis or Misalignment()
    clock = clock or SimClock(config.dt_s)

    if target.kind is FaceKind.BLANK:
        return _fail(trace, clock, initiator.addr, "couple", Failure.BLANK_FACE, target=target.addr)
    if initiator.kind is not FaceKind.ACTIVE or not initiator.can_actuate():
        return _fail(trace, clock, initiator.addr, "couple", Failure.INITIATOR_UNPOWERED)
    if initiator.joint is not None or initiator.connector.state is not ConnectorState.FEMALE_LOCK:
        return _fail(trace, clock, initiator.addr, "couple", Failure.INITIATOR_BUSY)
    if not target.open_female:
        return _fail(trace, clock, initiator.addr, "couple", Failure.TARGET_NOT_FEMALE,
                     target=target.addr)

    if trace is not None:
        trace.emit(clock.now, initiator.addr, KIND_ACTION, {
            "op": "couple", "target": target.addr, "misalignment": list(mis.as_tuple()),
        })

    resistance = not check_alignment(mis, config)
    result = command_transition(initiator.connector, ConnectorState.MALE_LOCK, config,
                                trace=trace, clock=clock, external_resistance=resistance)
    if result.outcome is TransitionOutcome.BLOCKED:
        out = _fail(trace, clock, initiator.addr, "couple", Failure.MISALIGNED,
                    states=[s.wire_name for s in result.states])
        out.initiator_states = result.states
        return out
    assert result.outcome is TransitionOutcome.COMPLETED

    electrical = (target.kind is FaceKind.ACTIVE) or config.passive_electrical_contact
    joint = Joint(male=initiator, female=target, locked=True,
                  electrical=electrical, relative_yaw=relative_yaw % 360)
    initiator.joint = joint
    target.joint = joint
    initiator.connector.engaged_with = target.addr
    if target.connector is not None:
        target.connector.engaged_with = initiator.addr
    if trace is not None:
        trace.emit(clock.now, initiator.addr, KIND_JOINT, {
            "event": "created", "male": initiator.addr, "female": target.addr,
            "electrical": electrical, "relative_yaw": joint.relative_yaw,
        })
    return ProtocolResult(True, joint=joint, initiator_states=result.states)


def _destroy(joint: Joint, trace: EventTrace | None, clock: SimClock) -> None:
    joint.locked = False
    for face in joint.faces():
        face.joint = None
        if face.connector is not None:
            face.connector.engaged_with = None
    if trace is not None:
        trace.emit(clock.now, joint.male.addr, KIND_JOINT, {
            "event": "destroyed", "male": joint.male.addr, "female": joint.female.addr,
        })


def decouple_from_male(joint: Joint, config: SimConfig = DEFAULT_CONFIG, *,
                       trace: EventTrace | None = None,
                       clock: SimClock | None = None) -> ProtocolResult:
    """Reverse the coupling walk on the male side only; the female side never moves."""
    clock = clock or SimClock(config.dt_s)
    male = joint.male
    if not joint.locked:
        return _fail(trace, clock, male.addr, "decouple-male", Failure.NO_JOINT)
    if not male.can_actuate():
        return _fail(trace, clock, male.addr, "decouple-male", Failure.MALE_UNPOWERED)

    if trace is not None:
        trace.emit(clock.now, male.addr, KIND_ACTION, {
            "op": "decouple-male", "female": joint.female.addr,
        })
    result = command_transition(male.connector, ConnectorState.FEMALE_LOCK, config,
                                trace=trace, clock=clock)
    assert result.outcome is TransitionOutcome.COMPLETED
    _destroy(joint, trace, clock)
    return ProtocolResult(True, initiator_states=result.states)


def decouple_from_female(joint: Joint, config: SimConfig = DEFAULT_CONFIG, *,
                         trace: EventTrace | None = None,
                         clock: SimClock | None = None) -> ProtocolResult:
    """Seven-stage decoupling driven entirely by the female side.

    The female latch drives out to MALE_LOCK while back-driving the
    torque-free peer down to FEMALE_LOCK; with the roles reversed it then
    performs the ordinary male-side retreat.  The peer must be unpowered or
    must release torque first: if it is powered and reachable over the
    joint's electrical contact, a release is negotiated; powered and
    unreachable means the hooks cannot be forced.
    """
    clock = clock or SimClock(config.dt_s)
    female, male = joint.female, joint.male
    if not joint.locked:
        return _fail(trace, clock, female.addr, "decouple-female", Failure.NO_JOINT)
    if female.kind is not FaceKind.ACTIVE:
        return _fail(trace, clock, female.addr, "decouple-female", Failure.FEMALE_SIDE_NOT_ACTIVE)
    if not female.can_actuate():
        return _fail(trace, clock, female.addr, "decouple-female", Failure.FEMALE_UNPOWERED)

    peer = male.connector
    if peer.servo.holding:
        if not joint.electrical:
            return _fail(trace, clock, female.addr, "decouple-female",
                         Failure.BACK_DRIVE_RESISTED, male=male.addr)
        # Peer is alive and on the shared bus: tell it to go limp.
        peer.servo.torque_released = True
        if trace is not None:
            trace.emit(clock.now, female.addr, KIND_ACTION, {
                "op": "torque-release", "male": male.addr,
            })

    if trace is not None:
        trace.emit(clock.now, female.addr, KIND_ACTION, {
            "op": "decouple-female", "male": male.addr,
        })

    # Role reversal: drive out while dragging the peer home through the hooks.
    reversal = command_transition(female.connector, ConnectorState.MALE_LOCK, config,
                                  trace=trace, clock=clock, back_drive_peer=peer)
    assert reversal.outcome is TransitionOutcome.COMPLETED
    assert peer.state is ConnectorState.FEMALE_LOCK
    joint.male, joint.female = female, male
    if trace is not None:
        trace.emit(clock.now, female.addr, KIND_JOINT, {
            "event": "role-reversed", "male": female.addr, "female": male.addr,
        })

    retreat = command_transition(female.connector, ConnectorState.FEMALE_LOCK, config,
                                 trace=trace, clock=clock)
    assert retreat.outcome is TransitionOutcome.COMPLETED
    _destroy(joint, trace, clock)
    return ProtocolResult(True,
                          initiator_states=reversal.states + retreat.states[1:],
                          peer_states=reversal.peer_states)


def holds_when_unpowered(joint: Joint) -> bool:
    """A locked joint is retained by hook geometry alone; power is irrelevant.

    Nothing in the engine destroys a joint except the two decoupling
    procedures, so this always holds for a locked joint.  Raises on an
    unlocked one (there is nothing to retain).
    """
    if not joint.locked:
        raise ValueError("joint is not locked; retention does not apply")
    return True
