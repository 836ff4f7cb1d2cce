"""Four-state face coupler: servo model, commanded transitions, back-drive.

One active face carries a latch that a single servo walks through four
states along one actuation path:

    FEMALE_LOCK <-> FEMALE_UNLOCK <-> MALE_UNLOCK <-> MALE_LOCK

The two female states are flush with the module surface; the two male
states protrude.  Transitions only ever step between adjacent states.
The FEMALE_UNLOCK -> MALE_UNLOCK stage (hooks pushing out of the plane)
runs under a current ceiling so a blocked protrusion is detected and the
latch retreats to FEMALE_LOCK instead of forcing torque into the hooks.
An unpowered latch never moves by itself, but while engaged with a peer
it can be back-driven: the peer's motion drags it through the same path
in mirror.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum

from .config import DEFAULT_CONFIG, SimConfig
from .trace import KIND_SAMPLE, KIND_STATE, EventTrace, SimClock, _register_states


class ConnectorState(IntEnum):
    """Latch states in actuation-path order; adjacent values are one servo leg apart."""

    FEMALE_LOCK = 0
    FEMALE_UNLOCK = 1
    MALE_UNLOCK = 2
    MALE_LOCK = 3

    @property
    def flat(self) -> bool:
        """True when hooks and shroud are housed and the face is flush."""
        return self in (ConnectorState.FEMALE_LOCK, ConnectorState.FEMALE_UNLOCK)

    @property
    def wire_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_wire(cls, name: str) -> "ConnectorState":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown connector state: {name!r}") from None


_register_states({s.wire_name: int(s) for s in ConnectorState})


def path_between(start: ConnectorState, target: ConnectorState) -> list[ConnectorState]:
    """Inclusive adjacent-state path from start to target."""
    step = 1 if target >= start else -1
    return [ConnectorState(v) for v in range(int(start), int(target) + step, step)]


def state_angle(state: ConnectorState, config: SimConfig = DEFAULT_CONFIG) -> float:
    """Nominal servo angle for a state; strictly increasing along the path."""
    return config.state_angles_deg[int(state)]


class TransitionOutcome(Enum):
    COMPLETED = "completed"
    BLOCKED = "blocked"
    UNPOWERED = "unpowered"


@dataclass
class ServoModel:
    """Position-controlled servo with current telemetry.

    Unpowered (or torque-released) the shaft holds no torque, draws no
    current, and can be back-driven through the engaged hooks.
    """

    angle_deg: float = 0.0
    goal_angle_deg: float = 0.0
    goal_current_limit_ma: float = 150.0
    measured_current_ma: float = 0.0
    powered: bool = True
    speed_dps: float = 90.0
    torque_released: bool = False
    stall_elapsed_s: float = 0.0

    @property
    def holding(self) -> bool:
        return self.powered and not self.torque_released


@dataclass
class Connector:
    id: str
    state: ConnectorState = ConnectorState.FEMALE_LOCK
    servo: ServoModel = field(default_factory=ServoModel)
    engaged_with: str | None = None

    @classmethod
    def new(cls, id: str, config: SimConfig = DEFAULT_CONFIG, *, powered: bool = True) -> "Connector":
        angle = state_angle(ConnectorState.FEMALE_LOCK, config)
        servo = ServoModel(
            angle_deg=angle,
            goal_angle_deg=angle,
            goal_current_limit_ma=config.goal_current_limit_ma,
            powered=powered,
            speed_dps=config.servo_speed_dps,
        )
        return cls(id=id, servo=servo)

    def angle_consistent(self, config: SimConfig = DEFAULT_CONFIG) -> bool:
        """At-rest check: shaft within tolerance of the state's nominal angle."""
        return abs(self.servo.angle_deg - state_angle(self.state, config)) <= config.angle_tolerance_deg


class ConnectorError(Exception):
    """Misuse of the connector API (violated operation precondition)."""


class BackDriveResisted(ConnectorError):
    """The servo is powered and holding position; external motion is refused."""


@dataclass
class TransitionResult:
    outcome: TransitionOutcome
    states: list[ConnectorState]
    peer_states: list[ConnectorState] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.outcome is TransitionOutcome.COMPLETED


def _emit_sample(trace: EventTrace | None, clock: SimClock, conn: Connector) -> None:
    if trace is not None:
        trace.emit(clock.now, conn.id, KIND_SAMPLE, {
            "angle_deg": round(conn.servo.angle_deg, 6),
            "current_ma": round(conn.servo.measured_current_ma, 6),
            "state": conn.state.wire_name,
        })


def _emit_state(trace: EventTrace | None, clock: SimClock, conn: Connector,
                old: ConnectorState, new: ConnectorState, via: str) -> None:
    if trace is not None:
        trace.emit(clock.now, conn.id, KIND_STATE, {
            "from": old.wire_name, "to": new.wire_name, "via": via,
        })


def detect_blockage(conn: Connector, external_resistance: bool, dt_s: float,
                    config: SimConfig = DEFAULT_CONFIG) -> bool:
    """Advance the stall/current model one step and report a detected blockage.

    Only meaningful mid protrusion (FEMALE_UNLOCK heading to MALE_UNLOCK, the
    stage run under the low current ceiling); any other situation returns
    False.  Under external resistance the shaft stalls and the measured
    current ramps from idle to the ceiling across the stall window; once the
    window elapses the ceiling is reported exactly and the caller must
    retreat the latch to FEMALE_LOCK.
    """
    servo = conn.servo
    protruding = (
        servo.holding
        and conn.state is ConnectorState.FEMALE_UNLOCK
        and servo.goal_angle_deg == state_angle(ConnectorState.MALE_UNLOCK, config)
    )
    if not protruding:
        return False
    if not external_resistance:
        servo.stall_elapsed_s = 0.0
        servo.measured_current_ma = config.idle_current_ma
        return False

    servo.stall_elapsed_s += dt_s
    window = config.stall_window_s
    frac = min(1.0, servo.stall_elapsed_s / window)
    servo.measured_current_ma = config.idle_current_ma + (servo.goal_current_limit_ma - config.idle_current_ma) * frac
    detected = servo.stall_elapsed_s >= window - 1e-12
    if detected:
        # Detection is defined as the current reaching the ceiling.
        servo.measured_current_ma = servo.goal_current_limit_ma
    return detected


def back_drive(conn: Connector, driver_angle_delta_deg: float,
               config: SimConfig = DEFAULT_CONFIG, *,
               trace: EventTrace | None = None,
               clock: SimClock | None = None) -> ConnectorState:
    """Force the engaged, torque-free latch through the path by external motion.

    The peer's motion is mirrored through the hook engagement: a positive
    driver delta pulls this latch's shaft down by the same amount.  The state
    updates each time the shaft crosses a state's nominal angle; a full sweep
    from MALE_LOCK lands on FEMALE_LOCK.
    """
    if conn.servo.holding:
        raise BackDriveResisted(f"{conn.id}: servo powered and holding position")
    if conn.engaged_with is None:
        raise ConnectorError(f"{conn.id}: back-drive requires an engaged peer")

    clock = clock or SimClock(config.dt_s)
    table = config.state_angles_deg
    old_angle = conn.servo.angle_deg
    new_angle = min(max(old_angle - driver_angle_delta_deg, table[0]), table[-1])
    if new_angle == old_angle:
        return conn.state

    if new_angle > old_angle:
        crossed = [s for s in ConnectorState if old_angle < table[int(s)] <= new_angle]
    else:
        crossed = [s for s in reversed(ConnectorState) if new_angle <= table[int(s)] < old_angle]

    conn.servo.angle_deg = new_angle
    conn.servo.goal_angle_deg = new_angle
    if not conn.servo.powered:
        conn.servo.measured_current_ma = 0.0
    for s in crossed:
        _emit_state(trace, clock, conn, conn.state, s, via="back-drive")
        conn.state = s
    _emit_sample(trace, clock, conn)
    return conn.state


def command_transition(conn: Connector, target: ConnectorState,
                       config: SimConfig = DEFAULT_CONFIG, *,
                       trace: EventTrace | None = None,
                       clock: SimClock | None = None,
                       external_resistance: bool = False,
                       back_drive_peer: Connector | None = None) -> TransitionResult:
    """Drive the latch to `target`, stepping through every intermediate state.

    Returns COMPLETED with the visited state list (starting state first), or
    UNPOWERED without motion, or BLOCKED after the fail-safe fired: a stalled
    protrusion ramps the current to the ceiling, the attempt is abandoned,
    and the latch retreats to FEMALE_LOCK.

    `external_resistance` models an obstruction in front of the face (peer
    surface out of tolerance, foreign object); it only bites on the
    protruding leg.  `back_drive_peer` mirrors every shaft increment onto an
    engaged peer latch, which is how one side reverses the other's role.
    """
    if not conn.servo.powered:
        return TransitionResult(TransitionOutcome.UNPOWERED, [conn.state])
    conn.servo.torque_released = False  # a new position command re-engages torque

    clock = clock or SimClock(config.dt_s)
    visited = [conn.state]
    peer_states = [back_drive_peer.state] if back_drive_peer is not None else []
    conn.servo.stall_elapsed_s = 0.0

    for nxt in path_between(conn.state, target)[1:]:
        goal = state_angle(nxt, config)
        conn.servo.goal_angle_deg = goal
        protruding_leg = (conn.state is ConnectorState.FEMALE_UNLOCK
                          and nxt is ConnectorState.MALE_UNLOCK)
        direction = 1.0 if goal >= conn.servo.angle_deg else -1.0

        while conn.servo.angle_deg != goal:
            clock.tick()
            if protruding_leg and external_resistance:
                # Hooks against the obstruction: no progress, current ramps.
                if detect_blockage(conn, True, config.dt_s, config):
                    _emit_sample(trace, clock, conn)
                    _retreat_home(conn, config, trace, clock, visited)
                    return TransitionResult(TransitionOutcome.BLOCKED, visited, peer_states)
                _emit_sample(trace, clock, conn)
                continue

            step = conn.servo.speed_dps * config.dt_s
            remaining = abs(goal - conn.servo.angle_deg)
            if remaining <= step:
                delta = goal - conn.servo.angle_deg
                conn.servo.angle_deg = goal
            else:
                delta = direction * step
                conn.servo.angle_deg += delta
            conn.servo.measured_current_ma = config.idle_current_ma
            conn.servo.stall_elapsed_s = 0.0
            if back_drive_peer is not None:
                back_drive(back_drive_peer, delta, config, trace=trace, clock=clock)
                last = peer_states[-1]
                cur = back_drive_peer.state
                if cur is not last:
                    sgn = 1 if cur > last else -1
                    for v in range(int(last) + sgn, int(cur) + sgn, sgn):
                        peer_states.append(ConnectorState(v))
            _emit_sample(trace, clock, conn)

        _emit_state(trace, clock, conn, conn.state, nxt, via="command")
        conn.state = nxt
        visited.append(nxt)
        if config.inter_stage_delay_s > 0 and nxt is not target:
            for _ in range(int(round(config.inter_stage_delay_s / config.dt_s))):
                clock.tick()
                _emit_sample(trace, clock, conn)

    return TransitionResult(TransitionOutcome.COMPLETED, visited, peer_states)


def _retreat_home(conn: Connector, config: SimConfig, trace: EventTrace | None,
                  clock: SimClock, visited: list[ConnectorState]) -> None:
    """Fail-safe retreat: abandon the attempt and fall back to FEMALE_LOCK."""
    conn.servo.stall_elapsed_s = 0.0
    for nxt in path_between(conn.state, ConnectorState.FEMALE_LOCK)[1:]:
        goal = state_angle(nxt, config)
        conn.servo.goal_angle_deg = goal
        while conn.servo.angle_deg != goal:
            clock.tick()
            step = conn.servo.speed_dps * config.dt_s
            remaining = abs(goal - conn.servo.angle_deg)
            if remaining <= step:
                conn.servo.angle_deg = goal
            else:
                conn.servo.angle_deg -= step
            conn.servo.measured_current_ma = config.idle_current_ma
            _emit_sample(trace, clock, conn)
        _emit_state(trace, clock, conn, conn.state, nxt, via="command")
        conn.state = nxt
        visited.append(nxt)
