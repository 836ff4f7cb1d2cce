"""Four-state latch: transitions, fail-safe current model, back-drive."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from couplesim import (
    DEFAULT_CONFIG,
    BackDriveResisted,
    Connector,
    ConnectorError,
    ConnectorState,
    TransitionOutcome,
    back_drive,
    command_transition,
    detect_blockage,
    state_angle,
)
from couplesim.connector import path_between
from couplesim.trace import KIND_SAMPLE, KIND_STATE, EventTrace, SimClock

FL = ConnectorState.FEMALE_LOCK
FU = ConnectorState.FEMALE_UNLOCK
MU = ConnectorState.MALE_UNLOCK
ML = ConnectorState.MALE_LOCK


def fresh(powered: bool = True) -> Connector:
    return Connector.new("C:+x", DEFAULT_CONFIG, powered=powered)


class TestStateMachine:
    def test_path_order(self):
        assert [int(s) for s in (FL, FU, MU, ML)] == [0, 1, 2, 3]

    def test_flat_states(self):
        assert FL.flat and FU.flat
        assert not MU.flat and not ML.flat

    def test_wire_names_round_trip(self):
        for s in ConnectorState:
            assert ConnectorState.from_wire(s.wire_name) is s
        with pytest.raises(ValueError):
            ConnectorState.from_wire("sideways")

    def test_state_angles_strictly_increasing(self):
        angles = [state_angle(s) for s in ConnectorState]
        assert angles == sorted(angles)
        assert len(set(angles)) == 4

    def test_path_between_inclusive_and_adjacent(self):
        for a in ConnectorState:
            for b in ConnectorState:
                path = path_between(a, b)
                assert path[0] is a and path[-1] is b
                assert len(path) == abs(int(a) - int(b)) + 1
                for u, v in zip(path, path[1:]):
                    assert abs(int(u) - int(v)) == 1


class TestCommandTransition:
    def test_every_pair_walks_adjacent_chain(self):
        # All 16 (start, target) pairs visit exactly the inclusive path.
        for a in ConnectorState:
            for b in ConnectorState:
                conn = fresh()
                conn.state = a
                conn.servo.angle_deg = state_angle(a)
                result = command_transition(conn, b)
                assert result.completed
                assert result.states == path_between(a, b)
                assert conn.state is b
                assert conn.servo.angle_deg == state_angle(b)
                assert conn.angle_consistent()

    def test_unpowered_never_moves(self):
        conn = fresh(powered=False)
        trace = EventTrace()
        result = command_transition(conn, ML, trace=trace, clock=SimClock(0.01))
        assert result.outcome is TransitionOutcome.UNPOWERED
        assert conn.state is FL
        assert conn.servo.angle_deg == state_angle(FL)
        assert trace.events == []

    def test_command_reengages_torque(self):
        conn = fresh()
        conn.servo.torque_released = True
        command_transition(conn, FU)
        assert not conn.servo.torque_released

    def test_idle_current_while_moving(self, trace, clock):
        conn = fresh()
        command_transition(conn, ML, trace=trace, clock=clock)
        currents = {e.payload["current_ma"] for e in trace.by_kind(KIND_SAMPLE)}
        assert currents == {DEFAULT_CONFIG.idle_current_ma}

    def test_motion_duration_matches_speed(self, trace):
        # 135 deg at 90 deg/s is 1.5 s of shaft motion.
        clock = SimClock(DEFAULT_CONFIG.dt_s)
        conn = fresh()
        command_transition(conn, ML, trace=trace, clock=clock)
        assert clock.now == pytest.approx(1.5, abs=2 * DEFAULT_CONFIG.dt_s)

    def test_angle_monotone_within_each_leg(self, trace, clock):
        conn = fresh()
        command_transition(conn, ML, trace=trace, clock=clock)
        angles = [e.payload["angle_deg"] for e in trace.by_kind(KIND_SAMPLE)]
        assert angles == sorted(angles)

    def test_inter_stage_delay_dwells_between_stages(self):
        from dataclasses import replace
        config = replace(DEFAULT_CONFIG, inter_stage_delay_s=0.1)
        clock = SimClock(config.dt_s)
        conn = Connector.new("C:+x", config)
        command_transition(conn, ML, config, clock=clock)
        # two inter-stage dwells of 0.1 s on top of 1.5 s of motion
        assert clock.now == pytest.approx(1.7, abs=2 * config.dt_s)


class TestFailSafe:
    def test_blocked_protrusion_retreats_home(self, trace, clock):
        conn = fresh()
        result = command_transition(conn, ML, trace=trace, clock=clock,
                                    external_resistance=True)
        assert result.outcome is TransitionOutcome.BLOCKED
        assert result.states == [FL, FU, FL]
        assert conn.state is FL
        assert conn.angle_consistent()

    def test_current_hits_ceiling_exactly_once_blocked(self, trace, clock):
        conn = fresh()
        command_transition(conn, ML, trace=trace, clock=clock, external_resistance=True)
        peak = trace.max_current_ma(conn.id)
        assert peak == DEFAULT_CONFIG.goal_current_limit_ma
        assert all(e.payload["current_ma"] <= DEFAULT_CONFIG.goal_current_limit_ma
                   for e in trace.by_kind(KIND_SAMPLE))

    def test_stall_window_sets_detection_time(self):
        # Detection requires the full stall window of accumulated no-progress time.
        conn = fresh()
        conn.state = FU
        conn.servo.angle_deg = state_angle(FU)
        conn.servo.goal_angle_deg = state_angle(MU)
        ticks = 0
        while not detect_blockage(conn, True, DEFAULT_CONFIG.dt_s):
            ticks += 1
            assert ticks < 10_000
        ticks += 1
        assert ticks == round(DEFAULT_CONFIG.stall_window_s / DEFAULT_CONFIG.dt_s)
        assert conn.servo.measured_current_ma == DEFAULT_CONFIG.goal_current_limit_ma

    def test_resistance_does_not_bite_on_retraction_legs(self):
        conn = fresh()
        conn.state = ML
        conn.servo.angle_deg = state_angle(ML)
        result = command_transition(conn, FL, external_resistance=True)
        assert result.completed
        assert result.states == path_between(ML, FL)

    def test_current_ramp_is_monotone_until_ceiling(self, trace, clock):
        conn = fresh()
        command_transition(conn, ML, trace=trace, clock=clock, external_resistance=True)
        ramp = [e.payload["current_ma"] for e in trace.by_kind(KIND_SAMPLE)
                if e.payload["current_ma"] > DEFAULT_CONFIG.idle_current_ma]
        assert ramp == sorted(ramp)
        assert ramp[-1] == DEFAULT_CONFIG.goal_current_limit_ma


class TestBackDrive:
    def engaged_pair(self):
        driver = fresh()
        peer = fresh(powered=False)
        driver.engaged_with = peer.id
        peer.engaged_with = driver.id
        peer.state = ML
        peer.servo.angle_deg = state_angle(ML)
        return driver, peer

    def test_requires_engagement(self):
        conn = fresh(powered=False)
        with pytest.raises(ConnectorError):
            back_drive(conn, 10.0)

    def test_powered_holding_resists(self):
        _, peer = self.engaged_pair()
        peer.servo.powered = True
        with pytest.raises(BackDriveResisted):
            back_drive(peer, 10.0)

    def test_torque_released_yields(self):
        _, peer = self.engaged_pair()
        peer.servo.powered = True
        peer.servo.torque_released = True
        assert back_drive(peer, 50.0) is MU

    def test_full_sweep_reverses_path(self):
        _, peer = self.engaged_pair()
        states = [peer.state]
        # driver sweeps its own shaft 0 -> 135; peer mirrors 135 -> 0
        for _ in range(135):
            s = back_drive(peer, 1.0)
            if s is not states[-1]:
                states.append(s)
        assert states == [ML, MU, FU, FL]
        assert peer.servo.angle_deg == 0.0

    def test_crossing_rule_updates_state_at_nominals(self):
        _, peer = self.engaged_pair()
        back_drive(peer, 44.9)  # 135 -> 90.1: no nominal crossed yet
        assert peer.state is ML
        back_drive(peer, 0.1)  # exactly 90: MALE_UNLOCK reached
        assert peer.state is MU

    def test_clamped_at_path_ends(self):
        _, peer = self.engaged_pair()
        back_drive(peer, 500.0)
        assert peer.state is FL
        assert peer.servo.angle_deg == 0.0
        back_drive(peer, -500.0)
        assert peer.state is ML
        assert peer.servo.angle_deg == 135.0

    def test_unpowered_peer_draws_no_current(self, trace, clock):
        _, peer = self.engaged_pair()
        back_drive(peer, 20.0, trace=trace, clock=clock)
        samples = trace.by_kind(KIND_SAMPLE, peer.id)
        assert samples and all(e.payload["current_ma"] == 0.0 for e in samples)

    def test_state_changes_tagged_back_drive(self, trace, clock):
        _, peer = self.engaged_pair()
        back_drive(peer, 135.0, trace=trace, clock=clock)
        changes = trace.by_kind(KIND_STATE, peer.id)
        assert len(changes) == 3
        assert all(e.payload["via"] == "back-drive" for e in changes)

    @given(st.lists(st.floats(min_value=-30.0, max_value=30.0,
                              allow_nan=False, allow_infinity=False),
                    min_size=1, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_state_always_tracks_angle(self, deltas):
        # Whatever jitter the driver applies, the recorded state is the
        # last nominal the shaft crossed, so the shaft can never drift a
        # full state spacing away from it without the state updating.
        _, peer = self.engaged_pair()
        table = DEFAULT_CONFIG.state_angles_deg
        spacing = min(b - a for a, b in zip(table, table[1:]))
        for d in deltas:
            state = back_drive(peer, d)
            assert abs(peer.servo.angle_deg - table[int(state)]) < spacing
            assert table[0] <= peer.servo.angle_deg <= table[-1]
