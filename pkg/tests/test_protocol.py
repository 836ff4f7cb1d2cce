"""Alignment gate and the three single-sided protocols."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_face, make_pair

from couplesim import (
    DEFAULT_CONFIG,
    ConnectorState,
    FaceKind,
    Failure,
    Misalignment,
    check_alignment,
    couple,
    decouple_from_female,
    decouple_from_male,
    holds_when_unpowered,
)
from couplesim.trace import KIND_ACTION, KIND_JOINT, KIND_STATE, EventTrace, SimClock

FL = ConnectorState.FEMALE_LOCK
FU = ConnectorState.FEMALE_UNLOCK
MU = ConnectorState.MALE_UNLOCK
ML = ConnectorState.MALE_LOCK


class TestAlignmentGate:
    def test_zero_error_passes(self):
        assert check_alignment(Misalignment())

    @pytest.mark.parametrize("mis,ok", [
        (Misalignment(2.5, 0, 0), True),     # closed boundary
        (Misalignment(-2.5, 2.5, 0), True),
        (Misalignment(0, 0, 2.5), True),
        (Misalignment(0, 0, -2.5), True),
        (Misalignment(2.51, 0, 0), False),
        (Misalignment(0, -2.51, 0), False),
        (Misalignment(0, 0, 2.51), False),
        (Misalignment(1.0, 1.0, 1.0), True),
    ])
    def test_boundary_is_closed(self, mis, ok):
        assert check_alignment(mis) is ok

    @pytest.mark.parametrize("yaw,ok", [
        (90.0, True),    # quarter-turn symmetry of the hook pattern
        (180.0, True),
        (270.0, True),
        (-90.0, True),
        (88.0, True),    # 2 deg short of a quarter turn
        (92.0, True),
        (87.4, False),   # 2.6 deg short
        (46.0, False),   # worst case: between symmetry points
        (45.0, False),
    ])
    def test_yaw_judged_against_nearest_quarter_turn(self, yaw, ok):
        assert check_alignment(Misalignment(0, 0, yaw)) is ok

    def test_non_finite_rejected(self):
        assert not check_alignment(Misalignment(float("nan"), 0, 0))
        assert not check_alignment(Misalignment(0, float("inf"), 0))

    @given(st.floats(-2.5, 2.5), st.floats(-2.5, 2.5), st.floats(-2.5, 2.5),
           st.integers(-4, 4))
    @settings(max_examples=300, deadline=None)
    def test_quarter_turn_invariance(self, dx, dy, dyaw, k):
        base = Misalignment(dx, dy, dyaw)
        shifted = Misalignment(dx, dy, dyaw + 90.0 * k)
        assert check_alignment(base)
        assert check_alignment(shifted) == check_alignment(base)


class TestCouple:
    def test_initiator_walks_out_target_never_moves(self):
        trace, clock = EventTrace(), SimClock(DEFAULT_CONFIG.dt_s)
        a, b = make_pair()
        result = couple(a, b, trace=trace, clock=clock)
        assert result.ok
        assert result.initiator_states == [FL, FU, MU, ML]
        assert b.connector.state is FL
        assert trace.commanded_subjects() == {a.addr}
        assert all(e.subject == a.addr for e in trace.by_kind(KIND_STATE))

    def test_joint_wiring(self):
        a, b = make_pair()
        result = couple(a, b)
        joint = result.joint
        assert joint.locked
        assert joint.male is a and joint.female is b
        assert a.joint is joint and b.joint is joint
        assert a.connector.engaged_with == b.addr
        assert b.connector.engaged_with == a.addr

    def test_active_active_joint_is_electrical(self):
        a, b = make_pair()
        assert couple(a, b).joint.electrical

    def test_passive_target_contact_follows_config(self):
        from dataclasses import replace
        a, b = make_pair(target_kind=FaceKind.PASSIVE)
        assert couple(a, b).joint.electrical
        config = replace(DEFAULT_CONFIG, passive_electrical_contact=False)
        c = make_face("C:+x", config=config)
        d = make_face("D:-x", FaceKind.PASSIVE, config=config)
        assert couple(c, d, config=config).joint.electrical is False

    def test_blank_target_refused(self):
        a, b = make_pair(target_kind=FaceKind.BLANK)
        result = couple(a, b)
        assert not result.ok and result.failure is Failure.BLANK_FACE

    def test_unpowered_initiator_refused(self):
        a, b = make_pair(initiator_powered=False)
        result = couple(a, b)
        assert not result.ok and result.failure is Failure.INITIATOR_UNPOWERED

    def test_busy_initiator_refused(self):
        a, b = make_pair()
        couple(a, b)
        c = make_face("C:-y")
        result = couple(a, c)
        assert not result.ok and result.failure is Failure.INITIATOR_BUSY

    def test_target_with_extended_latch_refused(self):
        a, b = make_pair(target_powered=True)
        from couplesim import command_transition
        command_transition(b.connector, MU)
        result = couple(a, b)
        assert not result.ok and result.failure is Failure.TARGET_NOT_FEMALE

    def test_jointed_target_refused(self):
        a, b = make_pair()
        couple(a, b)
        c = make_face("C:+z")
        result = couple(c, b)
        assert not result.ok and result.failure is Failure.TARGET_NOT_FEMALE

    def test_misaligned_attempt_aborts_without_joint(self):
        trace, clock = EventTrace(), SimClock(DEFAULT_CONFIG.dt_s)
        a, b = make_pair()
        result = couple(a, b, Misalignment(2.51, 0, 0), trace=trace, clock=clock)
        assert not result.ok and result.failure is Failure.MISALIGNED
        assert result.initiator_states == [FL, FU, FL]
        assert result.joint is None and a.joint is None and b.joint is None
        assert a.connector.state is FL
        assert a.connector.engaged_with is None
        assert trace.max_current_ma(a.addr) == DEFAULT_CONFIG.goal_current_limit_ma

    def test_creation_event_emitted(self):
        trace, clock = EventTrace(), SimClock(DEFAULT_CONFIG.dt_s)
        a, b = make_pair()
        couple(a, b, trace=trace, clock=clock)
        created = [e for e in trace.by_kind(KIND_JOINT) if e.payload["event"] == "created"]
        assert len(created) == 1
        assert created[0].payload["male"] == a.addr


class TestDecoupleFromMale:
    def coupled(self):
        a, b = make_pair()
        joint = couple(a, b).joint
        return a, b, joint

    def test_reverse_walk_female_untouched(self):
        trace, clock = EventTrace(), SimClock(DEFAULT_CONFIG.dt_s)
        a, b, joint = self.coupled()
        result = decouple_from_male(joint, trace=trace, clock=clock)
        assert result.ok
        assert result.initiator_states == [ML, MU, FU, FL]
        assert b.connector.state is FL
        assert trace.commanded_subjects() == {a.addr}

    def test_joint_destroyed_and_faces_cleared(self):
        a, b, joint = self.coupled()
        decouple_from_male(joint)
        assert not joint.locked
        assert a.joint is None and b.joint is None
        assert a.connector.engaged_with is None
        assert b.connector.engaged_with is None

    def test_unpowered_male_refused(self):
        a, b, joint = self.coupled()
        a.connector.servo.powered = False
        result = decouple_from_male(joint)
        assert not result.ok and result.failure is Failure.MALE_UNPOWERED
        assert joint.locked

    def test_stale_joint_refused(self):
        a, b, joint = self.coupled()
        decouple_from_male(joint)
        result = decouple_from_male(joint)
        assert not result.ok and result.failure is Failure.NO_JOINT

    def test_recouple_after_decouple(self):
        a, b, joint = self.coupled()
        decouple_from_male(joint)
        assert couple(a, b).ok


class TestDecoupleFromFemale:
    def coupled(self, *, male_powered_after: bool, female_powered: bool = True,
                electrical: bool | None = None):
        a, b = make_pair(target_powered=female_powered)
        joint = couple(a, b).joint
        a.connector.servo.powered = male_powered_after
        if electrical is not None:
            joint.electrical = electrical
        return a, b, joint

    def test_seven_stage_walk_with_back_driven_peer(self):
        trace, clock = EventTrace(), SimClock(DEFAULT_CONFIG.dt_s)
        a, b = make_pair(target_powered=True)
        joint = couple(a, b, trace=trace, clock=clock).joint
        a.connector.servo.powered = False  # male side fails
        result = decouple_from_female(joint, trace=trace, clock=clock)
        assert result.ok
        assert result.initiator_states == [FL, FU, MU, ML, MU, FU, FL]
        assert result.peer_states == [ML, MU, FU, FL]
        assert a.connector.state is FL and b.connector.state is FL
        # the failed side moved only by back-drive after its own coupling walk
        peer_changes = trace.by_kind(KIND_STATE, a.addr)
        post_failure = [e for e in peer_changes if e.payload["via"] == "back-drive"]
        assert [(e.payload["from"], e.payload["to"]) for e in post_failure] == [
            ("male_lock", "male_unlock"),
            ("male_unlock", "female_unlock"),
            ("female_unlock", "female_lock"),
        ]

    def test_role_reversal_event_then_destruction(self):
        trace, clock = EventTrace(), SimClock(DEFAULT_CONFIG.dt_s)
        a, b, joint = self.coupled(male_powered_after=False)
        decouple_from_female(joint, trace=trace, clock=clock)
        kinds = [e.payload["event"] for e in trace.by_kind(KIND_JOINT)]
        assert kinds == ["role-reversed", "destroyed"]

    def test_faces_cleared(self):
        a, b, joint = self.coupled(male_powered_after=False)
        decouple_from_female(joint)
        assert a.joint is None and b.joint is None
        assert not joint.locked
        assert a.connector.engaged_with is None
        assert b.connector.engaged_with is None

    def test_powered_male_negotiates_torque_release_over_contact(self):
        trace, clock = EventTrace(), SimClock(DEFAULT_CONFIG.dt_s)
        a, b, joint = self.coupled(male_powered_after=True, electrical=True)
        result = decouple_from_female(joint, trace=trace, clock=clock)
        assert result.ok
        releases = [e for e in trace.by_kind(KIND_ACTION)
                    if e.payload.get("op") == "torque-release"]
        assert len(releases) == 1 and releases[0].payload["male"] == a.addr

    def test_powered_male_without_contact_resists(self):
        a, b, joint = self.coupled(male_powered_after=True, electrical=False)
        result = decouple_from_female(joint)
        assert not result.ok and result.failure is Failure.BACK_DRIVE_RESISTED
        assert joint.locked and a.joint is joint

    def test_passive_female_cannot_drive(self):
        a, b = make_pair(target_kind=FaceKind.PASSIVE)
        joint = couple(a, b).joint
        result = decouple_from_female(joint)
        assert not result.ok and result.failure is Failure.FEMALE_SIDE_NOT_ACTIVE

    def test_unpowered_female_refused(self):
        a, b, joint = self.coupled(male_powered_after=False, female_powered=False)
        result = decouple_from_female(joint)
        assert not result.ok and result.failure is Failure.FEMALE_UNPOWERED

    def test_recouple_from_either_side_afterwards(self):
        a, b, joint = self.coupled(male_powered_after=False)
        decouple_from_female(joint)
        b2 = couple(b, a)  # previous female couples as initiator now
        assert b2.ok and b2.joint.male is b


class TestRetention:
    def test_locked_joint_holds_regardless_of_power(self):
        a, b = make_pair()
        joint = couple(a, b).joint
        a.connector.servo.powered = False
        b.connector.servo.powered = False
        assert holds_when_unpowered(joint)
        assert joint.locked

    def test_unlocked_joint_raises(self):
        a, b = make_pair()
        joint = couple(a, b).joint
        decouple_from_male(joint)
        with pytest.raises(ValueError):
            holds_when_unpowered(joint)


class TestActivePassiveRoundTrip:
    def test_couple_then_male_side_decouple(self):
        a, b = make_pair(target_kind=FaceKind.PASSIVE)
        result = couple(a, b)
        assert result.ok and result.joint.female is b
        assert b.flat  # passive faces are always flush
        out = decouple_from_male(result.joint)
        assert out.ok
        assert a.connector.state is FL
        assert couple(a, b).ok  # repeatable
