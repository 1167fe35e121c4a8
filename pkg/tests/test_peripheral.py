import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hecsim.detection import WindowDetection
from hecsim.deterrent import ModificationKind, ModificationParams
from hecsim.errors import InvalidInputError
from hecsim.peripheral import (CaptureFrame, CommandReceived, Flash,
                               FrameCaptured, LogAnomaly, NegativeDecision,
                               PlayDeterrent, PnConfig, PnState, PnStateKind,
                               PreArm, PublishFrame, RepelCommand,
                               SeismicWindowReady, ThermalFrame, TimerExpired,
                               execute_repel, flash_schedule, ir_duty_cycle,
                               pn_step)

CFG = PnConfig(node_id="pn-1")


def window(ds, run=None, start=0.0):
    if run is None:
        run = {0: 0, 1: 10, 2: 30}[ds]
    return WindowDetection(window_index=0, ds=ds, max_run=run,
                           window_start_s=start)


def frame(frame_id="pn-1-w000", t=4.0):
    return ThermalFrame(frame_id=frame_id, pn_id="pn-1", timestamp_s=t)


def repel(t=5.0, duration=10.0):
    det = ModificationParams(kind=ModificationKind.PINK_NOISE_OVERLAY,
                             alpha=1.0, seed=0)
    return RepelCommand(pn_id="pn-1", issued_at_s=t, deterrent=det,
                        flash_freq_hz=2.0, duration_s=duration)


def test_full_cycle_through_all_states():
    state = PnState.idle()

    state, actions = pn_step(state, SeismicWindowReady(window(2)), CFG, 4.0)
    assert state.kind is PnStateKind.IR_ACTIVE
    assert actions == (CaptureFrame(count=1),)

    state, actions = pn_step(state, FrameCaptured(frame()), CFG, 4.05)
    assert state.kind is PnStateKind.AWAITING_DECISION
    assert state.until_s == pytest.approx(4.05 + CFG.decision_timeout_s)
    assert actions == (PublishFrame(frame()),)

    cmd = repel(t=4.2)
    state, actions = pn_step(state, CommandReceived(cmd), CFG, 4.2)
    assert state.kind is PnStateKind.REPELLING
    assert state.until_s == pytest.approx(14.2)
    assert actions == (PlayDeterrent(cmd), Flash(freq_hz=2.0, duration_s=10.0))

    state, actions = pn_step(state, TimerExpired(deadline_s=14.2), CFG, 14.2)
    assert state.kind is PnStateKind.COOLDOWN
    assert state.until_s == pytest.approx(14.2 + CFG.repel_cooldown_s)
    assert actions == ()

    state, actions = pn_step(state, TimerExpired(deadline_s=state.until_s),
                             CFG, state.until_s)
    assert state.kind is PnStateKind.IDLE


def test_negative_decision_returns_to_idle():
    state = PnState(kind=PnStateKind.AWAITING_DECISION, until_s=14.0)
    neg = NegativeDecision(pn_id="pn-1", frame_id="pn-1-w000", issued_at_s=5.0)
    state, actions = pn_step(state, CommandReceived(neg), CFG, 5.0)
    assert state.kind is PnStateKind.IDLE
    assert actions == ()


def test_decision_timeout_drops_back_to_idle():
    state = PnState(kind=PnStateKind.AWAITING_DECISION, until_s=14.0)
    state, actions = pn_step(state, TimerExpired(deadline_s=14.0), CFG, 14.0)
    assert state.kind is PnStateKind.IDLE
    assert actions == ()


def test_subthreshold_score_does_nothing():
    state, actions = pn_step(PnState.idle(), SeismicWindowReady(window(0)),
                             CFG, 4.0)
    assert state.kind is PnStateKind.IDLE
    assert actions == ()


def test_threshold_two_ignores_ds_one():
    cfg = PnConfig(node_id="pn-1", ds_threshold=2)
    state, actions = pn_step(PnState.idle(), SeismicWindowReady(window(1)),
                             cfg, 4.0)
    assert state.kind is PnStateKind.IDLE
    assert actions == ()
    state, actions = pn_step(PnState.idle(), SeismicWindowReady(window(2)),
                             cfg, 4.0)
    assert state.kind is PnStateKind.IR_ACTIVE


def test_scores_outside_idle_are_silent():
    for kind in (PnStateKind.IR_ACTIVE, PnStateKind.AWAITING_DECISION,
                 PnStateKind.REPELLING, PnStateKind.COOLDOWN):
        state = PnState(kind=kind, until_s=99.0, captures_remaining=1)
        new, actions = pn_step(state, SeismicWindowReady(window(2)), CFG, 8.0)
        assert new == state
        assert actions == ()


def test_prearm_on_high_score():
    cfg = PnConfig(node_id="pn-1", arm_on_high_score=True)
    _, actions = pn_step(PnState.idle(), SeismicWindowReady(window(2)), cfg, 4.0)
    assert actions == (CaptureFrame(count=1), PreArm(ds=2))
    _, actions = pn_step(PnState.idle(), SeismicWindowReady(window(1)), cfg, 4.0)
    assert actions == (CaptureFrame(count=1),)


def test_multi_capture_counts_down():
    cfg = PnConfig(node_id="pn-1", ir_capture_count=3)
    state, _ = pn_step(PnState.idle(), SeismicWindowReady(window(2)), cfg, 4.0)
    assert state.captures_remaining == 3
    state, actions = pn_step(state, FrameCaptured(frame("pn-1-w000-c0")), cfg, 4.05)
    assert state.kind is PnStateKind.IR_ACTIVE
    assert state.captures_remaining == 2
    assert isinstance(actions[0], PublishFrame)
    state, _ = pn_step(state, FrameCaptured(frame("pn-1-w000-c1")), cfg, 4.10)
    state, _ = pn_step(state, FrameCaptured(frame("pn-1-w000-c2")), cfg, 4.15)
    assert state.kind is PnStateKind.AWAITING_DECISION


def test_unexpected_frame_is_an_anomaly():
    state, actions = pn_step(PnState.idle(), FrameCaptured(frame()), CFG, 4.0)
    assert state.kind is PnStateKind.IDLE
    assert len(actions) == 1 and isinstance(actions[0], LogAnomaly)


def test_unexpected_command_is_an_anomaly():
    state, actions = pn_step(PnState.idle(), CommandReceived(repel()), CFG, 4.0)
    assert state.kind is PnStateKind.IDLE
    assert len(actions) == 1 and isinstance(actions[0], LogAnomaly)


def test_stale_timer_is_ignored():
    state = PnState(kind=PnStateKind.REPELLING, until_s=20.0)
    new, actions = pn_step(state, TimerExpired(deadline_s=14.0), CFG, 14.0)
    assert new == state
    assert actions == ()
    # matching deadline but fired early: also ignored
    new, actions = pn_step(state, TimerExpired(deadline_s=20.0), CFG, 19.0)
    assert new == state
    assert actions == ()


def test_config_validation():
    with pytest.raises(InvalidInputError):
        PnConfig(node_id="x", ds_threshold=3)
    with pytest.raises(InvalidInputError):
        PnConfig(node_id="x", ir_capture_count=0)
    with pytest.raises(InvalidInputError):
        PnConfig(node_id="x", decision_timeout_s=0.0)


def test_flash_schedule_counts_cycles():
    sched = flash_schedule(2.0, 10.0)
    assert len(sched.cycles) == 20
    assert sched.cycles[0] == (0.0, 0.25)
    assert sched.cycles[-1] == pytest.approx((9.5, 9.75))
    # a partial trailing cycle is not emitted
    assert len(flash_schedule(2.0, 10.4).cycles) == 20
    with pytest.raises(InvalidInputError):
        flash_schedule(0.0, 10.0)


def test_execute_repel_materializes(bee_clip):
    clip, sched = execute_repel(repel(), bee_clip)
    assert clip.frame_rate_hz > 0
    assert len(sched.cycles) == 20
    assert not np.array_equal(clip.samples, bee_clip.samples)


def test_ir_duty_cycle_simple_interval():
    log = [(0.0, PnState.idle()),
           (10.0, PnState(kind=PnStateKind.IR_ACTIVE, captures_remaining=1)),
           (12.0, PnState(kind=PnStateKind.AWAITING_DECISION, until_s=22.0)),
           (14.0, PnState.idle())]
    assert ir_duty_cycle(log, end_time_s=40.0) == pytest.approx(4.0 / 40.0)


def test_ir_duty_cycle_repelling_not_counted():
    log = [(0.0, PnState(kind=PnStateKind.REPELLING, until_s=10.0)),
           (10.0, PnState.idle())]
    assert ir_duty_cycle(log, end_time_s=20.0) == 0.0


def test_ir_duty_cycle_validation():
    with pytest.raises(InvalidInputError):
        ir_duty_cycle([], end_time_s=10.0)
    with pytest.raises(InvalidInputError):
        ir_duty_cycle([(5.0, PnState.idle()), (3.0, PnState.idle())], 10.0)
    with pytest.raises(InvalidInputError):
        ir_duty_cycle([(5.0, PnState.idle())], end_time_s=4.0)


EVENT_STRATEGY = st.one_of(
    st.integers(0, 2).map(lambda ds: SeismicWindowReady(window(ds))),
    st.just(FrameCaptured(frame())),
    st.just(CommandReceived(repel(t=0.0))),
    st.just(CommandReceived(NegativeDecision("pn-1", "pn-1-w000", 0.0))),
    st.floats(0.0, 100.0, allow_nan=False).map(
        lambda d: TimerExpired(deadline_s=d)),
)


@settings(max_examples=200, deadline=None)
@given(st.lists(EVENT_STRATEGY, max_size=30))
def test_random_event_storms_never_corrupt_state(events):
    state = PnState.idle()
    now = 0.0
    for ev in events:
        now += 0.5
        state, actions = pn_step(state, ev, CFG, now)
        assert isinstance(state, PnState)
        assert state.kind in PnStateKind
        # timed states always carry a live deadline
        if state.kind in (PnStateKind.AWAITING_DECISION, PnStateKind.REPELLING,
                          PnStateKind.COOLDOWN):
            assert state.until_s is not None and state.until_s >= now - 1e-9
        if state.kind is PnStateKind.IR_ACTIVE:
            assert state.captures_remaining >= 1
        for act in actions:
            assert isinstance(act, (CaptureFrame, PublishFrame, PlayDeterrent,
                                    Flash, PreArm, LogAnomaly))


@settings(max_examples=100, deadline=None)
@given(st.lists(EVENT_STRATEGY, max_size=30))
def test_repel_only_fires_from_awaiting(events):
    state = PnState.idle()
    now = 0.0
    for ev in events:
        now += 0.5
        prev = state
        state, actions = pn_step(state, ev, CFG, now)
        if any(isinstance(a, PlayDeterrent) for a in actions):
            assert prev.kind is PnStateKind.AWAITING_DECISION
            assert state.kind is PnStateKind.REPELLING
