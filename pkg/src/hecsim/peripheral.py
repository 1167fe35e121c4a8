"""Peripheral node: seismic trigger, thermal capture, and repel playback.

The node is a pure state machine. pn_step consumes one event and returns the
next state plus the actions the surrounding runtime must perform (capture a
frame, publish it, play the deterrent, flash the light). Keeping the
transition function free of side effects makes every path scriptable in
tests.

The infrared camera is power-gated: it runs only between a qualifying
seismic score and the central node's decision, which is what ir_duty_cycle
measures.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .detection import Algorithm1Params, WindowDetection
from .deterrent import ModificationParams, apply_modification
from .errors import InvalidInputError
from .signals import AudioClip


@dataclass(frozen=True)
class PnConfig:
    node_id: str
    ds_threshold: int = 1
    alg1: Algorithm1Params = Algorithm1Params()
    decision_timeout_s: float = 10.0
    repel_cooldown_s: float = 60.0
    flash_freq_hz: float = 2.0
    ir_capture_count: int = 1
    arm_on_high_score: bool = False
    broker_priority: tuple[str, ...] = ()

    def __post_init__(self):
        if self.ds_threshold not in (1, 2):
            raise InvalidInputError("ds_threshold must be 1 or 2")
        if self.ir_capture_count < 1:
            raise InvalidInputError("ir_capture_count must be at least 1")
        if self.decision_timeout_s <= 0 or self.repel_cooldown_s < 0:
            raise InvalidInputError("timeouts must be positive")


class PnStateKind(Enum):
    IDLE = "idle"
    IR_ACTIVE = "ir_active"
    AWAITING_DECISION = "awaiting_decision"
    REPELLING = "repelling"
    COOLDOWN = "cooldown"


# camera is powered while armed or waiting on the central node
IR_POWERED_STATES = frozenset({PnStateKind.IR_ACTIVE, PnStateKind.AWAITING_DECISION})


@dataclass(frozen=True)
class PnState:
    kind: PnStateKind = PnStateKind.IDLE
    until_s: float | None = None  # deadline for the timed states
    captures_remaining: int = 0

    @classmethod
    def idle(cls) -> "PnState":
        return cls()


@dataclass(frozen=True)
class ThermalFrame:
    frame_id: str
    pn_id: str
    timestamp_s: float
    width: int = 32
    height: int = 24
    pixels: tuple[float, ...] | None = None
    sim_ground_truth: bool | None = None  # set by the simulator, never by hardware


@dataclass(frozen=True)
class RepelCommand:
    pn_id: str
    issued_at_s: float
    deterrent: ModificationParams
    flash_freq_hz: float = 2.0
    duration_s: float = 10.0


@dataclass(frozen=True)
class NegativeDecision:
    pn_id: str
    frame_id: str
    issued_at_s: float


# ---- events ----

@dataclass(frozen=True)
class SeismicWindowReady:
    detection: WindowDetection


@dataclass(frozen=True)
class FrameCaptured:
    frame: ThermalFrame


@dataclass(frozen=True)
class CommandReceived:
    command: RepelCommand | NegativeDecision


@dataclass(frozen=True)
class TimerExpired:
    deadline_s: float


PnEvent = SeismicWindowReady | FrameCaptured | CommandReceived | TimerExpired


# ---- actions ----

@dataclass(frozen=True)
class CaptureFrame:
    count: int = 1


@dataclass(frozen=True)
class PublishFrame:
    frame: ThermalFrame


@dataclass(frozen=True)
class PlayDeterrent:
    command: RepelCommand


@dataclass(frozen=True)
class Flash:
    freq_hz: float
    duration_s: float


@dataclass(frozen=True)
class PreArm:
    ds: int


@dataclass(frozen=True)
class LogAnomaly:
    reason: str


PnAction = CaptureFrame | PublishFrame | PlayDeterrent | Flash | PreArm | LogAnomaly


def _timer_matches(state: PnState, event: TimerExpired, now_s: float) -> bool:
    return (state.until_s is not None
            and abs(event.deadline_s - state.until_s) < 1e-9
            and now_s >= state.until_s - 1e-9)


def pn_step(state: PnState, event: PnEvent, config: PnConfig,
            now_s: float) -> tuple[PnState, tuple[PnAction, ...]]:
    """Advance the node by one event; returns (new state, actions).

    Seismic scores arriving outside Idle are recorded by the caller but
    trigger nothing here. A timer event whose deadline does not match the
    current state is scheduling debris and is ignored. Any other event that
    a state does not expect leaves the state unchanged and reports an
    anomaly action.
    """
    kind = state.kind

    if isinstance(event, SeismicWindowReady):
        if kind is PnStateKind.IDLE and event.detection.ds >= config.ds_threshold:
            actions: list[PnAction] = [CaptureFrame(count=config.ir_capture_count)]
            if config.arm_on_high_score and event.detection.ds >= 2:
                actions.append(PreArm(ds=event.detection.ds))
            new = PnState(kind=PnStateKind.IR_ACTIVE,
                          captures_remaining=config.ir_capture_count)
            return new, tuple(actions)
        return state, ()

    if isinstance(event, FrameCaptured):
        if kind is not PnStateKind.IR_ACTIVE:
            return state, (LogAnomaly(f"frame captured in state {kind.value}"),)
        remaining = state.captures_remaining - 1
        if remaining > 0:
            return replace(state, captures_remaining=remaining), \
                (PublishFrame(event.frame),)
        new = PnState(kind=PnStateKind.AWAITING_DECISION,
                      until_s=now_s + config.decision_timeout_s)
        return new, (PublishFrame(event.frame),)

    if isinstance(event, CommandReceived):
        if kind is PnStateKind.AWAITING_DECISION:
            cmd = event.command
            if isinstance(cmd, RepelCommand):
                new = PnState(kind=PnStateKind.REPELLING,
                              until_s=now_s + cmd.duration_s)
                return new, (PlayDeterrent(cmd),
                             Flash(freq_hz=cmd.flash_freq_hz,
                                   duration_s=cmd.duration_s))
            return PnState.idle(), ()
        return state, (LogAnomaly(f"command received in state {kind.value}"),)

    if isinstance(event, TimerExpired):
        if not _timer_matches(state, event, now_s):
            return state, ()  # stale timer from an abandoned deadline
        if kind is PnStateKind.AWAITING_DECISION:
            return PnState.idle(), ()
        if kind is PnStateKind.REPELLING:
            return PnState(kind=PnStateKind.COOLDOWN,
                           until_s=now_s + config.repel_cooldown_s), ()
        if kind is PnStateKind.COOLDOWN:
            return PnState.idle(), ()
        return state, (LogAnomaly(f"timer expired in state {kind.value}"),)

    return state, (LogAnomaly(f"unknown event {type(event).__name__}"),)


@dataclass(frozen=True)
class FlashSchedule:
    """On/off cycle times for the dimming flashlight, relative to start."""

    freq_hz: float
    duration_s: float
    cycles: tuple[tuple[float, float], ...]


def flash_schedule(freq_hz: float, duration_s: float) -> FlashSchedule:
    if not freq_hz > 0 or not duration_s > 0:
        raise InvalidInputError("flash frequency and duration must be positive")
    n = int(np.floor(duration_s * freq_hz + 1e-9))
    period = 1.0 / freq_hz
    cycles = tuple((k * period, k * period + period / 2.0) for k in range(n))
    return FlashSchedule(freq_hz=freq_hz, duration_s=duration_s, cycles=cycles)


def execute_repel(command: RepelCommand,
                  bee_clip: AudioClip) -> tuple[AudioClip, FlashSchedule]:
    """Materialize a repel command: modified clip plus flash schedule."""
    clip = apply_modification(bee_clip, command.deterrent)
    return clip, flash_schedule(command.flash_freq_hz, command.duration_s)


def ir_duty_cycle(state_log: list[tuple[float, PnState]],
                  end_time_s: float) -> float:
    """Fraction of logged time the camera was powered.

    state_log holds (time, state) entries in chronological order, starting
    with the initial state; end_time_s closes the last interval.
    """
    if not state_log:
        raise InvalidInputError("state log is empty")
    times = [t for t, _ in state_log]
    if any(b < a for a, b in zip(times, times[1:])) or end_time_s < times[-1]:
        raise InvalidInputError("state log must be chronological")
    total = end_time_s - times[0]
    if total <= 0:
        return 0.0
    powered = 0.0
    for (t, state), t_next in zip(state_log, times[1:] + [end_time_s]):
        if state.kind in IR_POWERED_STATES:
            powered += t_next - t
    return powered / total
