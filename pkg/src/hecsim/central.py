"""Central node: frame triage, detector plumbing, warnings, and evaluation.

The central node receives thermal frames, runs a detector on each one
exactly once, and turns positive decisions into a repel command plus an
officer message and a siren record. Two simulation detectors are built in:
an oracle that reads the simulated ground truth, and a stochastic stand-in
with configurable true and false positive rates. The evaluation half of the
module scores box detectors with IoU and average precision at IoU 0.5.
"""

from __future__ import annotations

import json
import logging
import subprocess
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Protocol

import numpy as np

from .deterrent import pick_modification
from .errors import InvalidInputError
from .peripheral import NegativeDecision, RepelCommand, ThermalFrame
from .seeds import derive_seed

log = logging.getLogger(__name__)

# Detector quality reported for the original thermal-image corpus (full
# precision model vs. the embedded quantized build). That corpus is not
# bundled, so these are context, not test targets.
REFERENCE_AP50_FULL = 0.8952
REFERENCE_AP50_QUANTIZED = 0.6752


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with corners (x0, y0) and (x1, y1), x0 <= x1."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise InvalidInputError("box corners are inverted")

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x0, self.y0, self.x1, self.y1)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; degenerate (zero-area) overlap gives 0."""
    ix = min(a.x1, b.x1) - max(a.x0, b.x0)
    iy = min(a.y1, b.y1) - max(a.y0, b.y0)
    inter = max(0.0, ix) * max(0.0, iy)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True)
class DetectorDecision:
    frame_id: str
    elephant_present: bool
    confidence: float
    boxes: tuple[BoundingBox, ...] = ()


@dataclass(frozen=True)
class FrameTruth:
    """Ground truth handed to simulation detectors, never to real ones."""

    present: bool
    boxes: tuple[BoundingBox, ...] = ()


def default_box(frame: ThermalFrame) -> BoundingBox:
    """Canonical centered box used when the simulator has no geometry."""
    return BoundingBox(frame.width * 0.25, frame.height * 0.25,
                       frame.width * 0.75, frame.height * 0.75)


def truth_from_frame(frame: ThermalFrame) -> FrameTruth:
    if frame.sim_ground_truth is None:
        raise InvalidInputError(
            f"frame {frame.frame_id} carries no simulated ground truth")
    boxes = (default_box(frame),) if frame.sim_ground_truth else ()
    return FrameTruth(present=frame.sim_ground_truth, boxes=boxes)


class Detector(Protocol):
    name: str

    def decide(self, frame: ThermalFrame,
               truth: FrameTruth | None = None) -> DetectorDecision: ...


class OracleDetector:
    """Perfect detector: echoes the ground truth with confidence 1."""

    name = "oracle"

    def decide(self, frame: ThermalFrame,
               truth: FrameTruth | None = None) -> DetectorDecision:
        if truth is None:
            truth = truth_from_frame(frame)
        return DetectorDecision(
            frame_id=frame.frame_id,
            elephant_present=truth.present,
            confidence=1.0 if truth.present else 0.0,
            boxes=truth.boxes if truth.present else (),
        )


@dataclass(frozen=True)
class StochasticDetectorParams:
    tpr: float = 0.9
    fpr: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for r in (self.tpr, self.fpr):
            if not 0.0 <= r <= 1.0:
                raise InvalidInputError("rates must lie in [0, 1]")


class StochasticDetector:
    """Rate-model detector: deterministic per (seed, frame_id).

    A truth-positive frame is flagged with probability tpr, a truth-negative
    one with probability fpr. The per-frame draw is keyed by the seed and
    the frame id, so replaying a run reproduces every decision regardless of
    arrival order.
    """

    name = "stochastic"

    def __init__(self, params: StochasticDetectorParams = StochasticDetectorParams()):
        self.params = params

    def decide(self, frame: ThermalFrame,
               truth: FrameTruth | None = None) -> DetectorDecision:
        if truth is None:
            truth = truth_from_frame(frame)
        rng = np.random.default_rng(
            derive_seed(self.params.seed, "frame", frame.frame_id))
        draw = float(rng.random())
        present = draw < (self.params.tpr if truth.present else self.params.fpr)
        if not present:
            return DetectorDecision(frame_id=frame.frame_id,
                                    elephant_present=False,
                                    confidence=float(rng.uniform(0.0, 0.5)))
        if truth.present and truth.boxes:
            boxes = truth.boxes
        else:
            # false alarm: an arbitrary plausible box
            x0 = float(rng.uniform(0, frame.width * 0.5))
            y0 = float(rng.uniform(0, frame.height * 0.5))
            boxes = (BoundingBox(x0, y0,
                                 x0 + float(rng.uniform(1, frame.width * 0.5)),
                                 y0 + float(rng.uniform(1, frame.height * 0.5))),)
        return DetectorDecision(frame_id=frame.frame_id, elephant_present=True,
                                confidence=float(rng.uniform(0.5, 1.0)),
                                boxes=boxes)


def detect_frame(frame: ThermalFrame, detector: Detector,
                 truth: FrameTruth | None = None) -> DetectorDecision:
    """Run one detector on one frame."""
    return detector.decide(frame, truth=truth)


# ---- central node state machine ----

@dataclass(frozen=True)
class CnConfig:
    node_id: str = "cn"
    repel_duration_s: float = 10.0
    flash_freq_hz: float = 2.0
    deterrent_alpha_range: tuple[float, float] = (0.5, 1.5)
    deterrent_seed: int = 0


@dataclass(frozen=True)
class CnState:
    """Pending frames awaiting a detector result, and decided frame ids."""

    pending: tuple[tuple[str, str], ...] = ()  # (frame_id, pn_id)
    decided: frozenset[str] = frozenset()

    def pending_pn(self, frame_id: str) -> str | None:
        for fid, pn in self.pending:
            if fid == frame_id:
                return pn
        return None


@dataclass(frozen=True)
class FrameReceived:
    frame: ThermalFrame


@dataclass(frozen=True)
class DetectorResult:
    decision: DetectorDecision


CnEvent = FrameReceived | DetectorResult


class WarningKind(str, Enum):
    OFFICER_MESSAGE = "officer_message"
    SIREN = "siren"


@dataclass(frozen=True)
class WarningRecord:
    kind: WarningKind
    timestamp_s: float
    pn_id: str
    frame_id: str
    message: str

    def to_record(self) -> dict:
        return {"kind": self.kind.value, "t": self.timestamp_s,
                "pn_id": self.pn_id, "frame_id": self.frame_id,
                "message": self.message}


@dataclass(frozen=True)
class RunDetector:
    frame: ThermalFrame


@dataclass(frozen=True)
class PublishRepelCommand:
    command: RepelCommand
    frame_id: str


@dataclass(frozen=True)
class PublishNegativeDecision:
    decision: NegativeDecision


@dataclass(frozen=True)
class OfficerMessage:
    record: WarningRecord


@dataclass(frozen=True)
class Siren:
    record: WarningRecord


@dataclass(frozen=True)
class CnAnomaly:
    reason: str


CnAction = (RunDetector | PublishRepelCommand | PublishNegativeDecision
            | OfficerMessage | Siren | CnAnomaly)


def cn_step(state: CnState, event: CnEvent, config: CnConfig,
            now_s: float) -> tuple[CnState, tuple[CnAction, ...]]:
    """Advance the central node by one event.

    Each frame id is decided at most once: repeat frames and repeat or
    unknown detector results produce an anomaly action and nothing else.
    """
    if isinstance(event, FrameReceived):
        frame = event.frame
        if frame.frame_id in state.decided or \
                state.pending_pn(frame.frame_id) is not None:
            return state, (CnAnomaly(f"duplicate frame {frame.frame_id}"),)
        new = CnState(pending=state.pending + ((frame.frame_id, frame.pn_id),),
                      decided=state.decided)
        return new, (RunDetector(frame),)

    if isinstance(event, DetectorResult):
        decision = event.decision
        fid = decision.frame_id
        if fid in state.decided:
            return state, (CnAnomaly(f"repeat decision for frame {fid}"),)
        pn_id = state.pending_pn(fid)
        if pn_id is None:
            return state, (CnAnomaly(f"decision for unknown frame {fid}"),)
        new = CnState(
            pending=tuple(p for p in state.pending if p[0] != fid),
            decided=state.decided | {fid},
        )
        if not decision.elephant_present:
            neg = NegativeDecision(pn_id=pn_id, frame_id=fid, issued_at_s=now_s)
            return new, (PublishNegativeDecision(neg),)
        deterrent = pick_modification(
            derive_seed(config.deterrent_seed, "repel", fid),
            config.deterrent_alpha_range)
        command = RepelCommand(pn_id=pn_id, issued_at_s=now_s,
                               deterrent=deterrent,
                               flash_freq_hz=config.flash_freq_hz,
                               duration_s=config.repel_duration_s)
        officer = WarningRecord(
            kind=WarningKind.OFFICER_MESSAGE, timestamp_s=now_s, pn_id=pn_id,
            frame_id=fid,
            message=f"elephant confirmed near {pn_id}; repel playback started")
        siren = WarningRecord(
            kind=WarningKind.SIREN, timestamp_s=now_s, pn_id=pn_id,
            frame_id=fid, message=f"siren sounding at {pn_id}")
        return new, (PublishRepelCommand(command, frame_id=fid),
                     OfficerMessage(officer), Siren(siren))

    return state, (CnAnomaly(f"unknown event {type(event).__name__}"),)


# ---- warning sinks ----

class WarningSink(Protocol):
    def write(self, record: WarningRecord) -> None: ...


class MemorySink:
    def __init__(self):
        self.records: list[WarningRecord] = []

    def write(self, record: WarningRecord) -> None:
        self.records.append(record)


class JsonlSink:
    """Appends one JSON object per record to a file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def write(self, record: WarningRecord) -> None:
        with open(self.path, "a", encoding="ascii") as fh:
            fh.write(json.dumps(record.to_record(), sort_keys=True) + "\n")


class CommandSink:
    """Pipes each record as one JSON line to an external command's stdin."""

    def __init__(self, argv: list[str], timeout_s: float = 5.0):
        self.argv = list(argv)
        self.timeout_s = timeout_s

    def write(self, record: WarningRecord) -> None:
        payload = json.dumps(record.to_record(), sort_keys=True) + "\n"
        subprocess.run(self.argv, input=payload.encode("ascii"),
                       timeout=self.timeout_s, check=True,
                       stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)


def emit_warning(record: WarningRecord, sinks: list[WarningSink]) -> None:
    """Write one record to every sink; a failed write is retried once.

    Warning delivery must never block the repel path, so a sink that fails
    twice is logged and skipped.
    """
    for sink in sinks:
        try:
            sink.write(record)
        except Exception:
            try:
                sink.write(record)
            except Exception:
                log.error("warning sink %r failed twice for frame %s",
                          type(sink).__name__, record.frame_id)


# ---- labeled frames and AP evaluation ----

@dataclass(frozen=True)
class LabeledFrame:
    frame: ThermalFrame
    boxes: tuple[BoundingBox, ...]
    split: str = "test"

    @property
    def truth(self) -> FrameTruth:
        return FrameTruth(present=bool(self.boxes), boxes=self.boxes)


@dataclass(frozen=True)
class LabeledFrameSet:
    frames: tuple[LabeledFrame, ...]

    def to_json(self) -> dict:
        return {"frames": [
            {
                "frame_id": lf.frame.frame_id,
                "pn_id": lf.frame.pn_id,
                "timestamp_s": lf.frame.timestamp_s,
                "width": lf.frame.width,
                "height": lf.frame.height,
                "boxes": [b.as_tuple() for b in lf.boxes],
                "split": lf.split,
            }
            for lf in self.frames
        ]}

    @classmethod
    def from_json(cls, data: dict) -> "LabeledFrameSet":
        try:
            frames = []
            for rec in data["frames"]:
                boxes = tuple(BoundingBox(*map(float, b)) for b in rec["boxes"])
                frame = ThermalFrame(
                    frame_id=str(rec["frame_id"]),
                    pn_id=str(rec.get("pn_id", "")),
                    timestamp_s=float(rec.get("timestamp_s", 0.0)),
                    width=int(rec.get("width", 32)),
                    height=int(rec.get("height", 24)),
                    sim_ground_truth=bool(boxes),
                )
                frames.append(LabeledFrame(frame=frame, boxes=boxes,
                                           split=str(rec.get("split", "test"))))
            return cls(frames=tuple(frames))
        except (KeyError, TypeError) as exc:
            raise InvalidInputError(f"bad labeled frame set: {exc}")


def evaluate_ap50(detector: Detector, frame_set: LabeledFrameSet,
                  iou_threshold: float = 0.5) -> float:
    """Average precision at the given IoU threshold, all-point interpolation.

    Predictions are ranked by confidence; each can match at most one still
    unmatched truth box in its own frame. A positive decision without boxes
    cannot be scored and is rejected.
    """
    total_truth = sum(len(lf.boxes) for lf in frame_set.frames)
    predictions = []  # (confidence, order, frame index, box)
    for idx, lf in enumerate(frame_set.frames):
        decision = detector.decide(lf.frame, truth=lf.truth)
        if decision.elephant_present and not decision.boxes:
            raise InvalidInputError(
                f"detector {detector.name!r} flagged frame "
                f"{lf.frame.frame_id} without boxes")
        for box in decision.boxes:
            predictions.append((decision.confidence, len(predictions), idx, box))
    if not predictions or total_truth == 0:
        return 0.0

    predictions.sort(key=lambda p: (-p[0], p[1]))
    matched: set[tuple[int, int]] = set()
    tp = np.zeros(len(predictions))
    for rank, (_, _, idx, box) in enumerate(predictions):
        best_iou = 0.0
        best_key = None
        for gt_idx, gt in enumerate(frame_set.frames[idx].boxes):
            if (idx, gt_idx) in matched:
                continue
            value = iou(box, gt)
            if value > best_iou:
                best_iou = value
                best_key = (idx, gt_idx)
        if best_key is not None and best_iou >= iou_threshold:
            matched.add(best_key)
            tp[rank] = 1.0

    cum_tp = np.cumsum(tp)
    precision = cum_tp / (np.arange(len(predictions)) + 1)
    recall = cum_tp / total_truth
    # monotone precision envelope, then sum the recall increments
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    ap = 0.0
    prev_recall = 0.0
    for p, r in zip(envelope, recall):
        if r > prev_recall:
            ap += (r - prev_recall) * p
            prev_recall = r
    return float(ap)
