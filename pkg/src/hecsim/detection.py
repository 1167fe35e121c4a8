"""Windowed seismic rumble detection and the spectrogram reference detector.

The field detector scores each 4 s window by reading the peak frequency of
32 short sub-segments and measuring the longest consecutive run whose peak
falls strictly inside the rumble band. The spectrogram detector is the
slower reference used to label events when scoring recall.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidInputError
from .signals import (SeismicTrace, compute_spectrum, compute_stft,
                      peak_frequency, window_trace)

# Recall reported for the original 44-recording field dataset. Context only:
# that corpus is not available here, so this is not a test target.
REFERENCE_FIELD_RECALL = 0.82


@dataclass(frozen=True)
class Algorithm1Params:
    """Scoring thresholds for the windowed detector.

    A sub-segment is in-band when its peak frequency lies strictly between
    band_low_hz and band_high_hz. With the default 4 s window and 0.125 s
    sub-segments there are 32 readings; a run longer than run_low scores 1
    and a run of run_high or more scores 2.
    """

    window_s: float = 4.0
    subsegment_s: float = 0.125
    band_low_hz: float = 20.0
    band_high_hz: float = 40.0
    run_low: int = 6
    run_high: int = 24

    def __post_init__(self):
        if not 0 < self.subsegment_s <= self.window_s:
            raise InvalidInputError("sub-segment must fit inside the window")
        ratio = self.window_s / self.subsegment_s
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvalidInputError("window must hold a whole number of sub-segments")
        if not 0 < self.band_low_hz < self.band_high_hz:
            raise InvalidInputError("band edges must satisfy 0 < low < high")
        if not 0 < self.run_low < self.run_high:
            raise InvalidInputError("run thresholds must satisfy 0 < low < high")

    @property
    def subsegments_per_window(self) -> int:
        return int(round(self.window_s / self.subsegment_s))


@dataclass(frozen=True)
class WindowDetection:
    """Score for one analysis window."""

    window_index: int
    ds: int
    max_run: int
    window_start_s: float


@dataclass(frozen=True)
class RumbleEvent:
    """Event interval found by the spectrogram detector."""

    t_start_s: float
    t_end_s: float
    peak_trajectory: tuple[tuple[float, float], ...]  # (frame time, peak Hz)

    @property
    def duration_s(self) -> float:
        return self.t_end_s - self.t_start_s


@dataclass(frozen=True)
class RecallReport:
    oracle_count: int
    matched_count: int
    recall: float | None  # None when there are no reference events
    event_matches: tuple[tuple[bool, int | None], ...]  # (matched, window index)


def score_from_run(max_run: int, params: Algorithm1Params) -> int:
    """Map the longest in-band run to a detection score of 0, 1, or 2."""
    if max_run >= params.run_high:
        return 2
    if params.run_low < max_run < params.run_high:
        return 1
    return 0


def detect_window(window: SeismicTrace,
                  params: Algorithm1Params = Algorithm1Params()) -> WindowDetection:
    """Score one window of seismic samples.

    The window is cut into consecutive sub-segments; each one contributes a
    single peak-frequency reading. Strict band inequalities mean a peak at
    exactly 20 or 40 Hz does not count.
    """
    n_expected = int(round(params.window_s * window.sample_rate_hz))
    if abs(len(window.samples) - n_expected) > 1:
        raise InvalidInputError(
            f"window holds {len(window.samples)} samples, expected {n_expected}")
    n_sub = int(round(params.subsegment_s * window.sample_rate_hz))
    if n_sub < 2:
        raise InvalidInputError("sub-segment too short for the sample rate")

    run = 0
    max_run = 0
    for k in range(params.subsegments_per_window):
        seg = window.samples[k * n_sub:(k + 1) * n_sub]
        if len(seg) < n_sub:
            break
        peak = peak_frequency(compute_spectrum(seg, window.sample_rate_hz))
        if params.band_low_hz < peak < params.band_high_hz:
            run += 1
            max_run = max(max_run, run)
        else:
            run = 0
    return WindowDetection(window_index=0, ds=score_from_run(max_run, params),
                           max_run=max_run, window_start_s=window.start_time_s)


def detect_stream(trace: SeismicTrace,
                  params: Algorithm1Params = Algorithm1Params()) -> list[WindowDetection]:
    """Score every full window of a trace; the remainder is ignored."""
    out = []
    for i, window in enumerate(window_trace(trace, params.window_s)):
        det = detect_window(window, params)
        out.append(replace(det, window_index=i))
    return out


def stft_oracle_detect(trace: SeismicTrace, frame_s: float = 0.5,
                       hop_s: float = 0.125, min_event_s: float = 3.0,
                       require_rise_fall: bool = False,
                       band_low_hz: float = 20.0,
                       band_high_hz: float = 40.0) -> list[RumbleEvent]:
    """Reference detector: track the spectrogram peak through the band.

    Maximal runs of frames whose peak frequency sits strictly inside the
    band become events when they last at least min_event_s. An event spans
    from the first frame's start to the last frame's end. With
    require_rise_fall, the peak trajectory must attain its maximum strictly
    inside the run, which discards one-sided sweeps.
    """
    spec = compute_stft(trace, frame_s, hop_s, window_fn="hann")
    peaks = spec.freqs_hz[np.argmax(spec.magnitudes, axis=1)]
    in_band = (peaks > band_low_hz) & (peaks < band_high_hz)

    events = []
    i = 0
    n = len(in_band)
    while i < n:
        if not in_band[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and in_band[j + 1]:
            j += 1
        t_start = float(spec.frame_times_s[i])
        t_end = float(spec.frame_times_s[j]) + frame_s
        if t_end - t_start >= min_event_s:
            trajectory = tuple(
                (float(spec.frame_times_s[k]), float(peaks[k]))
                for k in range(i, j + 1))
            keep = True
            if require_rise_fall:
                freqs = [p for _, p in trajectory]
                top = max(freqs)
                first = freqs.index(top)
                last = len(freqs) - 1 - freqs[::-1].index(top)
                # a plateau touching either end is still one-sided
                keep = first > 0 and last < len(freqs) - 1
            if keep:
                events.append(RumbleEvent(t_start_s=t_start, t_end_s=t_end,
                                          peak_trajectory=trajectory))
        i = j + 1
    return events


def match_and_recall(detections: list[WindowDetection],
                     events: list[RumbleEvent], ds_min: int = 1,
                     window_s: float = 4.0) -> RecallReport:
    """Score the windowed detector against reference events.

    An event is matched when any window with ds >= ds_min overlaps its
    interval. Recall is matched / total; with no reference events the ratio
    is undefined and recall is None rather than 0 or 1.
    """
    hits = [d for d in detections if d.ds >= ds_min]
    matches = []
    matched = 0
    for ev in events:
        found = None
        for det in hits:
            if det.window_start_s < ev.t_end_s and \
                    det.window_start_s + window_s > ev.t_start_s:
                found = det.window_index
                break
        matches.append((found is not None, found))
        matched += found is not None
    recall = None if not events else matched / len(events)
    return RecallReport(oracle_count=len(events), matched_count=matched,
                        recall=recall, event_matches=tuple(matches))
