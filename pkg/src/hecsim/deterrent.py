"""Playback deterrents: randomized bee-sound modifications and similarity.

Elephants habituate to a repeated clip, so every activation draws one of
three modifications with a random strength factor alpha: reinterpreting the
frame rate, overlaying pink noise, or punching short silence gaps. The
spectrogram cross-correlation score checks that a modified clip still
resembles the original.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidInputError
from .signals import AudioClip, compute_stft

log = logging.getLogger(__name__)


class ModificationKind(str, Enum):
    FRAME_RATE_SCALE = "frame_rate_scale"
    PINK_NOISE_OVERLAY = "pink_noise_overlay"
    SILENCE_GAPS = "silence_gaps"


_KINDS = (ModificationKind.FRAME_RATE_SCALE,
          ModificationKind.PINK_NOISE_OVERLAY,
          ModificationKind.SILENCE_GAPS)


@dataclass(frozen=True)
class ModificationParams:
    """One activation's draw: which modification, how strong, which seed."""

    kind: ModificationKind
    alpha: float
    seed: int


@dataclass(frozen=True)
class SimilarityScore:
    max_xcorr: float
    lag_frames: int


@dataclass(frozen=True)
class GapPlan:
    """Where insert_silence_gaps put its gaps (for audits and tests)."""

    frame_samples: int
    gap_samples: int
    frames: tuple[int, ...]
    offsets: tuple[int, ...]


def pick_modification(rng_or_seed, alpha_range: tuple[float, float] = (0.5, 1.5)
                      ) -> ModificationParams:
    """Draw a modification kind uniformly and alpha uniformly in alpha_range.

    Accepts either an integer seed or a numpy Generator; with a Generator a
    fresh seed is drawn from it first. The seed is recorded in the result so
    the exact draw can be replayed.
    """
    if isinstance(rng_or_seed, (int, np.integer)):
        seed = int(rng_or_seed)
    elif isinstance(rng_or_seed, np.random.Generator):
        seed = int(rng_or_seed.integers(0, 2 ** 63))
    else:
        raise InvalidInputError("expected an int seed or numpy Generator")
    lo, hi = alpha_range
    if not lo < hi:
        raise InvalidInputError("alpha_range must satisfy lo < hi")
    rng = np.random.default_rng(seed)
    kind = _KINDS[int(rng.integers(0, len(_KINDS)))]
    alpha = float(rng.uniform(lo, hi))
    return ModificationParams(kind=kind, alpha=alpha, seed=seed)


def apply_modification(clip: AudioClip, params: ModificationParams) -> AudioClip:
    if params.kind is ModificationKind.FRAME_RATE_SCALE:
        return modify_frame_rate(clip, params.alpha)
    if params.kind is ModificationKind.PINK_NOISE_OVERLAY:
        return overlay_pink_noise(clip, params.alpha, params.seed)
    if params.kind is ModificationKind.SILENCE_GAPS:
        return insert_silence_gaps(clip, params.alpha, params.seed)
    raise InvalidInputError(f"unknown modification {params.kind!r}")


def modify_frame_rate(clip: AudioClip, alpha: float) -> AudioClip:
    """Reinterpret the samples at alpha times the original rate.

    The sample values are untouched; pitch and duration change together.
    """
    if not alpha > 0:
        raise InvalidInputError("alpha must be positive")
    return AudioClip(samples=clip.samples, frame_rate_hz=clip.frame_rate_hz * alpha)


def generate_pink_noise(n_samples: int, sample_rate_hz: float, seed: int) -> AudioClip:
    """Pink noise with unit RMS: white noise shaped by 1/sqrt(f).

    Shaping the spectrum of seeded white noise keeps the phases random while
    the power density falls off as 1/f. The DC bin is zeroed, so the result
    is mean-free before normalization.
    """
    if n_samples < 2:
        raise InvalidInputError("need at least two samples")
    rng = np.random.default_rng(seed)
    spectrum = np.fft.rfft(rng.standard_normal(n_samples))
    f = np.fft.rfftfreq(n_samples, 1.0 / sample_rate_hz)
    shape = np.zeros_like(f)
    shape[1:] = 1.0 / np.sqrt(f[1:])
    x = np.fft.irfft(spectrum * shape, n=n_samples)
    x /= np.sqrt(np.mean(x ** 2))
    return AudioClip(samples=x, frame_rate_hz=sample_rate_hz)


def overlay_pink_noise(clip: AudioClip, alpha: float, seed: int) -> AudioClip:
    """Add pink noise scaled to 0.1 * alpha of the clip RMS.

    If the mix exceeds full scale it is renormalized to peak 1. alpha of 0
    or a silent clip returns the input unchanged.
    """
    if alpha < 0:
        raise InvalidInputError("alpha must be non-negative")
    rms = float(np.sqrt(np.mean(clip.samples ** 2)))
    if alpha == 0.0 or rms == 0.0:
        return clip
    noise = generate_pink_noise(len(clip.samples), clip.frame_rate_hz, seed)
    y = clip.samples + noise.samples * (0.1 * alpha * rms)
    peak = float(np.max(np.abs(y)))
    if peak > 1.0:
        y = y / peak
    return AudioClip(samples=y, frame_rate_hz=clip.frame_rate_hz)


def insert_silence_gaps(clip: AudioClip, alpha: float, seed: int,
                        frame_s: float = 1.0, gap_prob: float = 0.3,
                        return_plan: bool = False):
    """Zero one gap of alpha * 100 ms in each randomly selected 1 s frame.

    Every full frame is selected independently with probability gap_prob;
    when chance selects none at all, one frame is forced so that a draw can
    never return the clip unmodified. The gap offset is uniform within the
    frame, and a gap longer than the frame is clamped with a warning. Total
    length never changes.
    """
    if alpha < 0:
        raise InvalidInputError("alpha must be non-negative")
    if not 0 <= gap_prob <= 1:
        raise InvalidInputError("gap_prob must be in [0, 1]")
    rng = np.random.default_rng(seed)
    frame_n = int(round(frame_s * clip.frame_rate_hz))
    n_frames = len(clip.samples) // frame_n if frame_n > 0 else 0
    gap_n = int(round(alpha * 0.1 * clip.frame_rate_hz))
    if gap_n > frame_n:
        log.warning("gap of %d samples clamped to the %d-sample frame",
                    gap_n, frame_n)
        gap_n = frame_n

    selected: list[int] = []
    if n_frames > 0 and gap_n > 0 and gap_prob > 0:
        mask = rng.random(n_frames) < gap_prob
        selected = [k for k in range(n_frames) if mask[k]]
        if not selected:
            selected = [int(rng.integers(0, n_frames))]

    y = clip.samples.copy()
    offsets = []
    for k in selected:
        off = int(rng.integers(0, frame_n - gap_n + 1))
        start = k * frame_n + off
        y[start:start + gap_n] = 0.0
        offsets.append(off)
    out = AudioClip(samples=y, frame_rate_hz=clip.frame_rate_hz)
    if return_plan:
        plan = GapPlan(frame_samples=frame_n, gap_samples=gap_n,
                       frames=tuple(selected), offsets=tuple(offsets))
        return out, plan
    return out


def _log_spectrogram(clip: AudioClip, frame_s: float, hop_s: float):
    spec = compute_stft(clip, frame_s, hop_s, window_fn="hann")
    return spec.freqs_hz, spec.magnitudes


def stft_similarity(a: AudioClip, b: AudioClip, frame_s: float = 0.064,
                    hop_s: float = 0.032) -> SimilarityScore:
    """Best normalized cross-correlation of two log-magnitude spectrograms.

    Each clip is analyzed at its own rate; the finer frequency grid is
    interpolated onto the coarser one so the comparison happens on shared
    bins. Both spectrograms are made zero-mean as a whole, and at every
    integer frame lag the overlapping regions are compared by normalized
    inner product, so an exact copy scores 1 and the bound abs(score) <= 1
    always holds.
    """
    fa, ma = _log_spectrogram(a, frame_s, hop_s)
    fb, mb = _log_spectrogram(b, frame_s, hop_s)
    floor = 1e-6 * max(float(ma.max()), float(mb.max()))
    if floor == 0.0:
        floor = 1e-12
    la = np.log(ma + floor)
    lb = np.log(mb + floor)

    # shared grid: keep the coarser axis, interpolate the other onto it
    if fa[-1] <= fb[-1]:
        grid = fa
        lb = np.array([np.interp(grid, fb, row) for row in lb])
    else:
        grid = fb
        la = np.array([np.interp(grid, fa, row) for row in la])

    la = la - la.mean()
    norm_a = np.linalg.norm(la)
    lb = lb - lb.mean()
    norm_b = np.linalg.norm(lb)
    if norm_a == 0 or norm_b == 0:
        return SimilarityScore(max_xcorr=0.0, lag_frames=0)
    la /= norm_a
    lb /= norm_b

    n_a, n_b = len(la), len(lb)
    best = -2.0
    best_lag = 0
    for lag in range(-(n_b - 1), n_a):
        a0 = max(0, lag)
        a1 = min(n_a, lag + n_b)
        ov_a = la[a0:a1]
        ov_b = lb[a0 - lag:a1 - lag]
        na = np.linalg.norm(ov_a)
        nb = np.linalg.norm(ov_b)
        if na == 0 or nb == 0:
            continue
        score = float(np.dot(ov_a.ravel(), ov_b.ravel()) / (na * nb))
        if score > best:
            best = score
            best_lag = lag
    if best < -1.5:
        raise InvalidInputError("no overlapping frames at any lag")
    return SimilarityScore(max_xcorr=best, lag_frames=best_lag)


def l2_delta(a: AudioClip, b: AudioClip) -> float:
    """Relative L2 distance between two clips as functions of time.

    Clips at the same rate and length are compared sample-wise. Otherwise
    both are evaluated on a shared time grid at the finer rate (zero outside
    their support), which makes a frame-rate reinterpretation register as a
    change even though the stored samples are identical.
    """
    ref = float(np.linalg.norm(a.samples))
    if ref == 0.0:
        ref = 1e-30
    if a.frame_rate_hz == b.frame_rate_hz and len(a.samples) == len(b.samples):
        return float(np.linalg.norm(a.samples - b.samples)) / ref
    rate = max(a.frame_rate_hz, b.frame_rate_hz)
    total = max(a.duration_s, b.duration_s)
    t = np.arange(int(round(total * rate))) / rate
    ta = np.arange(len(a.samples)) / a.frame_rate_hz
    tb = np.arange(len(b.samples)) / b.frame_rate_hz
    ga = np.interp(t, ta, a.samples, left=0.0, right=0.0)
    gb = np.interp(t, tb, b.samples, left=0.0, right=0.0)
    ref = float(np.linalg.norm(ga))
    if ref == 0.0:
        ref = 1e-30
    return float(np.linalg.norm(ga - gb)) / ref
