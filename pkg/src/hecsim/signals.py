"""Signal containers, spectra, and synthetic sources.

Seismic traces are 1-D float arrays with a sample rate and an absolute start
time; audio clips are the same thing with amplitudes nominally in [-1, 1].
Spectra exclude the DC bin so that a peak search can never land on the mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInputError


def next_pow2(n: int) -> int:
    """Smallest power of two >= n."""
    if n < 1:
        return 1
    return 1 << (int(n) - 1).bit_length()


def default_pad_length(n_samples: int) -> int:
    """FFT length used throughout: next power of two >= 4x the segment.

    The 4x interpolation keeps the bin spacing for a 0.125 s segment at
    1 kHz below 2 Hz, narrow enough to separate the 20 Hz band edge from
    neighboring energy.
    """
    return next_pow2(4 * n_samples)


@dataclass(frozen=True, eq=False)
class SeismicTrace:
    """Geophone samples with a sample rate and absolute start time."""

    samples: np.ndarray
    sample_rate_hz: float
    start_time_s: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInputError("trace samples must be 1-D")
        if not self.sample_rate_hz > 0:
            raise InvalidInputError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate_hz


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono audio samples, nominally in [-1, 1], with a frame rate."""

    samples: np.ndarray
    frame_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInputError("clip samples must be 1-D")
        if not self.frame_rate_hz > 0:
            raise InvalidInputError("frame rate must be positive")
        object.__setattr__(self, "samples", samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.frame_rate_hz


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Magnitude spectrum over positive frequencies (DC excluded)."""

    freqs_hz: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs_hz, dtype=np.float64)
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if f.shape != m.shape or f.ndim != 1 or len(f) == 0:
            raise InvalidInputError("spectrum arrays must be equal-length 1-D")
        if f[0] <= 0:
            raise InvalidInputError("spectrum must start above DC")
        object.__setattr__(self, "freqs_hz", f)
        object.__setattr__(self, "magnitudes", m)


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Short-time magnitude spectra; frame_times_s are frame start times."""

    frame_times_s: np.ndarray
    freqs_hz: np.ndarray
    magnitudes: np.ndarray  # shape (n_frames, n_freqs)
    frame_s: float
    hop_s: float

    def __post_init__(self):
        m = np.asarray(self.magnitudes, dtype=np.float64)
        if m.shape != (len(self.frame_times_s), len(self.freqs_hz)):
            raise InvalidInputError("spectrogram shape mismatch")
        object.__setattr__(self, "magnitudes", m)


@dataclass(frozen=True)
class RumbleSpec:
    """Rise-then-fall chirp model of an elephant rumble.

    The instantaneous frequency ramps linearly from f_start_hz to f_peak_hz
    over the first half of the duration and back down to f_end_hz over the
    second half. envelope is "flat" or "hann".
    """

    duration_s: float
    f_start_hz: float = 20.0
    f_peak_hz: float = 40.0
    f_end_hz: float = 20.0
    envelope: str = "flat"
    snr_db: float = 20.0

    def __post_init__(self):
        if not self.duration_s > 0:
            raise InvalidInputError("rumble duration must be positive")
        for f in (self.f_start_hz, self.f_peak_hz, self.f_end_hz):
            if not f > 0:
                raise InvalidInputError("rumble frequencies must be positive")
        if self.envelope not in ("flat", "hann"):
            raise InvalidInputError(f"unknown envelope {self.envelope!r}")


def window_trace(trace: SeismicTrace, window_s: float) -> list[SeismicTrace]:
    """Split a trace into non-overlapping windows of window_s seconds.

    A trailing remainder shorter than one window is discarded. Each window
    keeps an absolute start time so detections can be placed on the original
    timeline.
    """
    if len(trace.samples) == 0:
        raise InvalidInputError("cannot window an empty trace")
    if not window_s > 0:
        raise InvalidInputError("window_s must be positive")
    n = int(round(window_s * trace.sample_rate_hz))
    if n < 1:
        raise InvalidInputError("window shorter than one sample")
    count = len(trace.samples) // n
    return [
        SeismicTrace(
            samples=trace.samples[i * n:(i + 1) * n],
            sample_rate_hz=trace.sample_rate_hz,
            start_time_s=trace.start_time_s + i * n / trace.sample_rate_hz,
        )
        for i in range(count)
    ]


def compute_spectrum(samples: np.ndarray, sample_rate_hz: float,
                     pad_to: int | None = None) -> Spectrum:
    """Magnitude spectrum of a segment: mean removed, zero-padded, DC dropped.

    Parameters
    ----------
    samples : array
        Time-domain segment.
    sample_rate_hz : float
        Sampling rate.
    pad_to : int, optional
        FFT length; defaults to the next power of two >= 4x the segment
        length. Must be >= the segment length.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or len(x) == 0:
        raise InvalidInputError("segment must be a non-empty 1-D array")
    if not sample_rate_hz > 0:
        raise InvalidInputError("sample rate must be positive")
    if pad_to is None:
        pad_to = default_pad_length(len(x))
    if pad_to < len(x):
        raise InvalidInputError("pad_to shorter than the segment")
    mags = np.abs(np.fft.rfft(x - x.mean(), n=pad_to))
    freqs = np.fft.rfftfreq(pad_to, 1.0 / sample_rate_hz)
    return Spectrum(freqs_hz=freqs[1:], magnitudes=mags[1:])


def peak_frequency(spectrum: Spectrum) -> float:
    """Frequency of the largest magnitude bin; ties go to the lowest bin."""
    return float(spectrum.freqs_hz[int(np.argmax(spectrum.magnitudes))])


def _samples_and_rate(signal) -> tuple[np.ndarray, float, float]:
    if isinstance(signal, SeismicTrace):
        return signal.samples, signal.sample_rate_hz, signal.start_time_s
    if isinstance(signal, AudioClip):
        return signal.samples, signal.frame_rate_hz, 0.0
    raise InvalidInputError(f"unsupported signal type {type(signal).__name__}")


def compute_stft(signal, frame_s: float, hop_s: float,
                 window_fn: str = "hann") -> Spectrogram:
    """Short-time spectrum over sliding frames.

    The frame count is floor((duration - frame_s) / hop_s) + 1; a signal
    shorter than one frame is rejected. Each frame is mean-removed,
    multiplied by the window, and zero-padded to the default FFT length.
    """
    x, rate, t0 = _samples_and_rate(signal)
    frame = int(round(frame_s * rate))
    hop = int(round(hop_s * rate))
    if frame < 2 or hop < 1:
        raise InvalidInputError("frame_s and hop_s too small for the rate")
    if len(x) < frame:
        raise InvalidInputError("signal shorter than one frame")
    if window_fn == "hann":
        win = np.hanning(frame)
    elif window_fn == "rect":
        win = np.ones(frame)
    elif callable(window_fn):
        win = np.asarray(window_fn(frame), dtype=np.float64)
    else:
        raise InvalidInputError(f"unknown window {window_fn!r}")

    n_frames = (len(x) - frame) // hop + 1
    pad = default_pad_length(frame)
    segs = np.empty((n_frames, frame))
    for k in range(n_frames):
        seg = x[k * hop:k * hop + frame]
        segs[k] = (seg - seg.mean()) * win
    mags = np.abs(np.fft.rfft(segs, n=pad, axis=1))[:, 1:]
    freqs = np.fft.rfftfreq(pad, 1.0 / rate)[1:]
    times = t0 + np.arange(n_frames) * hop / rate
    return Spectrogram(frame_times_s=times, freqs_hz=freqs, magnitudes=mags,
                       frame_s=frame / rate, hop_s=hop / rate)


def chirp_waveform(spec: RumbleSpec, sample_rate_hz: float) -> np.ndarray:
    """Phase-continuous rise/fall chirp, unit amplitude before the envelope."""
    n = int(round(spec.duration_s * sample_rate_hz))
    if n < 2:
        raise InvalidInputError("rumble too short for the sample rate")
    t = np.arange(n) / sample_rate_hz
    half = spec.duration_s / 2.0
    f_inst = np.where(
        t < half,
        spec.f_start_hz + (spec.f_peak_hz - spec.f_start_hz) * t / half,
        spec.f_peak_hz + (spec.f_end_hz - spec.f_peak_hz) * (t - half) / half,
    )
    phase = 2.0 * np.pi * np.cumsum(f_inst) / sample_rate_hz
    x = np.sin(phase)
    if spec.envelope == "hann":
        x = x * np.hanning(n)
    return x


def synth_rumble(spec: RumbleSpec, sample_rate_hz: float = 1000.0,
                 seed: int = 0, total_s: float | None = None,
                 onset_s: float = 0.0) -> SeismicTrace:
    """Rumble chirp embedded in white background noise at spec.snr_db.

    SNR is the ratio of chirp RMS (over the chirp extent) to noise RMS.
    By default the trace covers exactly the rumble; total_s and onset_s
    place it inside a longer noisy record.
    """
    if total_s is None:
        total_s = spec.duration_s
    if onset_s < 0 or onset_s + spec.duration_s > total_s + 1e-9:
        raise InvalidInputError("rumble does not fit in the trace")
    rng = np.random.default_rng(seed)
    n = int(round(total_s * sample_rate_hz))
    chirp = chirp_waveform(spec, sample_rate_hz)
    chirp_rms = float(np.sqrt(np.mean(chirp ** 2)))
    noise_rms = chirp_rms / (10.0 ** (spec.snr_db / 20.0))
    x = rng.standard_normal(n) * noise_rms
    i0 = int(round(onset_s * sample_rate_hz))
    x[i0:i0 + len(chirp)] += chirp[:max(0, n - i0)]
    return SeismicTrace(samples=x, sample_rate_hz=sample_rate_hz)


def synth_rumble_stream(events: list[tuple[float, RumbleSpec]], total_s: float,
                        sample_rate_hz: float = 1000.0, seed: int = 0,
                        noise_rms: float = 1.0) -> SeismicTrace:
    """Background noise of the given RMS with one chirp added per event.

    Each event is (onset_s, spec); its chirp is scaled so that chirp RMS over
    noise RMS matches spec.snr_db. Events may overlap.
    """
    rng = np.random.default_rng(seed)
    n = int(round(total_s * sample_rate_hz))
    x = rng.standard_normal(n) * noise_rms
    for onset_s, spec in events:
        if onset_s < 0 or onset_s + spec.duration_s > total_s + 1e-9:
            raise InvalidInputError("event does not fit in the stream")
        chirp = chirp_waveform(spec, sample_rate_hz)
        chirp_rms = float(np.sqrt(np.mean(chirp ** 2)))
        scale = noise_rms * (10.0 ** (spec.snr_db / 20.0)) / chirp_rms
        i0 = int(round(onset_s * sample_rate_hz))
        seg = chirp[:max(0, n - i0)] * scale
        x[i0:i0 + len(seg)] += seg
    return SeismicTrace(samples=x, sample_rate_hz=sample_rate_hz)


def synth_bee_buzz(duration_s: float = 2.0, frame_rate_hz: float = 8000.0,
                   seed: int = 0, f0_hz: float = 230.0, n_harmonics: int = 7,
                   noise_db: float = -12.0, noise_knee_hz: float = 500.0) -> AudioClip:
    """Synthetic bee-buzz: a harmonic stack over a shaped noise bed.

    The stack has 1/h harmonic rolloff, slight vibrato, and slow amplitude
    pulsing. The noise bed has a smooth low-pass envelope; it matters for
    spectrogram comparisons because the broadband shape survives playback
    modifications that move the harmonic comb.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration_s * frame_rate_hz))
    if n < 2:
        raise InvalidInputError("clip too short")
    t = np.arange(n) / frame_rate_hz
    x = np.zeros(n)
    vibrato = 1.0 + 0.01 * np.sin(2 * np.pi * 3.0 * t + rng.uniform(0, 2 * np.pi))
    phases = rng.uniform(0, 2 * np.pi, n_harmonics)
    for h in range(1, n_harmonics + 1):
        f_inst = f0_hz * h * vibrato
        phase = 2 * np.pi * np.cumsum(f_inst) / frame_rate_hz + phases[h - 1]
        x += np.sin(phase) / h
    x *= 1.0 + 0.25 * np.sin(2 * np.pi * 0.7 * t + rng.uniform(0, 2 * np.pi))

    spectrum_shape = 1.0 / (1.0 + (np.fft.rfftfreq(n, 1.0 / frame_rate_hz) / noise_knee_hz) ** 2)
    noise = np.fft.irfft(np.fft.rfft(rng.standard_normal(n)) * spectrum_shape, n=n)
    noise /= np.sqrt(np.mean(noise ** 2))
    x += noise * float(np.sqrt(np.mean(x ** 2))) * (10.0 ** (noise_db / 20.0))
    x /= np.max(np.abs(x))
    return AudioClip(samples=x, frame_rate_hz=frame_rate_hz)
