import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hecsim.errors import InvalidInputError
from hecsim.signals import (AudioClip, RumbleSpec, SeismicTrace,
                            chirp_waveform, compute_spectrum, compute_stft,
                            default_pad_length, next_pow2, peak_frequency,
                            synth_bee_buzz, synth_rumble, synth_rumble_stream,
                            window_trace)
from oracles import (naive_dft_magnitudes, naive_peak_frequency,
                     rumble_instantaneous_freq)


def test_next_pow2():
    assert next_pow2(1) == 1
    assert next_pow2(2) == 2
    assert next_pow2(3) == 4
    assert next_pow2(500) == 512
    assert next_pow2(512) == 512


def test_default_pad_length_is_at_least_four_times_signal():
    for n in (31, 125, 128, 1000):
        padded = default_pad_length(n)
        assert padded >= 4 * n
        assert padded & (padded - 1) == 0  # a power of two


def test_spectrum_matches_naive_dft():
    rng = np.random.default_rng(3)
    samples = rng.standard_normal(48)
    spec = compute_spectrum(samples, sample_rate_hz=400.0, pad_to=128)
    freqs, mags = naive_dft_magnitudes(samples, 400.0, pad_to=128)
    assert np.allclose(spec.freqs_hz, freqs, atol=1e-9)
    assert np.allclose(spec.magnitudes, mags, atol=1e-6)


def test_spectrum_excludes_dc_and_removes_mean():
    samples = np.ones(64) * 5.0  # pure offset
    spec = compute_spectrum(samples, sample_rate_hz=64.0)
    assert spec.freqs_hz[0] > 0.0
    assert np.all(spec.magnitudes < 1e-9)


def test_peak_frequency_exact_for_on_grid_tone():
    fs, n = 1000.0, 125
    pad = 500  # 2 Hz bins; 30 Hz falls on bin 15
    t = np.arange(n) / fs
    tone = np.sin(2 * np.pi * 30.0 * t)
    spec = compute_spectrum(tone, fs, pad_to=pad)
    assert peak_frequency(spec) == pytest.approx(30.0, abs=1e-9)


def test_peak_frequency_tie_takes_lowest():
    from hecsim.signals import Spectrum
    spec = Spectrum(freqs_hz=np.array([10.0, 20.0, 30.0]),
                    magnitudes=np.array([1.0, 5.0, 5.0]))
    assert peak_frequency(spec) == 20.0


def test_on_grid_tone_energy_concentrates_at_natural_resolution():
    # at pad_to == len the tone occupies one bin; its 3-bin neighborhood
    # must hold nearly all of the spectral energy
    fs, n = 1000.0, 500
    t = np.arange(n) / fs
    tone = np.sin(2 * np.pi * 30.0 * t)
    spec = compute_spectrum(tone, fs, pad_to=n)
    power = spec.magnitudes ** 2
    k = int(np.argmax(power))
    window = power[max(0, k - 1):k + 2].sum()
    assert window / power.sum() >= 0.90


def test_spectrum_pad_shorter_than_signal_rejected():
    with pytest.raises(InvalidInputError):
        compute_spectrum(np.zeros(100), 1000.0, pad_to=64)


def test_stft_frame_count_and_times():
    trace = SeismicTrace(samples=np.zeros(4000), sample_rate_hz=1000.0)
    gram = compute_stft(trace, frame_s=0.5, hop_s=0.125)
    assert len(gram.frame_times_s) == 29  # floor((4 - 0.5)/0.125) + 1
    assert gram.frame_times_s[0] == 0.0
    assert gram.frame_times_s[1] == pytest.approx(0.125)
    assert gram.frame_times_s[-1] == pytest.approx(3.5)


def test_stft_too_short_signal_rejected():
    trace = SeismicTrace(samples=np.zeros(100), sample_rate_hz=1000.0)
    with pytest.raises(InvalidInputError):
        compute_stft(trace, frame_s=0.5, hop_s=0.125)


def test_stft_tracks_chirp_frequency():
    spec = RumbleSpec(duration_s=4.0, f_start_hz=20.0, f_peak_hz=40.0,
                      f_end_hz=20.0)
    wave = chirp_waveform(spec, 1000.0)
    trace = SeismicTrace(samples=wave, sample_rate_hz=1000.0)
    gram = compute_stft(trace, frame_s=0.5, hop_s=0.125)
    for i, t0 in enumerate(gram.frame_times_s):
        mid = t0 + 0.25  # frame center
        expected = rumble_instantaneous_freq(mid, 4.0, 20.0, 40.0, 20.0)
        observed = gram.freqs_hz[int(np.argmax(gram.magnitudes[i]))]
        assert observed == pytest.approx(expected, abs=2.5)


def test_window_trace_discards_remainder():
    trace = SeismicTrace(samples=np.arange(10500, dtype=float),
                         sample_rate_hz=1000.0)
    windows = window_trace(trace, 4.0)
    assert len(windows) == 2
    assert windows[0].start_time_s == 0.0
    assert windows[1].start_time_s == 4.0
    assert len(windows[1].samples) == 4000
    assert windows[1].samples[0] == 4000.0


def test_window_trace_short_trace_yields_nothing():
    short = SeismicTrace(samples=np.zeros(100), sample_rate_hz=1000.0)
    assert window_trace(short, 4.0) == []


def test_window_trace_empty_trace_rejected():
    with pytest.raises(InvalidInputError):
        window_trace(SeismicTrace(samples=np.zeros(0),
                                  sample_rate_hz=1000.0), 4.0)


def test_synth_rumble_snr_definition():
    # noise-only region before onset measures the noise floor; the chirp
    # region must sit snr_db above it
    spec = RumbleSpec(duration_s=3.0, snr_db=20.0)
    trace = synth_rumble(spec, sample_rate_hz=1000.0, seed=1,
                         total_s=10.0, onset_s=5.0)
    assert len(trace.samples) == 10000
    noise = trace.samples[:4500]
    chirp = chirp_waveform(spec, 1000.0)
    chirp_rms = float(np.sqrt(np.mean(chirp ** 2)))
    noise_rms = float(np.sqrt(np.mean(noise ** 2)))
    measured_snr = 20 * np.log10(chirp_rms / noise_rms)
    assert measured_snr == pytest.approx(20.0, abs=0.5)


def test_synth_rumble_stream_places_events():
    events = [(2.0, RumbleSpec(duration_s=3.0, snr_db=30.0)),
              (10.0, RumbleSpec(duration_s=3.0, snr_db=30.0))]
    trace = synth_rumble_stream(events, total_s=16.0, seed=0)
    power = trace.samples ** 2
    within = power[2000:5000].mean()
    outside = power[6000:9000].mean()
    assert within > 10 * outside


def test_synth_rumble_stream_deterministic():
    events = [(1.0, RumbleSpec(duration_s=3.0))]
    a = synth_rumble_stream(events, total_s=6.0, seed=9)
    b = synth_rumble_stream(events, total_s=6.0, seed=9)
    assert np.array_equal(a.samples, b.samples)


def test_bee_buzz_shape_and_pitch():
    clip = synth_bee_buzz(duration_s=2.0, seed=0)
    assert isinstance(clip, AudioClip)
    assert clip.frame_rate_hz == 8000.0
    assert np.max(np.abs(clip.samples)) <= 1.0
    spec = compute_spectrum(clip.samples, clip.frame_rate_hz)
    peak = peak_frequency(spec)
    assert 200.0 < peak < 260.0  # fundamental near 230 Hz


def test_bee_buzz_deterministic_per_seed():
    a = synth_bee_buzz(seed=5)
    b = synth_bee_buzz(seed=5)
    c = synth_bee_buzz(seed=6)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_rumble_spec_validation():
    with pytest.raises(InvalidInputError):
        RumbleSpec(duration_s=0.0)
    with pytest.raises(InvalidInputError):
        RumbleSpec(duration_s=3.0, envelope="triangle")


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=16, max_value=200), st.integers(0, 2 ** 31))
def test_spectrum_properties(n, seed):
    rng = np.random.default_rng(seed)
    samples = rng.standard_normal(n)
    spec = compute_spectrum(samples, sample_rate_hz=500.0)
    assert np.all(spec.magnitudes >= 0.0)
    assert np.all(np.diff(spec.freqs_hz) > 0)
    if np.any(spec.magnitudes > 0):
        assert peak_frequency(spec) in spec.freqs_hz
