import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hecsim.detection import (Algorithm1Params, RumbleEvent, detect_stream,
                              detect_window, match_and_recall, score_from_run,
                              stft_oracle_detect)
from hecsim.errors import InvalidInputError
from hecsim.signals import (RumbleSpec, SeismicTrace, synth_rumble,
                            synth_rumble_stream)
from oracles import longest_true_run

PARAMS = Algorithm1Params()


def test_score_thresholds_at_run_boundaries():
    table = {0: 0, 6: 0, 7: 1, 23: 1, 24: 2, 32: 2}
    for run, expected in table.items():
        assert score_from_run(run, PARAMS) == expected


def test_score_covers_every_run_length():
    for run in range(0, 33):
        ds = score_from_run(run, PARAMS)
        if run <= PARAMS.run_low:
            assert ds == 0
        elif run < PARAMS.run_high:
            assert ds == 1
        else:
            assert ds == 2


def test_detect_window_high_snr_rumble_scores_two():
    trace = synth_rumble(RumbleSpec(duration_s=3.5, snr_db=20.0),
                         seed=2, total_s=4.0, onset_s=0.25)
    det = detect_window(trace, PARAMS)
    assert det.ds == 2
    assert det.max_run >= PARAMS.run_high


def test_detect_window_out_of_band_tone_scores_zero():
    t = np.arange(4000) / 1000.0
    tone = SeismicTrace(samples=np.sin(2 * np.pi * 10.0 * t),
                        sample_rate_hz=1000.0)
    assert detect_window(tone, PARAMS).ds == 0


def test_detect_window_silence_scores_zero():
    silent = SeismicTrace(samples=np.zeros(4000), sample_rate_hz=1000.0)
    det = detect_window(silent, PARAMS)
    assert det.ds == 0
    assert det.max_run == 0


def test_detect_window_wrong_length_rejected():
    with pytest.raises(InvalidInputError):
        detect_window(SeismicTrace(samples=np.zeros(3900),
                                   sample_rate_hz=1000.0), PARAMS)


def test_detect_stream_indexes_windows():
    trace = synth_rumble_stream([(4.5, RumbleSpec(duration_s=3.0, snr_db=25.0))],
                                total_s=12.0, seed=0)
    detections = detect_stream(trace, PARAMS)
    assert [d.window_index for d in detections] == [0, 1, 2]
    assert [d.window_start_s for d in detections] == [0.0, 4.0, 8.0]
    assert detections[1].ds >= 1  # rumble sits inside the second window


def test_band_edges_are_strict():
    # a tone exactly on the 20 Hz band edge must not count as in-band
    t = np.arange(4000) / 1000.0
    edge = SeismicTrace(samples=np.sin(2 * np.pi * 20.0 * t),
                        sample_rate_hz=1000.0)
    det = detect_window(edge, PARAMS)
    assert det.max_run == 0
    inside = SeismicTrace(samples=np.sin(2 * np.pi * 30.0 * t),
                          sample_rate_hz=1000.0)
    assert detect_window(inside, PARAMS).ds == 2


def test_oracle_finds_one_event_with_tight_bounds():
    trace = synth_rumble(RumbleSpec(duration_s=3.5, snr_db=20.0),
                         seed=4, total_s=15.0, onset_s=5.3)
    events = stft_oracle_detect(trace)
    assert len(events) == 1
    ev = events[0]
    assert ev.t_start_s == pytest.approx(5.3, abs=0.7)
    assert ev.t_end_s == pytest.approx(8.8, abs=0.7)
    assert ev.duration_s >= 3.0


def test_oracle_finds_two_separated_events():
    events_in = [(2.0, RumbleSpec(duration_s=3.2, snr_db=20.0)),
                 (10.0, RumbleSpec(duration_s=4.0, snr_db=20.0))]
    trace = synth_rumble_stream(events_in, total_s=18.0, seed=1)
    events = stft_oracle_detect(trace)
    assert len(events) == 2
    assert events[0].t_start_s < events[1].t_start_s


def test_oracle_ignores_short_bursts():
    trace = synth_rumble(RumbleSpec(duration_s=2.0, snr_db=20.0),
                         seed=5, total_s=10.0, onset_s=4.0)
    assert stft_oracle_detect(trace, min_event_s=3.0) == []


def test_oracle_rise_fall_filter():
    rising_only = RumbleSpec(duration_s=3.6, f_start_hz=21.0, f_peak_hz=39.0,
                             f_end_hz=39.0)
    trace = synth_rumble(rising_only, seed=6, total_s=10.0, onset_s=3.0)
    loose = stft_oracle_detect(trace)
    strict = stft_oracle_detect(trace, require_rise_fall=True)
    assert len(loose) == 1
    assert strict == []
    proper = synth_rumble(RumbleSpec(duration_s=3.6, snr_db=20.0),
                          seed=6, total_s=10.0, onset_s=3.0)
    assert len(stft_oracle_detect(proper, require_rise_fall=True)) == 1


def test_match_and_recall_counts_overlaps():
    trace = synth_rumble(RumbleSpec(duration_s=3.5, snr_db=20.0),
                         seed=7, total_s=12.0, onset_s=4.25)
    detections = detect_stream(trace, PARAMS)
    events = stft_oracle_detect(trace)
    report = match_and_recall(detections, events, window_s=PARAMS.window_s)
    assert report.oracle_count == 1
    assert report.matched_count == 1
    assert report.recall == 1.0


def test_match_and_recall_no_events_is_not_applicable():
    trace = SeismicTrace(samples=np.random.default_rng(0).standard_normal(8000),
                         sample_rate_hz=1000.0)
    detections = detect_stream(trace, PARAMS)
    report = match_and_recall(detections, [], window_s=PARAMS.window_s)
    assert report.oracle_count == 0
    assert report.recall is None


def test_match_and_recall_ds_min_filter():
    ev = RumbleEvent(t_start_s=0.5, t_end_s=3.5, peak_trajectory=())
    trace = synth_rumble(RumbleSpec(duration_s=3.5, snr_db=20.0),
                         seed=2, total_s=4.0, onset_s=0.25)
    detections = detect_stream(trace, PARAMS)
    assert detections[0].ds == 2
    strict = match_and_recall(detections, [ev], ds_min=2,
                              window_s=PARAMS.window_s)
    assert strict.recall == 1.0
    impossible = match_and_recall(
        [d for d in detections], [ev], ds_min=3, window_s=PARAMS.window_s)
    assert impossible.recall == 0.0


def test_params_validation():
    with pytest.raises(InvalidInputError):
        Algorithm1Params(window_s=4.0, subsegment_s=0.3)  # not a divisor
    with pytest.raises(InvalidInputError):
        Algorithm1Params(band_low_hz=40.0, band_high_hz=20.0)
    with pytest.raises(InvalidInputError):
        Algorithm1Params(run_low=24, run_high=6)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.booleans(), min_size=1, max_size=32))
def test_score_agrees_with_run_oracle(flags):
    run = longest_true_run(flags)
    ds = score_from_run(run, PARAMS)
    if ds == 2:
        assert run >= 24
    elif ds == 1:
        assert 6 < run < 24
    else:
        assert run <= 6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 32), st.integers(0, 32))
def test_score_is_monotone_in_run(a, b):
    lo, hi = sorted((a, b))
    assert score_from_run(lo, PARAMS) <= score_from_run(hi, PARAMS)
