"""Tests for the evaluation metrics: onsets, rhythm, dynamics, timbre."""

from __future__ import annotations

import csv
import json
import math
import random

import numpy as np
import pytest

from cinescore.audio import Waveform
from cinescore.conditioning import Chromagram, synthesize_click_track
from cinescore.melody import RhythmSpots
from cinescore.metrics import (
    DB_FLOOR,
    REPORT_COLUMNS,
    DbEnvelope,
    EvaluationRow,
    ImpulseTrain,
    InstrumentDistribution,
    MetricError,
    chroma_diversity,
    chroma_similarity,
    db_envelope,
    detect_onsets,
    dynamic_variation_distance,
    instrument_distribution,
    instrumentation_distance,
    read_report_json,
    rhythm_xcorr,
    write_report_csv,
    write_report_json,
)
from cinescore.notation import MidiNote, MidiSong, Track
from cinescore.scheme import ArrangementScheme, GlobalMix, TrackPlan


def make_chroma(frames, sample_rate=44100, hop=2048) -> Chromagram:
    frames = np.asarray(frames, dtype=np.float64)
    return Chromagram(frames=frames, hop=hop, window=4096, one_hot=False,
                      mask=np.ones(len(frames), dtype=bool), sample_rate=sample_rate)


class TestImpulseTrain:
    def test_values_must_be_binary(self):
        with pytest.raises(MetricError, match="0 or 1"):
            ImpulseTrain(values=np.array([0, 2, 1]))

    def test_from_times_quantizes_to_grid(self):
        train = ImpulseTrain.from_times((0.504, 1.001), 2.0)
        assert len(train) == 200
        assert train.times() == (0.5, 1.0)
        assert train.count == 2

    def test_out_of_range_times_dropped(self):
        train = ImpulseTrain.from_times((-0.5, 0.1, 5.0), 1.0)
        assert train.times() == (0.1,)

    def test_grid_rate_positive(self):
        with pytest.raises(MetricError):
            ImpulseTrain(values=np.array([1]), grid_rate=0)


class TestDetectOnsets:
    def test_silence_has_no_onsets(self):
        train = detect_onsets(Waveform(np.zeros(44100), 44100))
        assert train.count == 0
        assert len(train) == 100

    def test_empty_audio_gives_empty_train(self):
        train = detect_onsets(Waveform(np.zeros(0), 44100))
        assert len(train) == 0

    @pytest.mark.parametrize("sample_rate", [32000, 44100, 48000])
    def test_clicks_found_within_twenty_milliseconds(self, sample_rate):
        spots = RhythmSpots(onsets=(0.5, 1.0, 1.5), clip_duration=2.0)
        click = synthesize_click_track(spots, sample_rate)
        found = detect_onsets(click).times()
        assert len(found) == 3
        for got, expected in zip(found, spots.onsets):
            assert abs(got - expected) <= 0.020

    def test_off_grid_clicks_still_land(self):
        spots = RhythmSpots(onsets=(0.473, 0.987, 1.531), clip_duration=2.0)
        found = detect_onsets(synthesize_click_track(spots, 44100)).times()
        assert len(found) == 3
        for got, expected in zip(found, spots.onsets):
            assert abs(got - expected) <= 0.020

    def test_sustained_sine_is_a_single_attack(self):
        t = np.arange(2 * 44100) / 44100
        sine = Waveform(0.5 * np.sin(2 * np.pi * 440 * t), 44100)
        assert detect_onsets(sine).count <= 1

    def test_stereo_is_averaged(self):
        spots = RhythmSpots(onsets=(0.5, 1.0), clip_duration=1.5)
        click = synthesize_click_track(spots, 44100)
        stereo = np.zeros((click.num_samples, 2))
        stereo[:, 0] = click.samples
        found = detect_onsets(Waveform(stereo, 44100)).times()
        assert len(found) == 2

    def test_minimum_gap_suppresses_double_fires(self):
        spots = RhythmSpots(onsets=(0.5, 0.53), clip_duration=1.0)
        click = synthesize_click_track(spots, 44100)
        times = detect_onsets(click).times()
        assert all(b - a >= 0.05 for a, b in zip(times, times[1:]))


def brute_force_xcorr(xv, yv, k_max):
    out = []
    for k in range(-k_max, k_max + 1):
        total = 0
        for t in range(len(xv)):
            u = t + k
            if 0 <= u < len(yv):
                total += int(xv[t]) * int(yv[u])
        out.append(total)
    return tuple(out)


class TestRhythmXcorr:
    def test_coincident_impulses_peak_at_zero_lag(self):
        x = ImpulseTrain.from_times((0.5,), 1.0)
        result = rhythm_xcorr(x, x, 0.2)
        assert result.raw_peak == 1
        assert result.lag_seconds == 0.0
        assert result.normalized == 1.0

    def test_events_later_in_y_peak_at_positive_lag(self):
        x = ImpulseTrain.from_times((0.5, 1.0, 1.5), 3.0)
        y = ImpulseTrain.from_times((0.53, 1.03, 1.53), 3.0)
        result = rhythm_xcorr(x, y, 0.2)
        assert result.raw_peak == 3
        assert result.lag_seconds == pytest.approx(0.03)
        # matches the brute-force reading of R(k) = sum x(t) y(t+k)
        assert brute_force_xcorr(x.values, y.values, 20)[20 + 3] == 3

    def test_events_earlier_in_y_peak_at_negative_lag(self):
        x = ImpulseTrain.from_times((0.5, 1.0, 1.5), 3.0)
        y = ImpulseTrain.from_times((0.47, 0.97, 1.47), 3.0)
        result = rhythm_xcorr(x, y, 0.2)
        assert result.lag_seconds == pytest.approx(-0.03)
        assert result.normalized == 1.0  # pure shift

    def test_full_sequence_matches_brute_force(self):
        rng = random.Random(0xBEA7)
        for _ in range(5):
            xv = np.array([1 if rng.random() < 0.1 else 0 for _ in range(rng.randrange(100, 260))])
            yv = np.array([1 if rng.random() < 0.12 else 0 for _ in range(rng.randrange(100, 260))])
            result = rhythm_xcorr(ImpulseTrain(values=xv), ImpulseTrain(values=yv), 0.5)
            assert result.sequence == brute_force_xcorr(xv, yv, 50)
            assert result.raw_peak == max(result.sequence)

    def test_ties_break_toward_smallest_lag(self):
        x = ImpulseTrain(values=np.array([1, 0, 0, 1]))
        y = ImpulseTrain(values=np.array([0, 1, 1, 0]))
        result = rhythm_xcorr(x, y, 0.05)
        assert result.raw_peak == 1
        assert result.sequence.count(1) > 1  # a genuine tie
        assert result.lag_seconds == pytest.approx(-0.01)  # |−1| before |+2|

    def test_normalized_bounded_and_shift_exact(self):
        rng = random.Random(7)
        base = [1 if rng.random() < 0.2 else 0 for _ in range(80)]
        x = ImpulseTrain(values=np.array([0] * 10 + base + [0] * 10))
        y = ImpulseTrain(values=np.array([0] * 14 + base + [0] * 6))
        result = rhythm_xcorr(x, y, 0.1)
        assert result.normalized == 1.0
        assert result.lag_seconds == pytest.approx(0.04)

    def test_mismatched_grids_rejected(self):
        a = ImpulseTrain(values=np.array([1]), grid_rate=100)
        b = ImpulseTrain(values=np.array([1]), grid_rate=50)
        with pytest.raises(MetricError, match="grid rates"):
            rhythm_xcorr(a, b, 0.1)

    def test_empty_overlap_scores_zero(self):
        a = ImpulseTrain(values=np.zeros(10, dtype=int))
        b = ImpulseTrain(values=np.zeros(10, dtype=int))
        result = rhythm_xcorr(a, b, 0.05)
        assert result.raw_peak == 0 and result.normalized == 0.0


class TestDbEnvelope:
    def test_silence_floors_at_minus_ninety(self):
        env = db_envelope(Waveform(np.zeros(44100), 44100))
        assert len(env) == 10
        assert all(v == DB_FLOOR for v in env.values)

    def test_full_scale_square_sits_at_zero(self):
        t = np.arange(44100) / 44100
        square = Waveform(np.sign(np.sin(2 * np.pi * 100 * t)), 44100)
        env = db_envelope(square)
        for v in env.values:
            assert v == pytest.approx(0.0, abs=0.1)

    def test_half_amplitude_sine_level(self):
        t = np.arange(44100) / 44100
        sine = Waveform(0.5 * np.sin(2 * np.pi * 440 * t), 44100)
        env = db_envelope(sine)
        assert env.values[4] == pytest.approx(20 * math.log10(0.5 / math.sqrt(2)), abs=0.1)

    def test_short_audio_yields_one_frame(self):
        env = db_envelope(Waveform(np.full(100, 0.5), 44100))
        assert len(env) == 1

    def test_envelope_validates_floor(self):
        with pytest.raises(MetricError):
            DbEnvelope(values=(-120.0,))
        with pytest.raises(MetricError):
            DbEnvelope(values=(float("nan"),))


class TestDynamicVariation:
    def test_identical_envelopes_score_zero(self):
        env = DbEnvelope(values=(-20.0, -18.0, -15.0, -19.0))
        assert dynamic_variation_distance(env, env) == pytest.approx(0.0, abs=1e-12)

    def test_mirror_image_dynamics_score_two(self):
        a = DbEnvelope(values=(-20.0, -18.0, -15.0, -19.0, -22.0))
        mirrored = [-20.0]
        for step in np.diff(a.values):
            mirrored.append(mirrored[-1] - float(step))
        b = DbEnvelope(values=tuple(mirrored))
        assert dynamic_variation_distance(a, b) == pytest.approx(2.0)

    def test_two_flat_envelopes_are_identical(self):
        a = DbEnvelope(values=(-30.0,) * 5)
        b = DbEnvelope(values=(-12.0,) * 9)  # different level, same (absent) variation
        assert dynamic_variation_distance(a, b) == 0.0

    def test_flat_versus_moving_scores_one(self):
        flat = DbEnvelope(values=(-30.0,) * 5)
        moving = DbEnvelope(values=(-30.0, -20.0, -25.0, -18.0, -24.0))
        assert dynamic_variation_distance(flat, moving) == 1.0

    def test_random_pairs_match_direct_formula(self):
        rng = random.Random(0xD1B)
        for _ in range(20):
            a = DbEnvelope(values=tuple(rng.uniform(-60, 0) for _ in range(rng.randrange(3, 12))))
            b = DbEnvelope(values=tuple(rng.uniform(-60, 0) for _ in range(rng.randrange(3, 12))))
            da, db_ = np.diff(a.values), np.diff(b.values)
            n = min(len(da), len(db_))
            da, db_ = da[:n], db_[:n]
            expected = 1.0 - float(np.dot(da, db_) / (np.linalg.norm(da) * np.linalg.norm(db_)))
            got = dynamic_variation_distance(a, b)
            assert got == pytest.approx(expected, abs=1e-12)
            assert 0.0 <= got <= 2.0

    def test_empty_envelope_rejected(self):
        with pytest.raises(MetricError, match="non-empty"):
            dynamic_variation_distance(DbEnvelope(values=()), DbEnvelope(values=(-20.0,)))


class TestChromaDiversity:
    def test_copies_have_zero_diversity(self):
        rng = np.random.default_rng(3)
        chroma = make_chroma(rng.random((50, 12)))
        assert chroma_diversity([chroma] * 4 ) == pytest.approx(0.0, abs=1e-9)

    def test_disjoint_pitch_classes_max_diversity(self):
        low = np.zeros((40, 12)); low[:, 0] = 1.0
        high = np.zeros((40, 12)); high[:, 7] = 1.0
        assert chroma_diversity([make_chroma(low), make_chroma(high)]) == pytest.approx(1.0)

    def test_matches_brute_force_pairwise_oracle(self):
        rng = np.random.default_rng(11)
        chromas = [make_chroma(rng.random((int(rng.integers(25, 60)), 12))) for _ in range(5)]
        spf = max(1, int(round(44100 / 2048)))  # frames per 1 s segment

        def segments(chroma):
            count = len(chroma) // spf or 1
            return [chroma.frames[s * spf: (s + 1) * spf].mean(axis=0) for s in range(count)]

        def brute_sim(a, b):
            pairs = list(zip(segments(a), segments(b)))
            sims = [float(u @ v / (np.linalg.norm(u) * np.linalg.norm(v))) for u, v in pairs]
            return float(np.mean(sims))

        total = sum(brute_sim(chromas[i], chromas[j]) for i in range(5) for j in range(i + 1, 5))
        expected = 1.0 - (2.0 / (5 * 4)) * total
        assert chroma_diversity(chromas) == pytest.approx(expected, abs=1e-12)

    def test_symmetric_under_permutation(self):
        rng = np.random.default_rng(4)
        chromas = [make_chroma(rng.random((30, 12))) for _ in range(4)]
        assert chroma_diversity(chromas) == pytest.approx(chroma_diversity(chromas[::-1]), abs=1e-12)

    def test_bounded_in_unit_interval(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            chromas = [make_chroma(rng.random((20, 12))) for _ in range(3)]
            assert 0.0 <= chroma_diversity(chromas) <= 1.0

    def test_needs_two_chromagrams(self):
        with pytest.raises(MetricError, match="at least two"):
            chroma_diversity([make_chroma(np.ones((10, 12)))])

    def test_one_hot_inputs_rejected(self):
        frames = np.zeros((10, 12)); frames[:, 3] = 1.0
        onehot = Chromagram(frames=frames, hop=2048, window=4096, one_hot=True,
                            mask=np.ones(10, dtype=bool), sample_rate=44100)
        with pytest.raises(MetricError, match="one-hot"):
            chroma_diversity([onehot, make_chroma(frames)])

    def test_similarity_of_identical_is_one(self):
        chroma = make_chroma(np.random.default_rng(1).random((30, 12)))
        assert chroma_similarity(chroma, chroma) == pytest.approx(1.0)


class TestInstrumentation:
    def test_duration_weighted_family_shares(self):
        strings = Track(index=0, notes=tuple(
            MidiNote(onset=float(i), duration=1.0, pitch=60, velocity=90) for i in range(6)))
        keys = Track(index=1, notes=(MidiNote(0.0, 2.0, 60, 90),))
        song = MidiSong(tracks=(strings, keys))
        scheme = ArrangementScheme(
            tracks=(TrackPlan(source_track=0, instrument="violin"),
                    TrackPlan(source_track=1, instrument="piano")),
            global_mix=GlobalMix(),
        )
        dist = instrument_distribution(song, scheme)
        assert dist.weights == {"strings": 0.75, "keys": 0.25}

    def test_identical_distributions_distance_zero(self):
        d = InstrumentDistribution(weights={"strings": 0.6, "brass": 0.4})
        assert instrumentation_distance(d, d) == pytest.approx(0.0, abs=1e-12)

    def test_disjoint_families_distance_one(self):
        a = InstrumentDistribution(weights={"strings": 1.0})
        b = InstrumentDistribution(weights={"brass": 1.0})
        assert instrumentation_distance(a, b) == pytest.approx(1.0)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(MetricError, match="sum to 1"):
            InstrumentDistribution(weights={"strings": 0.5})
        with pytest.raises(MetricError, match="negative"):
            InstrumentDistribution(weights={"strings": 1.5, "brass": -0.5})

    def test_silent_song_rejected(self):
        song = MidiSong(tracks=(Track(index=0, notes=()),))
        scheme = ArrangementScheme(tracks=(TrackPlan(source_track=0, instrument="violin"),),
                                   global_mix=GlobalMix())
        with pytest.raises(MetricError, match="silent"):
            instrument_distribution(song, scheme)

    def test_unknown_instrument_rejected(self):
        song = MidiSong(tracks=(Track(index=0, notes=(MidiNote(0.0, 1.0, 60, 90),)),))
        scheme = ArrangementScheme(tracks=(TrackPlan(source_track=0, instrument="kazoo"),),
                                   global_mix=GlobalMix())
        with pytest.raises(MetricError, match="kazoo"):
            instrument_distribution(song, scheme)


class TestEndToEndSanity:
    def test_dynamics_edits_move_loudness_but_not_onsets(self):
        from cinescore.render import render_scheme

        notes = tuple(MidiNote(onset=i * 0.5, duration=0.4, pitch=60 + i % 8, velocity=100)
                      for i in range(16))
        song = MidiSong(tracks=(Track(index=0, notes=notes),))
        flat = ArrangementScheme(
            tracks=(TrackPlan(source_track=0, instrument="piano"),),
            global_mix=GlobalMix(reverb_level=0.0))
        shaped = ArrangementScheme(
            tracks=(TrackPlan(source_track=0, instrument="piano",
                              measure_dynamics=((0, "piano"), (1, "forte"), (2, "piano"), (3, "forte"))),),
            global_mix=GlobalMix(reverb_level=0.0))
        audio_flat = render_scheme(song, flat).master.audio
        audio_shaped = render_scheme(song, shaped).master.audio

        reference = ImpulseTrain.from_times(tuple(n.onset for n in notes), audio_flat.duration)
        lag_flat = rhythm_xcorr(detect_onsets(audio_flat), reference, 0.5).lag_seconds
        lag_shaped = rhythm_xcorr(detect_onsets(audio_shaped), reference, 0.5).lag_seconds
        assert abs(lag_flat - lag_shaped) <= 0.01  # within one grid bin

        distance = dynamic_variation_distance(db_envelope(audio_flat), db_envelope(audio_shaped))
        assert distance > 0.0
        assert dynamic_variation_distance(db_envelope(audio_flat), db_envelope(audio_flat)) == 0.0


class TestReports:
    def test_csv_layout(self, tmp_path):
        rows = [
            EvaluationRow(name="take1", diversity=0.42, rhythm_raw=12, rhythm_norm=0.85,
                          rhythm_lag=-0.01, dynamic_dist=0.3, instr_dist=0.1),
            EvaluationRow(name="take2"),
        ]
        path = write_report_csv(rows, tmp_path / "report.csv")
        with path.open() as handle:
            records = list(csv.reader(handle))
        assert records[0] == list(REPORT_COLUMNS)
        assert records[1][0] == "take1" and records[1][1] == "0.42"
        assert records[2] == ["take2"] + [""] * (len(REPORT_COLUMNS) - 1)

    def test_json_round_trip(self, tmp_path):
        rows = [EvaluationRow(name="x", diversity=0.5, kl=1.25)]
        path = write_report_json(rows, tmp_path / "report.json")
        payload = json.loads(path.read_text())
        assert payload["columns"] == list(REPORT_COLUMNS)
        assert read_report_json(path) == rows
