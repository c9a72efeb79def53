"""Tests for the rendering engine: synthesis, dynamics, pan, reverb, mix."""

from __future__ import annotations

import json
import math
import random
import struct

import numpy as np
import pytest

from cinescore.audio import Waveform, read_wav_file
from cinescore.notation import MidiNote, MidiSong, Track
from cinescore.render import (
    MASTER_SAMPLE_RATE,
    MAX_RELEASE,
    RECIPES,
    RENDER_TAIL_SECONDS,
    SYNTH_HEADROOM,
    Master,
    RenderError,
    SynthRecipe,
    apply_dynamics,
    apply_pan,
    apply_reverb,
    fold_into_range,
    mixdown,
    recipe_for,
    render_scheme,
    synthesize_track,
    write_master,
    write_note_log,
)
from cinescore.scheme import ArrangementScheme, GlobalMix, TrackPlan
from cinescore.scheme.registry import load_instruments

SR = MASTER_SAMPLE_RATE

#: Single partial, instant attack, full sustain: a bare sine for oracles.
FLAT = SynthRecipe(partials=((1, 1.0),), adsr=(0.0, 0.0, 1.0, 0.0), family="test")


def rms(samples) -> float:
    return float(np.sqrt(np.mean(np.asarray(samples, dtype=np.float64) ** 2)))


def db(ratio: float) -> float:
    return 20.0 * math.log10(ratio)


def one_note(pitch=69, velocity=127, duration=1.0) -> Track:
    return Track(index=0, notes=(MidiNote(onset=0.0, duration=duration, pitch=pitch, velocity=velocity),))


def tone_song(seconds=8.0) -> MidiSong:
    """One sustained note; 4/4 at 120 BPM puts measures every 2 s."""
    return MidiSong(tracks=(Track(index=0, notes=(MidiNote(0.0, seconds, 69, 100),)),))


def measure_rms(samples, measure: int, *, margin=0.05) -> float:
    lo = int((2.0 * measure + margin) * SR)
    hi = int((2.0 * (measure + 1) - margin) * SR)
    return rms(samples[lo:hi])


class TestRecipes:
    def test_registry_recipes_all_resolve(self):
        for name, instrument in load_instruments().items():
            recipe = recipe_for(instrument.recipe)
            assert isinstance(recipe, SynthRecipe), name
            assert recipe.partials and recipe.family

    def test_partials_normalized_to_unit_sum(self):
        for recipe in RECIPES.values():
            assert sum(a for _, a in recipe.partials) == pytest.approx(1.0)

    def test_unknown_recipe_rejected(self):
        with pytest.raises(RenderError, match="unknown synthesis recipe"):
            recipe_for("theremin")

    def test_bad_parameters_rejected(self):
        with pytest.raises(RenderError):
            SynthRecipe(partials=(), adsr=(0, 0, 1, 0), family="x")
        with pytest.raises(RenderError):
            SynthRecipe(partials=((1, 1.0),), adsr=(0, 0, 1.5, 0), family="x")
        with pytest.raises(RenderError):
            SynthRecipe(partials=((1, 1.0),), adsr=(0, 0, 1, -0.1), family="x")
        with pytest.raises(RenderError):
            SynthRecipe(partials=((1, -1.0),), adsr=(0, 0, 1, 0), family="x")


class TestSynthesize:
    def test_a440_zero_crossing_count(self):
        wave = synthesize_track(one_note(pitch=69), FLAT)
        assert wave.channels == 1
        assert wave.num_samples == SR  # 1 s note, no release tail
        crossings = int(np.sum(np.abs(np.diff(np.signbit(wave.samples)))))
        assert abs(crossings - 880) <= 8  # 440 Hz -> 880 crossings/s, within 1%

    def test_velocity_scales_linearly(self):
        loud = synthesize_track(one_note(velocity=127), FLAT)
        soft = synthesize_track(one_note(velocity=64), FLAT)
        assert rms(soft.samples) / rms(loud.samples) == pytest.approx(64 / 127, rel=0.05)

    def test_empty_track_is_silence(self):
        wave = synthesize_track(Track(index=0, notes=()), FLAT, duration=1.5)
        assert wave.num_samples == int(1.5 * SR)
        assert not np.any(wave.samples)

    def test_headroom_keeps_single_note_quiet(self):
        wave = synthesize_track(one_note(velocity=127), FLAT)
        peak = float(np.max(np.abs(wave.samples)))
        assert 0.8 * SYNTH_HEADROOM < peak <= SYNTH_HEADROOM

    def test_release_tail_rings_past_note_offset(self):
        recipe = SynthRecipe(partials=((1, 1.0),), adsr=(0.0, 0.0, 1.0, 0.25), family="test")
        wave = synthesize_track(one_note(duration=0.5), recipe)
        assert wave.num_samples == int(0.75 * SR)
        tail = wave.samples[int(0.55 * SR):]
        assert np.any(tail)  # release still sounding
        assert abs(wave.samples[-1]) < 1e-3  # and decayed to nothing

    def test_attack_ramps_from_silence(self):
        recipe = SynthRecipe(partials=((1, 1.0),), adsr=(0.1, 0.0, 1.0, 0.0), family="test")
        wave = synthesize_track(one_note(), recipe)
        early = float(np.max(np.abs(wave.samples[: int(0.01 * SR)])))
        late = float(np.max(np.abs(wave.samples[int(0.2 * SR): int(0.3 * SR)])))
        assert early < 0.2 * late

    def test_notes_past_buffer_end_are_dropped(self):
        track = Track(index=0, notes=(
            MidiNote(0.0, 0.5, 69, 100),
            MidiNote(9.0, 0.5, 69, 100),
        ))
        wave = synthesize_track(track, FLAT, duration=1.0)
        assert wave.num_samples == SR

    def test_only_master_rate_supported(self):
        with pytest.raises(RenderError, match="48000"):
            synthesize_track(one_note(), FLAT, 44100)


class TestDynamics:
    def test_all_mezzo_is_bitwise_identity(self):
        song = tone_song()
        tone = synthesize_track(song.tracks[0], FLAT, duration=8.0)
        plan = TrackPlan(source_track=0, instrument="violin")
        shaped = apply_dynamics(tone, plan, song)
        assert np.array_equal(shaped.samples, tone.samples)

    def test_forte_measure_sits_four_db_up(self):
        song = tone_song()
        tone = synthesize_track(song.tracks[0], FLAT, duration=8.0)
        plan = TrackPlan(source_track=0, instrument="violin",
                         measure_dynamics=((0, "mezzo"), (1, "forte"), (2, "mezzo"), (3, "piano")))
        shaped = apply_dynamics(tone, plan, song)
        assert db(measure_rms(shaped.samples, 1) / measure_rms(shaped.samples, 0)) == pytest.approx(4.0, abs=0.5)
        assert db(measure_rms(shaped.samples, 3) / measure_rms(shaped.samples, 0)) == pytest.approx(-6.0, abs=0.5)
        assert db(measure_rms(shaped.samples, 1) / measure_rms(shaped.samples, 3)) == pytest.approx(10.0, abs=1.0)

    def test_soften_pulls_a_measure_down_four_db(self):
        song = tone_song()
        tone = synthesize_track(song.tracks[0], FLAT, duration=8.0)
        plan = TrackPlan(source_track=0, instrument="violin", soften=(2,))
        shaped = apply_dynamics(tone, plan, song)
        assert db(measure_rms(shaped.samples, 2) / measure_rms(shaped.samples, 0)) == pytest.approx(-4.0, abs=0.5)

    def test_volume_envelope_ramp_reaches_target(self):
        song = tone_song()
        tone = synthesize_track(song.tracks[0], FLAT, duration=8.0)
        plan = TrackPlan(source_track=0, instrument="violin",
                         volume_envelope=((0.0, 0.0), (2.0, -12.0)))
        shaped = apply_dynamics(tone, plan, song)
        # Ratios against the raw tone cancel the sine's own phase.
        start = rms(shaped.samples[: int(0.02 * SR)]) / rms(tone.samples[: int(0.02 * SR)])
        after = rms(shaped.samples[int(2.0 * SR): int(2.05 * SR)]) / rms(tone.samples[int(2.0 * SR): int(2.05 * SR)])
        assert db(after / start) == pytest.approx(-12.0, abs=0.5)

    def test_crossfade_ramps_over_ten_milliseconds(self):
        song = tone_song()
        flat = Waveform(np.full(8 * SR, 0.1), SR)
        plan = TrackPlan(source_track=0, instrument="violin",
                         measure_dynamics=((1, "forte"),))
        shaped = apply_dynamics(flat, plan, song)
        before = shaped.samples[int(1.99 * SR)]
        middle = shaped.samples[2 * SR]
        after = shaped.samples[int(2.01 * SR)]
        assert before == pytest.approx(0.1)
        assert middle == pytest.approx(0.1 * 10 ** (2.0 / 20.0), rel=1e-6)  # half the 4 dB step
        assert after == pytest.approx(0.1 * 10 ** (4.0 / 20.0), rel=1e-6)
        window = shaped.samples[int(1.995 * SR): int(2.005 * SR)]
        assert np.all(np.diff(window) >= 0)  # monotone ramp, no step

    def test_stereo_input_rejected(self):
        song = tone_song()
        stereo = Waveform(np.zeros((100, 2)), SR)
        with pytest.raises(RenderError, match="mono"):
            apply_dynamics(stereo, TrackPlan(source_track=0, instrument="violin"), song)


class TestPan:
    @pytest.fixture()
    def tone(self):
        return synthesize_track(one_note(), FLAT)

    def test_center_pan_is_minus_three_db_per_channel(self, tone):
        stereo = apply_pan(tone, 0.0)
        assert db(rms(stereo.samples[:, 0]) / rms(tone.samples)) == pytest.approx(-3.01, abs=0.1)
        assert db(rms(stereo.samples[:, 1]) / rms(tone.samples)) == pytest.approx(-3.01, abs=0.1)

    def test_hard_left_silences_the_right_channel(self, tone):
        stereo = apply_pan(tone, -1.0)
        right = rms(stereo.samples[:, 1])
        assert right == 0.0 or db(right / rms(tone.samples)) <= -60.0

    @pytest.mark.parametrize("pan", [-1.0, -0.5, 0.0, 0.3, 0.7071, 1.0])
    def test_constant_power_energy_conservation(self, tone, pan):
        stereo = apply_pan(tone, pan)
        residual = stereo.samples[:, 0] ** 2 + stereo.samples[:, 1] ** 2 - tone.samples ** 2
        assert float(np.max(np.abs(residual))) < 1e-6

    def test_stereo_input_rejected(self, tone):
        stereo = apply_pan(tone, 0.0)
        with pytest.raises(RenderError, match="mono"):
            apply_pan(stereo, 0.0)

    def test_pan_outside_range_rejected(self, tone):
        with pytest.raises(RenderError):
            apply_pan(tone, 1.5)


class TestReverb:
    @pytest.fixture()
    def impulse(self):
        samples = np.zeros((SR, 2))
        samples[0, :] = 1.0
        return Waveform(samples, SR)

    def test_zero_send_is_bit_identical_dry(self, impulse):
        assert apply_reverb(impulse, 0.0, 1.0) is impulse
        assert apply_reverb(impulse, 1.0, 0.0) is impulse

    def test_impulse_grows_a_tail(self, impulse):
        wet = apply_reverb(impulse, 1.0, 1.0)
        tail = wet.samples[int(0.1 * SR):, 0]
        assert float(np.sum(tail ** 2)) > 0.0

    def test_tail_energy_decays_monotonically(self, impulse):
        wet = apply_reverb(impulse, 1.0, 1.0)
        window = int(0.05 * SR)
        energies = [
            float(np.sum(wet.samples[k: k + window, 0] ** 2))
            for k in range(int(0.2 * SR), SR - window, window)
        ]
        assert len(energies) >= 10
        assert all(later < earlier for earlier, later in zip(energies, energies[1:]))

    def test_deterministic(self, impulse):
        a = apply_reverb(impulse, 0.6, 0.5)
        b = apply_reverb(impulse, 0.6, 0.5)
        assert np.array_equal(a.samples, b.samples)

    def test_send_scales_the_wet_mix(self, impulse):
        full = apply_reverb(impulse, 1.0, 1.0)
        half = apply_reverb(impulse, 0.5, 1.0)
        tail_full = full.samples[int(0.1 * SR):, 0]
        tail_half = half.samples[int(0.1 * SR):, 0]
        assert rms(tail_half) / rms(tail_full) == pytest.approx(0.5, rel=1e-6)

    def test_out_of_range_parameters_rejected(self, impulse):
        with pytest.raises(RenderError):
            apply_reverb(impulse, 1.5, 0.5)
        with pytest.raises(RenderError):
            apply_reverb(impulse, 0.5, -0.1)


class TestMixdown:
    @pytest.fixture()
    def stem(self):
        return apply_pan(synthesize_track(one_note(), FLAT), 0.0)

    def test_single_track_identity(self, stem):
        master = mixdown([stem], 0.0)
        assert np.array_equal(master.audio.samples, stem.samples)

    def test_two_identical_tracks_sum_coherently(self, stem):
        one = mixdown([stem], 0.0)
        two = mixdown([stem, stem], 0.0)
        assert db(rms(two.audio.samples) / rms(one.audio.samples)) == pytest.approx(6.02, abs=0.05)

    def test_master_gain_applied(self, stem):
        quiet = mixdown([stem], -6.0)
        assert rms(quiet.audio.samples) / rms(stem.samples) == pytest.approx(10 ** (-6 / 20), rel=1e-9)

    def test_limiter_clamps_hot_sums(self):
        hot = Waveform(np.full((100, 2), 0.8), SR)
        master = mixdown([hot, hot], 0.0)
        assert float(np.max(master.audio.samples)) == 1.0

    def test_mismatched_lengths_rejected(self, stem):
        short = Waveform(np.zeros((10, 2)), SR)
        with pytest.raises(RenderError, match="mismatched"):
            mixdown([stem, short], 0.0)

    def test_mono_stem_rejected(self):
        with pytest.raises(RenderError, match="stereo"):
            mixdown([Waveform(np.zeros(10), SR)], 0.0)

    def test_empty_mix_rejected(self):
        with pytest.raises(RenderError, match="nothing"):
            mixdown([], 0.0)

    def test_master_invariants_enforced(self):
        with pytest.raises(RenderError, match="48000"):
            Master(Waveform(np.zeros((10, 2)), 44100))
        with pytest.raises(RenderError, match="stereo"):
            Master(Waveform(np.zeros(10), SR))


def demo_song() -> MidiSong:
    melody = Track(index=0, name="melody", notes=tuple(
        MidiNote(onset=i * 0.5, duration=0.45, pitch=(40 if i == 0 else 60 + i % 12), velocity=100)
        for i in range(16)))
    bass = Track(index=1, name="bass", notes=tuple(
        MidiNote(onset=i * 1.0, duration=0.9, pitch=36 + i % 5, velocity=90)
        for i in range(8)))
    return MidiSong(tracks=(melody, bass))


def demo_scheme() -> ArrangementScheme:
    return ArrangementScheme(
        tracks=(
            TrackPlan(source_track=0, instrument="violin",
                      measure_dynamics=((0, "mezzo"), (1, "forte"), (2, "mezzo"), (3, "piano")),
                      pan=-0.3, reverb_send=0.25),
            TrackPlan(source_track=1, instrument="cello", pan=0.3, reverb_send=0.25),
            TrackPlan(source_track=0, instrument="string ensemble", duplicate=True,
                      soften=(0, 1, 2, 3), pan=0.0, reverb_send=0.4),
        ),
        global_mix=GlobalMix(reverb_level=0.3, master_gain=-1.0),
    )


class TestRenderScheme:
    def test_master_shape_and_duration(self):
        result = render_scheme(demo_song(), demo_scheme())
        audio = result.master.audio
        assert audio.sample_rate == SR
        assert audio.channels == 2
        assert audio.duration == pytest.approx(demo_song().duration + RENDER_TAIL_SECONDS, abs=1e-6)
        assert float(np.max(np.abs(audio.samples))) <= 1.0

    def test_bit_identical_across_runs_and_workers(self):
        first = render_scheme(demo_song(), demo_scheme(), workers=1)
        again = render_scheme(demo_song(), demo_scheme(), workers=1)
        threaded = render_scheme(demo_song(), demo_scheme(), workers=3)
        assert np.array_equal(first.master.audio.samples, again.master.audio.samples)
        assert np.array_equal(first.master.audio.samples, threaded.master.audio.samples)

    def test_note_log_pitches_all_in_registry_range(self):
        result = render_scheme(demo_song(), demo_scheme())
        registry = load_instruments()
        plans = demo_scheme().tracks
        assert len(result.note_log) == 16 + 8 + 16
        for entry in result.note_log:
            instrument = registry[plans[entry.track].instrument]
            assert instrument.low <= entry.pitch <= instrument.high

    def test_out_of_range_pitch_gets_octave_folded(self):
        result = render_scheme(demo_song(), demo_scheme())
        folded = [e for e in result.note_log if e.folded]
        # the melody's opening pitch 40 sits below the violin's low G;
        # the ensemble double reaches down to 28, so only plan 0 folds
        assert {(e.track, e.onset, e.pitch) for e in folded} == {(0, 0.0, 64)}

    def test_forte_piano_contract_through_full_pipeline(self):
        dense = Track(index=0, notes=tuple(
            MidiNote(onset=i * 0.25, duration=0.22, pitch=69, velocity=100) for i in range(32)))
        song = MidiSong(tracks=(dense,))
        scheme = ArrangementScheme(
            tracks=(TrackPlan(source_track=0, instrument="violin",
                              measure_dynamics=((0, "mezzo"), (1, "forte"), (2, "piano"), (3, "mezzo"))),),
            global_mix=GlobalMix(reverb_level=0.0, master_gain=0.0),
        )
        mono = render_scheme(song, scheme).master.audio.to_mono()
        ratio = measure_rms(mono.samples, 1) / measure_rms(mono.samples, 2)
        assert db(ratio) == pytest.approx(10.0, abs=1.0)

    def test_scheme_that_does_not_fit_rejected(self):
        scheme = ArrangementScheme(
            tracks=(TrackPlan(source_track=5, instrument="violin"),),
            global_mix=GlobalMix(),
        )
        with pytest.raises(RenderError, match="does not fit"):
            render_scheme(demo_song(), scheme)

    def test_worker_count_validated(self):
        with pytest.raises(RenderError, match="workers"):
            render_scheme(demo_song(), demo_scheme(), workers=0)

    def test_random_schemes_render_in_range(self):
        rng = random.Random(0xD1CE)
        registry = load_instruments()
        names = sorted(registry)
        for _ in range(4):
            notes = tuple(
                MidiNote(onset=i * 0.5, duration=0.4, pitch=rng.randrange(30, 100), velocity=rng.randrange(40, 128))
                for i in range(rng.randrange(4, 12)))
            song = MidiSong(tracks=(Track(index=0, notes=notes),))
            plans = tuple(
                TrackPlan(source_track=0, instrument=rng.choice(names),
                          duplicate=i > 0, pan=rng.uniform(-1, 1), reverb_send=rng.uniform(0, 1))
                for i in range(rng.randrange(1, 4)))
            scheme = ArrangementScheme(tracks=plans, global_mix=GlobalMix(reverb_level=rng.uniform(0, 1)))
            result = render_scheme(song, scheme)
            assert float(np.max(np.abs(result.master.audio.samples))) <= 1.0
            for entry in result.note_log:
                instrument = registry[plans[entry.track].instrument]
                assert instrument.low <= entry.pitch <= instrument.high


class TestFold:
    def test_low_pitch_folds_up_by_octaves(self):
        violin = load_instruments()["violin"]
        assert fold_into_range(40, violin) == (64, True)

    def test_high_pitch_folds_down(self):
        violin = load_instruments()["violin"]
        assert fold_into_range(108, violin) == (96, True)

    def test_in_range_pitch_untouched(self):
        violin = load_instruments()["violin"]
        assert fold_into_range(72, violin) == (72, False)


class TestWavOutput:
    @pytest.fixture()
    def master(self):
        return render_scheme(demo_song(), demo_scheme()).master

    def test_header_bytes_pin_format(self, master, tmp_path):
        path = write_master(master, tmp_path / "out.wav")
        data = path.read_bytes()
        assert data[:4] == b"RIFF" and data[8:12] == b"WAVE"
        assert data[22:24] == b"\x02\x00"          # stereo
        assert data[24:28] == b"\x80\xbb\x00\x00"  # 48000 Hz
        assert data[34:36] == b"\x18\x00"          # 24-bit

    def test_round_trip_within_quantization(self, master, tmp_path):
        path = write_master(master, tmp_path / "out.wav")
        back = read_wav_file(path)
        assert back.sample_rate == SR and back.channels == 2
        assert float(np.max(np.abs(back.samples - master.audio.samples))) <= 2 ** -22

    def test_silent_master_writes_zero_data(self, tmp_path):
        silent = Master(Waveform(np.zeros((SR // 10, 2)), SR))
        path = write_master(silent, tmp_path / "quiet.wav")
        data = path.read_bytes()
        assert set(data[44:]) == {0}

    def test_float32_debug_flag(self, master, tmp_path):
        path = write_master(master, tmp_path / "debug.wav", float32=True)
        data = path.read_bytes()
        fmt_code, channels = struct.unpack_from("<HH", data, 20)
        bits = struct.unpack_from("<H", data, 34)[0]
        assert fmt_code == 3 and channels == 2 and bits == 32

    def test_rendered_wav_bytes_reproducible(self, tmp_path):
        a = write_master(render_scheme(demo_song(), demo_scheme(), workers=1).master, tmp_path / "a.wav")
        b = write_master(render_scheme(demo_song(), demo_scheme(), workers=4).master, tmp_path / "b.wav")
        assert a.read_bytes() == b.read_bytes()


class TestNoteLog:
    def test_jsonl_round_trip(self, tmp_path):
        result = render_scheme(demo_song(), demo_scheme())
        path = write_note_log(result.note_log, tmp_path / "notes.jsonl")
        lines = path.read_text().splitlines()
        assert len(lines) == len(result.note_log)
        first = json.loads(lines[0])
        assert set(first) == {"track", "onset", "pitch", "folded"}
        assert first["track"] == result.note_log[0].track
        assert first["pitch"] == result.note_log[0].pitch
