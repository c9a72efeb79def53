"""Arrangement scheme model, canonical JSON round trips, and song validation."""

from __future__ import annotations

import json
import random

import pytest

from cinescore.notation import MidiNote, MidiSong, Track
from cinescore.scheme import (
    DYNAMIC_GAIN_DB,
    MIN_INSTRUMENTS,
    SCHEME_VERSION,
    SOFTEN_GAIN_DB,
    ArrangementScheme,
    GlobalMix,
    SchemeError,
    SchemeParseError,
    TrackPlan,
    load_instruments,
    parse_scheme,
    read_scheme_file,
    serialize_scheme,
    validate_scheme,
    write_scheme_file,
)

# Frozen canonical output for GOLDEN_SCHEME below.  Regenerating it must
# reproduce these bytes exactly.
GOLDEN_SCHEME_TEXT = """\
{
  "global": {
    "master_gain": -1.5,
    "reverb_level": 0.3
  },
  "tracks": [
    {
      "duplicate": false,
      "instrument": "violin",
      "measure_dynamics": {
        "0": "mezzo",
        "4": "forte",
        "6": "piano"
      },
      "pan": -0.4,
      "reverb_send": 0.25,
      "soften": [
        7
      ],
      "source_track": 0,
      "volume_envelope": [
        [
          0.0,
          0.0
        ],
        [
          12.0,
          -3.0
        ],
        [
          16.0,
          -9.0
        ]
      ]
    },
    {
      "duplicate": false,
      "instrument": "cello",
      "measure_dynamics": {
        "4": "forte"
      },
      "pan": 0.35,
      "reverb_send": 0.3,
      "soften": [],
      "source_track": 1,
      "volume_envelope": []
    },
    {
      "duplicate": true,
      "instrument": "string ensemble",
      "measure_dynamics": {},
      "pan": 0.0,
      "reverb_send": 0.5,
      "soften": [
        0,
        1
      ],
      "source_track": 0,
      "volume_envelope": []
    }
  ],
  "version": 1
}
"""


def golden_scheme() -> ArrangementScheme:
    return ArrangementScheme(
        tracks=(
            TrackPlan(source_track=0, instrument="violin",
                      measure_dynamics=((0, "mezzo"), (4, "forte"), (6, "piano")),
                      soften=(7,),
                      volume_envelope=((0.0, 0.0), (12.0, -3.0), (16.0, -9.0)),
                      pan=-0.4, reverb_send=0.25),
            TrackPlan(source_track=1, instrument="cello",
                      measure_dynamics=((4, "forte"),), pan=0.35, reverb_send=0.3),
            TrackPlan(source_track=0, instrument="string ensemble", duplicate=True,
                      soften=(0, 1), reverb_send=0.5),
        ),
        global_mix=GlobalMix(reverb_level=0.3, master_gain=-1.5),
    )


def make_song(measures: int = 8, pitches=(60, 64, 67)) -> MidiSong:
    """4/4 at 120 BPM: one measure = 2 s.  Two tracks spanning `measures`."""
    length = measures * 2.0
    melody = tuple(MidiNote(onset=i * 0.5, duration=0.5, pitch=pitches[i % len(pitches)], velocity=80)
                   for i in range(int(length / 0.5)))
    bass = tuple(MidiNote(onset=i * 2.0, duration=2.0, pitch=48, velocity=70)
                 for i in range(measures))
    return MidiSong(tracks=(
        Track(index=0, name="melody", program=40, channel=0, notes=melody),
        Track(index=1, name="bass", program=42, channel=1, notes=bass),
    ))


def plan(**kw) -> TrackPlan:
    kw.setdefault("source_track", 0)
    kw.setdefault("instrument", "piano")
    return TrackPlan(**kw)


class TestModel:
    def test_pan_out_of_range_rejected(self):
        with pytest.raises(SchemeError, match=r"pan"):
            plan(pan=1.5)
        with pytest.raises(SchemeError, match=r"pan"):
            plan(pan=-1.01)

    def test_reverb_send_out_of_range_rejected(self):
        with pytest.raises(SchemeError, match="reverb_send"):
            plan(reverb_send=-0.1)
        with pytest.raises(SchemeError, match="reverb_send"):
            plan(reverb_send=1.2)

    def test_envelope_must_strictly_increase(self):
        with pytest.raises(SchemeError, match="strictly increasing"):
            plan(volume_envelope=((0.0, 0.0), (0.0, -3.0)))
        with pytest.raises(SchemeError, match="strictly increasing"):
            plan(volume_envelope=((2.0, 0.0), (1.0, -3.0)))

    def test_conflicting_dynamics_rejected(self):
        with pytest.raises(SchemeError, match="conflicting"):
            plan(measure_dynamics=((2, "forte"), (2, "piano")))

    def test_unknown_dynamic_level_rejected(self):
        with pytest.raises(SchemeError, match="fortissimo"):
            plan(measure_dynamics=((0, "fortissimo"),))

    def test_negative_measure_rejected(self):
        with pytest.raises(SchemeError):
            plan(soften=(-1,))
        with pytest.raises(SchemeError):
            plan(measure_dynamics=((-2, "forte"),))

    def test_scheme_needs_a_track(self):
        with pytest.raises(SchemeError, match="at least one track"):
            ArrangementScheme(tracks=())

    def test_global_mix_ranges(self):
        with pytest.raises(SchemeError, match="reverb_level"):
            GlobalMix(reverb_level=1.5)
        GlobalMix(reverb_level=0.0)
        GlobalMix(reverb_level=1.0, master_gain=-12.0)

    def test_normalization_sorts_and_dedupes(self):
        p = plan(soften=(5, 1, 5, 3), measure_dynamics=((4, "forte"), (1, "piano")))
        assert p.soften == (1, 3, 5)
        assert p.measure_dynamics == ((1, "piano"), (4, "forte"))
        assert isinstance(plan(pan=0).pan, float)

    def test_gain_offsets(self):
        p = plan(measure_dynamics=((0, "forte"), (1, "piano"), (2, "mezzo")), soften=(1, 3))
        assert p.gain_offset_db(0) == 4.0
        assert p.gain_offset_db(1) == -6.0 + SOFTEN_GAIN_DB
        assert p.gain_offset_db(2) == 0.0
        assert p.gain_offset_db(3) == SOFTEN_GAIN_DB
        assert p.gain_offset_db(9) == 0.0
        assert DYNAMIC_GAIN_DB == {"forte": 4.0, "mezzo": 0.0, "piano": -6.0}

    def test_referenced_measures(self):
        p = plan(measure_dynamics=((4, "forte"),), soften=(2, 4, 7))
        assert p.referenced_measures() == (2, 4, 7)


class TestParse:
    def test_minimal_one_track_scheme(self):
        s = parse_scheme('{"version": 1, "tracks": [{"source_track": 0, "instrument": "piano"}]}')
        assert len(s.tracks) == 1
        assert s.tracks[0].instrument == "piano"
        assert s.tracks[0].pan == 0.0 and s.tracks[0].reverb_send == 0.0
        assert not s.tracks[0].duplicate
        assert s.global_mix == GlobalMix()

    def test_pan_out_of_range_pointer(self):
        with pytest.raises(SchemeParseError) as exc:
            parse_scheme('{"version":1,"tracks":[{"source_track":0,"instrument":"piano","pan":1.5}]}')
        errs = [d for d in exc.value.diagnostics if d.severity == "error"]
        assert len(errs) == 1
        assert errs[0].pointer == "/tracks/0/pan"
        assert "1.5" in errs[0].message

    def test_unknown_instrument_names_the_registry(self):
        with pytest.raises(SchemeParseError) as exc:
            parse_scheme('{"version":1,"tracks":[{"source_track":0,"instrument":"kazoo"}]}')
        (err,) = [d for d in exc.value.diagnostics if d.severity == "error"]
        assert err.pointer == "/tracks/0/instrument"
        assert "kazoo" in err.message and "registry" in err.message

    def test_version_is_mandatory(self):
        with pytest.raises(SchemeParseError) as exc:
            parse_scheme('{"tracks":[{"source_track":0,"instrument":"piano"}]}')
        assert any(d.pointer == "/version" for d in exc.value.diagnostics)

    def test_unsupported_version_rejected(self):
        with pytest.raises(SchemeParseError, match="version"):
            parse_scheme('{"version":99,"tracks":[{"source_track":0,"instrument":"piano"}]}')

    def test_duplicate_of_alias(self):
        s = parse_scheme('{"version":1,"tracks":['
                         '{"source_track":1,"instrument":"cello"},'
                         '{"duplicate_of":1,"instrument":"viola"}]}')
        assert s.tracks[1].source_track == 1
        assert s.tracks[1].duplicate is True
        assert s.tracks[0].duplicate is False

    def test_source_and_duplicate_of_conflict(self):
        with pytest.raises(SchemeParseError, match="not both"):
            parse_scheme('{"version":1,"tracks":[{"source_track":0,"duplicate_of":1,"instrument":"piano"}]}')

    def test_bad_dynamics_key_and_level(self):
        with pytest.raises(SchemeParseError) as exc:
            parse_scheme('{"version":1,"tracks":[{"source_track":0,"instrument":"piano",'
                         '"measure_dynamics":{"x":"forte","2":"fortissimo"}}]}')
        pointers = {d.pointer for d in exc.value.diagnostics if d.severity == "error"}
        assert pointers == {"/tracks/0/measure_dynamics/x", "/tracks/0/measure_dynamics/2"}
        assert any("forte, mezzo, piano" in d.message for d in exc.value.diagnostics)

    def test_envelope_diagnostics_point_at_breakpoint(self):
        with pytest.raises(SchemeParseError) as exc:
            parse_scheme('{"version":1,"tracks":[{"source_track":0,"instrument":"piano",'
                         '"volume_envelope":[[0.0,0.0],[0.0,-3.0]]}]}')
        (err,) = [d for d in exc.value.diagnostics if d.severity == "error"]
        assert err.pointer == "/tracks/0/volume_envelope/1"

    def test_unknown_fields_warn_but_parse(self):
        diags = []
        s = parse_scheme('{"version":1,"flavor":"bold","tracks":[{"source_track":0,'
                         '"instrument":"piano","swing":0.6}]}', diagnostics=diags)
        assert len(s.tracks) == 1
        warnings = {d.pointer for d in diags if d.severity == "warning"}
        assert warnings == {"/flavor", "/tracks/0/swing"}

    def test_invalid_json_reports_position(self):
        with pytest.raises(SchemeParseError) as exc:
            parse_scheme('{"version": 1,\n  "tracks": [}')
        (err,) = exc.value.diagnostics
        assert err.line == 2

    def test_root_and_tracks_shape_errors(self):
        with pytest.raises(SchemeParseError, match="root"):
            parse_scheme("[1, 2]")
        with pytest.raises(SchemeParseError, match="non-empty tracks"):
            parse_scheme('{"version":1,"tracks":[]}')
        with pytest.raises(SchemeParseError, match="non-empty tracks"):
            parse_scheme('{"version":1}')

    def test_missing_source_track(self):
        with pytest.raises(SchemeParseError, match="source_track"):
            parse_scheme('{"version":1,"tracks":[{"instrument":"piano"}]}')

    def test_bytes_input(self):
        s = parse_scheme(GOLDEN_SCHEME_TEXT.encode("utf-8"))
        assert s == golden_scheme()

    def test_multiple_errors_all_collected(self):
        with pytest.raises(SchemeParseError) as exc:
            parse_scheme('{"version":1,"tracks":[{"source_track":0,"instrument":"piano",'
                         '"pan":2.0,"reverb_send":-1.0}]}')
        pointers = {d.pointer for d in exc.value.diagnostics if d.severity == "error"}
        assert pointers == {"/tracks/0/pan", "/tracks/0/reverb_send"}

    def test_golden_scheme_structural_equality(self):
        assert parse_scheme(GOLDEN_SCHEME_TEXT) == golden_scheme()


class TestSerialize:
    def test_golden_bytes(self):
        assert serialize_scheme(golden_scheme()) == GOLDEN_SCHEME_TEXT

    def test_round_trip_identity(self):
        s = golden_scheme()
        assert parse_scheme(serialize_scheme(s)) == s

    def test_equal_schemes_serialize_byte_identical(self):
        a = plan(soften=(3, 1), measure_dynamics=((2, "forte"), (0, "piano")), pan=0)
        b = plan(soften=(1, 3, 3), measure_dynamics=((0, "piano"), (2, "forte")), pan=0.0)
        assert a == b
        sa = serialize_scheme(ArrangementScheme(tracks=(a,)))
        sb = serialize_scheme(ArrangementScheme(tracks=(b,)))
        assert sa == sb

    def test_keys_are_lexicographic(self):
        orders: list[list[str]] = []

        def record(pairs):
            orders.append([k for k, _ in pairs])
            return dict(pairs)

        json.loads(serialize_scheme(golden_scheme()), object_pairs_hook=record)
        assert orders, "expected at least one object"
        for keys in orders:
            assert keys == sorted(keys)

    def test_output_shape(self):
        text = serialize_scheme(golden_scheme())
        assert text.endswith("}\n")
        payload = json.loads(text)
        assert payload["version"] == SCHEME_VERSION
        assert set(payload) == {"version", "global", "tracks"}

    def test_property_round_trip_generated_schemes(self):
        rng = random.Random(0xA77A)
        names = sorted(load_instruments())
        for _ in range(60):
            tracks = []
            for _ in range(rng.randint(1, 5)):
                measures = rng.sample(range(12), k=rng.randint(0, 4))
                levels = [rng.choice(["forte", "mezzo", "piano"]) for _ in measures]
                times = sorted(rng.sample(range(0, 400), k=rng.randint(0, 4)))
                envelope = tuple((t / 10.0, round(rng.uniform(-24, 6), 3)) for t in times)
                tracks.append(TrackPlan(
                    source_track=rng.randint(0, 3),
                    instrument=rng.choice(names),
                    duplicate=rng.random() < 0.3,
                    measure_dynamics=tuple(zip(measures, levels)),
                    soften=tuple(rng.sample(range(12), k=rng.randint(0, 3))),
                    volume_envelope=envelope,
                    pan=round(rng.uniform(-1, 1), 4),
                    reverb_send=round(rng.uniform(0, 1), 4),
                ))
            scheme = ArrangementScheme(
                tracks=tuple(tracks),
                global_mix=GlobalMix(reverb_level=round(rng.uniform(0, 1), 4),
                                     master_gain=round(rng.uniform(-12, 6), 3)),
            )
            text = serialize_scheme(scheme)
            assert parse_scheme(text) == scheme
            assert serialize_scheme(parse_scheme(text)) == text

    def test_file_round_trip_and_extension(self, tmp_path):
        path = write_scheme_file(golden_scheme(), tmp_path / "mix.scheme.json")
        assert read_scheme_file(path) == golden_scheme()
        with pytest.raises(SchemeError, match=r"\.scheme\.json"):
            write_scheme_file(golden_scheme(), tmp_path / "mix.json")


class TestValidate:
    def test_consistent_fixture_is_clean(self):
        song = make_song(measures=8)
        scheme = ArrangementScheme(tracks=(
            plan(source_track=0, instrument="violin",
                 measure_dynamics=((0, "forte"), (7, "piano")), soften=(3,)),
            plan(source_track=1, instrument="cello"),
        ))
        assert validate_scheme(scheme, song) == []

    def test_measure_reference_past_song_end_is_error(self):
        song = make_song(measures=8)
        scheme = ArrangementScheme(tracks=(
            plan(source_track=0, instrument="violin", measure_dynamics=((9, "forte"),)),
        ))
        (diag,) = validate_scheme(scheme, song)
        assert diag.severity == "error"
        assert diag.pointer == "/tracks/0/measure_dynamics/9"
        assert "8 measures" in diag.message

    def test_soften_reference_past_song_end_is_error(self):
        song = make_song(measures=4)
        scheme = ArrangementScheme(tracks=(plan(source_track=0, instrument="violin", soften=(4,)),))
        (diag,) = validate_scheme(scheme, song)
        assert diag.severity == "error" and diag.pointer == "/tracks/0/soften"

    def test_missing_source_track_is_error(self):
        song = make_song()
        scheme = ArrangementScheme(tracks=(plan(source_track=5, instrument="piano"),))
        (diag,) = validate_scheme(scheme, song)
        assert diag.severity == "error"
        assert diag.pointer == "/tracks/0/source_track"
        assert "2 tracks" in diag.message

    def test_pitch_below_violin_range_warns(self):
        # Registry range check: violin low G is MIDI 55, so pitch 40 warns.
        song = MidiSong(tracks=(
            Track(index=0, notes=(MidiNote(onset=0.0, duration=1.0, pitch=40, velocity=80),)),
        ))
        scheme = ArrangementScheme(tracks=(plan(source_track=0, instrument="violin"),))
        (diag,) = validate_scheme(scheme, song)
        assert diag.severity == "warning"
        assert "pitch 40" in diag.message
        assert "violin" in diag.message and "[55, 103]" in diag.message

    def test_every_out_of_range_note_reported_with_measure(self):
        # 120 BPM 4/4: measures are 2 s long.
        notes = (
            MidiNote(onset=0.0, duration=0.5, pitch=30, velocity=80),   # measure 0
            MidiNote(onset=2.5, duration=0.5, pitch=31, velocity=80),   # measure 1
            MidiNote(onset=4.5, duration=0.5, pitch=108, velocity=80),  # measure 2
            MidiNote(onset=6.0, duration=0.5, pitch=60, velocity=80),   # in range
        )
        song = MidiSong(tracks=(Track(index=0, notes=notes),))
        scheme = ArrangementScheme(tracks=(plan(source_track=0, instrument="violin"),))
        diags = validate_scheme(scheme, song)
        assert [d.severity for d in diags] == ["warning"] * 3
        reported = [(d.message.split("pitch ")[1].split(" ")[0],
                     d.message.split("measure ")[1].split(" ")[0]) for d in diags]
        assert reported == [("30", "0"), ("31", "1"), ("108", "2")]

    def test_unknown_instrument_reported(self):
        song = make_song()
        scheme = ArrangementScheme(tracks=(plan(source_track=0, instrument="kazoo"),))
        (diag,) = validate_scheme(scheme, song)
        assert diag.severity == "error" and "registry" in diag.message

    def test_duplicate_plans_checked_independently(self):
        song = MidiSong(tracks=(
            Track(index=0, notes=(MidiNote(onset=0.0, duration=1.0, pitch=40, velocity=80),)),
        ))
        scheme = ArrangementScheme(tracks=(
            plan(source_track=0, instrument="cello"),                   # 40 in cello range
            plan(source_track=0, instrument="violin", duplicate=True),  # 40 below violin range
        ))
        diags = validate_scheme(scheme, song)
        assert len(diags) == 1 and diags[0].pointer == "/tracks/1/instrument"

    def test_validation_is_monotone(self):
        song = make_song(measures=4)
        base_tracks = [plan(source_track=0, instrument="violin", measure_dynamics=((9, "forte"),))]
        previous: list = []
        additions = [
            plan(source_track=7, instrument="piano"),
            plan(source_track=1, instrument="piccolo"),  # bass at 48 below piccolo low 74
            plan(source_track=0, instrument="cello", soften=(11,)),
        ]
        for extra in additions:
            base_tracks.append(extra)
            diags = validate_scheme(ArrangementScheme(tracks=tuple(base_tracks)), song)
            assert diags[: len(previous)] == previous
            assert len(diags) > len(previous)
            previous = diags


class TestRegistry:
    def test_registry_size_and_uniqueness(self):
        registry = load_instruments()
        assert len(registry) >= MIN_INSTRUMENTS
        assert len(registry) == 39
        assert len({i.program for i in registry.values()}) > 20  # spread across GM banks

    def test_entries_well_formed(self):
        for name, inst in load_instruments().items():
            assert inst.name == name
            assert 0 <= inst.program <= 127
            assert 0 <= inst.low <= inst.high <= 127
            assert inst.recipe and inst.family

    def test_expected_families_present(self):
        families = {i.family for i in load_instruments().values()}
        assert {"strings", "woodwind", "brass", "keys", "percussion",
                "guitar", "voice", "synth", "bass"} <= families

    def test_violin_range(self):
        violin = load_instruments()["violin"]
        assert violin.low == 55
        assert violin.in_range(55) and violin.in_range(103)
        assert not violin.in_range(40)

    def test_override_path(self, tmp_path):
        bundled = load_instruments()
        payload = {
            "version": 1,
            "instruments": {
                i.name: {"program": i.program, "recipe": i.recipe,
                         "family": i.family, "range": [i.low, i.high]}
                for i in bundled.values()
            },
        }
        path = tmp_path / "custom.json"
        path.write_text(json.dumps(payload), "utf-8")
        assert load_instruments(path) == bundled

    def test_undersized_registry_rejected(self, tmp_path):
        path = tmp_path / "tiny.json"
        path.write_text(json.dumps({"version": 1, "instruments": {
            "piano": {"program": 0, "recipe": "piano_like", "family": "keys", "range": [21, 108]},
        }}), "utf-8")
        with pytest.raises(SchemeError, match="at least 39"):
            load_instruments(path)

    def test_malformed_entry_rejected(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text(json.dumps({"version": 1, "instruments": {
            "piano": {"program": 0, "recipe": "piano_like", "family": "keys"},
        }}), "utf-8")
        with pytest.raises(SchemeError, match="piano"):
            load_instruments(path)
