"""Stage operations: each loads a project, runs one step, persists.

The pipeline owns backend construction from config selectors and the
edit/reset rules.  Every mutation goes through the project's writer
lock, bumps the revision exactly once, and clears any downstream
artifacts the change invalidates.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Callable

import numpy as np

from ..agents import (
    AgentError,
    ChatTranscript,
    GateDecision,
    HttpLlmBackend,
    LlmBackend,
    MockLlmBackend,
    ProcessLlmBackend,
    ScoreCard,
    run_arrangement,
    run_assessment,
    run_gated,
)
from ..audio import Waveform, read_wav_file
from ..conditioning import (
    GeneratorError,
    ProcessGenerator,
    ProcessTranscriber,
    StubGenerator,
    assemble_condition,
    chromagram,
    synthesize_click_track,
)
from ..diagnostics import has_errors
from ..melody import (
    MelodyError,
    MidiSong,
    RhythmSpots,
    extract_main_melody,
    flatten_to_rhythm,
    select_lead,
)
from ..metrics import (
    EvaluationRow,
    chroma_diversity,
    db_envelope,
    detect_onsets,
    dynamic_variation_distance,
    rhythm_xcorr,
)
from ..notation import AbcScore, abc_to_midi, midi_to_abc, parse_abc_score
from ..render import MASTER_SAMPLE_RATE, Master, render_scheme, write_master
from ..scheme import load_instruments, parse_scheme, validate_scheme
from ..vision import (
    FrameSequence,
    VisualReport,
    build_description,
    detect_shot_cuts,
    load_frames,
    motion_saliency,
    motion_speed,
    optical_flow_magnitudes,
    write_raw_frames,
)
from .config import PipelineConfig
from .project import (
    ClipRef,
    Project,
    ServiceError,
    Stage,
    advance,
    reset_downstream,
)
from .store import RENDERS_DIR, ProjectStore
from .transcriber import BuiltinTranscriber

#: File name the clip's frames are normalized into inside the project dir.
CLIP_FILE = "clip.frames"

#: Mean-luminance boundaries for the brightness label (8-bit scale).
DARK_BELOW = 85.0
MILD_BELOW = 170.0

#: Motion speed (px/frame) above which footage reads as high-energy.
EXCITING_SPEED = 4.0


class BackendFailure(ServiceError):
    """A generator, transcriber, or agent backend failed."""


class RevisionConflict(ServiceError):
    """The caller's revision precondition no longer matches the project."""

    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"revision precondition failed: expected {expected}, project is at {actual}"
        )


def _fade_tail(audio: Waveform, duration: float, fade: float) -> Waveform:
    """Cut the cue at the picture's end, easing out with a raised cosine."""
    n = int(round(duration * audio.sample_rate))
    samples = np.asarray(audio.samples, dtype=np.float64)
    if samples.shape[0] >= n:
        samples = samples[:n].copy()
    else:
        pad = [(0, n - samples.shape[0])] + [(0, 0)] * (samples.ndim - 1)
        samples = np.pad(samples, pad)
    n_fade = min(int(round(fade * audio.sample_rate)), n)
    if n_fade > 0:
        ramp = 0.5 + 0.5 * np.cos(math.pi * np.arange(1, n_fade + 1) / n_fade)
        samples[-n_fade:] *= ramp if samples.ndim == 1 else ramp[:, None]
    return Waveform(samples, audio.sample_rate)


class Pipeline:
    """All project mutations, from footage ingest to evaluation."""

    def __init__(self, store: ProjectStore, config: PipelineConfig | None = None):
        self.store = store
        self.config = config or PipelineConfig()
        self.registry = load_instruments(self.config.registry_path or None)

    # -- backend selection ----------------------------------------------

    def _generator(self):
        selector = self.config.generator
        if selector == "stub":
            return StubGenerator(sample_rate=self.config.click_sample_rate)
        if selector.startswith("process:"):
            return ProcessGenerator(
                selector[len("process:") :].split(),
                sample_rate=self.config.click_sample_rate,
            )
        raise ServiceError(f"unknown generator selector {selector!r}")

    def _transcriber(self):
        selector = self.config.transcriber
        if selector == "builtin":
            return BuiltinTranscriber(grid=self.config.quantize_grid)
        if selector.startswith("process:"):
            return ProcessTranscriber(selector[len("process:") :].split())
        raise ServiceError(f"unknown transcriber selector {selector!r}")

    def _llm(self) -> LlmBackend:
        selector = self.config.llm_backend
        if selector == "mock":
            return MockLlmBackend()
        if selector.startswith("http:"):
            return HttpLlmBackend(
                selector[len("http:") :], api_key=self.config.llm_api_key or None
            )
        if selector.startswith("process:"):
            return ProcessLlmBackend(tuple(selector[len("process:") :].split()))
        raise ServiceError(f"unknown llm backend selector {selector!r}")

    # -- project access ---------------------------------------------------

    def get(self, project_id: str) -> Project:
        return self.store.load(project_id)

    def frames(self, project: Project) -> FrameSequence:
        source = Path(project.clip.source)
        if not source.is_absolute():
            source = self.store.path(project.id) / source
        return load_frames(source, frame_rate=project.clip.frame_rate)

    @staticmethod
    def _check_revision(project: Project, expected: int | None) -> None:
        if expected is not None and expected != project.revision:
            raise RevisionConflict(expected, project.revision)

    def _mutate(
        self,
        project_id: str,
        expected_revision: int | None,
        operation: Callable[[Project], Project],
    ) -> Project:
        with self.store.lock(project_id):
            project = self.store.load(project_id)
            self._check_revision(project, expected_revision)
            updated = operation(project)
            self.store.persist(updated)
            return updated

    # -- ingest -----------------------------------------------------------

    def create(
        self,
        frames: FrameSequence,
        *,
        project_id: str | None = None,
    ) -> Project:
        """Register footage and propose rhythm spots from its shot cuts."""
        pid = project_id or self.store.new_id()
        if self.store.exists(pid):
            raise ServiceError(f"project {pid!r} already exists")
        with self.store.lock(pid):
            directory = self.store.path(pid)
            directory.mkdir(parents=True, exist_ok=True)
            write_raw_frames(directory / CLIP_FILE, frames)
            clip = ClipRef(
                source=CLIP_FILE,
                frame_rate=frames.frame_rate,
                duration=len(frames.frames) / frames.frame_rate,
            )
            project = Project(id=pid, clip=clip, spots=self._spots_from_cuts(frames, clip))
            self.store.persist(project)
            return project

    def create_from_path(self, source: str | Path, *, project_id: str | None = None) -> Project:
        return self.create(load_frames(source), project_id=project_id)

    # -- stage operations ---------------------------------------------------

    def _spots_from_cuts(self, frames: FrameSequence, clip: ClipRef) -> RhythmSpots:
        cuts = detect_shot_cuts(
            frames,
            window=self.config.cut_window,
            sigma_factor=self.config.cut_sigma,
            min_scene_len=self.config.min_scene_len,
        )
        return RhythmSpots(clip_duration=clip.duration, onsets=tuple(cuts))

    def spot(
        self,
        project_id: str,
        *,
        from_song: MidiSong | None = None,
        expected_revision: int | None = None,
    ) -> Project:
        """Recompute rhythm spots: shot cuts, or a song's main melody."""

        def run(project: Project) -> Project:
            if from_song is None:
                spots = self._spots_from_cuts(self.frames(project), project.clip)
            else:
                try:
                    report = select_lead(from_song, self.config.coverage_threshold)
                    melody = extract_main_melody(from_song, report)
                    spots = flatten_to_rhythm(
                        melody, project.clip.duration, self.config.merge_window
                    )
                except MelodyError as exc:
                    raise ServiceError(f"spotting from song failed: {exc}") from exc
            return reset_downstream(project, Stage.SPOTTED, spots=spots)

        return self._mutate(project_id, expected_revision, run)

    def describe(self, project_id: str, *, expected_revision: int | None = None) -> Project:
        """Analyse the footage into a visual report and prompt text."""

        def run(project: Project) -> Project:
            project.require_stage("describe", Stage.SPOTTED)
            frames = self.frames(project)
            flow = optical_flow_magnitudes(frames)
            speed = motion_speed(flow)
            cuts = detect_shot_cuts(
                frames,
                window=self.config.cut_window,
                sigma_factor=self.config.cut_sigma,
                min_scene_len=self.config.min_scene_len,
            )
            luminance = float(np.mean(frames.frames))
            if luminance < DARK_BELOW:
                brightness = "dark"
            elif luminance < MILD_BELOW:
                brightness = "mild"
            else:
                brightness = "bright"
            report = VisualReport(
                setting="null",
                brightness=brightness,
                color_hue="Gray",
                action="null",
                emotion="Exciting" if speed > EXCITING_SPEED else "Calm",
                view_scale="medium shot",
                theme="null",
                motion_speed=speed,
                motion_saliency=motion_saliency(flow),
                shot_cuts=tuple(cuts),
                plot_development=(
                    f"{len(cuts) + 1} scenes across {project.clip.duration:.1f} seconds"
                ),
            )
            return reset_downstream(
                project,
                Stage.DESCRIBED,
                report=report,
                description=build_description(report),
            )

        return self._mutate(project_id, expected_revision, run)

    def _generate_melody(self, project: Project, seed: int) -> tuple[MidiSong, AbcScore]:
        click = synthesize_click_track(project.spots, sample_rate=self.config.click_sample_rate)
        chroma = chromagram(
            click, window=self.config.chroma_window, hop=self.config.chroma_hop, one_hot=True
        )
        bundle = assemble_condition(chroma, project.description)
        try:
            audio = self._generator().generate(bundle, project.clip.duration, seed)
            transcribed = self._transcriber().transcribe(audio)
        except GeneratorError as exc:
            raise BackendFailure(f"generation failed: {exc}") from exc
        # The notation is the artifact of record (it is what agents assess
        # and users edit), so the project melody mirrors it round-trip
        # rather than keeping transcription detail the score cannot express.
        abc = midi_to_abc(transcribed)
        return abc_to_midi(abc), abc

    def generate(self, project_id: str, *, expected_revision: int | None = None) -> Project:
        """Synthesize a melody for the spots and transcribe it to notation."""

        def run(project: Project) -> Project:
            project.require_stage("generate", Stage.DESCRIBED)
            melody, abc = self._generate_melody(project, self.config.seed)
            return reset_downstream(project, Stage.GENERATED, melody=melody, abc=abc)

        return self._mutate(project_id, expected_revision, run)

    def assess(self, project_id: str, *, expected_revision: int | None = None) -> Project:
        """Score the melody; regenerate and retry while the gate says so.

        A passing candidate advances the project to Assessed.  When every
        attempt falls short the best candidate and its scorecard are kept
        but the stage stays at Generated, so arrangement cannot proceed
        until the user intervenes.
        """

        def run(project: Project) -> Project:
            project.require_stage("assess", Stage.GENERATED)
            backend = self._llm()
            transcripts: list[tuple[ScoreCard, ChatTranscript]] = []

            def produce(attempt: int) -> tuple[MidiSong, AbcScore]:
                if attempt == 1:
                    return project.melody, project.abc
                return self._generate_melody(project, self.config.seed + attempt - 1)

            def judge(candidate: tuple[MidiSong, AbcScore]) -> tuple[ScoreCard, ChatTranscript]:
                card, transcript = run_assessment(candidate[1], backend)
                transcripts.append((card, transcript))
                return card, transcript

            try:
                result = run_gated(
                    produce,
                    judge,
                    threshold=self.config.gate_threshold,
                    max_attempts=self.config.max_attempts,
                )
            except AgentError as exc:
                raise BackendFailure(f"assessment failed: {exc}") from exc

            transcript = next(t for c, t in transcripts if c is result.card)
            self.store.write_transcripts(project.id, "assessment", transcript)
            melody, abc = result.candidate
            if result.decision is GateDecision.PROCEED:
                return reset_downstream(
                    project, Stage.ASSESSED, melody=melody, abc=abc, scorecard=result.card
                )
            return reset_downstream(
                project, Stage.GENERATED, melody=melody, abc=abc, scorecard=result.card
            )

        return self._mutate(project_id, expected_revision, run)

    def arrange(self, project_id: str, *, expected_revision: int | None = None) -> Project:
        """Have the agents map the score onto instruments and a mix plan."""

        def run(project: Project) -> Project:
            project.require_stage("arrange", Stage.ASSESSED)
            try:
                scheme, transcript = run_arrangement(
                    project.abc, project.report, self._llm(), registry=self.registry
                )
            except AgentError as exc:
                raise BackendFailure(f"arrangement failed: {exc}") from exc
            diagnostics = validate_scheme(scheme, project.melody, registry=self.registry)
            if has_errors(diagnostics):
                details = "; ".join(str(d) for d in diagnostics)
                raise BackendFailure(f"arrangement produced an invalid scheme: {details}")
            self.store.write_transcripts(project.id, "arrangement", transcript)
            return reset_downstream(project, Stage.ARRANGED, scheme=scheme)

        return self._mutate(project_id, expected_revision, run)

    def render(self, project_id: str, *, expected_revision: int | None = None) -> Project:
        """Render the scheme to a mastered WAV trimmed to the picture."""

        def run(project: Project) -> Project:
            project.require_stage("render", Stage.ARRANGED)
            result = render_scheme(
                project.melody,
                project.scheme,
                registry=self.registry,
                workers=self.config.render_workers,
            )
            audio = _fade_tail(
                result.master.audio, project.clip.duration, self.config.fade_seconds
            )
            revision = project.revision + 1
            relpath = f"{RENDERS_DIR}/r{revision:06d}.wav"
            path = self.store.path(project.id) / relpath
            path.parent.mkdir(parents=True, exist_ok=True)
            write_master(Master(audio), path)
            return advance(
                project, Stage.RENDERED, renders=project.renders + ((revision, relpath),)
            )

        return self._mutate(project_id, expected_revision, run)

    # -- user edits --------------------------------------------------------

    def put_spots(
        self, project_id: str, spots: RhythmSpots, *, expected_revision: int | None = None
    ) -> Project:
        def run(project: Project) -> Project:
            return reset_downstream(project, Stage.SPOTTED, spots=spots)

        return self._mutate(project_id, expected_revision, run)

    def put_description(
        self, project_id: str, text: str, *, expected_revision: int | None = None
    ) -> Project:
        def run(project: Project) -> Project:
            project.require_stage("edit description", Stage.DESCRIBED)
            return reset_downstream(project, Stage.DESCRIBED, description=text)

        return self._mutate(project_id, expected_revision, run)

    def put_abc(
        self, project_id: str, text: str, *, expected_revision: int | None = None
    ) -> Project:
        def run(project: Project) -> Project:
            project.require_stage("edit score", Stage.DESCRIBED)
            abc = parse_abc_score(text)
            melody = abc_to_midi(abc)
            return reset_downstream(project, Stage.GENERATED, melody=melody, abc=abc)

        return self._mutate(project_id, expected_revision, run)

    def put_scheme(
        self, project_id: str, text: str, *, expected_revision: int | None = None
    ) -> Project:
        def run(project: Project) -> Project:
            project.require_stage("edit scheme", Stage.ASSESSED)
            scheme = parse_scheme(text, registry=self.registry)
            diagnostics = validate_scheme(scheme, project.melody, registry=self.registry)
            if has_errors(diagnostics):
                raise ServiceError(
                    "scheme rejected: " + "; ".join(str(d) for d in diagnostics)
                )
            return reset_downstream(project, Stage.ARRANGED, scheme=scheme)

        return self._mutate(project_id, expected_revision, run)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, project_id: str, against: str | Path | None = None) -> EvaluationRow:
        """Measure the latest render; the click track is the default reference."""
        project = self.store.load(project_id)
        project.require_stage("evaluate", Stage.RENDERED)
        directory = self.store.path(project_id)
        rendered = read_wav_file(directory / project.latest_render()[1])
        if against is not None:
            reference = read_wav_file(against)
        else:
            reference = synthesize_click_track(project.spots, sample_rate=MASTER_SAMPLE_RATE)
        correlation = rhythm_xcorr(detect_onsets(reference), detect_onsets(rendered), max_lag=0.05)
        dynamic = dynamic_variation_distance(db_envelope(reference), db_envelope(rendered))
        diversity = None
        if len(project.renders) >= 2:
            chromas = [
                chromagram(read_wav_file(directory / relpath), one_hot=False)
                for _, relpath in project.renders
            ]
            diversity = chroma_diversity(chromas)
        return EvaluationRow(
            name=project.id,
            diversity=diversity,
            rhythm_raw=correlation.raw_peak,
            rhythm_norm=correlation.normalized,
            rhythm_lag=correlation.lag_seconds,
            dynamic_dist=dynamic,
            instr_dist=None,
            kl=None,
            fad=None,
            imagebind=None,
        )


__all__ = [
    "BackendFailure",
    "CLIP_FILE",
    "Pipeline",
    "RevisionConflict",
    "_fade_tail",
]
