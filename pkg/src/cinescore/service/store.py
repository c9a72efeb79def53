"""File-per-artifact persistence: a project is a directory users can edit.

Layout under the store root, one directory per project id:

    project.json   id, clip, description, stage, revision, render index
    spots.json     rhythm spots
    report.json    visual report
    melody.mid     current melody candidate (standard MIDI file)
    score.abc      the editable score
    scheme.json    arrangement scheme
    scorecard.json assessment results
    transcripts/   agent chat logs (assessment.jsonl, arrangement.jsonl)
    renders/       rendered WAV files, one per producing revision

Stage-dependent files are simply absent before their stage runs;
persist() also removes files whose artifact was cleared so the
directory never disagrees with the project.
"""

from __future__ import annotations

import dataclasses
import json
import threading
import uuid
from pathlib import Path

from ..agents import ChatTranscript, CriterionResult, ScoreCard, read_transcript, write_transcript
from ..melody import RhythmSpots
from ..notation import parse_abc_score, parse_midi, write_midi
from ..scheme import parse_scheme, serialize_scheme
from ..vision import VisualReport
from .project import ClipRef, Project, ServiceError, Stage

PROJECT_FILE = "project.json"
SPOTS_FILE = "spots.json"
REPORT_FILE = "report.json"
MELODY_FILE = "melody.mid"
SCORE_FILE = "score.abc"
SCHEME_FILE = "scheme.json"
SCORECARD_FILE = "scorecard.json"
TRANSCRIPTS_DIR = "transcripts"
RENDERS_DIR = "renders"


class StoreError(ServiceError):
    """Persistence failure; the message names the offending file."""


def _scorecard_to_json(card: ScoreCard) -> dict:
    return {
        "criteria": [
            {"id": c.id, "agent": c.agent, "verdict": c.verdict, "rationale": c.rationale}
            for c in card.criteria
        ]
    }


def _scorecard_from_json(data: dict) -> ScoreCard:
    return ScoreCard(
        criteria=tuple(
            CriterionResult(
                id=c["id"], agent=c["agent"], verdict=c["verdict"], rationale=c["rationale"]
            )
            for c in data["criteria"]
        )
    )


class ProjectStore:
    """Project directories under one root, with per-project writer locks."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.RLock] = {}
        self._locks_guard = threading.Lock()

    # -- locking ------------------------------------------------------

    def lock(self, project_id: str) -> threading.RLock:
        """The single-writer lock serializing mutations of one project."""
        with self._locks_guard:
            if project_id not in self._locks:
                self._locks[project_id] = threading.RLock()
            return self._locks[project_id]

    # -- directory helpers --------------------------------------------

    def path(self, project_id: str) -> Path:
        return self.root / project_id

    def render_path(self, project_id: str, revision: int) -> Path:
        return self.path(project_id) / RENDERS_DIR / f"r{revision:06d}.wav"

    def transcript_path(self, project_id: str, kind: str) -> Path:
        return self.path(project_id) / TRANSCRIPTS_DIR / f"{kind}.jsonl"

    def list_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if p.is_dir() and (p / PROJECT_FILE).exists()
        )

    def exists(self, project_id: str) -> bool:
        return (self.path(project_id) / PROJECT_FILE).exists()

    def new_id(self) -> str:
        return uuid.uuid4().hex[:12]

    # -- persistence ---------------------------------------------------

    def persist(self, project: Project) -> Path:
        """Mirror the project into its directory; returns the directory.

        Artifact files land before the manifest so a concurrent reader
        never sees a manifest pointing at files that do not exist yet.
        """
        directory = self.path(project.id)
        directory.mkdir(parents=True, exist_ok=True)

        self._write_or_remove(
            directory / SPOTS_FILE,
            None if project.spots is None else project.spots.to_json() + "\n",
        )
        self._write_or_remove(
            directory / REPORT_FILE,
            None if project.report is None else project.report.to_json() + "\n",
        )
        self._write_or_remove(
            directory / MELODY_FILE,
            None if project.melody is None else write_midi(project.melody),
        )
        self._write_or_remove(
            directory / SCORE_FILE,
            None if project.abc is None else project.abc.text,
        )
        self._write_or_remove(
            directory / SCHEME_FILE,
            None if project.scheme is None else serialize_scheme(project.scheme),
        )
        self._write_or_remove(
            directory / SCORECARD_FILE,
            None
            if project.scorecard is None
            else json.dumps(_scorecard_to_json(project.scorecard), indent=2) + "\n",
        )

        if project.scorecard is None:
            self.transcript_path(project.id, "assessment").unlink(missing_ok=True)
        if project.scheme is None:
            self.transcript_path(project.id, "arrangement").unlink(missing_ok=True)

        kept = {path for _, path in project.renders}
        renders_dir = directory / RENDERS_DIR
        if renders_dir.is_dir():
            for wav in renders_dir.iterdir():
                if f"{RENDERS_DIR}/{wav.name}" not in kept:
                    wav.unlink()

        manifest = {
            "id": project.id,
            "clip": {
                "source": project.clip.source,
                "frame_rate": project.clip.frame_rate,
                "duration": project.clip.duration,
            },
            "description": project.description,
            "stage": project.stage.value,
            "revision": project.revision,
            "renders": [[revision, path] for revision, path in project.renders],
        }
        (directory / PROJECT_FILE).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        return directory

    @staticmethod
    def _write_or_remove(path: Path, content: str | bytes | None) -> None:
        if content is None:
            path.unlink(missing_ok=True)
        elif isinstance(content, bytes):
            path.write_bytes(content)
        else:
            path.write_text(content)

    def load(self, project_id: str) -> Project:
        """Rebuild a project from its directory; errors name the file."""
        directory = self.path(project_id)
        manifest_path = directory / PROJECT_FILE
        if not manifest_path.exists():
            raise StoreError(f"unknown project {project_id!r}")
        manifest = self._load_json(manifest_path)
        try:
            clip = ClipRef(
                source=manifest["clip"]["source"],
                frame_rate=manifest["clip"]["frame_rate"],
                duration=manifest["clip"]["duration"],
            )
            stage = Stage(manifest["stage"])
            project = Project(
                id=manifest["id"],
                clip=clip,
                description=manifest["description"],
                renders=tuple((int(r), str(p)) for r, p in manifest["renders"]),
                stage=stage,
                revision=manifest["revision"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreError(f"{PROJECT_FILE}: {exc}") from exc

        artifacts: dict[str, object] = {}
        spots_path = directory / SPOTS_FILE
        if spots_path.exists():
            artifacts["spots"] = self._decode(
                spots_path, lambda: RhythmSpots.from_json(spots_path.read_text())
            )
        report_path = directory / REPORT_FILE
        if report_path.exists():
            artifacts["report"] = self._decode(
                report_path, lambda: VisualReport.from_json(report_path.read_text())
            )
        melody_path = directory / MELODY_FILE
        if melody_path.exists():
            artifacts["melody"] = self._decode(
                melody_path, lambda: parse_midi(melody_path.read_bytes())
            )
        score_path = directory / SCORE_FILE
        if score_path.exists():
            artifacts["abc"] = self._decode(
                score_path, lambda: parse_abc_score(score_path.read_text())
            )
        scheme_path = directory / SCHEME_FILE
        if scheme_path.exists():
            artifacts["scheme"] = self._decode(
                scheme_path, lambda: parse_scheme(scheme_path.read_text())
            )
        card_path = directory / SCORECARD_FILE
        if card_path.exists():
            data = self._load_json(card_path)
            artifacts["scorecard"] = self._decode(card_path, lambda: _scorecard_from_json(data))

        return dataclasses.replace(project, **artifacts)

    @staticmethod
    def _load_json(path: Path):
        try:
            return json.loads(path.read_text())
        except (OSError, UnicodeDecodeError) as exc:
            raise StoreError(f"{path.name}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise StoreError(f"{path.name}: invalid JSON ({exc})") from exc

    @staticmethod
    def _decode(path: Path, build):
        try:
            return build()
        except StoreError:
            raise
        except Exception as exc:
            raise StoreError(f"{path.name}: {exc}") from exc

    # -- transcripts -----------------------------------------------------

    def write_transcripts(self, project_id: str, kind: str, transcript: ChatTranscript) -> Path:
        path = self.transcript_path(project_id, kind)
        path.parent.mkdir(parents=True, exist_ok=True)
        return write_transcript(transcript, path)

    def read_transcripts(self, project_id: str) -> dict[str, ChatTranscript]:
        found: dict[str, ChatTranscript] = {}
        for kind in ("assessment", "arrangement"):
            path = self.transcript_path(project_id, kind)
            if path.exists():
                try:
                    found[kind] = read_transcript(path)
                except Exception as exc:
                    raise StoreError(f"{path.name}: {exc}") from exc
        return found


__all__ = [
    "MELODY_FILE",
    "PROJECT_FILE",
    "ProjectStore",
    "RENDERS_DIR",
    "REPORT_FILE",
    "SCHEME_FILE",
    "SCORE_FILE",
    "SCORECARD_FILE",
    "SPOTS_FILE",
    "StoreError",
    "TRANSCRIPTS_DIR",
]
