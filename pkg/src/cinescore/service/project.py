"""Project state: stage ladder, artifacts, and edit/reset semantics."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from ..agents import ScoreCard
from ..melody import RhythmSpots
from ..notation import AbcScore, MidiSong
from ..scheme import ArrangementScheme
from ..vision import VisualReport


class ServiceError(ValueError):
    """Invalid request or state at the service layer."""


class Stage(str, enum.Enum):
    """How far a project has progressed; later stages imply earlier ones."""

    SPOTTED = "Spotted"
    DESCRIBED = "Described"
    GENERATED = "Generated"
    ASSESSED = "Assessed"
    ARRANGED = "Arranged"
    RENDERED = "Rendered"


#: Forward order of the stage ladder.
STAGE_ORDER: tuple[Stage, ...] = (
    Stage.SPOTTED,
    Stage.DESCRIBED,
    Stage.GENERATED,
    Stage.ASSESSED,
    Stage.ARRANGED,
    Stage.RENDERED,
)


def stage_index(stage: Stage) -> int:
    return STAGE_ORDER.index(stage)


class StageError(ServiceError):
    """An operation ran before its prerequisite stage was reached."""

    def __init__(self, operation: str, required: Stage, current: Stage):
        self.required = required
        super().__init__(
            f"{operation} requires stage {required.value}, but the project is at {current.value}"
        )


@dataclass(frozen=True)
class ClipRef:
    """Where the footage lives and how to play it back."""

    source: str
    frame_rate: float
    duration: float

    def __post_init__(self):
        if not self.source:
            raise ServiceError("clip source must not be empty")
        if self.frame_rate <= 0:
            raise ServiceError(f"frame_rate must be positive, got {self.frame_rate}")
        if self.duration <= 0:
            raise ServiceError(f"duration must be positive, got {self.duration}")


@dataclass(frozen=True)
class Project:
    """One scoring job: footage in, staged artifacts, renders out.

    ``renders`` pairs the revision that produced each file with its
    path relative to the project directory.  ``revision`` increments on
    every mutation; edits to an upstream artifact clear everything
    downstream of its stage.
    """

    id: str
    clip: ClipRef
    spots: RhythmSpots | None = None
    report: VisualReport | None = None
    description: str = ""
    melody: MidiSong | None = None
    abc: AbcScore | None = None
    scorecard: ScoreCard | None = None
    scheme: ArrangementScheme | None = None
    renders: tuple[tuple[int, str], ...] = ()
    stage: Stage = Stage.SPOTTED
    revision: int = 0

    def __post_init__(self):
        if not self.id:
            raise ServiceError("project id must not be empty")
        if self.revision < 0:
            raise ServiceError(f"revision must be >= 0, got {self.revision}")

    def require_stage(self, operation: str, required: Stage) -> None:
        if stage_index(self.stage) < stage_index(required):
            raise StageError(operation, required, self.stage)

    def latest_render(self) -> tuple[int, str] | None:
        return self.renders[-1] if self.renders else None


def advance(project: Project, stage: Stage, **artifacts) -> Project:
    """Apply a completed stage's artifacts; the revision ticks up."""
    return replace(project, stage=stage, revision=project.revision + 1, **artifacts)


def reset_downstream(project: Project, stage: Stage, **artifacts) -> Project:
    """Apply an edit at ``stage``, clearing every later stage's artifacts.

    The project's stage becomes ``stage`` (an explicit user edit may
    move it forward as well as back); artifacts owned by later stages
    are dropped so they can never disagree with the edit.
    """
    index = stage_index(stage)
    cleared: dict[str, object] = {}
    if index < stage_index(Stage.DESCRIBED):
        cleared.update(report=None, description="")
    if index < stage_index(Stage.GENERATED):
        cleared.update(melody=None, abc=None)
    if index < stage_index(Stage.ASSESSED):
        cleared.update(scorecard=None)
    if index < stage_index(Stage.ARRANGED):
        cleared.update(scheme=None)
    if index < stage_index(Stage.RENDERED):
        cleared.update(renders=())
    cleared.update(artifacts)
    return replace(project, stage=stage, revision=project.revision + 1, **cleared)


__all__ = [
    "ClipRef",
    "Project",
    "STAGE_ORDER",
    "ServiceError",
    "Stage",
    "StageError",
    "advance",
    "reset_downstream",
    "stage_index",
]
