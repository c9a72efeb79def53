"""HTTP API over the pipeline: one resource per project, plus jobs.

Mutations honor an ``If-Match-Revision`` precondition header and bump
the project revision; slow stages (generate, render) return a job to
poll so reads stay responsive while they run.
"""

from __future__ import annotations

import json

from fastapi import FastAPI, Header, Request
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from ..melody import MelodyError, RhythmSpots
from ..notation import AbcParseError
from ..scheme import SchemeParseError
from ..scheme.model import DYNAMIC_GAIN_DB
from .jobs import JobRunner
from .pipeline import BackendFailure, Pipeline, RevisionConflict
from .project import Project, ServiceError, StageError
from .store import StoreError

WAV_MEDIA_TYPE = "audio/wav"

#: Precondition header carrying the revision the client last saw.
REVISION_HEADER = "If-Match-Revision"


class SpotsBody(BaseModel):
    clip_duration: float
    onsets: list[float]


class DescriptionBody(BaseModel):
    description: str


class AbcBody(BaseModel):
    abc: str


class CreateBody(BaseModel):
    clip: str | None = None
    demo: bool = False
    id: str | None = None


def project_view(project: Project) -> dict:
    """The full project as plain JSON for API consumers."""
    from ..scheme import serialize_scheme

    melody = None
    if project.melody is not None:
        melody = {
            "tracks": [
                {
                    "index": track.index,
                    "name": track.name,
                    "notes": [
                        {
                            "onset": note.onset,
                            "duration": note.duration,
                            "pitch": note.pitch,
                            "velocity": note.velocity,
                        }
                        for note in track.notes
                    ],
                }
                for track in project.melody.tracks
            ]
        }
    scorecard = None
    if project.scorecard is not None:
        scorecard = {
            "total": project.scorecard.total,
            "criteria": [
                {
                    "id": c.id,
                    "agent": c.agent,
                    "verdict": c.verdict,
                    "rationale": c.rationale,
                }
                for c in project.scorecard.criteria
            ],
        }
    return {
        "id": project.id,
        "clip": {
            "source": project.clip.source,
            "frame_rate": project.clip.frame_rate,
            "duration": project.clip.duration,
        },
        "stage": project.stage.value,
        "revision": project.revision,
        "description": project.description,
        "spots": None if project.spots is None else json.loads(project.spots.to_json()),
        "report": None if project.report is None else json.loads(project.report.to_json()),
        "melody": melody,
        "abc": None if project.abc is None else project.abc.text,
        "scorecard": scorecard,
        "scheme": None if project.scheme is None else json.loads(serialize_scheme(project.scheme)),
        "renders": [[revision, path] for revision, path in project.renders],
    }


def create_app(pipeline: Pipeline, jobs: JobRunner | None = None) -> FastAPI:
    app = FastAPI(
        title="cinescore",
        description="Film scoring pipeline: spots, description, melody, "
        "assessment, arrangement, and rendering as editable project stages.",
        version="1.0.0",
    )
    runner = jobs or JobRunner()
    app.state.pipeline = pipeline
    app.state.jobs = runner

    # -- error mapping ---------------------------------------------------

    @app.exception_handler(StageError)
    async def _stage_error(request: Request, exc: StageError):
        return JSONResponse(
            status_code=409, content={"detail": str(exc), "required": exc.required.value}
        )

    @app.exception_handler(RevisionConflict)
    async def _revision_conflict(request: Request, exc: RevisionConflict):
        return JSONResponse(
            status_code=409,
            content={"detail": str(exc), "expected": exc.expected, "actual": exc.actual},
        )

    @app.exception_handler(BackendFailure)
    async def _backend_failure(request: Request, exc: BackendFailure):
        return JSONResponse(status_code=502, content={"detail": str(exc)})

    @app.exception_handler(StoreError)
    async def _store_error(request: Request, exc: StoreError):
        status = 404 if "unknown project" in str(exc) else 500
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.exception_handler(AbcParseError)
    async def _abc_error(request: Request, exc: AbcParseError):
        return JSONResponse(
            status_code=422,
            content={
                "detail": str(exc),
                "diagnostics": [str(d) for d in getattr(exc, "diagnostics", ())],
            },
        )

    @app.exception_handler(SchemeParseError)
    async def _scheme_error(request: Request, exc: SchemeParseError):
        return JSONResponse(
            status_code=422,
            content={
                "detail": str(exc),
                "diagnostics": [str(d) for d in getattr(exc, "diagnostics", ())],
            },
        )

    @app.exception_handler(MelodyError)
    async def _melody_error(request: Request, exc: MelodyError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=422, content={"detail": str(exc)})

    # -- registry ----------------------------------------------------------

    @app.get("/registry")
    def get_registry():
        """The instrument palette the scheme editor may pick from."""
        return {
            "dynamics": sorted(DYNAMIC_GAIN_DB),
            "instruments": [
                {
                    "name": inst.name,
                    "program": inst.program,
                    "family": inst.family,
                    "low": inst.low,
                    "high": inst.high,
                }
                for inst in sorted(pipeline.registry.values(), key=lambda i: i.name)
            ],
        }

    # -- projects ----------------------------------------------------------

    @app.get("/projects")
    def list_projects():
        return {"projects": pipeline.store.list_ids()}

    @app.post("/projects", status_code=201)
    def create_project(body: CreateBody):
        if body.demo:
            from .fixtures import build_demo_clip

            project = pipeline.create(build_demo_clip(), project_id=body.id)
        elif body.clip:
            project = pipeline.create_from_path(body.clip, project_id=body.id)
        else:
            return JSONResponse(
                status_code=422,
                content={"detail": "request must name a clip source or set demo=true"},
            )
        return project_view(project)

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        return project_view(pipeline.get(project_id))

    # -- artifact edits ------------------------------------------------------

    def _revision(value: str | None) -> int | None:
        if value is None:
            return None
        try:
            return int(value)
        except ValueError as exc:
            raise ServiceError(f"{REVISION_HEADER} must be an integer, got {value!r}") from exc

    @app.put("/projects/{project_id}/spots")
    def put_spots(
        project_id: str,
        body: SpotsBody,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        spots = RhythmSpots(onsets=tuple(body.onsets), clip_duration=body.clip_duration)
        return project_view(
            pipeline.put_spots(project_id, spots, expected_revision=_revision(if_match_revision))
        )

    @app.put("/projects/{project_id}/description")
    def put_description(
        project_id: str,
        body: DescriptionBody,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        return project_view(
            pipeline.put_description(
                project_id, body.description, expected_revision=_revision(if_match_revision)
            )
        )

    @app.put("/projects/{project_id}/abc")
    def put_abc(
        project_id: str,
        body: AbcBody,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        return project_view(
            pipeline.put_abc(project_id, body.abc, expected_revision=_revision(if_match_revision))
        )

    @app.put("/projects/{project_id}/scheme")
    async def put_scheme(
        project_id: str,
        request: Request,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        text = (await request.body()).decode("utf-8")
        return project_view(
            pipeline.put_scheme(
                project_id, text, expected_revision=_revision(if_match_revision)
            )
        )

    # -- stage runs -----------------------------------------------------------

    @app.post("/projects/{project_id}/spot")
    def run_spot(
        project_id: str,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        return project_view(
            pipeline.spot(project_id, expected_revision=_revision(if_match_revision))
        )

    @app.post("/projects/{project_id}/describe")
    def run_describe(
        project_id: str,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        return project_view(
            pipeline.describe(project_id, expected_revision=_revision(if_match_revision))
        )

    @app.post("/projects/{project_id}/generate", status_code=202)
    def run_generate(
        project_id: str,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        pipeline.get(project_id)  # 404 before accepting the job
        expected = _revision(if_match_revision)
        job = runner.submit(
            "generate",
            project_id,
            lambda: pipeline.generate(project_id, expected_revision=expected),
        )
        return {"job": job.to_json()}

    @app.post("/projects/{project_id}/assess")
    def run_assess(
        project_id: str,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        return project_view(
            pipeline.assess(project_id, expected_revision=_revision(if_match_revision))
        )

    @app.post("/projects/{project_id}/arrange")
    def run_arrange(
        project_id: str,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        return project_view(
            pipeline.arrange(project_id, expected_revision=_revision(if_match_revision))
        )

    @app.post("/projects/{project_id}/render", status_code=202)
    def run_render(
        project_id: str,
        if_match_revision: str | None = Header(default=None, alias=REVISION_HEADER),
    ):
        pipeline.get(project_id)
        expected = _revision(if_match_revision)
        job = runner.submit(
            "render",
            project_id,
            lambda: pipeline.render(project_id, expected_revision=expected),
        )
        return {"job": job.to_json()}

    # -- jobs -------------------------------------------------------------------

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = runner.get(job_id)
        if job is None:
            return JSONResponse(status_code=404, content={"detail": f"unknown job {job_id!r}"})
        return job.to_json()

    # -- outputs ------------------------------------------------------------------

    @app.get("/projects/{project_id}/render/latest")
    def latest_render(project_id: str):
        project = pipeline.get(project_id)
        latest = project.latest_render()
        if latest is None:
            return JSONResponse(
                status_code=404, content={"detail": f"project {project_id!r} has no renders"}
            )
        path = pipeline.store.path(project_id) / latest[1]
        return FileResponse(path, media_type=WAV_MEDIA_TYPE, filename=path.name)

    @app.get("/projects/{project_id}/transcripts")
    def transcripts(project_id: str):
        pipeline.get(project_id)
        found = pipeline.store.read_transcripts(project_id)
        return {
            kind: [
                {
                    "agent": turn.agent,
                    "prompt": turn.prompt,
                    "response": turn.response,
                    "timestamp": turn.timestamp,
                }
                for turn in transcript.turns
            ]
            for kind, transcript in found.items()
        }

    @app.post("/projects/{project_id}/evaluate")
    def run_evaluate(project_id: str):
        import dataclasses

        row = pipeline.evaluate(project_id)
        return dataclasses.asdict(row)

    return app


__all__ = ["REVISION_HEADER", "create_app", "project_view"]
