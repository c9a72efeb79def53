"""Command-line front end: one subcommand per pipeline stage.

Every command prints a JSON summary on success.  Exit codes: 0 success,
1 usage or configuration problem, 2 stage violation, 3 backend failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import shutil
import sys
import time
from pathlib import Path

from ..notation import parse_midi
from .config import ConfigError, load_config
from .jobs import JobRunner
from .pipeline import BackendFailure, Pipeline
from .project import Project, ServiceError, StageError
from .store import ProjectStore

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STAGE = 2
EXIT_BACKEND = 3

DEFAULT_STORE = "./cinescore-projects"
DEMO_PROJECT = "demo"


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; the contract reserves 2 for
    stage violations, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", default=argparse.SUPPRESS, help="pipeline config JSON file"
    )
    common.add_argument(
        "--store",
        default=argparse.SUPPRESS,
        help=f"project store directory (default {DEFAULT_STORE}, env CINESCORE_STORE)",
    )

    parser = _Parser(prog="cinescore", description=__doc__, parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    spot = sub.add_parser("spot", parents=[common], help="propose rhythm spots (creates the project)")
    spot.add_argument("project")
    spot.add_argument("--clip", help="footage to ingest: raw frame stream or image directory")
    spot.add_argument("--demo-clip", action="store_true", help="ingest the bundled demo footage")
    spot.add_argument("--from-song", help="derive spots from this MIDI file's main melody")

    for name, help_text in (
        ("describe", "analyse footage into a visual report and prompt"),
        ("generate", "synthesize and transcribe a melody for the spots"),
        ("assess", "score the melody, regenerating while the gate asks"),
        ("arrange", "map the score onto instruments and a mix plan"),
        ("render", "render the scheme to a mastered WAV"),
    ):
        stage = sub.add_parser(name, parents=[common], help=help_text)
        stage.add_argument("project")

    evaluate = sub.add_parser("evaluate", parents=[common], help="measure the latest render")
    evaluate.add_argument("project")
    evaluate.add_argument("--against", help="reference WAV (default: the click track)")

    serve = sub.add_parser("serve", parents=[common], help="run the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--dump-openapi", help="write the OpenAPI document here and exit")

    demo = sub.add_parser("demo", parents=[common], help="run the full pipeline on bundled fixtures")
    demo.add_argument("--project", default=DEMO_PROJECT)
    return parser


def _emit(payload: dict) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _summary(project: Project) -> dict:
    return {"project": project.id, "stage": project.stage.value, "revision": project.revision}


def _cmd_spot(pipeline: Pipeline, args) -> dict:
    if not pipeline.store.exists(args.project):
        if args.demo_clip:
            from .fixtures import build_demo_clip

            project = pipeline.create(build_demo_clip(), project_id=args.project)
        elif args.clip:
            project = pipeline.create_from_path(args.clip, project_id=args.project)
        else:
            raise ServiceError(
                f"project {args.project!r} does not exist; pass --clip or --demo-clip to create it"
            )
        if args.from_song is None:
            summary = _summary(project)
            summary["onsets"] = list(project.spots.onsets)
            return summary
    song = None
    if args.from_song is not None:
        song = parse_midi(Path(args.from_song).read_bytes())
    project = pipeline.spot(args.project, from_song=song)
    summary = _summary(project)
    summary["onsets"] = list(project.spots.onsets)
    return summary


def _cmd_describe(pipeline: Pipeline, args) -> dict:
    project = pipeline.describe(args.project)
    summary = _summary(project)
    summary["description"] = project.description
    return summary


def _cmd_generate(pipeline: Pipeline, args) -> dict:
    project = pipeline.generate(args.project)
    summary = _summary(project)
    summary["notes"] = sum(len(track.notes) for track in project.melody.tracks)
    return summary


def _cmd_assess(pipeline: Pipeline, args) -> dict:
    project = pipeline.assess(args.project)
    summary = _summary(project)
    summary["total"] = project.scorecard.total
    summary["passed"] = project.stage.value != "Generated"
    return summary


def _cmd_arrange(pipeline: Pipeline, args) -> dict:
    project = pipeline.arrange(args.project)
    summary = _summary(project)
    summary["instruments"] = [track.instrument for track in project.scheme.tracks]
    return summary


def _cmd_render(pipeline: Pipeline, args) -> dict:
    project = pipeline.render(args.project)
    revision, relpath = project.latest_render()
    summary = _summary(project)
    summary["wav"] = str(pipeline.store.path(project.id) / relpath)
    summary["render_revision"] = revision
    return summary


def _cmd_evaluate(pipeline: Pipeline, args) -> dict:
    from ..metrics import write_report_csv, write_report_json

    row = pipeline.evaluate(args.project, against=args.against)
    directory = pipeline.store.path(args.project)
    json_path = write_report_json([row], directory / "evaluation.json")
    csv_path = write_report_csv([row], directory / "evaluation.csv")
    summary = dataclasses.asdict(row)
    summary["report_json"] = str(json_path)
    summary["report_csv"] = str(csv_path)
    return summary


def _cmd_serve(pipeline: Pipeline, args) -> dict | None:
    from .app import create_app

    app = create_app(pipeline, JobRunner())
    if args.dump_openapi:
        path = Path(args.dump_openapi)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(app.openapi(), indent=2, sort_keys=True) + "\n")
        return {"openapi": str(path)}
    import uvicorn

    uvicorn.run(app, host=args.host, port=args.port)
    return None


def _cmd_demo(pipeline: Pipeline, args) -> dict:
    from .fixtures import build_demo_clip

    started = time.time()
    target = pipeline.store.path(args.project)
    if target.exists():
        shutil.rmtree(target)
    pipeline.create(build_demo_clip(), project_id=args.project)
    pipeline.describe(args.project)
    pipeline.generate(args.project)
    pipeline.assess(args.project)
    pipeline.arrange(args.project)
    project = pipeline.render(args.project)
    row = pipeline.evaluate(args.project)
    summary = _summary(project)
    summary.update(
        {
            "wav": str(pipeline.store.path(project.id) / project.latest_render()[1]),
            "rhythm_norm": row.rhythm_norm,
            "rhythm_lag": row.rhythm_lag,
            "elapsed_seconds": round(time.time() - started, 3),
        }
    )
    return summary


_COMMANDS = {
    "spot": _cmd_spot,
    "describe": _cmd_describe,
    "generate": _cmd_generate,
    "assess": _cmd_assess,
    "arrange": _cmd_arrange,
    "render": _cmd_render,
    "evaluate": _cmd_evaluate,
    "serve": _cmd_serve,
    "demo": _cmd_demo,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    store_dir = getattr(args, "store", None) or os.environ.get("CINESCORE_STORE", DEFAULT_STORE)
    try:
        config = load_config(getattr(args, "config", None))
        pipeline = Pipeline(ProjectStore(store_dir), config)
        summary = _COMMANDS[args.command](pipeline, args)
    except StageError as exc:
        print(f"cinescore: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except BackendFailure as exc:
        print(f"cinescore: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except (ConfigError, ServiceError, OSError) as exc:
        print(f"cinescore: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if summary is not None:
        _emit(summary)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
