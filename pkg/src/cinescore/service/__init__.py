"""Project service: persistence, stage pipeline, CLI, and HTTP API.

Ties the toolkit together around an on-disk project directory whose
artifacts (spots, report, score, scheme, renders) are both pipeline
stages and human-editable files.
"""

from __future__ import annotations

from .config import ConfigError, PipelineConfig, load_config, write_config
from .project import ClipRef, Project, Stage, StageError, ServiceError
from .store import ProjectStore, StoreError
from .pipeline import BackendFailure, Pipeline, RevisionConflict
from .jobs import Job, JobRunner, JobStatus
from .transcriber import BuiltinTranscriber, transcribe_monophonic
from .fixtures import build_demo_clip

__all__ = [
    "BackendFailure",
    "BuiltinTranscriber",
    "ClipRef",
    "ConfigError",
    "Job",
    "JobRunner",
    "JobStatus",
    "Pipeline",
    "PipelineConfig",
    "Project",
    "ProjectStore",
    "RevisionConflict",
    "ServiceError",
    "Stage",
    "StageError",
    "StoreError",
    "build_demo_clip",
    "load_config",
    "transcribe_monophonic",
    "write_config",
]
