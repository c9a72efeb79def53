"""Background execution for the slow pipeline stages.

Generate and render can take a while, so the HTTP layer runs them as
jobs: submit returns immediately with a job id, the worker thread takes
the project's writer lock, and callers poll for the outcome.  Reads
never touch the job machinery.
"""

from __future__ import annotations

import enum
import threading
import uuid
from dataclasses import dataclass, field, replace
from typing import Callable

from .project import Project


class JobStatus(str, enum.Enum):
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


@dataclass(frozen=True)
class Job:
    """One submitted operation and, once finished, its outcome."""

    id: str
    kind: str
    project_id: str
    status: JobStatus = JobStatus.RUNNING
    error: str = ""
    revision: int | None = None
    exception: BaseException | None = field(default=None, compare=False, repr=False)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "project_id": self.project_id,
            "status": self.status.value,
            "error": self.error,
            "revision": self.revision,
        }


class JobRunner:
    """Thread-per-job registry with completion events for polling."""

    def __init__(self):
        self._jobs: dict[str, Job] = {}
        self._events: dict[str, threading.Event] = {}
        self._guard = threading.Lock()

    def submit(self, kind: str, project_id: str, work: Callable[[], Project]) -> Job:
        job = Job(id=uuid.uuid4().hex[:12], kind=kind, project_id=project_id)
        done = threading.Event()
        with self._guard:
            self._jobs[job.id] = job
            self._events[job.id] = done

        def run():
            try:
                project = work()
                outcome = replace(job, status=JobStatus.DONE, revision=project.revision)
            except BaseException as exc:  # noqa: BLE001 - reported to the poller
                outcome = replace(job, status=JobStatus.FAILED, error=str(exc), exception=exc)
            with self._guard:
                self._jobs[job.id] = outcome
            done.set()

        threading.Thread(target=run, name=f"job-{kind}-{job.id}", daemon=True).start()
        return job

    def get(self, job_id: str) -> Job | None:
        with self._guard:
            return self._jobs.get(job_id)

    def wait(self, job_id: str, timeout: float | None = None) -> Job:
        """Block until the job finishes; raises its exception on failure."""
        with self._guard:
            event = self._events.get(job_id)
        if event is None:
            raise KeyError(f"unknown job {job_id!r}")
        if not event.wait(timeout):
            raise TimeoutError(f"job {job_id} still running after {timeout}s")
        job = self.get(job_id)
        if job.status is JobStatus.FAILED and job.exception is not None:
            raise job.exception
        return job


__all__ = ["Job", "JobRunner", "JobStatus"]
