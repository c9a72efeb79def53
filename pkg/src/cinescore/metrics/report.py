"""Batch evaluation reports as CSV or JSON.

The column set is fixed so reports from different runs line up; the
kl/fad/imagebind columns stay empty unless a value computed elsewhere
is supplied.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

REPORT_COLUMNS = (
    "name",
    "diversity",
    "rhythm_raw",
    "rhythm_norm",
    "rhythm_lag",
    "dynamic_dist",
    "instr_dist",
    "kl",
    "fad",
    "imagebind",
)


@dataclass(frozen=True)
class EvaluationRow:
    """One evaluated item; unmeasured columns stay None."""

    name: str
    diversity: float | None = None
    rhythm_raw: int | None = None
    rhythm_norm: float | None = None
    rhythm_lag: float | None = None
    dynamic_dist: float | None = None
    instr_dist: float | None = None
    kl: float | None = None
    fad: float | None = None
    imagebind: float | None = None


def write_report_csv(rows: Sequence[EvaluationRow], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        for row in rows:
            record = asdict(row)
            writer.writerow(["" if record[c] is None else record[c] for c in REPORT_COLUMNS])
    return path


def write_report_json(rows: Sequence[EvaluationRow], path: str | Path) -> Path:
    path = Path(path)
    payload = {
        "columns": list(REPORT_COLUMNS),
        "rows": [asdict(row) for row in rows],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_report_json(path: str | Path) -> list[EvaluationRow]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return [EvaluationRow(**row) for row in payload["rows"]]
