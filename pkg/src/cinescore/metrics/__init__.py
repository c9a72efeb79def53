"""Deterministic evaluation metrics over audio, chroma, and schemes."""

from .analysis import (
    ONSET_HOP,
    ONSET_MIN_GAP_SECONDS,
    ONSET_SAMPLE_RATE,
    ONSET_WINDOW,
    SEGMENT_SECONDS,
    RhythmCorrelation,
    chroma_diversity,
    chroma_similarity,
    db_envelope,
    detect_onsets,
    dynamic_variation_distance,
    instrument_distribution,
    instrumentation_distance,
    rhythm_xcorr,
)
from .report import REPORT_COLUMNS, EvaluationRow, read_report_json, write_report_csv, write_report_json
from .types import (
    DB_FLOOR,
    DEFAULT_FRAME_SECONDS,
    DEFAULT_GRID_RATE,
    DbEnvelope,
    ImpulseTrain,
    InstrumentDistribution,
    MetricError,
)

__all__ = [
    "DB_FLOOR",
    "DEFAULT_FRAME_SECONDS",
    "DEFAULT_GRID_RATE",
    "DbEnvelope",
    "EvaluationRow",
    "ImpulseTrain",
    "InstrumentDistribution",
    "MetricError",
    "ONSET_HOP",
    "ONSET_MIN_GAP_SECONDS",
    "ONSET_SAMPLE_RATE",
    "ONSET_WINDOW",
    "REPORT_COLUMNS",
    "RhythmCorrelation",
    "SEGMENT_SECONDS",
    "chroma_diversity",
    "chroma_similarity",
    "db_envelope",
    "detect_onsets",
    "dynamic_variation_distance",
    "instrument_distribution",
    "instrumentation_distance",
    "read_report_json",
    "rhythm_xcorr",
    "write_report_csv",
    "write_report_json",
]
