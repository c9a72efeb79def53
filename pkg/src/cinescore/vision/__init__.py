"""Visual analysis: frame ingestion, motion statistics, shot cuts,
and the validated attribute report used to build generation prompts."""

from .cuts import detect_shot_cuts
from .flow import FlowSeries, motion_saliency, motion_speed, optical_flow_magnitudes, read_flow_file
from .frames import FrameSequence, VisionError, load_frames, write_raw_frames
from .report import (
    VOCABULARY_CATEGORIES,
    VisualReport,
    build_description,
    load_vocabulary,
    validate_visual_report,
)

__all__ = [
    "FlowSeries",
    "FrameSequence",
    "VOCABULARY_CATEGORIES",
    "VisionError",
    "VisualReport",
    "build_description",
    "detect_shot_cuts",
    "load_frames",
    "load_vocabulary",
    "motion_saliency",
    "motion_speed",
    "optical_flow_magnitudes",
    "read_flow_file",
    "validate_visual_report",
    "write_raw_frames",
]
