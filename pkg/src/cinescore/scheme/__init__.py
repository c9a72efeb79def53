"""Arrangement-and-mix scheme: the contract between arranger and renderer."""

from .io import (
    SCHEME_EXTENSION,
    SchemeParseError,
    parse_scheme,
    read_scheme_file,
    serialize_scheme,
    validate_scheme,
    write_scheme_file,
)
from .model import (
    DYNAMIC_GAIN_DB,
    SCHEME_VERSION,
    SOFTEN_GAIN_DB,
    ArrangementScheme,
    GlobalMix,
    SchemeError,
    TrackPlan,
)
from .registry import MIN_INSTRUMENTS, Instrument, load_instruments

__all__ = [
    "ArrangementScheme",
    "DYNAMIC_GAIN_DB",
    "GlobalMix",
    "Instrument",
    "MIN_INSTRUMENTS",
    "SCHEME_EXTENSION",
    "SCHEME_VERSION",
    "SOFTEN_GAIN_DB",
    "SchemeError",
    "SchemeParseError",
    "TrackPlan",
    "load_instruments",
    "parse_scheme",
    "read_scheme_file",
    "serialize_scheme",
    "validate_scheme",
    "write_scheme_file",
]
