"""Core domain types, the on-disk dataset format, and dataset splitting."""

from .io import (
    format_record,
    load_dataset,
    load_profile_seeds,
    parse_record,
    read_session,
    save_dataset,
    save_profile_seeds,
    write_session,
)
from .split import split_dataset
from .types import (
    DEFAULT_CANDIDATES,
    DEFAULT_TURNS,
    INTENTS,
    MAX_BULLETS,
    ParseError,
    PreferenceProfile,
    RetrievalDecision,
    SaliencyAnnotation,
    SeedProfile,
    Segment,
    SessionRecord,
    TurnRecord,
    ValidationError,
    VideoMeta,
    VideoRecord,
    WatchSession,
)

__all__ = [
    "DEFAULT_CANDIDATES",
    "DEFAULT_TURNS",
    "INTENTS",
    "MAX_BULLETS",
    "ParseError",
    "PreferenceProfile",
    "RetrievalDecision",
    "SaliencyAnnotation",
    "SeedProfile",
    "Segment",
    "SessionRecord",
    "TurnRecord",
    "ValidationError",
    "VideoMeta",
    "VideoRecord",
    "WatchSession",
    "format_record",
    "load_dataset",
    "load_profile_seeds",
    "parse_record",
    "read_session",
    "save_dataset",
    "save_profile_seeds",
    "split_dataset",
    "write_session",
]
