"""Domain types shared by the whole pipeline.

All types are immutable values after construction (frozen dataclasses with
tuple fields), so they are safe to share across threads. Invariants are
enforced in ``__post_init__`` and raise :class:`ValidationError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

INTENTS = ("amusing", "emotional", "informative", "recent_news")

# Preference bullet lists are capped so profiles cannot outgrow prompt budgets.
MAX_BULLETS = 12

# Slack allowed between the final segment boundary and the video duration,
# absorbing scene-detector rounding.
SEGMENT_TILING_SLACK_S = 0.5

# Boundary tolerance for "contiguous" segment spans.
_CONTIGUITY_EPS = 1e-6

DEFAULT_TURNS = 10
DEFAULT_CANDIDATES = 8


class ValidationError(ValueError):
    """A domain invariant was violated."""


class ParseError(ValueError):
    """A serialized record could not be decoded; message names the field."""


@dataclass(frozen=True)
class VideoMeta:
    """Metadata for one video, as a platform would display it."""

    video_id: str
    title: str
    channel: str
    description: str
    view_count: int
    published: str  # ISO-8601 date
    duration_s: float
    thumbnail_ref: str

    def __post_init__(self) -> None:
        if not self.video_id:
            raise ValidationError("video_id must be non-empty")
        if self.view_count < 0:
            raise ValidationError(f"view_count must be >= 0, got {self.view_count}")
        if not self.duration_s > 0:
            raise ValidationError(f"duration_s must be > 0, got {self.duration_s}")


@dataclass(frozen=True)
class Segment:
    """One scene-bounded span of a video."""

    index: int
    start_s: float
    end_s: float
    caption: str
    transcript: str
    frame_ref: str

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValidationError(f"segment index must be >= 0, got {self.index}")
        if not self.start_s < self.end_s:
            raise ValidationError(
                f"segment {self.index}: start_s ({self.start_s}) must be < end_s ({self.end_s})"
            )


@dataclass(frozen=True)
class VideoRecord:
    """A video's metadata plus its ordered segments."""

    meta: VideoMeta
    segments: tuple[Segment, ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValidationError(f"video {self.meta.video_id}: needs at least 1 segment")
        prev_end = 0.0
        for pos, seg in enumerate(self.segments):
            if seg.index != pos:
                raise ValidationError(
                    f"video {self.meta.video_id}: segment at position {pos} has index {seg.index}"
                )
            if abs(seg.start_s - prev_end) > _CONTIGUITY_EPS:
                raise ValidationError(
                    f"video {self.meta.video_id}: segment {pos} starts at {seg.start_s}, "
                    f"expected {prev_end} (segments must tile the video)"
                )
            prev_end = seg.end_s
        if abs(prev_end - self.meta.duration_s) > SEGMENT_TILING_SLACK_S:
            raise ValidationError(
                f"video {self.meta.video_id}: last segment ends at {prev_end}, more than "
                f"{SEGMENT_TILING_SLACK_S}s away from duration {self.meta.duration_s}"
            )


@dataclass(frozen=True)
class PreferenceProfile:
    """Evolving likes/dislikes bullet lists; ``turn`` counts updates applied."""

    likes: tuple[str, ...]
    dislikes: tuple[str, ...]
    turn: int

    def __post_init__(self) -> None:
        if self.turn < 0:
            raise ValidationError(f"preference turn must be >= 0, got {self.turn}")
        if len(self.likes) > MAX_BULLETS:
            raise ValidationError(f"likes capped at {MAX_BULLETS}, got {len(self.likes)}")
        if len(self.dislikes) > MAX_BULLETS:
            raise ValidationError(f"dislikes capped at {MAX_BULLETS}, got {len(self.dislikes)}")


@dataclass(frozen=True)
class RetrievalDecision:
    """Per-turn retrieval choice: browse related videos, or issue a new query."""

    mode: str  # "explore" | "new_query"
    query: str = ""

    def __post_init__(self) -> None:
        if self.mode not in ("explore", "new_query"):
            raise ValidationError(f"unknown retrieval mode: {self.mode!r}")
        if self.mode == "new_query" and not self.query.strip():
            raise ValidationError("new_query decisions must carry a non-empty query")
        if self.mode == "explore" and self.query:
            raise ValidationError("explore decisions carry no query text")


@dataclass(frozen=True)
class SeedProfile:
    """Initial interest seed a simulated user starts from."""

    topic: str
    subtopic: str
    intent: str

    def __post_init__(self) -> None:
        if self.intent not in INTENTS:
            raise ValidationError(f"intent must be one of {INTENTS}, got {self.intent!r}")
        if not self.topic or not self.subtopic:
            raise ValidationError("seed profile needs a non-empty topic and subtopic")


@dataclass(frozen=True)
class TurnRecord:
    """Everything that happened in one watch turn."""

    decision: RetrievalDecision
    candidates: tuple[VideoMeta, ...]
    chosen: VideoRecord
    rejected: VideoMeta | None
    choose_reason: str
    reject_reason: str
    review: str
    preference_after: PreferenceProfile
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not any(c == self.chosen.meta for c in self.candidates):
            raise ValidationError(
                f"chosen video {self.chosen.meta.video_id} is not among the turn's candidates"
            )


@dataclass(frozen=True)
class WatchSession:
    """One simulated user's ordered watch history."""

    session_id: str
    seed_topic: str
    seed_subtopic: str
    intent: str
    turns: tuple[TurnRecord, ...]
    final_preference: PreferenceProfile

    def __post_init__(self) -> None:
        if self.intent not in INTENTS:
            raise ValidationError(f"intent must be one of {INTENTS}, got {self.intent!r}")
        for pos, turn in enumerate(self.turns):
            if turn.preference_after.turn != pos + 1:
                raise ValidationError(
                    f"turn {pos + 1} carries preference turn {turn.preference_after.turn}; "
                    "preference turns must increase by exactly 1 per turn"
                )
        if self.turns and self.final_preference != self.turns[-1].preference_after:
            raise ValidationError("final_preference must equal the last turn's preference")

    def is_complete(self, expected_turns: int = DEFAULT_TURNS) -> bool:
        return len(self.turns) == expected_turns

    @property
    def target_video(self) -> VideoRecord:
        """The last watched video, used as the annotation target."""
        if not self.turns:
            raise ValidationError(f"session {self.session_id} has no turns")
        return self.turns[-1].chosen


@dataclass(frozen=True)
class SaliencyAnnotation:
    """Per-segment 1-10 relevance scores for a session's target video."""

    session_id: str
    video_id: str
    scores: tuple[int, ...]
    justifications: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if len(self.scores) != len(self.justifications):
            raise ValidationError(
                f"{len(self.scores)} scores but {len(self.justifications)} justifications"
            )
        for pos, score in enumerate(self.scores):
            if not 1 <= score <= 10:
                raise ValidationError(f"score for segment {pos} is {score}, must be in [1, 10]")


@dataclass(frozen=True)
class SessionRecord:
    """One dataset row: a complete session plus its saliency annotation.

    ``extras`` holds unknown top-level fields seen on read; they are written
    back verbatim so foreign annotations survive a rewrite.
    """

    session: WatchSession
    annotation: SaliencyAnnotation
    extras: dict = field(default_factory=dict)

    @property
    def seed_topic(self) -> str:
        return self.session.seed_topic
