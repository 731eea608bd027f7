"""Line-delimited dataset format: one JSON object per (session, annotation) pair.

Field names mirror the domain types exactly. Unknown top-level fields are
ignored on read but carried in ``SessionRecord.extras`` and written back
verbatim, so rewrites are lossless for foreign annotations.
"""

from __future__ import annotations

import json
from collections.abc import Iterable
from pathlib import Path
from typing import Any, BinaryIO

from .types import (
    DEFAULT_TURNS,
    INTENTS,
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

_KNOWN_TOP_KEYS = ("session", "annotation")


# ---------------------------------------------------------------------------
# dict encoders
# ---------------------------------------------------------------------------

def meta_to_dict(meta: VideoMeta) -> dict:
    return {
        "video_id": meta.video_id,
        "title": meta.title,
        "channel": meta.channel,
        "description": meta.description,
        "view_count": meta.view_count,
        "published": meta.published,
        "duration_s": meta.duration_s,
        "thumbnail_ref": meta.thumbnail_ref,
    }


def segment_to_dict(seg: Segment) -> dict:
    return {
        "index": seg.index,
        "start_s": seg.start_s,
        "end_s": seg.end_s,
        "caption": seg.caption,
        "transcript": seg.transcript,
        "frame_ref": seg.frame_ref,
    }


def record_to_dict(record: VideoRecord) -> dict:
    return {
        "meta": meta_to_dict(record.meta),
        "segments": [segment_to_dict(s) for s in record.segments],
    }


def profile_to_dict(profile: PreferenceProfile) -> dict:
    return {"likes": list(profile.likes), "dislikes": list(profile.dislikes), "turn": profile.turn}


def decision_to_dict(decision: RetrievalDecision) -> dict:
    out: dict[str, Any] = {"mode": decision.mode}
    if decision.mode == "new_query":
        out["query"] = decision.query
    return out


def turn_to_dict(turn: TurnRecord) -> dict:
    return {
        "decision": decision_to_dict(turn.decision),
        "candidates": [meta_to_dict(m) for m in turn.candidates],
        "chosen": record_to_dict(turn.chosen),
        "rejected": meta_to_dict(turn.rejected) if turn.rejected is not None else None,
        "choose_reason": turn.choose_reason,
        "reject_reason": turn.reject_reason,
        "review": turn.review,
        "preference_after": profile_to_dict(turn.preference_after),
        "warnings": list(turn.warnings),
    }


def session_to_dict(session: WatchSession) -> dict:
    return {
        "session_id": session.session_id,
        "seed_topic": session.seed_topic,
        "seed_subtopic": session.seed_subtopic,
        "intent": session.intent,
        "turns": [turn_to_dict(t) for t in session.turns],
        "final_preference": profile_to_dict(session.final_preference),
    }


def annotation_to_dict(annotation: SaliencyAnnotation) -> dict:
    return {
        "session_id": annotation.session_id,
        "video_id": annotation.video_id,
        "scores": list(annotation.scores),
        "justifications": list(annotation.justifications),
        "warnings": list(annotation.warnings),
    }


# ---------------------------------------------------------------------------
# dict decoders (ParseError messages name the offending field)
# ---------------------------------------------------------------------------

def _get(obj: dict, key: str, path: str) -> Any:
    if not isinstance(obj, dict):
        raise ParseError(f"{path}: expected an object")
    if key not in obj:
        raise ParseError(f"{path}.{key}: missing field" if path else f"{key}: missing field")
    return obj[key]


def _text(obj: dict, key: str, path: str) -> str:
    value = _get(obj, key, path)
    if not isinstance(value, str):
        raise ParseError(f"{path}.{key}: expected text, got {type(value).__name__}")
    return value


def _number(obj: dict, key: str, path: str) -> float:
    value = _get(obj, key, path)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{path}.{key}: expected a number, got {type(value).__name__}")
    return float(value)


def _integer(obj: dict, key: str, path: str) -> int:
    value = _get(obj, key, path)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{path}.{key}: expected an integer, got {type(value).__name__}")
    return value


def _items(obj: dict, key: str, path: str) -> list:
    value = _get(obj, key, path)
    if not isinstance(value, list):
        raise ParseError(f"{path}.{key}: expected a list, got {type(value).__name__}")
    return value


def meta_from_dict(d: dict, path: str = "meta") -> VideoMeta:
    try:
        return VideoMeta(
            video_id=_text(d, "video_id", path),
            title=_text(d, "title", path),
            channel=_text(d, "channel", path),
            description=_text(d, "description", path),
            view_count=_integer(d, "view_count", path),
            published=_text(d, "published", path),
            duration_s=_number(d, "duration_s", path),
            thumbnail_ref=_text(d, "thumbnail_ref", path),
        )
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def segment_from_dict(d: dict, path: str) -> Segment:
    try:
        return Segment(
            index=_integer(d, "index", path),
            start_s=_number(d, "start_s", path),
            end_s=_number(d, "end_s", path),
            caption=_text(d, "caption", path),
            transcript=_text(d, "transcript", path),
            frame_ref=_text(d, "frame_ref", path),
        )
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def record_from_dict(d: dict, path: str = "video") -> VideoRecord:
    segments = [
        segment_from_dict(s, f"{path}.segments[{i}]")
        for i, s in enumerate(_items(d, "segments", path))
    ]
    try:
        return VideoRecord(
            meta=meta_from_dict(_get(d, "meta", path), f"{path}.meta"),
            segments=tuple(segments),
        )
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def profile_from_dict(d: dict, path: str) -> PreferenceProfile:
    likes = _items(d, "likes", path)
    dislikes = _items(d, "dislikes", path)
    if not all(isinstance(b, str) for b in likes + dislikes):
        raise ParseError(f"{path}: preference bullets must be text")
    try:
        return PreferenceProfile(
            likes=tuple(likes), dislikes=tuple(dislikes), turn=_integer(d, "turn", path)
        )
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def decision_from_dict(d: dict, path: str) -> RetrievalDecision:
    mode = _text(d, "mode", path)
    try:
        if mode == "new_query":
            return RetrievalDecision(mode="new_query", query=_text(d, "query", path))
        return RetrievalDecision(mode=mode)
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _warnings_from_dict(d: dict, path: str) -> tuple[str, ...]:
    # Optional field: absent means no warnings.
    if "warnings" not in d:
        return ()
    value = _items(d, "warnings", path)
    if not all(isinstance(w, str) for w in value):
        raise ParseError(f"{path}.warnings: expected a list of text entries")
    return tuple(value)


def turn_from_dict(d: dict, path: str) -> TurnRecord:
    rejected_raw = _get(d, "rejected", path)
    rejected = None if rejected_raw is None else meta_from_dict(rejected_raw, f"{path}.rejected")
    candidates = tuple(
        meta_from_dict(m, f"{path}.candidates[{i}]")
        for i, m in enumerate(_items(d, "candidates", path))
    )
    try:
        return TurnRecord(
            decision=decision_from_dict(_get(d, "decision", path), f"{path}.decision"),
            candidates=candidates,
            chosen=record_from_dict(_get(d, "chosen", path), f"{path}.chosen"),
            rejected=rejected,
            choose_reason=_text(d, "choose_reason", path),
            reject_reason=_text(d, "reject_reason", path),
            review=_text(d, "review", path),
            preference_after=profile_from_dict(
                _get(d, "preference_after", path), f"{path}.preference_after"
            ),
            warnings=_warnings_from_dict(d, path),
        )
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def session_from_dict(d: dict, path: str = "session") -> WatchSession:
    intent = _text(d, "intent", path)
    if intent not in INTENTS:
        raise ParseError(f"{path}.intent: unknown intent {intent!r}")
    turns = tuple(
        turn_from_dict(t, f"{path}.turns[{i}]") for i, t in enumerate(_items(d, "turns", path))
    )
    try:
        return WatchSession(
            session_id=_text(d, "session_id", path),
            seed_topic=_text(d, "seed_topic", path),
            seed_subtopic=_text(d, "seed_subtopic", path),
            intent=intent,
            turns=turns,
            final_preference=profile_from_dict(
                _get(d, "final_preference", path), f"{path}.final_preference"
            ),
        )
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def annotation_from_dict(d: dict, path: str = "annotation") -> SaliencyAnnotation:
    scores = _items(d, "scores", path)
    justifications = _items(d, "justifications", path)
    if not all(isinstance(s, int) and not isinstance(s, bool) for s in scores):
        raise ParseError(f"{path}.scores: expected integers")
    if not all(isinstance(j, str) for j in justifications):
        raise ParseError(f"{path}.justifications: expected text entries")
    try:
        return SaliencyAnnotation(
            session_id=_text(d, "session_id", path),
            video_id=_text(d, "video_id", path),
            scores=tuple(scores),
            justifications=tuple(justifications),
            warnings=_warnings_from_dict(d, path),
        )
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# line-level read/write
# ---------------------------------------------------------------------------

def _validate_pair(
    session: WatchSession, annotation: SaliencyAnnotation, expected_turns: int
) -> None:
    if not session.is_complete(expected_turns):
        raise ValidationError(
            f"session {session.session_id} has {len(session.turns)} turns, "
            f"expected {expected_turns}"
        )
    target = session.target_video
    if annotation.session_id != session.session_id:
        raise ValidationError(
            f"annotation session_id {annotation.session_id!r} does not match "
            f"session {session.session_id!r}"
        )
    if annotation.video_id != target.meta.video_id:
        raise ValidationError(
            f"annotation video_id {annotation.video_id!r} does not match "
            f"target video {target.meta.video_id!r}"
        )
    if len(annotation.scores) != len(target.segments):
        raise ValidationError(
            f"annotation has {len(annotation.scores)} scores but the target video "
            f"has {len(target.segments)} segments"
        )


def format_record(record: SessionRecord, expected_turns: int = DEFAULT_TURNS) -> str:
    """Encode one record as a single JSON line (no trailing newline)."""
    _validate_pair(record.session, record.annotation, expected_turns)
    payload = dict(record.extras)
    payload["session"] = session_to_dict(record.session)
    payload["annotation"] = annotation_to_dict(record.annotation)
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def parse_record(line: str) -> SessionRecord:
    """Decode one JSON line back into a record; inverse of ``format_record``."""
    if not line.strip():
        raise ParseError("empty line")
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ParseError("record line must be a JSON object")
    session = session_from_dict(_get(payload, "session", ""))
    annotation = annotation_from_dict(_get(payload, "annotation", ""))
    extras = {k: v for k, v in payload.items() if k not in _KNOWN_TOP_KEYS}
    return SessionRecord(session=session, annotation=annotation, extras=extras)


def write_session(
    session: WatchSession,
    annotation: SaliencyAnnotation,
    sink: BinaryIO,
    expected_turns: int = DEFAULT_TURNS,
) -> None:
    """Emit exactly one record line for (session, annotation) to a byte sink."""
    line = format_record(SessionRecord(session, annotation), expected_turns)
    sink.write(line.encode("utf-8") + b"\n")


def read_session(source: BinaryIO) -> tuple[WatchSession, SaliencyAnnotation]:
    """Read one record line from a byte source; ``read(write(x)) == x``."""
    line = source.readline().decode("utf-8")
    record = parse_record(line)
    return record.session, record.annotation


def save_dataset(
    records: Iterable[SessionRecord], path: str | Path, expected_turns: int = DEFAULT_TURNS
) -> int:
    """Write records to a ``.jsonl`` file; returns the number written."""
    count = 0
    with open(path, "wb") as sink:
        for record in records:
            sink.write(format_record(record, expected_turns).encode("utf-8") + b"\n")
            count += 1
    return count


def load_dataset(path: str | Path) -> list[SessionRecord]:
    records = []
    with open(path, "rb") as source:
        for lineno, raw in enumerate(source, start=1):
            line = raw.decode("utf-8")
            if not line.strip():
                continue
            try:
                records.append(parse_record(line))
            except ParseError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return records


def load_profile_seeds(path: str | Path) -> list[SeedProfile]:
    """Load a profile-seed file: a JSON list of {topic, subtopic, intent}."""
    with open(path, "rb") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise ParseError(f"{path}: expected a JSON list of profile objects")
    seeds = []
    for i, entry in enumerate(data):
        path_i = f"seeds[{i}]"
        intent = _text(entry, "intent", path_i)
        try:
            seeds.append(
                SeedProfile(
                    topic=_text(entry, "topic", path_i),
                    subtopic=_text(entry, "subtopic", path_i),
                    intent=intent,
                )
            )
        except ValidationError as exc:
            raise ParseError(f"{path_i}: {exc}") from exc
    return seeds


def save_profile_seeds(seeds: Iterable[SeedProfile], path: str | Path) -> None:
    data = [{"topic": s.topic, "subtopic": s.subtopic, "intent": s.intent} for s in seeds]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
