"""Shared builders and fakes for the test suite."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hippo.core.types import (
    PreferenceProfile,
    RetrievalDecision,
    SaliencyAnnotation,
    Segment,
    TurnRecord,
    VideoMeta,
    VideoRecord,
    WatchSession,
)


def make_meta(video_id: str = "vid-1", duration_s: float = 30.0, **overrides) -> VideoMeta:
    fields = dict(
        video_id=video_id,
        title=f"Title of {video_id}",
        channel="channel-a",
        description=f"About {video_id}.",
        view_count=1234,
        published="2024-01-15",
        duration_s=duration_s,
        thumbnail_ref=f"thumbs/{video_id}.jpg",
    )
    fields.update(overrides)
    return VideoMeta(**fields)


def make_video(
    video_id: str = "vid-1",
    n_segments: int = 3,
    seg_seconds: float = 10.0,
    transcripts: list[str] | None = None,
    captions: list[str] | None = None,
) -> VideoRecord:
    segments = tuple(
        Segment(
            index=k,
            start_s=k * seg_seconds,
            end_s=(k + 1) * seg_seconds,
            caption=captions[k] if captions else f"frame {k} of {video_id}",
            transcript=transcripts[k] if transcripts else f"talk {k} in {video_id}",
            frame_ref=f"{video_id}/frame{k}",
        )
        for k in range(n_segments)
    )
    return VideoRecord(meta=make_meta(video_id, duration_s=n_segments * seg_seconds), segments=segments)


def make_profile(likes=("likes cat videos",), dislikes=(), turn=0) -> PreferenceProfile:
    return PreferenceProfile(likes=tuple(likes), dislikes=tuple(dislikes), turn=turn)


def make_session(n_turns: int = 10, n_segments: int = 3, session_id: str = "sess-1") -> WatchSession:
    turns = []
    for t in range(1, n_turns + 1):
        chosen = make_video(f"v{t:02d}", n_segments=n_segments)
        other = make_meta(f"v{t:02d}x")
        decision = (
            RetrievalDecision(mode="new_query", query=f"informative topic sub{t}")
            if t == 1
            else RetrievalDecision(mode="explore")
        )
        turns.append(
            TurnRecord(
                decision=decision,
                candidates=(chosen.meta, other),
                chosen=chosen,
                rejected=other,
                choose_reason=f"reason {t}",
                reject_reason=f"bad {t}",
                review=f"review of v{t:02d}",
                preference_after=make_profile(likes=(f"likes topic {t}",), turn=t),
            )
        )
    return WatchSession(
        session_id=session_id,
        seed_topic="topic",
        seed_subtopic="sub",
        intent="informative",
        turns=tuple(turns),
        final_preference=turns[-1].preference_after,
    )


def make_annotation(session: WatchSession, scores=None) -> SaliencyAnnotation:
    target = session.target_video
    n = len(target.segments)
    scores = tuple(scores) if scores is not None else tuple((k % 10) + 1 for k in range(n))
    return SaliencyAnnotation(
        session_id=session.session_id,
        video_id=target.meta.video_id,
        scores=scores,
        justifications=tuple(f"j{k}" for k in range(n)),
    )


class ScriptedLM:
    """Language model fake: replays scripted completions and records calls.

    ``script`` maps in call order; a callable entry receives (prompt, seed).
    The last entry repeats once the script runs out.
    """

    def __init__(self, script):
        self.script = list(script)
        self.calls: list[tuple[str, int]] = []

    def complete(self, prompt: str, seed: int) -> str:
        self.calls.append((prompt, seed))
        entry = self.script[min(len(self.calls) - 1, len(self.script) - 1)]
        return entry(prompt, seed) if callable(entry) else entry


@pytest.fixture
def scripted_lm():
    return ScriptedLM
