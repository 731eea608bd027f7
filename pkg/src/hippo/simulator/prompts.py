"""Prompt template loading, slot rendering, and content formatters.

Templates are plain-text files with ``{placeholder}`` slots. Rendering is
total: every slot must be filled and no placeholder pattern may survive in
the rendered prompt.
"""

from __future__ import annotations

import re
from collections.abc import Mapping, Sequence
from functools import lru_cache
from importlib import resources

from ..core.types import INTENTS, PreferenceProfile, VideoMeta, VideoRecord

TEMPLATE_NAMES = ("retrieval", "selection", "watch", "preference_update", "scoring")

_SLOT_RE = re.compile(r"\{([a-z_ ]+)\}")


class TemplateError(RuntimeError):
    """A template slot was left unfilled or a fill was not provided."""


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise TemplateError(f"unknown template {name!r}; expected one of {TEMPLATE_NAMES}")
    path = resources.files(__package__) / "templates" / f"{name}.txt"
    return path.read_text(encoding="utf-8")


def render(name: str, fills: Mapping[str, str]) -> str:
    """Substitute every slot of a template; refuse partial renders."""
    template = load_template(name)
    slots = set(_SLOT_RE.findall(template))
    missing = slots - set(fills)
    if missing:
        raise TemplateError(f"template {name!r}: no fill for {sorted(missing)}")

    def _sub(match: re.Match) -> str:
        return str(fills[match.group(1)])

    rendered = _SLOT_RE.sub(_sub, template)
    leftover = _SLOT_RE.findall(rendered)
    if leftover:
        raise TemplateError(f"template {name!r}: unfilled placeholders {sorted(set(leftover))}")
    return rendered


# ---------------------------------------------------------------------------
# slot content formatters
# ---------------------------------------------------------------------------

def intent_display(intent: str) -> str:
    if intent not in INTENTS:
        raise ValueError(f"unknown intent {intent!r}")
    return intent.replace("_", " ")


def format_meta(meta: VideoMeta) -> str:
    return (
        f"{meta.title} | channel: {meta.channel} | id: {meta.video_id} | "
        f"views: {meta.view_count} | published: {meta.published} | "
        f"duration: {meta.duration_s:.0f}s"
    )


def format_video_list(metas: Sequence[VideoMeta]) -> str:
    if not metas:
        return "(none)"
    return "\n".join(f"{i}. {format_meta(m)}" for i, m in enumerate(metas, start=1))


def format_profile(profile: PreferenceProfile) -> str:
    lines = ["[Likes]"]
    lines += [f"- {b}" for b in profile.likes] or ["(none yet)"]
    lines.append("[Dislikes]")
    lines += [f"- {b}" for b in profile.dislikes] or ["(none yet)"]
    return "\n".join(lines)


def format_video_content(record: VideoRecord) -> str:
    """Render a video as ordered (frame description, transcript) pairs."""
    lines = [f"Video ID: {record.meta.video_id}", f"Title: {record.meta.title}"]
    for seg in record.segments:
        lines.append(
            f"{seg.index + 1}. (frame description: {seg.caption}, transcript: {seg.transcript})"
        )
    return "\n".join(lines)


def format_reviews(reviews: Sequence[str]) -> str:
    if not reviews:
        return "(none)"
    return "\n".join(f"{i}. {r}" for i, r in enumerate(reviews, start=1))


def format_clip_info(record: VideoRecord) -> str:
    blocks = [f"Target Video ID: {record.meta.video_id}"]
    for seg in record.segments:
        blocks.append(
            f"Clip ID: clip_{seg.index} | span: {seg.start_s:.1f}s-{seg.end_s:.1f}s\n"
            f"Frame description: {seg.caption}\n"
            f"Transcript: {seg.transcript}"
        )
    return "\n\n".join(blocks)
