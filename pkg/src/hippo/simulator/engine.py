"""LLM-driven user simulation: retrieval decisions, engagement, preference
updates, and final saliency annotation.

Every operation that parses model output follows one recovery policy: retry
once with the same prompt and seed+1, then apply a stated fallback and record
a warning. Warnings end up on the turn record (or annotation) so degraded
output stays auditable.
"""

from __future__ import annotations

import re
from collections.abc import Sequence
from dataclasses import dataclass

from ..core.types import (
    DEFAULT_CANDIDATES,
    DEFAULT_TURNS,
    MAX_BULLETS,
    PreferenceProfile,
    RetrievalDecision,
    SaliencyAnnotation,
    SeedProfile,
    TurnRecord,
    VideoMeta,
    VideoRecord,
    WatchSession,
)
from ..seeding import derive_seed
from .ports import LanguageModelPort, VideoCatalogPort
from .prompts import (
    format_clip_info,
    format_meta,
    format_profile,
    format_reviews,
    format_video_content,
    format_video_list,
    intent_display,
    render,
)

NO_REVIEW_PLACEHOLDER = "(no review)"


class SimulatorError(RuntimeError):
    """Base class for unrecoverable simulation failures."""


class RetrievalError(SimulatorError):
    """The catalog produced no usable candidates, even after the fallback query."""


class MostWantedUnavailable(SimulatorError):
    """The selector declined every candidate (or answered out of range)."""


class AnnotationError(SimulatorError):
    """The annotator failed to score some segment after a retry."""


class SimulationError(SimulatorError):
    """A session aborted mid-run; names the failed turn."""

    def __init__(self, message: str, turn: int, completed_turns: int):
        super().__init__(message)
        self.turn = turn
        self.completed_turns = completed_turns


@dataclass(frozen=True)
class SessionParams:
    l: int = DEFAULT_CANDIDATES  # candidates per turn
    m: int = DEFAULT_TURNS  # watched videos per session

    def __post_init__(self) -> None:
        if self.l < 1 or self.m < 1:
            raise ValueError(f"params must be >= 1, got l={self.l}, m={self.m}")


@dataclass(frozen=True)
class Selection:
    most: int  # 0-based candidate index
    least: int | None
    choose_reason: str
    reject_reason: str


def _warn(sink: list[str] | None, message: str) -> None:
    if sink is not None:
        sink.append(message)


def _bracketed(completion: str, label: str) -> str | None:
    """Value of a ``Label: [...]`` line; falls back to rest-of-line."""
    match = re.search(rf"{label}\s*:\s*\[([^\]]*)\]", completion, re.IGNORECASE)
    if match:
        return match.group(1).strip()
    match = re.search(rf"{label}\s*:\s*(.+)", completion, re.IGNORECASE)
    return match.group(1).strip() if match else None


def initial_preference(seed_profile: SeedProfile) -> PreferenceProfile:
    like = (
        f"I like {intent_display(seed_profile.intent)} on {seed_profile.topic}, "
        f"especially about {seed_profile.subtopic}."
    )
    return PreferenceProfile(likes=(like,), dislikes=(), turn=0)


def bootstrap_query(seed_profile: SeedProfile) -> str:
    """Turn-1 search query formed from the seed profile."""
    return (
        f"{intent_display(seed_profile.intent)} {seed_profile.topic} {seed_profile.subtopic}"
    )


# ---------------------------------------------------------------------------
# per-turn operations
# ---------------------------------------------------------------------------

def decide_retrieval(
    history: Sequence[VideoMeta],
    preference: PreferenceProfile,
    related_preview: Sequence[VideoMeta],
    lm: LanguageModelPort,
    seed: int,
    intent: str,
    current_query: str,
    warnings: list[str] | None = None,
) -> RetrievalDecision:
    """Ask whether to keep exploring related videos or issue a new query."""
    prompt = render(
        "retrieval",
        {
            "intent": intent_display(intent),
            "search query": current_query,
            "watch history": format_video_list(history),
            "preference": format_profile(preference),
            "related videos": format_video_list(related_preview),
        },
    )
    for attempt, attempt_seed in enumerate((seed, seed + 1)):
        completion = lm.complete(prompt, attempt_seed)
        decision_text = _bracketed(completion, "Decision")
        if decision_text:
            lowered = decision_text.lower()
            if "explore" in lowered:
                return RetrievalDecision(mode="explore")
            if "search" in lowered or "new query" in lowered:
                query = _bracketed(completion, "New query")
                if query:
                    return RetrievalDecision(mode="new_query", query=query)
        if attempt == 0:
            _warn(warnings, "retrieval decision unparseable; retrying")
    _warn(warnings, "retrieval decision unparseable after retry; defaulting to explore")
    return RetrievalDecision(mode="explore")


def retrieve_candidates(
    decision: RetrievalDecision,
    last_video: VideoMeta | None,
    catalog: VideoCatalogPort,
    l: int,
    watched_ids: Sequence[str] = (),
    seed_topic: str = "",
    seed_subtopic: str = "",
    warnings: list[str] | None = None,
) -> list[VideoMeta]:
    """Fetch candidate metadata for a decision, dropping already-watched ids.

    An empty pool forces one fallback search on "{seed_topic} {seed_subtopic}";
    if that also comes back empty the session cannot continue.
    """
    if decision.mode == "explore":
        if last_video is None:
            raise ValueError("explore decisions need a previously watched video")
        pool = catalog.related(last_video.video_id, l)
    else:
        pool = catalog.search(decision.query, l)

    watched = set(watched_ids)
    candidates = [meta for meta in pool if meta.video_id not in watched]
    if candidates:
        return candidates

    fallback = f"{seed_topic} {seed_subtopic}".strip()
    if fallback:
        _warn(warnings, f"no candidates after dedup; falling back to query {fallback!r}")
        pool = catalog.search(fallback, l)
        candidates = [meta for meta in pool if meta.video_id not in watched]
        if candidates:
            return candidates
    raise RetrievalError(
        f"no unwatched candidates for {decision.mode} (query {decision.query!r}) "
        "and the fallback query found none"
    )


def select_videos(
    candidates: Sequence[VideoMeta],
    recent3: Sequence[VideoMeta],
    preference: PreferenceProfile,
    query: str,
    lm: LanguageModelPort,
    seed: int,
    warnings: list[str] | None = None,
) -> Selection:
    """Pick the most and least wanted candidates (1-based answers from the LM).

    Raises MostWantedUnavailable when the model answers [None] or out of range
    for the most-wanted slot; the caller may regenerate the query once.
    """
    if not candidates:
        raise ValueError("cannot select from an empty candidate list")
    if len(recent3) > 3:
        raise ValueError("recent3 holds at most the 3 most recent videos")
    prompt = render(
        "selection",
        {
            "history": format_video_list(recent3),
            "preference": format_profile(preference),
            "query": query,
            "candidate": format_video_list(candidates),
        },
    )

    completion = lm.complete(prompt, seed)
    most_text = _bracketed(completion, "Most Wanted")
    if most_text is None:
        _warn(warnings, "selection unparseable; retrying")
        completion = lm.complete(prompt, seed + 1)
        most_text = _bracketed(completion, "Most Wanted")
        if most_text is None:
            raise MostWantedUnavailable("selection completion had no 'Most Wanted' answer")

    if most_text.lower() == "none":
        raise MostWantedUnavailable("no appropriate most-wanted candidate")
    try:
        most = int(most_text) - 1
    except ValueError:
        raise MostWantedUnavailable(f"most-wanted answer {most_text!r} is not an index")
    if not 0 <= most < len(candidates):
        raise MostWantedUnavailable(
            f"most-wanted index {most + 1} out of range for {len(candidates)} candidates"
        )

    least: int | None = None
    least_text = _bracketed(completion, "Least Wanted")
    if least_text is not None and least_text.lower() != "none":
        try:
            parsed = int(least_text) - 1
        except ValueError:
            parsed = None
        if parsed is not None and 0 <= parsed < len(candidates) and parsed != most:
            least = parsed
        else:
            _warn(warnings, f"least-wanted answer {least_text!r} unusable; recording none")

    explanations = re.findall(r"Explanation\s*:\s*\[([^\]]*)\]", completion, re.IGNORECASE)
    choose_reason = explanations[0].strip() if explanations else ""
    reject_reason = explanations[1].strip() if len(explanations) > 1 and least is not None else ""
    if least is None and least_text is not None and least_text.lower() == "none":
        _warn(warnings, "least-wanted unavailable; empty reject reason recorded")
    return Selection(most=most, least=least, choose_reason=choose_reason, reject_reason=reject_reason)


def watch_video(
    video: VideoRecord,
    preference: PreferenceProfile,
    lm: LanguageModelPort,
    seed: int,
    warnings: list[str] | None = None,
) -> str:
    """Watch a video and return the model's review verbatim."""
    if not any(s.caption or s.transcript for s in video.segments):
        raise ValueError(
            f"video {video.meta.video_id} has no caption or transcript text to watch"
        )
    prompt = render(
        "watch",
        {"preference": format_profile(preference), "video": format_video_content(video)},
    )
    for attempt, attempt_seed in enumerate((seed, seed + 1)):
        completion = lm.complete(prompt, attempt_seed).strip()
        if completion:
            return completion
        if attempt == 0:
            _warn(warnings, "empty review; retrying")
    _warn(warnings, "empty review after retry; placeholder recorded")
    return NO_REVIEW_PLACEHOLDER


_BULLET_RE = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+(.*\S)\s*$")


def _parse_bullet_sections(completion: str) -> tuple[list[str], list[str]]:
    likes: list[str] = []
    dislikes: list[str] = []
    target: list[str] | None = None
    for line in completion.splitlines():
        # Bullets first: a bullet mentioning "dislike" mid-text is an item,
        # not a section header.
        match = _BULLET_RE.match(line)
        if match:
            if target is not None:
                target.append(match.group(1))
            continue
        header = line.strip().lower()
        if "dislike" in header or "dis-preference" in header:
            target = dislikes
        elif "like" in header or "preference" in header:
            target = likes
    return likes, dislikes


def update_preference(
    preference: PreferenceProfile,
    reviews: Sequence[str],
    choose_reason: str,
    reject_reason: str,
    lm: LanguageModelPort,
    seed: int,
    chosen: VideoMeta | None = None,
    rejected: VideoMeta | None = None,
    warnings: list[str] | None = None,
) -> PreferenceProfile:
    """Re-derive the likes/dislikes profile after a watch turn.

    The completion's bullet sections replace the profile (the prompt asks the
    model to re-define it, carrying forward what still applies). Lists longer
    than the cap keep their most recent entries. An unparseable completion
    carries the previous bullets forward unchanged.
    """
    prompt = render(
        "preference_update",
        {
            "preference": format_profile(preference),
            "reviews": format_reviews(reviews),
            "selected video": format_meta(chosen) if chosen else "(none)",
            "selected reason": choose_reason or "(none)",
            "least wanted video": format_meta(rejected) if rejected else "(none)",
            "least wanted reason": reject_reason or "(none)",
        },
    )
    likes: list[str] = []
    dislikes: list[str] = []
    for attempt, attempt_seed in enumerate((seed, seed + 1)):
        completion = lm.complete(prompt, attempt_seed)
        likes, dislikes = _parse_bullet_sections(completion)
        if likes or dislikes:
            break
        if attempt == 0:
            _warn(warnings, "preference update had no bullets; retrying")
    if not likes and not dislikes:
        _warn(warnings, "preference update unparseable; carrying profile forward")
        likes, dislikes = list(preference.likes), list(preference.dislikes)

    if len(likes) > MAX_BULLETS:
        _warn(warnings, f"likes over cap; evicting {len(likes) - MAX_BULLETS} oldest")
        likes = likes[-MAX_BULLETS:]
    if len(dislikes) > MAX_BULLETS:
        _warn(warnings, f"dislikes over cap; evicting {len(dislikes) - MAX_BULLETS} oldest")
        dislikes = dislikes[-MAX_BULLETS:]
    return PreferenceProfile(
        likes=tuple(likes), dislikes=tuple(dislikes), turn=preference.turn + 1
    )


# ---------------------------------------------------------------------------
# whole-session loop
# ---------------------------------------------------------------------------

def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def run_session(
    seed_profile: SeedProfile,
    lm: LanguageModelPort,
    catalog: VideoCatalogPort,
    params: SessionParams | None = None,
    seed: int = 0,
    session_id: str | None = None,
) -> WatchSession:
    """Simulate one complete watch session of ``params.m`` turns.

    Turn 1 always searches with the bootstrap query built from the seed
    profile; later turns let the model choose between exploring related videos
    and issuing a new query. Identical inputs and seed produce an identical
    session. An unrecoverable turn aborts with a SimulationError naming the
    failed turn and how many turns completed.
    """
    params = params or SessionParams()
    if session_id is None:
        session_id = _slug(
            f"{seed_profile.intent}-{seed_profile.topic}-{seed_profile.subtopic}-s{seed}"
        )

    preference = initial_preference(seed_profile)
    turns: list[TurnRecord] = []
    history_metas: list[VideoMeta] = []
    watched_ids: list[str] = []
    reviews: list[str] = []
    current_query = bootstrap_query(seed_profile)

    for turn_no in range(1, params.m + 1):
        try:
            turns.append(
                _run_turn(
                    turn_no,
                    seed_profile,
                    lm,
                    catalog,
                    params,
                    seed,
                    preference,
                    history_metas,
                    watched_ids,
                    reviews,
                    current_query,
                )
            )
        except (SimulatorError, ValueError, KeyError) as exc:
            raise SimulationError(
                f"session {session_id} aborted at turn {turn_no} "
                f"({len(turns)} turns completed): {exc}",
                turn=turn_no,
                completed_turns=len(turns),
            ) from exc
        latest = turns[-1]
        preference = latest.preference_after
        history_metas.append(latest.chosen.meta)
        watched_ids.append(latest.chosen.meta.video_id)
        reviews.append(latest.review)
        if latest.decision.mode == "new_query":
            current_query = latest.decision.query

    return WatchSession(
        session_id=session_id,
        seed_topic=seed_profile.topic,
        seed_subtopic=seed_profile.subtopic,
        intent=seed_profile.intent,
        turns=tuple(turns),
        final_preference=preference,
    )


def _run_turn(
    turn_no: int,
    seed_profile: SeedProfile,
    lm: LanguageModelPort,
    catalog: VideoCatalogPort,
    params: SessionParams,
    seed: int,
    preference: PreferenceProfile,
    history_metas: list[VideoMeta],
    watched_ids: list[str],
    reviews: list[str],
    current_query: str,
) -> TurnRecord:
    turn_warnings: list[str] = []

    def turn_seed(op: str) -> int:
        return derive_seed(seed, "turn", str(turn_no), op)

    if turn_no == 1:
        decision = RetrievalDecision(mode="new_query", query=bootstrap_query(seed_profile))
    else:
        last_meta = history_metas[-1]
        related_preview = catalog.related(last_meta.video_id, params.l)
        decision = decide_retrieval(
            history_metas,
            preference,
            related_preview,
            lm,
            turn_seed("decide"),
            intent=seed_profile.intent,
            current_query=current_query,
            warnings=turn_warnings,
        )
    query = decision.query if decision.mode == "new_query" else current_query

    last_meta = history_metas[-1] if history_metas else None
    candidates = retrieve_candidates(
        decision,
        last_meta,
        catalog,
        params.l,
        watched_ids=watched_ids,
        seed_topic=seed_profile.topic,
        seed_subtopic=seed_profile.subtopic,
        warnings=turn_warnings,
    )

    try:
        selection = select_videos(
            candidates,
            history_metas[-3:],
            preference,
            query,
            lm,
            turn_seed("select"),
            warnings=turn_warnings,
        )
    except MostWantedUnavailable as exc:
        # One regeneration: fall back to the bootstrap query and try again.
        turn_warnings.append(f"most-wanted unavailable ({exc}); regenerating query")
        decision = RetrievalDecision(mode="new_query", query=bootstrap_query(seed_profile))
        query = decision.query
        candidates = retrieve_candidates(
            decision,
            last_meta,
            catalog,
            params.l,
            watched_ids=watched_ids,
            seed_topic=seed_profile.topic,
            seed_subtopic=seed_profile.subtopic,
            warnings=turn_warnings,
        )
        selection = select_videos(
            candidates,
            history_metas[-3:],
            preference,
            query,
            lm,
            turn_seed("select-retry"),
            warnings=turn_warnings,
        )

    chosen = catalog.fetch(candidates[selection.most].video_id)
    rejected = candidates[selection.least] if selection.least is not None else None

    review = watch_video(chosen, preference, lm, turn_seed("watch"), warnings=turn_warnings)
    updated = update_preference(
        preference,
        [*reviews, review],
        selection.choose_reason,
        selection.reject_reason,
        lm,
        turn_seed("update"),
        chosen=chosen.meta,
        rejected=rejected,
        warnings=turn_warnings,
    )

    return TurnRecord(
        decision=decision,
        candidates=tuple(candidates),
        chosen=chosen,
        rejected=rejected,
        choose_reason=selection.choose_reason,
        reject_reason=selection.reject_reason,
        review=review,
        preference_after=updated,
        warnings=tuple(turn_warnings),
    )


# ---------------------------------------------------------------------------
# saliency annotation
# ---------------------------------------------------------------------------

_CLIP_LINE_RE = re.compile(
    r"Clip\s*ID\s*:\s*clip[_\s]*(\d+)\s*,\s*Score\s*:\s*(-?\d+)"
    r"(?:\s*,\s*Justification\s*:\s*\"?([^\"\n]*)\"?)?",
    re.IGNORECASE,
)


def _parse_clip_scores(completion: str) -> dict[int, tuple[int, str]]:
    parsed: dict[int, tuple[int, str]] = {}
    for match in _CLIP_LINE_RE.finditer(completion):
        index = int(match.group(1))
        if index not in parsed:  # first answer per clip wins
            parsed[index] = (int(match.group(2)), (match.group(3) or "").strip())
    return parsed


def annotate_saliency(
    session: WatchSession, lm: LanguageModelPort, seed: int = 0
) -> SaliencyAnnotation:
    """Score every segment of the session's target (last watched) video.

    The prompt carries both preference layers: the final long-term profile and
    the per-turn reviews. Scores outside [1, 10] are clamped after one retry;
    segments still missing after the retry are an annotation error.
    """
    if not session.turns:
        raise ValueError(f"session {session.session_id} has no turns to annotate")
    target = session.target_video
    profile_block = (
        format_profile(session.final_preference)
        + "\n\nReviews of watched videos:\n"
        + format_reviews([t.review for t in session.turns])
    )
    prompt = render(
        "scoring",
        {"preference_profile": profile_block, "clip info": format_clip_info(target)},
    )

    n = len(target.segments)
    warnings: list[str] = []
    parsed = _parse_clip_scores(lm.complete(prompt, seed))
    needs_retry = len(parsed) < n or any(
        not 1 <= score <= 10 for score, _ in parsed.values()
    )
    if needs_retry:
        warnings.append("annotation incomplete or out of range; retrying")
        parsed = _parse_clip_scores(lm.complete(prompt, seed + 1))

    missing = [i for i in range(n) if i not in parsed]
    if missing:
        raise AnnotationError(
            "annotation missing segments after retry: "
            + ", ".join(f"clip_{i}" for i in missing)
        )

    scores = []
    justifications = []
    for i in range(n):
        score, justification = parsed[i]
        if not 1 <= score <= 10:
            clamped = min(10, max(1, score))
            warnings.append(f"clip_{i} score {score} clamped to {clamped}")
            score = clamped
        scores.append(score)
        justifications.append(justification)

    return SaliencyAnnotation(
        session_id=session.session_id,
        video_id=target.meta.video_id,
        scores=tuple(scores),
        justifications=tuple(justifications),
        warnings=tuple(warnings),
    )
