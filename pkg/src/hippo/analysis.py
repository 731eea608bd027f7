"""Dataset analyses: exploration behavior, score statistics, and
history-embedding export for external visualization."""

from __future__ import annotations

import re
import warnings
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .core.types import SaliencyAnnotation, WatchSession
from .features import EmbeddingProviderPort

# Queries whose token-set Jaccard similarity against every earlier query in
# the session stays below this bound count as topic drift.
DRIFT_JACCARD_THRESHOLD = 0.5


def _tokens(text: str) -> frozenset[str]:
    return frozenset(re.findall(r"[a-z0-9]+", text.lower()))


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def exploration_ratio(session: WatchSession) -> float:
    """Fraction of decision turns (2..m) that drift to a distinctly new query.

    A turn counts as drift iff it issued a new query whose token set stays
    below the Jaccard threshold against every query seen earlier in the
    session. Exploring related videos, and near-duplicate queries, are
    non-exploration. Turn 1 is the bootstrap query, so it has no prior topic
    to drift from and is excluded from the denominator.
    """
    if len(session.turns) < 2:
        raise ValueError("exploration ratio needs at least 2 turns")
    drift = 0
    seen: list[frozenset[str]] = []
    for pos, turn in enumerate(session.turns):
        if turn.decision.mode == "new_query":
            tokens = _tokens(turn.decision.query)
            if pos > 0:
                distinct = all(
                    _jaccard(tokens, earlier) < DRIFT_JACCARD_THRESHOLD for earlier in seen
                )
                if distinct:
                    drift += 1
            seen.append(tokens)
    return drift / (len(session.turns) - 1)


def score_stats(annotation: SaliencyAnnotation) -> tuple[float, float]:
    """Mean and population standard deviation of the per-segment scores."""
    scores = np.asarray(annotation.scores, dtype=np.float64)
    mean = float(scores.mean())
    std = float(np.sqrt(np.mean((scores - mean) ** 2)))
    return mean, std


def export_history_embeddings(
    sessions: Sequence[WatchSession], provider: EmbeddingProviderPort
) -> list[tuple[str, np.ndarray]]:
    """One embedding per session: mean over watched videos of their mean
    per-segment visual features (visual block only).

    Rows that fail to featurize are skipped with a warning rather than
    aborting the export.
    """
    rows: list[tuple[str, np.ndarray]] = []
    for session in sessions:
        try:
            video_means = []
            for turn in session.turns:
                frames = np.stack(
                    [
                        np.asarray(provider.embed_image(seg.frame_ref), dtype=np.float64)
                        for seg in turn.chosen.segments
                    ]
                )
                video_means.append(frames.mean(axis=0))
            rows.append((session.session_id, np.mean(video_means, axis=0)))
        except Exception as exc:  # report and move on; one bad row must not kill the export
            warnings.warn(
                f"session {session.session_id}: embedding export failed ({exc}); row skipped",
                RuntimeWarning,
                stacklevel=2,
            )
    return rows


def write_embedding_table(rows: Sequence[tuple[str, np.ndarray]], path: str | Path) -> None:
    """Tab-separated table: session_id then the embedding components."""
    with open(path, "w", encoding="utf-8") as fh:
        for session_id, vector in rows:
            values = "\t".join(f"{x:.10g}" for x in vector)
            fh.write(f"{session_id}\t{values}\n")


def write_stats_table(
    rows: Sequence[tuple[str, float, float, float]], path: str | Path
) -> None:
    """Tab-separated per-session stats: id, exploration ratio, mean, std."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("session_id\texploration_ratio\tscore_mean\tscore_std\n")
        for session_id, ratio, mean, std in rows:
            fh.write(f"{session_id}\t{ratio:.6f}\t{mean:.6f}\t{std:.6f}\n")
