"""Turn dataset records into model-ready feature arrays."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..core.types import SessionRecord
from ..features import EmbeddingProviderPort, encode_video, featurize_segments

MODALITIES = ("both", "visual", "text", "none")


@dataclass(frozen=True)
class VideoExample:
    """One training/evaluation instance: history context plus scored target."""

    session_id: str
    video_id: str
    history: np.ndarray  # (k, d) history-video embeddings; k may be 0
    segments: np.ndarray  # (n, d) target segment features
    gt_scores: tuple[int, ...]
    spans: tuple[tuple[float, float], ...]

    @property
    def preference(self) -> np.ndarray:
        """Mean of history embeddings, or the zero vector for empty history."""
        if self.history.shape[0] == 0:
            return np.zeros(self.segments.shape[1])
        return self.history.mean(axis=0)


def _zero_modality(features: np.ndarray, modality: str, d_v: int) -> np.ndarray:
    if modality == "both":
        return features
    out = features.copy()
    if modality == "visual":  # keep visual, drop text
        out[..., d_v:] = 0.0
    elif modality == "text":  # keep text, drop visual
        out[..., :d_v] = 0.0
    elif modality == "none":
        out[...] = 0.0
    else:
        raise ValueError(f"unknown modality {modality!r}; expected one of {MODALITIES}")
    return out


def build_examples(
    records: Sequence[SessionRecord],
    provider: EmbeddingProviderPort,
    history_length: int | None = None,
    modality: str = "both",
    include_caption: bool = False,
    zero_preference: bool = False,
) -> list[VideoExample]:
    """Featurize records into examples.

    The conditioning history is the chosen videos of all turns before the
    target (the target video itself is never part of its own conditioning).
    ``history_length`` keeps only the most recent k of those.
    ``modality`` zeroes the visual or text feature block (or both), and
    ``zero_preference`` drops the history entirely, for ablations.
    """
    if modality not in MODALITIES:
        raise ValueError(f"unknown modality {modality!r}; expected one of {MODALITIES}")
    d_v, _ = provider.dims()
    examples = []
    for record in records:
        session = record.session
        target = session.target_video
        history_videos = [turn.chosen for turn in session.turns[:-1]]
        if history_length is not None:
            history_videos = history_videos[-history_length:]
        if zero_preference:
            history_videos = []

        segments = _zero_modality(
            featurize_segments(target, provider, include_caption), modality, d_v
        )
        if history_videos:
            history = np.stack(
                [encode_video(v, provider, include_caption) for v in history_videos]
            )
            history = _zero_modality(history, modality, d_v)
        else:
            history = np.zeros((0, segments.shape[1]))

        examples.append(
            VideoExample(
                session_id=session.session_id,
                video_id=target.meta.video_id,
                history=history,
                segments=segments,
                gt_scores=record.annotation.scores,
                spans=tuple((s.start_s, s.end_s) for s in target.segments),
            )
        )
    return examples
