"""Contrastive saliency loss and ordinal pair construction.

Supervision is pairwise: for segments whose ground-truth scores differ by at
least ``pair_gap`` on the 10-point scale, the higher-rated one must outscore
the lower-rated one by a margin. The hinge penalty is

    sum over pairs of max(0, margin - (y_pos - y_neg))

which is zero exactly when every pair satisfies its margin.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch

DEFAULT_GAMMA = 0.15
DEFAULT_PAIR_GAP = 2
DEFAULT_MAX_PAIRS = 256


@dataclass(frozen=True)
class PairSet:
    """(positive index, negative index) pairs for one target video."""

    pairs: tuple[tuple[int, int], ...]

    def __len__(self) -> int:
        return len(self.pairs)

    def __bool__(self) -> bool:
        return bool(self.pairs)


def make_pairs(
    gt_scores: Sequence[int],
    max_pairs: int = DEFAULT_MAX_PAIRS,
    seed: int = 0,
    pair_gap: int = DEFAULT_PAIR_GAP,
) -> PairSet:
    """All (i, j) with gt[i] - gt[j] >= pair_gap, subsampled to max_pairs.

    Subsampling is uniform and deterministic for a given seed. Flat ground
    truth yields an empty set; such videos simply contribute no loss.
    """
    if len(gt_scores) < 2:
        raise ValueError(f"need at least 2 segments to build pairs, got {len(gt_scores)}")
    if max_pairs < 1:
        raise ValueError(f"max_pairs must be >= 1, got {max_pairs}")
    qualifying = [
        (i, j)
        for i in range(len(gt_scores))
        for j in range(len(gt_scores))
        if gt_scores[i] - gt_scores[j] >= pair_gap
    ]
    if len(qualifying) > max_pairs:
        rng = np.random.default_rng(seed)
        picked = rng.choice(len(qualifying), size=max_pairs, replace=False)
        qualifying = [qualifying[i] for i in sorted(picked)]
    return PairSet(pairs=tuple(qualifying))


def saliency_loss(scores: torch.Tensor, pairs: PairSet, gamma: float) -> torch.Tensor:
    """Hinge ranking penalty over a video's pairs; differentiable in scores."""
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if not pairs:
        return scores.sum() * 0.0
    idx = torch.as_tensor(pairs.pairs, dtype=torch.long, device=scores.device)
    if idx.max() >= scores.shape[-1]:
        raise IndexError(
            f"pair index {int(idx.max())} out of range for {scores.shape[-1]} scores"
        )
    pos = scores[..., idx[:, 0]]
    neg = scores[..., idx[:, 1]]
    return torch.clamp(gamma - (pos - neg), min=0.0).sum()
