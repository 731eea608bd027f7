"""Training loop for the segment scorer."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
import torch

from ..metrics import EvaluationReport, VideoScores, evaluate
from ..seeding import derive_seed
from .data import VideoExample
from .loss import DEFAULT_GAMMA, DEFAULT_MAX_PAIRS, DEFAULT_PAIR_GAP, PairSet, make_pairs, saliency_loss
from .model import HiPherConfig, HiPherModel


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = DEFAULT_GAMMA
    epochs: int = 30
    learning_rate: float = 1e-4
    batch_size: int = 4
    seed: int = 0
    pair_gap: int = DEFAULT_PAIR_GAP
    max_pairs: int = DEFAULT_MAX_PAIRS
    # Optional dense calibration term: weight * sum((pred - gt/10)^2). Off by
    # default; the ranking hinge alone is the primary objective.
    aux_mse_weight: float = 0.0


def _prepare(
    examples: Sequence[VideoExample], config: TrainConfig, dtype: torch.dtype
) -> list[tuple[torch.Tensor, torch.Tensor, torch.Tensor, PairSet]]:
    prepared = []
    for ex in examples:
        pairs = make_pairs(
            ex.gt_scores,
            max_pairs=config.max_pairs,
            seed=derive_seed(config.seed, "pairs", ex.session_id, ex.video_id),
            pair_gap=config.pair_gap,
        )
        if not pairs:
            continue  # flat ground truth carries no ranking signal
        seg = torch.as_tensor(ex.segments, dtype=dtype).unsqueeze(0)
        pref = torch.as_tensor(ex.preference, dtype=dtype).unsqueeze(0)
        unit_gt = torch.as_tensor([g / 10.0 for g in ex.gt_scores], dtype=dtype)
        prepared.append((seg, pref, unit_gt, pairs))
    return prepared


def _video_loss(
    model: HiPherModel,
    seg: torch.Tensor,
    pref: torch.Tensor,
    unit_gt: torch.Tensor,
    pairs: PairSet,
    config: TrainConfig,
) -> torch.Tensor:
    scores = model(seg, pref).squeeze(0)
    loss = saliency_loss(scores, pairs, config.gamma)
    if config.aux_mse_weight > 0:
        loss = loss + config.aux_mse_weight * torch.sum((scores - unit_gt) ** 2)
    return loss


def train(
    model: HiPherModel, examples: Sequence[VideoExample], config: TrainConfig
) -> list[float]:
    """Minimize the mean per-video saliency loss with Adam.

    Returns the per-epoch loss trace (mean per-video loss over the epoch).
    Reproducible: a fixed config seed yields an identical trace. Raises
    TrainingError when no video has a usable pair set.
    """
    dtype = next(model.parameters()).dtype
    prepared = _prepare(examples, config, dtype)
    if not prepared:
        raise TrainingError("no supervision: every video has flat ground truth")

    torch.manual_seed(derive_seed(config.seed, "train"))
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    order_rng = np.random.default_rng(derive_seed(config.seed, "order"))

    trace = []
    model.train()
    for _ in range(config.epochs):
        order = order_rng.permutation(len(prepared))
        epoch_total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            optimizer.zero_grad()
            batch_loss = None
            for idx in batch:
                video_loss = _video_loss(model, *prepared[idx], config)
                batch_loss = video_loss if batch_loss is None else batch_loss + video_loss
                epoch_total += float(video_loss.detach())
            batch_loss = batch_loss / len(batch)
            batch_loss.backward()
            optimizer.step()
        trace.append(epoch_total / len(prepared))
    model.eval()
    return trace


def fit(
    examples: Sequence[VideoExample],
    model_config: HiPherConfig,
    train_config: TrainConfig,
) -> tuple[HiPherModel, list[float]]:
    """Build a freshly initialized model and train it; seeds cover init too."""
    torch.manual_seed(derive_seed(train_config.seed, "init"))
    model = HiPherModel(model_config)
    trace = train(model, examples, train_config)
    return model, trace


def evaluate_model(
    model: HiPherModel, examples: Sequence[VideoExample], **metric_kwargs
) -> EvaluationReport:
    """Score every example and aggregate the full metric suite."""
    videos = [
        VideoScores(
            video_id=ex.video_id,
            pred=tuple(float(s) for s in model.score(ex.segments, ex.preference)),
            gt=ex.gt_scores,
            spans=ex.spans,
        )
        for ex in examples
    ]
    return evaluate(videos, **metric_kwargs)
