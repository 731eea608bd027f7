"""Preference-conditioned segment scorer: model, loss, and training."""

from .data import MODALITIES, VideoExample, build_examples
from .loss import (
    DEFAULT_GAMMA,
    DEFAULT_MAX_PAIRS,
    DEFAULT_PAIR_GAP,
    PairSet,
    make_pairs,
    saliency_loss,
)
from .model import (
    HiPherConfig,
    HiPherModel,
    load_checkpoint,
    preference_embedding,
    save_checkpoint,
    score_segments,
)
from .train import TrainConfig, TrainingError, evaluate_model, fit, train

__all__ = [
    "DEFAULT_GAMMA",
    "DEFAULT_MAX_PAIRS",
    "DEFAULT_PAIR_GAP",
    "HiPherConfig",
    "HiPherModel",
    "MODALITIES",
    "PairSet",
    "TrainConfig",
    "TrainingError",
    "VideoExample",
    "build_examples",
    "evaluate_model",
    "fit",
    "load_checkpoint",
    "make_pairs",
    "preference_embedding",
    "saliency_loss",
    "save_checkpoint",
    "score_segments",
    "train",
]
