"""Preference-conditioned segment scorer.

Target segments and the preference embedding are projected into a shared
space, segments attend to the preference via cross-attention, a transformer
encoder contextualizes them, and a logistic head emits one score per segment
in [0, 1].
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

CHECKPOINT_FORMAT_VERSION = 1


def preference_embedding(history: Sequence[np.ndarray]) -> np.ndarray:
    """Mean-pool history-video embeddings into one preference vector.

    Permutation-invariant and idempotent: any ordering of the same history
    yields the same vector, and a history of identical vectors returns that
    vector.
    """
    if len(history) == 0:
        raise ValueError("cannot build a preference embedding from an empty history")
    stacked = np.stack([np.asarray(h, dtype=np.float64) for h in history])
    if stacked.ndim != 2:
        raise ValueError("history embeddings must be 1-d vectors of equal dimension")
    return stacked.mean(axis=0)


@dataclass(frozen=True)
class HiPherConfig:
    feature_dim: int
    hidden_dim: int = 256
    heads: int = 4
    encoder_layers: int = 2
    dropout: float = 0.1
    positional: bool = True  # temporal positions on target segments


class _ProjectionStack(nn.Module):
    """3 blocks of (LayerNorm, Dropout, Linear); GELU between blocks."""

    def __init__(self, in_dim: int, hidden_dim: int, dropout: float):
        super().__init__()
        dims = [in_dim, hidden_dim, hidden_dim, hidden_dim]
        layers: list[nn.Module] = []
        for i in range(3):
            layers.append(nn.LayerNorm(dims[i]))
            layers.append(nn.Dropout(dropout))
            layers.append(nn.Linear(dims[i], dims[i + 1]))
            if i < 2:
                layers.append(nn.GELU())
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


def _sinusoidal_positions(n: int, dim: int, dtype: torch.dtype) -> torch.Tensor:
    position = torch.arange(n, dtype=dtype).unsqueeze(1)
    div = torch.exp(torch.arange(0, dim, 2, dtype=dtype) * (-math.log(10000.0) / dim))
    table = torch.zeros(n, dim, dtype=dtype)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div[: dim // 2])
    return table


class HiPherModel(nn.Module):
    def __init__(self, config: HiPherConfig):
        super().__init__()
        if config.hidden_dim % config.heads != 0:
            raise ValueError(
                f"hidden_dim {config.hidden_dim} must be divisible by heads {config.heads}"
            )
        self.config = config
        self.segment_proj = _ProjectionStack(config.feature_dim, config.hidden_dim, config.dropout)
        self.preference_proj = _ProjectionStack(
            config.feature_dim, config.hidden_dim, config.dropout
        )
        self.cross_attention = nn.MultiheadAttention(
            config.hidden_dim, config.heads, dropout=config.dropout, batch_first=True
        )
        self.cross_norm = nn.LayerNorm(config.hidden_dim)
        self.cross_dropout = nn.Dropout(config.dropout)
        encoder_layer = nn.TransformerEncoderLayer(
            d_model=config.hidden_dim,
            nhead=config.heads,
            dim_feedforward=4 * config.hidden_dim,
            dropout=config.dropout,
            activation="gelu",
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(encoder_layer, num_layers=config.encoder_layers)
        self.head = nn.Linear(config.hidden_dim, 1)

    def forward(self, segments: torch.Tensor, preference: torch.Tensor) -> torch.Tensor:
        """segments: (batch, n, feature_dim); preference: (batch, feature_dim).

        Returns (batch, n) scores in [0, 1].
        """
        if segments.shape[-1] != self.config.feature_dim:
            raise ValueError(
                f"segments have dim {segments.shape[-1]}, model expects "
                f"{self.config.feature_dim}"
            )
        if preference.shape[-1] != self.config.feature_dim:
            raise ValueError(
                f"preference has dim {preference.shape[-1]}, model expects "
                f"{self.config.feature_dim}"
            )
        x = self.segment_proj(segments)
        if self.config.positional:
            x = x + _sinusoidal_positions(x.shape[1], x.shape[2], x.dtype).to(x.device)
        p = self.preference_proj(preference).unsqueeze(1)
        attended, _ = self.cross_attention(x, p, p, need_weights=False)
        x = self.cross_norm(x + self.cross_dropout(attended))
        x = self.encoder(x)
        return torch.sigmoid(self.head(x)).squeeze(-1)

    @torch.no_grad()
    def score(self, segments: np.ndarray, preference: np.ndarray) -> np.ndarray:
        """Score one video's segments in eval mode (dropout off)."""
        was_training = self.training
        self.eval()
        try:
            param = next(self.parameters())
            seg = torch.as_tensor(np.asarray(segments), dtype=param.dtype).unsqueeze(0)
            pref = torch.as_tensor(np.asarray(preference), dtype=param.dtype).unsqueeze(0)
            out = self.forward(seg.to(param.device), pref.to(param.device))
            return out.squeeze(0).cpu().numpy()
        finally:
            if was_training:
                self.train()


def score_segments(
    model: HiPherModel, segments: np.ndarray, preference: np.ndarray
) -> list[float]:
    """One score per segment, deterministic under fixed parameters."""
    return [float(s) for s in model.score(segments, preference)]


def save_checkpoint(model: HiPherModel, path: str | Path, extra: dict | None = None) -> None:
    """Self-describing checkpoint: format version, config, parameters."""
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": asdict(model.config),
        "state_dict": model.state_dict(),
    }
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> tuple[HiPherModel, dict]:
    """Rebuild a model from a checkpoint; scores reproduce bit-identically."""
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version: {version!r}")
    model = HiPherModel(HiPherConfig(**payload["model_config"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("extra", {})
