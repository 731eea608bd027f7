"""Segment and video featurization behind a pluggable embedding provider.

A segment feature is the concatenation of a visual embedding of its
representative frame and a text embedding of its transcript. A video is
encoded as the mean of its segment features; mean pooling keeps the encoding
invariant to segment order.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path
from typing import Protocol

import numpy as np

from .core.types import Segment, VideoRecord
from .seeding import derive_seed


class FeaturizationError(RuntimeError):
    """An embedding provider failed while featurizing a segment."""


class EmbeddingProviderPort(Protocol):
    """Embedding backbone interface.

    Implementations must be deterministic per input and keep output
    dimensions constant for the lifetime of the instance.
    """

    provider_id: str

    def embed_image(self, frame_ref: str) -> np.ndarray: ...

    def embed_text(self, text: str) -> np.ndarray: ...

    def dims(self) -> tuple[int, int]: ...


def _segment_text(segment: Segment, include_caption: bool) -> str:
    if include_caption:
        return f"{segment.caption}\n{segment.transcript}".strip()
    return segment.transcript


def segment_feature(
    segment: Segment, provider: EmbeddingProviderPort, include_caption: bool = False
) -> np.ndarray:
    """Visual embedding of the frame concatenated with the transcript embedding.

    A segment with no transcript text gets a zero vector in the text block, so
    dimensionality stays uniform across segments. ``include_caption`` prepends
    the caption to the text fed to the provider.
    """
    d_v, d_t = provider.dims()
    try:
        visual = np.asarray(provider.embed_image(segment.frame_ref), dtype=np.float64)
        text = _segment_text(segment, include_caption)
        textual = (
            np.asarray(provider.embed_text(text), dtype=np.float64)
            if text
            else np.zeros(d_t, dtype=np.float64)
        )
    except Exception as exc:
        raise FeaturizationError(f"segment {segment.index}: {exc}") from exc
    if visual.shape != (d_v,) or textual.shape != (d_t,):
        raise FeaturizationError(
            f"segment {segment.index}: provider returned shapes "
            f"{visual.shape}/{textual.shape}, expected ({d_v},)/({d_t},)"
        )
    feature = np.concatenate([visual, textual])
    if not np.all(np.isfinite(feature)):
        raise FeaturizationError(f"segment {segment.index}: non-finite embedding values")
    return feature


def featurize_segments(
    video: VideoRecord, provider: EmbeddingProviderPort, include_caption: bool = False
) -> np.ndarray:
    """Stack per-segment features into an (n_segments, d_v + d_t) array."""
    return np.stack(
        [segment_feature(s, provider, include_caption) for s in video.segments]
    )


def encode_video(
    video: VideoRecord, provider: EmbeddingProviderPort, include_caption: bool = False
) -> np.ndarray:
    """Element-wise mean of all segment features (order-invariant)."""
    if not video.segments:
        raise FeaturizationError(f"video {video.meta.video_id} has no segments")
    return featurize_segments(video, provider, include_caption).mean(axis=0)


class HashedEmbeddingProvider:
    """Offline provider: seeded-hash pseudo-random unit vectors.

    Each token (and each frame reference) maps to a deterministic unit vector;
    text embeddings are the renormalized mean of their token vectors, so texts
    sharing tokens land near each other. Useful for tests and smoke runs where
    no pretrained backbone is available.
    """

    def __init__(self, d_v: int = 32, d_t: int = 32, seed: int = 0):
        if d_v < 1 or d_t < 1:
            raise ValueError("embedding dimensions must be positive")
        self._d_v = d_v
        self._d_t = d_t
        self._seed = seed
        self.provider_id = f"hashed-v{d_v}-t{d_t}-s{seed}"

    def dims(self) -> tuple[int, int]:
        return self._d_v, self._d_t

    def _unit(self, kind: str, token: str, dim: int) -> np.ndarray:
        rng = np.random.default_rng(derive_seed(self._seed, kind, token))
        vec = rng.standard_normal(dim)
        return vec / np.linalg.norm(vec)

    def embed_image(self, frame_ref: str) -> np.ndarray:
        return self._unit("image", frame_ref, self._d_v)

    def embed_text(self, text: str) -> np.ndarray:
        tokens = re.findall(r"[a-z0-9]+", text.lower())
        if not tokens:
            return np.zeros(self._d_t)
        mean = np.mean([self._unit("text", t, self._d_t) for t in tokens], axis=0)
        norm = np.linalg.norm(mean)
        return mean / norm if norm > 0 else mean


class CachingProvider:
    """Wraps a provider with a persistent (provider_id, content hash) cache."""

    def __init__(self, provider: EmbeddingProviderPort, path: str | Path):
        self._provider = provider
        self._path = Path(path)
        self.provider_id = provider.provider_id
        self._cache: dict[str, np.ndarray] = {}
        self._dirty = False
        if self._path.exists():
            with np.load(self._path) as data:
                self._cache = {key: data[key] for key in data.files}

    def dims(self) -> tuple[int, int]:
        return self._provider.dims()

    def _key(self, kind: str, content: str) -> str:
        digest = hashlib.sha256(content.encode("utf-8")).hexdigest()
        return f"{self.provider_id}|{kind}|{digest}"

    def _lookup(self, kind: str, content: str, compute) -> np.ndarray:
        key = self._key(kind, content)
        if key not in self._cache:
            self._cache[key] = np.asarray(compute(content), dtype=np.float64)
            self._dirty = True
        return self._cache[key]

    def embed_image(self, frame_ref: str) -> np.ndarray:
        return self._lookup("image", frame_ref, self._provider.embed_image)

    def embed_text(self, text: str) -> np.ndarray:
        return self._lookup("text", text, self._provider.embed_text)

    def save(self) -> None:
        if self._dirty:
            np.savez(self._path, **self._cache)
            self._dirty = False
