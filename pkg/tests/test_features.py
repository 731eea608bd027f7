"""Featurization: concatenation, pooling, the hashed provider, and the cache."""

import numpy as np
import pytest

from conftest import make_video
from hippo.features import (
    CachingProvider,
    FeaturizationError,
    HashedEmbeddingProvider,
    encode_video,
    featurize_segments,
    segment_feature,
)


class TinyProvider:
    provider_id = "tiny"

    def __init__(self, d_v=2, d_t=2, image=(1.0, 0.0), text=(0.0, 1.0)):
        self._d_v, self._d_t = d_v, d_t
        self._image, self._text = np.array(image), np.array(text)

    def dims(self):
        return self._d_v, self._d_t

    def embed_image(self, frame_ref):
        return self._image.copy()

    def embed_text(self, text):
        return self._text.copy()


class FailingProvider(TinyProvider):
    def embed_image(self, frame_ref):
        raise RuntimeError("backend down")


def test_concatenation_order_is_visual_then_text():
    video = make_video(n_segments=1)
    feature = segment_feature(video.segments[0], TinyProvider())
    assert feature.tolist() == [1.0, 0.0, 0.0, 1.0]


def test_empty_transcript_zero_fills_text_block():
    video = make_video(n_segments=1, transcripts=[""])
    feature = segment_feature(video.segments[0], TinyProvider())
    assert feature.tolist() == [1.0, 0.0, 0.0, 0.0]


def test_caption_inclusion_flag_feeds_caption_text():
    seen = []

    class Spy(TinyProvider):
        def embed_text(self, text):
            seen.append(text)
            return super().embed_text(text)

    video = make_video(n_segments=1, captions=["a cat"], transcripts=["meows"])
    segment_feature(video.segments[0], Spy())
    segment_feature(video.segments[0], Spy(), include_caption=True)
    assert seen == ["meows", "a cat\nmeows"]


def test_provider_dims_respected():
    provider = HashedEmbeddingProvider(d_v=512, d_t=512)
    video = make_video(n_segments=1)
    assert segment_feature(video.segments[0], provider).shape == (1024,)


def test_provider_failure_names_segment():
    video = make_video(n_segments=2)
    with pytest.raises(FeaturizationError, match="segment 1"):
        segment_feature(video.segments[1], FailingProvider())


class TestEncodeVideo:
    def test_mean_of_two(self):
        class TwoValues(TinyProvider):
            def embed_image(self, frame_ref):
                return np.array([1.0, 0.0]) if frame_ref.endswith("0") else np.array([0.0, 1.0])

            def embed_text(self, text):
                return np.zeros(2)

        video = make_video(n_segments=2)
        assert encode_video(video, TwoValues()).tolist() == [0.5, 0.5, 0.0, 0.0]

    def test_single_segment_identity(self):
        video = make_video(n_segments=1)
        feature = segment_feature(video.segments[0], TinyProvider())
        assert np.allclose(encode_video(video, TinyProvider()), feature)

    def test_identical_segments_idempotent(self):
        video = make_video(n_segments=3, transcripts=["same"] * 3)
        provider = TinyProvider()
        single = segment_feature(video.segments[0], provider)
        assert np.allclose(encode_video(video, provider), single, atol=1e-9)

    def test_permutation_invariance(self):
        provider = HashedEmbeddingProvider(d_v=8, d_t=8)
        video = make_video(n_segments=5)
        feats = featurize_segments(video, provider)
        rng = np.random.default_rng(0)
        for _ in range(5):
            perm = rng.permutation(5)
            assert np.allclose(feats[perm].mean(axis=0), encode_video(video, provider), atol=1e-12)


class TestHashedProvider:
    def test_deterministic_per_input(self):
        a = HashedEmbeddingProvider(seed=1)
        b = HashedEmbeddingProvider(seed=1)
        assert np.allclose(a.embed_image("x/1"), b.embed_image("x/1"))
        assert np.allclose(a.embed_text("hello world"), b.embed_text("hello world"))

    def test_seed_changes_embeddings(self):
        a = HashedEmbeddingProvider(seed=1)
        b = HashedEmbeddingProvider(seed=2)
        assert not np.allclose(a.embed_image("x/1"), b.embed_image("x/1"))

    def test_unit_norm_images(self):
        provider = HashedEmbeddingProvider()
        assert np.linalg.norm(provider.embed_image("frame")) == pytest.approx(1.0)

    def test_shared_tokens_increase_similarity(self):
        provider = HashedEmbeddingProvider()
        close = provider.embed_text("dog agility training") @ provider.embed_text(
            "dog agility course"
        )
        far = provider.embed_text("dog agility training") @ provider.embed_text(
            "quantum field theory"
        )
        assert close > far

    def test_empty_text_is_zero(self):
        assert np.allclose(HashedEmbeddingProvider().embed_text("!!!"), 0.0)


def test_cache_round_trip(tmp_path):
    calls = []

    class Counting(TinyProvider):
        def embed_image(self, frame_ref):
            calls.append(frame_ref)
            return super().embed_image(frame_ref)

    path = tmp_path / "cache.npz"
    cached = CachingProvider(Counting(), path)
    first = cached.embed_image("f1")
    again = cached.embed_image("f1")
    assert calls == ["f1"]
    assert np.allclose(first, again)
    cached.save()

    reloaded = CachingProvider(Counting(), path)
    assert np.allclose(reloaded.embed_image("f1"), first)
    assert calls == ["f1"]  # served from disk, no new provider call
