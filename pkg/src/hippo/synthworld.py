"""Synthetic oracle world with analytically known ground-truth saliency.

Users and content live on a shared unit sphere. Every user has a latent
preference vector, every video a latent topic, every segment a latent content
vector tied to its video's topic. Ground-truth saliency is a deterministic
affine function of the user/segment cosine, so end-to-end behavior of the
whole pipeline is quantitatively checkable: the preference a user acts on is
recoverable, in expectation, as the mean of the segment latents they watched.

The mock ports answer the simulator's prompts with latent rules: candidate
selection is argmax/argmin cosine, saliency annotation is the oracle score,
and the explore-vs-search decision compares the best related candidate
against a per-user drift threshold.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core.types import SeedProfile, SessionRecord, VideoMeta, VideoRecord, Segment, INTENTS
from .seeding import derive_seed
from .simulator.engine import SessionParams, annotate_saliency, run_session
from .simulator.prompts import intent_display

WORLD_FORMAT_VERSION = 1

_SEGMENT_SECONDS = 10.0


@dataclass(frozen=True)
class WorldConfig:
    seed: int = 0
    n_users: int = 200
    n_videos: int = 320
    dim: int = 16
    m: int = 10  # watched videos per session
    n_segments: int = 30  # segments per video
    l: int = 8  # candidates per turn
    n_topics: int = 20
    subtopics_per_topic: int = 10
    segment_mix: float = 0.6  # segment latent = norm(mix * video + (1 - mix) * noise)
    video_mix: float = 0.5  # video latent = norm(mix * subtopic + (1 - mix) * noise)
    user_mix: float = 0.25  # anchor weight in the user latent
    noise_scale: float = 6.0  # magnitude of the segment noise vector
    # Segment noise concentrates on a small shared dictionary of directions
    # ("flavors") with isotropic jitter. Every video leans toward one dominant
    # flavor and every user prefers a couple of flavors, so preference-driven
    # selection moves flavor information into the watched-content mean. That
    # keeps per-user segment rankings recoverable by mean pooling.
    n_flavors: int = 8
    flavor_purity: float = 0.8  # flavor share of a segment's noise direction
    video_flavor_dominance: float = 0.45  # share of segments carrying the video's flavor
    user_flavor_count: int = 2
    user_flavor_purity: float = 0.75  # flavor share of the user's personal component
    taste_inertia: float = 0.3  # weight of the initial latent in the session-final taste
    drift_low: float = 0.3  # explore-vs-search thresholds, uniform per user
    drift_high: float = 0.8

    def __post_init__(self) -> None:
        for name in ("n_users", "n_videos", "dim", "m", "n_segments", "l", "n_topics"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.dim < 2:
            raise ValueError("dim must be >= 2 so features split into two blocks")


@dataclass(frozen=True)
class SynthUser:
    user_id: str
    latent: np.ndarray
    topic_index: int
    drift_threshold: float
    profile: SeedProfile


@dataclass(frozen=True)
class SynthVideo:
    record: VideoRecord
    topic_index: int
    latent: np.ndarray  # video-level topic latent
    segment_latents: np.ndarray  # (n_segments, dim)

    @property
    def content_mean(self) -> np.ndarray:
        """The video's actual content direction: mean segment latent."""
        return _unit(self.segment_latents.mean(axis=0))


@dataclass
class SynthWorld:
    config: WorldConfig
    topic_names: list[str]
    anchors: np.ndarray  # (n_topics, dim)
    subtopic_names: list[list[str]]
    subtopic_latents: np.ndarray  # (n_topics, subtopics_per_topic, dim)
    users: list[SynthUser]
    videos: dict[str, SynthVideo] = field(default_factory=dict)

    @property
    def video_ids(self) -> list[str]:
        return sorted(self.videos)

    def seed_profiles(self) -> list[SeedProfile]:
        return [u.profile for u in self.users]


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _mix(base: np.ndarray, noise: np.ndarray, weight: float) -> np.ndarray:
    return _unit(weight * base + (1.0 - weight) * noise)


def _hash_unit(seed: int, label: str, dim: int) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(seed, "hash", label))
    return _unit(rng.standard_normal(dim))


def oracle_saliency(user_latent: np.ndarray, segment_latent: np.ndarray) -> int:
    """Ground-truth 1..10 score: affine in the user/segment cosine, rounded."""
    cosine = float(np.dot(_unit(user_latent), _unit(segment_latent)))
    score = int(math.floor(1.0 + 9.0 * (cosine + 1.0) / 2.0 + 0.5))
    return min(10, max(1, score))


def session_taste(
    world: "SynthWorld", user: "SynthUser", watched_ids: list[str]
) -> np.ndarray:
    """The taste a user annotates with after a session.

    Preferences consolidate while watching: the final taste blends the initial
    latent with the mean segment latent of everything watched, weighted by
    ``taste_inertia``. This is the vector the annotation oracle scores
    against, and it is recoverable by mean-pooling watched-segment features.
    """
    if not watched_ids:
        return user.latent
    watched_mean = _unit(
        np.mean([world.videos[v].segment_latents.mean(axis=0) for v in watched_ids], axis=0)
    )
    inertia = world.config.taste_inertia
    return _unit(inertia * user.latent + (1.0 - inertia) * watched_mean)


def generate_world(config: WorldConfig) -> SynthWorld:
    """Build a world deterministically from its config."""
    rng = np.random.default_rng(derive_seed(config.seed, "world"))
    d = config.dim

    topic_names = [f"t{t:02d}" for t in range(config.n_topics)]
    anchors = np.stack([_unit(rng.standard_normal(d)) for _ in topic_names])
    subtopic_names = [
        [f"{topic_names[t]}s{j:02d}" for j in range(config.subtopics_per_topic)]
        for t in range(config.n_topics)
    ]
    subtopic_latents = np.stack(
        [
            np.stack(
                [
                    _mix(anchors[t], _unit(rng.standard_normal(d)), 0.8)
                    for _ in range(config.subtopics_per_topic)
                ]
            )
            for t in range(config.n_topics)
        ]
    )

    flavors = np.stack([_unit(rng.standard_normal(d)) for _ in range(config.n_flavors)])

    videos: dict[str, SynthVideo] = {}
    published_years = (2020, 2021, 2022, 2023, 2024)
    for i in range(config.n_videos):
        topic = i % config.n_topics
        sub = (i // config.n_topics) % config.subtopics_per_topic
        video_id = f"v{i:04d}"
        z = _mix(subtopic_latents[topic, sub], _unit(rng.standard_normal(d)), config.video_mix)
        dominant = int(rng.integers(config.n_flavors))
        noise_dirs = []
        for _ in range(config.n_segments):
            if rng.random() < config.video_flavor_dominance:
                flavor = flavors[dominant]
            else:
                flavor = float(rng.choice((-1.0, 1.0))) * flavors[
                    int(rng.integers(config.n_flavors))
                ]
            noise_dirs.append(
                _mix(flavor, _unit(rng.standard_normal(d)), config.flavor_purity)
            )
        segment_latents = np.stack(
            [
                _mix(z, config.noise_scale * noise, config.segment_mix)
                for noise in noise_dirs
            ]
        )
        duration = config.n_segments * _SEGMENT_SECONDS
        meta = VideoMeta(
            video_id=video_id,
            title=f"{subtopic_names[topic][sub]} session {i}: a {topic_names[topic]} video",
            channel=f"channel-{topic_names[topic]}",
            description=f"Covers {subtopic_names[topic][sub]} within {topic_names[topic]}.",
            view_count=int(rng.integers(1_000, 1_000_000)),
            published=f"{published_years[i % len(published_years)]}-0{1 + i % 9}-15",
            duration_s=duration,
            thumbnail_ref=f"thumbs/{video_id}.jpg",
        )
        segments = tuple(
            Segment(
                index=k,
                start_s=k * _SEGMENT_SECONDS,
                end_s=(k + 1) * _SEGMENT_SECONDS,
                caption=f"Frame shows {subtopic_names[topic][sub]} scene {k}.",
                transcript=(
                    f"Part {k} of {video_id}: narration about "
                    f"{subtopic_names[topic][sub]} and {topic_names[topic]}."
                ),
                frame_ref=f"{video_id}/frame{k:03d}",
            )
            for k in range(config.n_segments)
        )
        videos[video_id] = SynthVideo(
            record=VideoRecord(meta=meta, segments=segments),
            topic_index=topic,
            latent=z,
            segment_latents=segment_latents,
        )

    users = []
    for i in range(config.n_users):
        topic = i % config.n_topics
        picks = rng.choice(config.n_flavors, size=config.user_flavor_count, replace=False)
        signs = rng.choice((-1.0, 1.0), size=config.user_flavor_count)
        preferred = _unit(np.sum(signs[:, None] * flavors[picks], axis=0))
        personal = _mix(preferred, _unit(rng.standard_normal(d)), config.user_flavor_purity)
        latent = _mix(anchors[topic], personal, config.user_mix)
        # Stated subtopic = the one this user's latent actually leans toward.
        sub = int(np.argmax(subtopic_latents[topic] @ latent))
        users.append(
            SynthUser(
                user_id=f"u{i:04d}",
                latent=latent,
                topic_index=topic,
                drift_threshold=float(
                    rng.uniform(config.drift_low, config.drift_high)
                ),
                profile=SeedProfile(
                    topic=topic_names[topic],
                    subtopic=subtopic_names[topic][sub],
                    intent=INTENTS[i % len(INTENTS)],
                ),
            )
        )

    return SynthWorld(
        config=config,
        topic_names=topic_names,
        anchors=anchors,
        subtopic_names=subtopic_names,
        subtopic_latents=subtopic_latents,
        users=users,
        videos=videos,
    )


# ---------------------------------------------------------------------------
# latent-grounded mock ports
# ---------------------------------------------------------------------------

class SynthCatalog:
    """Catalog port returning nearest videos by latent cosine."""

    def __init__(self, world: SynthWorld):
        self._world = world
        self._ids = world.video_ids
        self._matrix = np.stack([world.videos[v].latent for v in self._ids])
        self._token_latents: dict[str, np.ndarray] = {}
        for t, name in enumerate(world.topic_names):
            self._token_latents[name] = world.anchors[t]
            for j, sub in enumerate(world.subtopic_names[t]):
                self._token_latents[sub] = world.subtopic_latents[t, j]

    def _query_latent(self, query: str) -> np.ndarray:
        tokens = re.findall(r"[a-z0-9]+", query.lower())
        known = [self._token_latents[t] for t in tokens if t in self._token_latents]
        # The hash perturbation slides the result window per query string, so
        # rephrased searches in one topic surface different videos.
        perturb = _hash_unit(self._world.config.seed, query, self._world.config.dim)
        if not known:
            return perturb
        return _unit(0.7 * _unit(np.mean(known, axis=0)) + 0.3 * perturb)

    def _nearest(self, target: np.ndarray, limit: int, exclude: str | None = None) -> list[VideoMeta]:
        sims = self._matrix @ target
        order = sorted(range(len(self._ids)), key=lambda i: (-sims[i], self._ids[i]))
        metas = []
        for i in order:
            if self._ids[i] == exclude:
                continue
            metas.append(self._world.videos[self._ids[i]].record.meta)
            if len(metas) == limit:
                break
        return metas

    def search(self, query: str, limit: int) -> list[VideoMeta]:
        return self._nearest(self._query_latent(query), limit)

    def related(self, video_id: str, limit: int) -> list[VideoMeta]:
        video = self._world.videos.get(video_id)
        if video is None:
            raise KeyError(f"video {video_id!r} not in catalog")
        return self._nearest(video.latent, limit, exclude=video_id)

    def fetch(self, video_id: str) -> VideoRecord:
        video = self._world.videos.get(video_id)
        if video is None:
            raise KeyError(f"video {video_id!r} not in catalog")
        return video.record


_ID_IN_LIST_RE = re.compile(r"\bid:\s*(\S+)\s*\|")


def _section(text: str, start_marker: str, end_marker: str) -> str:
    start = text.find(start_marker)
    if start < 0:
        return ""
    start += len(start_marker)
    end = text.find(end_marker, start)
    return text[start:end] if end >= 0 else text[start:]


class SynthLanguageModel:
    """Mock language model bound to one simulated user.

    Answers each prompt family with deterministic latent rules, in exactly the
    output formats the engine parses.
    """

    def __init__(self, world: SynthWorld, user: SynthUser):
        self._world = world
        self._user = user
        self._catalog_ids = world.video_ids

    def _cos(self, video_id: str) -> float:
        # Users judge videos by their actual content, not the catalog topic.
        return float(self._world.videos[video_id].content_mean @ self._user.latent)

    def complete(self, prompt: str, seed: int) -> str:
        if '"Explore" or "Search for a new query"' in prompt:
            return self._retrieval(prompt, seed)
        if "Most Wanted:" in prompt and "Candidate Videos:" in prompt:
            return self._selection(prompt)
        if "Write your summary of the video" in prompt:
            return self._review(prompt)
        if "re-define your preferences" in prompt:
            return self._preference_update(prompt)
        if "Clips to Evaluate:" in prompt:
            return self._scoring(prompt)
        raise ValueError("mock language model got an unrecognized prompt")

    # -- retrieval ---------------------------------------------------------
    def _retrieval(self, prompt: str, seed: int) -> str:
        section = _section(prompt, "current related videos are:", "\nNow, decide")
        ids = [i for i in _ID_IN_LIST_RE.findall(section) if i in self._world.videos]
        best = max((self._cos(i) for i in ids), default=-1.0)
        if best >= self._user.drift_threshold:
            return "Decision: [Explore]"
        return (
            "Decision: [Search for a new query]\n"
            f"New query: [{self._new_query(seed)}]"
        )

    def _new_query(self, seed: int) -> str:
        config = self._world.config
        home = self._user.topic_index
        if seed % 4 == 0 and config.n_topics > 1:
            # Occasionally drift to the foreign topic this user leans toward.
            sims = self._world.anchors @ self._user.latent
            order = np.argsort(-sims)
            topic = int(order[1]) if int(order[0]) == home else int(order[0])
        else:
            topic = home
        sub = (seed // 4) % config.subtopics_per_topic
        return (
            f"{intent_display(self._user.profile.intent)} "
            f"{self._world.topic_names[topic]} {self._world.subtopic_names[topic][sub]}"
        )

    # -- selection ---------------------------------------------------------
    def _selection(self, prompt: str) -> str:
        section = _section(prompt, "Candidate Videos:", "\nAnswer Format")
        ids = _ID_IN_LIST_RE.findall(section)
        known = [(pos, vid) for pos, vid in enumerate(ids) if vid in self._world.videos]
        if not known:
            return "Most Wanted: [None]"
        cosines = {pos: self._cos(vid) for pos, vid in known}
        most = max(cosines, key=lambda p: (cosines[p], -p))
        least = min(cosines, key=lambda p: (cosines[p], p))
        topic = self._world.topic_names[self._user.topic_index]
        lines = [
            f"Most Wanted: [{most + 1}]",
            f"Explanation: [Alignment {cosines[most]:.3f} with my {topic} interests]",
        ]
        if least != most:
            lines += [
                "",
                f"Least Wanted: [{least + 1}]",
                f"Explanation: [Alignment {cosines[least]:.3f} is the weakest match]",
            ]
        else:
            lines += ["", "Least Wanted: [None]", "Explanation: [Only one candidate]"]
        return "\n".join(lines)

    # -- watching ----------------------------------------------------------
    def _review(self, prompt: str) -> str:
        match = re.search(r"Video ID:\s*(\S+)", prompt)
        video_id = match.group(1) if match else ""
        video = self._world.videos.get(video_id)
        if video is None:
            return "A video outside my catalog; nothing to add. It left no impression."
        cos = self._cos(video_id)
        topic = self._world.topic_names[video.topic_index]
        tone = "a strong" if cos >= 0.4 else "a partial" if cos >= 0.1 else "a weak"
        follow = "seek out more like it" if cos >= 0.25 else "probably skip similar uploads"
        return (
            f"The video {video_id} walks through {topic} material over "
            f"{len(video.record.segments)} scenes. It keeps a steady structure from start "
            f"to finish. Personally it was {tone} match for my interests "
            f"(alignment {cos:.2f}). I would {follow}."
        )

    # -- preference update --------------------------------------------------
    def _preference_update(self, prompt: str) -> str:
        profile_section = _section(prompt, "defined as:\n", "\n\nNext,")
        likes = re.findall(r"^- (.+)$", _section(profile_section, "[Likes]", "[Dislikes]"), re.M)
        dislikes_text = profile_section.split("[Dislikes]", 1)
        dislikes = re.findall(r"^- (.+)$", dislikes_text[1], re.M) if len(dislikes_text) > 1 else []

        chosen_section = _section(
            prompt, "most wanted video based on your preferences:\n", "\nReason:"
        )
        chosen_id = next(iter(_ID_IN_LIST_RE.findall(chosen_section)), None)
        rejected_section = _section(
            prompt, "least wanted video based on your preferences:\n", "\nReason:"
        )
        rejected_id = next(iter(_ID_IN_LIST_RE.findall(rejected_section)), None)

        if chosen_id in self._world.videos:
            video = self._world.videos[chosen_id]
            topic = self._world.topic_names[video.topic_index]
            new_like = (
                f"Enjoys {topic} content such as {chosen_id} "
                f"(alignment {self._cos(chosen_id):.2f})."
            )
            if new_like not in likes:
                likes.append(new_like)
        if rejected_id in self._world.videos:
            new_dislike = f"Avoids videos like {rejected_id} that miss my focus."
            if new_dislike not in dislikes:
                dislikes.append(new_dislike)

        lines = ["[Likes]"] + [f"- {b}" for b in likes] + ["[Dislikes]"]
        lines += [f"- {b}" for b in dislikes]
        return "\n".join(lines)

    # -- saliency scoring ----------------------------------------------------
    def _scoring(self, prompt: str) -> str:
        section = _section(prompt, "Clips to Evaluate:", "\nOutput Format:")
        match = re.search(r"Target Video ID:\s*(\S+)", section)
        video_id = match.group(1) if match else ""
        video = self._world.videos.get(video_id)
        if video is None:
            return ""
        # The prompt's review layer names every watched video; the final taste
        # consolidates them, mirroring how preferences settle over a session.
        watched = [
            v
            for v in re.findall(r"The video (\S+) walks through", prompt)
            if v in self._world.videos
        ]
        taste = session_taste(self._world, self._user, watched)
        lines = []
        for clip in re.findall(r"Clip ID:\s*clip_(\d+)", section):
            k = int(clip)
            latent = video.segment_latents[k]
            score = oracle_saliency(taste, latent)
            cos = float(taste @ latent)
            lines.append(
                f'- Clip ID: clip_{k}, Score: {score}, Justification: "Alignment {cos:.2f}"'
            )
        return "\n".join(lines)


def mock_ports(world: SynthWorld, user_index: int = 0) -> tuple[SynthLanguageModel, SynthCatalog]:
    """Language model + catalog bound to one of the world's users."""
    return SynthLanguageModel(world, world.users[user_index]), SynthCatalog(world)


# ---------------------------------------------------------------------------
# synthetic embedding provider
# ---------------------------------------------------------------------------

class SyntheticLatentProvider:
    """Embeds synthetic content as its own latent: visual block = first half
    of the segment latent, text block = second half. Concatenated features
    therefore equal the latent exactly, making mean pooling provably
    informative for the oracle ground truth.
    """

    def __init__(self, world: SynthWorld):
        d = world.config.dim
        self._d_v = d // 2
        self._d_t = d - d // 2
        self.provider_id = f"synthetic-latent-{world.config.seed}-{d}"
        self._by_frame: dict[str, np.ndarray] = {}
        self._by_text: dict[str, np.ndarray] = {}
        for video in world.videos.values():
            for seg in video.record.segments:
                latent = video.segment_latents[seg.index]
                self._by_frame[seg.frame_ref] = latent[: self._d_v]
                self._by_text[seg.transcript] = latent[self._d_v :]

    def dims(self) -> tuple[int, int]:
        return self._d_v, self._d_t

    def embed_image(self, frame_ref: str) -> np.ndarray:
        vec = self._by_frame.get(frame_ref)
        if vec is None:
            raise KeyError(f"frame {frame_ref!r} is not part of this world")
        return vec.copy()

    def embed_text(self, text: str) -> np.ndarray:
        vec = self._by_text.get(text)
        return vec.copy() if vec is not None else np.zeros(self._d_t)


# ---------------------------------------------------------------------------
# session generation + world persistence
# ---------------------------------------------------------------------------

def simulate_user(world: SynthWorld, user_index: int, seed: int = 0) -> SessionRecord:
    """Run one user's full session plus annotation against the mock ports."""
    user = world.users[user_index]
    lm, catalog = mock_ports(world, user_index)
    session = run_session(
        user.profile,
        lm,
        catalog,
        params=SessionParams(l=world.config.l, m=world.config.m),
        seed=derive_seed(seed, "session", user.user_id),
        session_id=user.user_id,
    )
    annotation = annotate_saliency(session, lm, seed=derive_seed(seed, "annotate", user.user_id))
    return SessionRecord(session=session, annotation=annotation)


def simulate_world(world: SynthWorld, seed: int = 0, jobs: int = 1) -> list[SessionRecord]:
    """Sessions for every user, merged in user order regardless of job count."""
    indices = range(len(world.users))
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(lambda i: simulate_user(world, i, seed), indices))
    else:
        records = [simulate_user(world, i, seed) for i in indices]
    return sorted(records, key=lambda r: r.session.session_id)


def save_world(world: SynthWorld, path: str | Path) -> None:
    payload = {
        "format_version": WORLD_FORMAT_VERSION,
        "config": asdict(world.config),
        "topic_names": world.topic_names,
        "anchors": world.anchors.tolist(),
        "subtopic_names": world.subtopic_names,
        "subtopic_latents": world.subtopic_latents.tolist(),
        "users": [
            {
                "user_id": u.user_id,
                "latent": u.latent.tolist(),
                "topic_index": u.topic_index,
                "drift_threshold": u.drift_threshold,
                "profile": {
                    "topic": u.profile.topic,
                    "subtopic": u.profile.subtopic,
                    "intent": u.profile.intent,
                },
            }
            for u in world.users
        ],
        "videos": [
            {
                "video_id": video_id,
                "topic_index": v.topic_index,
                "latent": v.latent.tolist(),
                "segment_latents": v.segment_latents.tolist(),
            }
            for video_id, v in sorted(world.videos.items())
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_world(path: str | Path) -> SynthWorld:
    """Rebuild a world from its dump; records are regenerated from the config.

    The dump stores config + latents. Since generation is deterministic from
    the config, the loaded world is checked against the stored latents rather
    than trusted blindly.
    """
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != WORLD_FORMAT_VERSION:
        raise ValueError(f"unsupported world format version: {version!r}")
    world = generate_world(WorldConfig(**payload["config"]))
    stored_anchors = np.asarray(payload["anchors"])
    if stored_anchors.shape != world.anchors.shape or not np.allclose(
        stored_anchors, world.anchors, atol=1e-12
    ):
        raise ValueError("world dump does not match regenerated world; wrong version or config")
    return world
