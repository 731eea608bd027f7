"""Port interfaces the simulation engine talks to, plus shipped adapters.

The engine only ever sees a language model that completes prompts and a video
catalog that searches, relates, and fetches. Adapters here: an HTTP language
model client and an offline directory-backed catalog fixture.
"""

from __future__ import annotations

import json
import os
import re
import urllib.request
from pathlib import Path
from typing import Protocol

from ..core.io import record_from_dict, record_to_dict
from ..core.types import VideoMeta, VideoRecord

API_KEY_ENV = "HIPPO_LLM_API_KEY"


class LanguageModelPort(Protocol):
    """Single-turn completion. Mocks must be deterministic per (prompt, seed)."""

    def complete(self, prompt: str, seed: int) -> str: ...


class VideoCatalogPort(Protocol):
    """Video lookup. ``fetch`` must succeed for any id returned by the others."""

    def search(self, query: str, limit: int) -> list[VideoMeta]: ...

    def related(self, video_id: str, limit: int) -> list[VideoMeta]: ...

    def fetch(self, video_id: str) -> VideoRecord: ...


class FrameCaptionerPort(Protocol):
    """Optional upstream adapter turning a frame reference into a caption."""

    def caption(self, frame_ref: str) -> str: ...


class TranscriberPort(Protocol):
    """Optional upstream adapter producing a transcript for a segment span."""

    def transcribe(self, video_id: str, start_s: float, end_s: float) -> str: ...


class HttpLanguageModel:
    """Talks to a completion endpoint: POST {base_url}/complete.

    Request body: {"model", "prompt", "seed"}; response: {"completion": str}.
    Credentials come from the HIPPO_LLM_API_KEY environment variable and are
    sent as a bearer token when present.
    """

    def __init__(self, base_url: str, model: str = "default", timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.timeout_s = timeout_s

    def complete(self, prompt: str, seed: int) -> str:
        body = json.dumps({"model": self.model, "prompt": prompt, "seed": seed})
        request = urllib.request.Request(
            f"{self.base_url}/complete",
            data=body.encode("utf-8"),
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        api_key = os.environ.get(API_KEY_ENV)
        if api_key:
            request.add_header("Authorization", f"Bearer {api_key}")
        with urllib.request.urlopen(request, timeout=self.timeout_s) as response:
            payload = json.loads(response.read().decode("utf-8"))
        if "completion" not in payload:
            raise RuntimeError("language model endpoint returned no 'completion' field")
        return payload["completion"]


def _tokens(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


class FixtureCatalog:
    """Offline catalog: a directory of video record files plus a search index.

    Layout::

        root/
          index.json          {"keywords": {token: [video_id, ...]}}
          videos/<id>.json    one VideoRecord per file

    Search ranks videos by how many query tokens hit their keywords; related
    videos are those sharing the most index keywords with the source.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        index_path = self.root / "index.json"
        if not index_path.exists():
            raise FileNotFoundError(f"catalog index not found: {index_path}")
        index = json.loads(index_path.read_text(encoding="utf-8"))
        self._keywords: dict[str, list[str]] = index.get("keywords", {})
        self._keywords_of: dict[str, set[str]] = {}
        for token, ids in self._keywords.items():
            for video_id in ids:
                self._keywords_of.setdefault(video_id, set()).add(token)
        self._records: dict[str, VideoRecord] = {}

    def _rank(self, scores: dict[str, int], limit: int) -> list[VideoMeta]:
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        return [self.fetch(video_id).meta for video_id, score in ranked[:limit] if score > 0]

    def search(self, query: str, limit: int) -> list[VideoMeta]:
        scores: dict[str, int] = {}
        for token in _tokens(query):
            for video_id in self._keywords.get(token, []):
                scores[video_id] = scores.get(video_id, 0) + 1
        return self._rank(scores, limit)

    def related(self, video_id: str, limit: int) -> list[VideoMeta]:
        source = self._keywords_of.get(video_id, set())
        scores: dict[str, int] = {}
        for other, keywords in self._keywords_of.items():
            if other != video_id:
                scores[other] = len(source & keywords)
        return self._rank(scores, limit)

    def fetch(self, video_id: str) -> VideoRecord:
        if video_id not in self._records:
            path = self.root / "videos" / f"{video_id}.json"
            if not path.exists():
                raise KeyError(f"video {video_id!r} not in catalog")
            self._records[video_id] = record_from_dict(
                json.loads(path.read_text(encoding="utf-8")), path=video_id
            )
        return self._records[video_id]


def build_fixture_catalog(
    root: str | Path, records: list[VideoRecord], keywords: dict[str, list[str]]
) -> FixtureCatalog:
    """Write a fixture catalog directory and return it opened."""
    root = Path(root)
    (root / "videos").mkdir(parents=True, exist_ok=True)
    for record in records:
        path = root / "videos" / f"{record.meta.video_id}.json"
        path.write_text(
            json.dumps(record_to_dict(record), sort_keys=True, indent=2), encoding="utf-8"
        )
    (root / "index.json").write_text(
        json.dumps({"keywords": keywords}, sort_keys=True, indent=2), encoding="utf-8"
    )
    return FixtureCatalog(root)
