"""Simulation engine: prompt rendering, parsing, fallbacks, sessions,
annotation, and the shipped port adapters."""

import io
import json
import re

import pytest

from conftest import ScriptedLM, make_meta, make_profile, make_session, make_video
from hippo.core.io import record_to_dict, write_session
from hippo.core.types import RetrievalDecision, SeedProfile
from hippo.simulator.engine import (
    AnnotationError,
    MostWantedUnavailable,
    NO_REVIEW_PLACEHOLDER,
    RetrievalError,
    SessionParams,
    SimulationError,
    annotate_saliency,
    bootstrap_query,
    decide_retrieval,
    initial_preference,
    retrieve_candidates,
    run_session,
    select_videos,
    update_preference,
    watch_video,
)
from hippo.simulator.ports import API_KEY_ENV, HttpLanguageModel, build_fixture_catalog
from hippo.simulator.prompts import (
    TEMPLATE_NAMES,
    TemplateError,
    format_profile,
    format_video_list,
    load_template,
    render,
)

PROFILE = make_profile(likes=("likes dogs",), dislikes=("dislikes noise",), turn=2)


class TestTemplates:
    def test_all_templates_load(self):
        for name in TEMPLATE_NAMES:
            assert load_template(name)

    def test_rendering_is_total(self):
        rendered = render(
            "retrieval",
            {
                "intent": "informative",
                "search query": "dog training",
                "watch history": format_video_list([make_meta("a"), make_meta("b")]),
                "preference": format_profile(PROFILE),
                "related videos": format_video_list([]),
            },
        )
        assert not re.search(r"\{[a-z_ ]+\}", rendered)
        assert "dog training" in rendered

    def test_missing_fill_rejected(self):
        with pytest.raises(TemplateError, match="watch history"):
            render("retrieval", {"intent": "amusing"})

    def test_selection_template_keeps_one_based_instruction(self):
        assert "Index starts from 1." in load_template("selection")

    def test_scoring_template_keeps_output_format(self):
        assert "Clip ID: clip_0, Score: 8" in load_template("scoring")


class TestDecideRetrieval:
    def _related(self):
        return [make_meta("r1"), make_meta("r2")]

    def test_explore_parsed(self):
        lm = ScriptedLM(["Decision: [Explore]"])
        decision = decide_retrieval(
            [], PROFILE, self._related(), lm, seed=5, intent="amusing", current_query="dogs"
        )
        assert decision == RetrievalDecision(mode="explore")
        assert lm.calls[0][1] == 5

    def test_new_query_parsed(self):
        lm = ScriptedLM(
            ["Decision: [Search for a new query]\nNew query: [dog agility training]"]
        )
        decision = decide_retrieval(
            [], PROFILE, self._related(), lm, seed=0, intent="amusing", current_query="dogs"
        )
        assert decision == RetrievalDecision(mode="new_query", query="dog agility training")

    def test_gibberish_retries_then_defaults_to_explore(self):
        lm = ScriptedLM(["maybe explore?", "maybe explore?"])
        warnings = []
        decision = decide_retrieval(
            [],
            PROFILE,
            self._related(),
            lm,
            seed=9,
            intent="amusing",
            current_query="dogs",
            warnings=warnings,
        )
        assert decision.mode == "explore"
        assert [seed for _, seed in lm.calls] == [9, 10]  # retry uses seed + 1
        assert any("retry" in w or "default" in w for w in warnings)


class TestRetrieveCandidates:
    class Catalog:
        def __init__(self, search_result=(), related_result=()):
            self.search_result = list(search_result)
            self.related_result = list(related_result)
            self.queries = []

        def search(self, query, limit):
            self.queries.append(query)
            return self.search_result[:limit]

        def related(self, video_id, limit):
            return self.related_result[:limit]

        def fetch(self, video_id):
            raise KeyError(video_id)

    def test_new_query_passthrough(self):
        metas = [make_meta(f"v{i}") for i in range(8)]
        catalog = self.Catalog(search_result=metas)
        got = retrieve_candidates(
            RetrievalDecision(mode="new_query", query="cat grooming"), None, catalog, 8
        )
        assert got == metas

    def test_explore_dedups_watched(self):
        v3, v7 = make_meta("v3"), make_meta("v7")
        catalog = self.Catalog(related_result=[v3, v7])
        got = retrieve_candidates(
            RetrievalDecision(mode="explore"),
            v3,
            catalog,
            8,
            watched_ids=("v3",),
        )
        assert got == [v7]

    def test_empty_pool_falls_back_to_seed_query(self):
        metas = [make_meta("fresh")]

        class FallbackCatalog(self.Catalog):
            def search(self, query, limit):
                self.queries.append(query)
                return metas if query == "topic sub" else []

        catalog = FallbackCatalog()
        warnings = []
        got = retrieve_candidates(
            RetrievalDecision(mode="new_query", query="nothing matches"),
            None,
            catalog,
            8,
            seed_topic="topic",
            seed_subtopic="sub",
            warnings=warnings,
        )
        assert got == metas
        assert catalog.queries == ["nothing matches", "topic sub"]
        assert warnings

    def test_empty_catalog_aborts(self):
        catalog = self.Catalog()
        with pytest.raises(RetrievalError):
            retrieve_candidates(
                RetrievalDecision(mode="new_query", query="x"),
                None,
                catalog,
                8,
                seed_topic="t",
                seed_subtopic="s",
            )


SELECTION_COMPLETION = (
    "Most Wanted: [2]\n"
    "Explanation: [matches my dog interest]\n\n"
    "Least Wanted: [5]\n"
    "Explanation: [off-topic]\n"
)


class TestSelectVideos:
    CANDIDATES = [make_meta(f"c{i}") for i in range(8)]

    def test_one_based_indices_converted(self):
        lm = ScriptedLM([SELECTION_COMPLETION])
        sel = select_videos(self.CANDIDATES, [], PROFILE, "dogs", lm, seed=0)
        assert (sel.most, sel.least) == (1, 4)
        assert sel.choose_reason == "matches my dog interest"
        assert sel.reject_reason == "off-topic"

    def test_none_most_raises(self):
        lm = ScriptedLM(["Most Wanted: [None]\nExplanation: [nothing fits]"])
        with pytest.raises(MostWantedUnavailable):
            select_videos(self.CANDIDATES, [], PROFILE, "dogs", lm, seed=0)

    def test_out_of_range_most_raises(self):
        lm = ScriptedLM(["Most Wanted: [9]\nExplanation: [x]"])
        with pytest.raises(MostWantedUnavailable, match="out of range"):
            select_videos(self.CANDIDATES, [], PROFILE, "dogs", lm, seed=0)

    def test_none_least_records_empty_reject_reason(self):
        lm = ScriptedLM(["Most Wanted: [1]\nExplanation: [good]\nLeast Wanted: [None]"])
        warnings = []
        sel = select_videos(self.CANDIDATES, [], PROFILE, "dogs", lm, seed=0, warnings=warnings)
        assert sel.least is None
        assert sel.reject_reason == ""
        assert warnings

    def test_recent3_limit_enforced(self):
        lm = ScriptedLM([SELECTION_COMPLETION])
        with pytest.raises(ValueError, match="3"):
            select_videos(self.CANDIDATES, [make_meta(f"h{i}") for i in range(4)], PROFILE, "q", lm, 0)


class TestWatchVideo:
    def test_review_returned_verbatim(self):
        lm = ScriptedLM(["A summary. An opinion."])
        assert watch_video(make_video(), PROFILE, lm, seed=0) == "A summary. An opinion."

    def test_renders_caption_transcript_pairs(self):
        lm = ScriptedLM(["ok"])
        video = make_video(n_segments=2, captions=["cap A", "cap B"], transcripts=["t A", "t B"])
        watch_video(video, PROFILE, lm, seed=0)
        prompt = lm.calls[0][0]
        assert "cap A" in prompt and "t B" in prompt

    def test_empty_captions_still_render(self):
        lm = ScriptedLM(["fine"])
        video = make_video(n_segments=2, captions=["", ""], transcripts=["talk 1", "talk 2"])
        assert watch_video(video, PROFILE, lm, seed=0) == "fine"

    def test_empty_twice_gives_placeholder_and_warning(self):
        lm = ScriptedLM(["", "  "])
        warnings = []
        review = watch_video(make_video(), PROFILE, lm, seed=3, warnings=warnings)
        assert review == NO_REVIEW_PLACEHOLDER
        assert [seed for _, seed in lm.calls] == [3, 4]
        assert warnings


UPDATE_COMPLETION = """Here are my refreshed preferences.
[Likes]
- likes dogs
- likes agility courses
- likes training montages
[Dislikes]
- dislikes clickbait
"""


class TestUpdatePreference:
    def test_sections_replace_profile(self):
        lm = ScriptedLM([UPDATE_COMPLETION])
        before = make_profile(likes=("likes dogs",), turn=4)
        after = update_preference(before, ["review"], "r1", "r2", lm, seed=0)
        assert after.likes == (
            "likes dogs",
            "likes agility courses",
            "likes training montages",
        )
        assert after.dislikes == ("dislikes clickbait",)
        assert after.turn == 5

    def test_over_cap_keeps_most_recent(self):
        bullets = "\n".join(f"- like {i}" for i in range(15))
        lm = ScriptedLM([f"[Likes]\n{bullets}\n[Dislikes]\n"])
        warnings = []
        after = update_preference(make_profile(turn=0), [], "", "", lm, seed=0, warnings=warnings)
        assert len(after.likes) == 12
        assert after.likes[0] == "like 3"  # earliest three evicted
        assert warnings

    def test_gibberish_carries_profile_forward(self):
        lm = ScriptedLM(["no bullets here", "still nothing"])
        before = make_profile(likes=("likes dogs",), dislikes=("dislikes ads",), turn=1)
        warnings = []
        after = update_preference(before, [], "", "", lm, seed=0, warnings=warnings)
        assert after.likes == before.likes
        assert after.dislikes == before.dislikes
        assert after.turn == 2
        assert warnings


def _world_lm():
    """Scripted responses keyed by prompt family, enough for a full session."""

    def respond(prompt, seed):
        if '"Explore" or "Search for a new query"' in prompt:
            return "Decision: [Explore]"
        if "Candidate Videos:" in prompt:
            return "Most Wanted: [1]\nExplanation: [best]\nLeast Wanted: [2]\nExplanation: [worst]"
        if "Write your summary of the video" in prompt:
            return f"Summary with seed {seed}. Opinion follows."
        if "re-define your preferences" in prompt:
            return "[Likes]\n- likes topic\n[Dislikes]\n- dislikes filler"
        raise AssertionError(f"unexpected prompt: {prompt[:80]}")

    return ScriptedLM([respond])


class SequentialCatalog:
    """Deterministic catalog handing out fresh videos; optionally runs dry."""

    def __init__(self, total=40, dry_after=None):
        self.videos = {f"v{i:03d}": make_video(f"v{i:03d}") for i in range(total)}
        self.order = sorted(self.videos)
        self.dry_after = dry_after
        self.calls = 0

    def _page(self, limit):
        self.calls += 1
        if self.dry_after is not None and self.calls > self.dry_after:
            return []
        return [self.videos[v].meta for v in self.order[:limit]]

    def search(self, query, limit):
        return self._page(limit)

    def related(self, video_id, limit):
        start = self.order.index(video_id) + 1
        self.calls += 1
        if self.dry_after is not None and self.calls > self.dry_after:
            return []
        return [self.videos[v].meta for v in self.order[start : start + limit]]

    def fetch(self, video_id):
        return self.videos[video_id]


SEED_PROFILE = SeedProfile(topic="canines", subtopic="agility", intent="informative")


class TestRunSession:
    def test_full_session_shape(self):
        session = run_session(SEED_PROFILE, _world_lm(), SequentialCatalog(), seed=1)
        assert len(session.turns) == 10
        assert session.turns[0].decision == RetrievalDecision(
            mode="new_query", query="informative canines agility"
        )
        chosen = [t.chosen.meta.video_id for t in session.turns]
        assert len(set(chosen)) == 10  # no rewatching
        for turn in session.turns:
            assert any(c == turn.chosen.meta for c in turn.candidates)
        assert [t.preference_after.turn for t in session.turns] == list(range(1, 11))
        assert session.final_preference == session.turns[-1].preference_after

    def test_byte_identical_reruns(self):
        def serialized():
            session = run_session(SEED_PROFILE, _world_lm(), SequentialCatalog(), seed=42)
            lm = ScriptedLM(
                [
                    "\n".join(
                        f"- Clip ID: clip_{k}, Score: {5 + (k % 3)}, Justification: \"j\""
                        for k in range(3)
                    )
                ]
            )
            annotation = annotate_saliency(session, lm, seed=7)
            sink = io.BytesIO()
            write_session(session, annotation, sink)
            return sink.getvalue()

        assert serialized() == serialized()

    def test_catalog_running_dry_names_the_turn(self):
        catalog = SequentialCatalog(total=40, dry_after=8)  # two calls per turn
        with pytest.raises(SimulationError) as excinfo:
            run_session(SEED_PROFILE, _world_lm(), catalog, seed=0)
        assert excinfo.value.turn == 5
        assert "turn 5" in str(excinfo.value)
        assert excinfo.value.completed_turns == 4

    def test_most_wanted_unavailable_regenerates_bootstrap_query(self):
        state = {"selections": 0}

        def respond(prompt, seed):
            if '"Explore" or "Search for a new query"' in prompt:
                return "Decision: [Explore]"
            if "Candidate Videos:" in prompt:
                state["selections"] += 1
                if state["selections"] == 2:  # second turn's first attempt fails
                    return "Most Wanted: [None]"
                return "Most Wanted: [1]\nExplanation: [ok]\nLeast Wanted: [None]"
            if "Write your summary" in prompt:
                return "Review."
            return "[Likes]\n- a\n[Dislikes]\n- b"

        session = run_session(
            SEED_PROFILE, ScriptedLM([respond]), SequentialCatalog(), params=SessionParams(m=3), seed=0
        )
        assert len(session.turns) == 3
        assert any("regenerating query" in w for w in session.turns[1].warnings)

    def test_initial_preference_seeds_from_profile(self):
        profile = initial_preference(SEED_PROFILE)
        assert profile.turn == 0
        assert "canines" in profile.likes[0] and "agility" in profile.likes[0]
        assert bootstrap_query(SEED_PROFILE) == "informative canines agility"


class TestAnnotateSaliency:
    def _scoring_lm(self, lines):
        return ScriptedLM(["\n".join(lines)])

    def test_scores_parsed_in_clip_order(self):
        session = make_session(n_turns=2, n_segments=5)
        lm = self._scoring_lm(
            [
                '- Clip ID: clip_0, Score: 8, Justification: "a"',
                '- Clip ID: clip_1, Score: 5, Justification: "b"',
                '- Clip ID: clip_2, Score: 9, Justification: "c"',
                '- Clip ID: clip_3, Score: 3, Justification: "d"',
                '- Clip ID: clip_4, Score: 6, Justification: "e"',
            ]
        )
        annotation = annotate_saliency(session, lm, seed=0)
        assert annotation.scores == (8, 5, 9, 3, 6)
        assert annotation.justifications == ("a", "b", "c", "d", "e")
        prompt = lm.calls[0][0]
        assert "review of v01" in prompt  # reviews included
        assert "likes topic 2" in prompt  # final preference included

    def test_out_of_range_clamped_with_warning(self):
        session = make_session(n_turns=2, n_segments=2)
        completion = (
            '- Clip ID: clip_0, Score: 11, Justification: "over"\n'
            '- Clip ID: clip_1, Score: 4, Justification: "ok"'
        )
        lm = ScriptedLM([completion, completion])
        annotation = annotate_saliency(session, lm, seed=0)
        assert annotation.scores == (10, 4)
        assert any("clamped" in w for w in annotation.warnings)
        assert len(lm.calls) == 2  # one retry before clamping

    def test_missing_clip_twice_is_an_error(self):
        session = make_session(n_turns=2, n_segments=3)
        completion = (
            '- Clip ID: clip_0, Score: 5, Justification: "x"\n'
            '- Clip ID: clip_1, Score: 5, Justification: "y"'
        )
        lm = ScriptedLM([completion, completion])
        with pytest.raises(AnnotationError, match="clip_2"):
            annotate_saliency(session, lm, seed=0)


class TestHttpLanguageModel:
    def test_posts_prompt_and_reads_completion(self, monkeypatch):
        captured = {}

        class FakeResponse:
            def read(self):
                return json.dumps({"completion": "Decision: [Explore]"}).encode()

            def __enter__(self):
                return self

            def __exit__(self, *args):
                return False

        def fake_urlopen(request, timeout):
            captured["url"] = request.full_url
            captured["body"] = json.loads(request.data.decode())
            captured["auth"] = request.get_header("Authorization")
            captured["timeout"] = timeout
            return FakeResponse()

        monkeypatch.setenv(API_KEY_ENV, "sk-test")
        monkeypatch.setattr("urllib.request.urlopen", fake_urlopen)
        lm = HttpLanguageModel("http://llm.example/api/", model="m1")
        assert lm.complete("hello", seed=4) == "Decision: [Explore]"
        assert captured["url"] == "http://llm.example/api/complete"
        assert captured["body"] == {"model": "m1", "prompt": "hello", "seed": 4}
        assert captured["auth"] == "Bearer sk-test"


class TestFixtureCatalog:
    def _build(self, tmp_path):
        records = [make_video(f"vid-{name}") for name in ("dog", "cat", "bird")]
        keywords = {
            "dogs": ["vid-dog"],
            "pets": ["vid-dog", "vid-cat", "vid-bird"],
            "cats": ["vid-cat"],
        }
        return build_fixture_catalog(tmp_path / "catalog", records, keywords)

    def test_search_ranks_by_keyword_hits(self, tmp_path):
        catalog = self._build(tmp_path)
        results = catalog.search("dogs pets", limit=8)
        assert results[0].video_id == "vid-dog"  # two keyword hits
        assert {m.video_id for m in results} == {"vid-dog", "vid-cat", "vid-bird"}

    def test_limit_respected(self, tmp_path):
        catalog = self._build(tmp_path)
        assert len(catalog.search("pets", limit=2)) == 2

    def test_related_shares_keywords(self, tmp_path):
        catalog = self._build(tmp_path)
        related = catalog.related("vid-dog", limit=8)
        assert "vid-dog" not in [m.video_id for m in related]
        assert related  # cat and bird share the "pets" keyword

    def test_fetch_round_trips_record(self, tmp_path):
        catalog = self._build(tmp_path)
        record = catalog.fetch("vid-cat")
        assert record_to_dict(record) == record_to_dict(make_video("vid-cat"))

    def test_fetch_unknown_id(self, tmp_path):
        catalog = self._build(tmp_path)
        with pytest.raises(KeyError):
            catalog.fetch("vid-missing")
