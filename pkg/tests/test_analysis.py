"""Exploration ratio, score statistics, and the embedding export."""

import numpy as np
import pytest

import oracles
from conftest import make_annotation, make_profile, make_session
from hippo.analysis import (
    export_history_embeddings,
    exploration_ratio,
    score_stats,
    write_embedding_table,
    write_stats_table,
)
from hippo.core.types import RetrievalDecision, TurnRecord, WatchSession


def _session_with_decisions(decisions):
    """decisions: list for turns 2..m of either 'explore' or a query string."""
    base = make_session(n_turns=len(decisions) + 1)
    turns = [base.turns[0]]
    for turn, decision in zip(base.turns[1:], decisions):
        new_decision = (
            RetrievalDecision(mode="explore")
            if decision == "explore"
            else RetrievalDecision(mode="new_query", query=decision)
        )
        turns.append(
            TurnRecord(
                decision=new_decision,
                candidates=turn.candidates,
                chosen=turn.chosen,
                rejected=turn.rejected,
                choose_reason=turn.choose_reason,
                reject_reason=turn.reject_reason,
                review=turn.review,
                preference_after=turn.preference_after,
            )
        )
    return WatchSession(
        session_id=base.session_id,
        seed_topic=base.seed_topic,
        seed_subtopic=base.seed_subtopic,
        intent=base.intent,
        turns=tuple(turns),
        final_preference=turns[-1].preference_after,
    )


class TestExplorationRatio:
    def test_mixed_session(self):
        # turn 1 bootstrap; 6 explores; 3 distinctly new queries -> 3/9
        decisions = ["explore"] * 6 + [
            "quantum computing basics",
            "sourdough hydration math",
            "medieval falconry gear",
        ]
        session = _session_with_decisions(decisions)
        assert exploration_ratio(session) == pytest.approx(3 / 9)

    def test_all_explore_is_zero(self):
        session = _session_with_decisions(["explore"] * 9)
        assert exploration_ratio(session) == 0.0

    def test_all_distinct_queries_is_one(self):
        session = _session_with_decisions([f"totally different topic {i} {'abcdefghij'[i]}" for i in range(9)])
        assert exploration_ratio(session) == 1.0

    def test_near_duplicate_queries_do_not_count(self):
        # bootstrap query is "informative topic sub1" (from make_session)
        session = _session_with_decisions(["informative topic sub2"])
        assert exploration_ratio(session) == 0.0

    def test_single_turn_undefined(self):
        with pytest.raises(ValueError):
            exploration_ratio(make_session(n_turns=1))


class TestScoreStats:
    def test_flat(self):
        session = make_session(n_turns=2)
        assert score_stats(make_annotation(session, scores=[5, 5, 5])) == (5.0, 0.0)

    def test_symmetric_pair(self):
        session = make_session(n_turns=2, n_segments=2)
        assert score_stats(make_annotation(session, scores=[2, 8])) == (5.0, 3.0)

    def test_population_formula(self):
        session = make_session(n_turns=2)
        mean, std = score_stats(make_annotation(session, scores=[4, 6, 8]))
        assert mean == pytest.approx(6.0)
        assert std == pytest.approx((8 / 3) ** 0.5)

    def test_matches_naive_on_random_inputs(self):
        rng = np.random.default_rng(2)
        session = make_session(n_turns=2, n_segments=12)
        for _ in range(100):
            scores = [int(x) for x in rng.integers(1, 11, size=12)]
            mean, std = score_stats(make_annotation(session, scores=scores))
            assert mean == pytest.approx(sum(scores) / 12, abs=1e-12)
            assert std == pytest.approx(oracles.naive_std(scores), abs=1e-12)


class VisualOnlyProvider:
    provider_id = "visual-only"

    def __init__(self, mapping):
        self.mapping = mapping

    def dims(self):
        return 2, 2

    def embed_image(self, frame_ref):
        return np.array(self.mapping[frame_ref], dtype=float)

    def embed_text(self, text):
        raise AssertionError("embedding export must not touch the text encoder")


class TestEmbeddingExport:
    def test_mean_of_video_means_visual_only(self):
        session = make_session(n_turns=2, n_segments=1)
        frames = {
            session.turns[0].chosen.segments[0].frame_ref: [1.0, 0.0],
            session.turns[1].chosen.segments[0].frame_ref: [0.0, 1.0],
        }
        rows = export_history_embeddings([session], VisualOnlyProvider(frames))
        assert len(rows) == 1
        assert rows[0][0] == session.session_id
        assert rows[0][1].tolist() == [0.5, 0.5]

    def test_permuted_video_order_gives_identical_vector(self):
        session = make_session(n_turns=3, n_segments=1)
        reversed_session = WatchSession(
            session_id=session.session_id,
            seed_topic=session.seed_topic,
            seed_subtopic=session.seed_subtopic,
            intent=session.intent,
            turns=tuple(
                TurnRecord(
                    decision=t.decision if i == 0 else RetrievalDecision(mode="explore"),
                    candidates=t.candidates,
                    chosen=t.chosen,
                    rejected=t.rejected,
                    choose_reason=t.choose_reason,
                    reject_reason=t.reject_reason,
                    review=t.review,
                    preference_after=make_profile(turn=i + 1),
                )
                for i, t in enumerate(reversed(session.turns))
            ),
            final_preference=make_profile(turn=3),
        )
        frames = {
            s.frame_ref: [float(i), 1.0 - float(i) / 3]
            for i, t in enumerate(session.turns)
            for s in t.chosen.segments
        }
        provider = VisualOnlyProvider(frames)
        forward = export_history_embeddings([session], provider)[0][1]
        backward = export_history_embeddings([reversed_session], provider)[0][1]
        assert np.allclose(forward, backward, atol=1e-12)

    def test_failed_session_skipped_with_warning(self):
        good = make_session(n_turns=2, n_segments=1, session_id="good")
        bad = make_session(n_turns=2, n_segments=3, session_id="bad")
        # only the 1-segment videos have frames; bad's extra segments miss
        frames = {s.frame_ref: [1.0, 0.0] for t in good.turns for s in t.chosen.segments}
        with pytest.warns(RuntimeWarning, match="bad"):
            rows = export_history_embeddings([good, bad], VisualOnlyProvider(frames))
        assert [r[0] for r in rows] == ["good"]

    def test_tables_written(self, tmp_path):
        rows = [("s1", np.array([0.5, 0.25]))]
        write_embedding_table(rows, tmp_path / "emb.tsv")
        assert (tmp_path / "emb.tsv").read_text() == "s1\t0.5\t0.25\n"
        write_stats_table([("s1", 0.5, 6.0, 1.5)], tmp_path / "stats.tsv")
        lines = (tmp_path / "stats.tsv").read_text().splitlines()
        assert lines[0].startswith("session_id")
        assert lines[1].startswith("s1\t0.5")
