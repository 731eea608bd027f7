"""Evaluation metrics for segment saliency prediction.

Covers ranking quality (average precision, hit@1 at saliency thresholds),
temporal localization (recall@1 at IoU thresholds over extracted moments),
segment selection (F1 at score thresholds), and calibration (RMSE against
ground truth rescaled to [0, 1]).

Conventions, applied everywhere:
  * predicted scores live in [0, 1]; ground-truth scores are integers 1..10
    and are compared on the unit scale as gt/10;
  * ties are broken by ascending segment index;
  * videos on which a metric is undefined (no relevant segment, no ground
    truth moment) are excluded from that metric's mean and counted in the
    report, never silently dropped.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_MAP_THRESHOLD = 7
DEFAULT_HIT_THRESHOLDS = (7, 9)
DEFAULT_IOU_THRESHOLDS = (0.5, 0.7)
DEFAULT_F1_THRESHOLDS = (5, 7)

# Normalized score above which segments join a moment; segments with ground
# truth >= 7 define ground-truth moments (same rule on the gt/10 scale).
DEFAULT_MOMENT_TAU = 0.7

TIE_RULE = "ascending segment index"


@dataclass(frozen=True)
class Moment:
    """A contiguous temporal span scored by its mean predicted saliency."""

    start_s: float
    end_s: float
    score: float

    def __post_init__(self) -> None:
        if not self.start_s < self.end_s:
            raise ValueError(f"moment start {self.start_s} must be < end {self.end_s}")


def _check_lengths(pred: Sequence[float], gt: Sequence[int]) -> None:
    if len(pred) != len(gt):
        raise ValueError(f"pred has {len(pred)} entries but gt has {len(gt)}")
    if not pred:
        raise ValueError("empty score lists")


def _ranking(pred: Sequence[float]) -> list[int]:
    # Descending score, ties by ascending index.
    return sorted(range(len(pred)), key=lambda i: (-pred[i], i))


def average_precision(
    pred: Sequence[float], gt: Sequence[int], salient_threshold: int = DEFAULT_MAP_THRESHOLD
) -> float | None:
    """AP of the predicted ranking against gt >= threshold relevance.

    Returns None when no segment is relevant (the video is excluded from mAP).
    """
    _check_lengths(pred, gt)
    relevant = [gt[i] >= salient_threshold for i in range(len(gt))]
    n_relevant = sum(relevant)
    if n_relevant == 0:
        return None
    hits = 0
    precision_sum = 0.0
    for rank, idx in enumerate(_ranking(pred), start=1):
        if relevant[idx]:
            hits += 1
            precision_sum += hits / rank
    return precision_sum / n_relevant


def hit_at_1(
    pred: Sequence[float], gt: Sequence[int], salient_threshold: int = DEFAULT_MAP_THRESHOLD
) -> int:
    """1 iff the top-ranked segment is salient at the given threshold."""
    _check_lengths(pred, gt)
    top = min(range(len(pred)), key=lambda i: (-pred[i], i))
    return int(gt[top] >= salient_threshold)


def extract_moments(
    pred: Sequence[float],
    segment_spans: Sequence[tuple[float, float]],
    tau: float = DEFAULT_MOMENT_TAU,
) -> list[Moment]:
    """Group segments scoring >= tau into maximal contiguous moments.

    Moments are scored by the mean prediction over their segments and ranked
    descending (ties by earlier start). When no segment reaches tau, a single
    fallback moment covering the argmax segment is returned, so the result is
    never empty.
    """
    if len(pred) != len(segment_spans):
        raise ValueError(f"{len(pred)} scores but {len(segment_spans)} spans")
    if not pred:
        raise ValueError("empty score list")

    moments: list[Moment] = []
    run_start: int | None = None
    for i in range(len(pred) + 1):
        above = i < len(pred) and pred[i] >= tau
        if above and run_start is None:
            run_start = i
        elif not above and run_start is not None:
            scores = pred[run_start:i]
            moments.append(
                Moment(
                    start_s=segment_spans[run_start][0],
                    end_s=segment_spans[i - 1][1],
                    score=sum(scores) / len(scores),
                )
            )
            run_start = None

    if not moments:
        top = min(range(len(pred)), key=lambda i: (-pred[i], i))
        return [Moment(segment_spans[top][0], segment_spans[top][1], pred[top])]
    moments.sort(key=lambda m: (-m.score, m.start_s))
    return moments


def temporal_iou(a: Moment, b: Moment) -> float:
    """Overlap length divided by union length of two temporal spans."""
    overlap = max(0.0, min(a.end_s, b.end_s) - max(a.start_s, b.start_s))
    union = (a.end_s - a.start_s) + (b.end_s - b.start_s) - overlap
    return overlap / union if union > 0 else 0.0


def gt_moments(
    gt: Sequence[int],
    segment_spans: Sequence[tuple[float, float]],
    tau: float = DEFAULT_MOMENT_TAU,
) -> list[Moment]:
    """Ground-truth moments: runs of segments with gt/10 >= tau (i.e. gt >= 7).

    Unlike prediction-side extraction there is no fallback: a video whose
    ground truth never reaches the bar has no moment and is excluded from
    recall.
    """
    if len(gt) != len(segment_spans):
        raise ValueError(f"{len(gt)} scores but {len(segment_spans)} spans")
    unit = [g / 10.0 for g in gt]
    if max(unit) < tau:
        return []
    return extract_moments(unit, segment_spans, tau)


def recall_at_1(
    pred_moments: Sequence[Moment], gt_moments: Sequence[Moment], iou_threshold: float
) -> int | None:
    """1 iff the top predicted moment overlaps any gt moment at >= threshold IoU.

    Returns None when there are no ground-truth moments (video excluded).
    """
    if not gt_moments:
        return None
    if not pred_moments:
        return 0
    top = pred_moments[0]
    return int(any(temporal_iou(top, m) >= iou_threshold for m in gt_moments))


def f1_at(pred: Sequence[float], gt: Sequence[int], t: int) -> float:
    """F1 between {i: pred[i] >= t/10} and {i: gt[i] >= t}.

    Both sets empty counts as perfect vacuous agreement (1.0); the aggregate
    report tracks how often that happens.
    """
    _check_lengths(pred, gt)
    threshold = t / 10.0
    pred_set = {i for i, p in enumerate(pred) if p >= threshold}
    gt_set = {i for i, g in enumerate(gt) if g >= t}
    if not pred_set and not gt_set:
        return 1.0
    overlap = len(pred_set & gt_set)
    return 2.0 * overlap / (len(pred_set) + len(gt_set))


def rmse(pred: Sequence[float], gt: Sequence[int]) -> float:
    """Root mean squared error between pred and gt/10 over one video."""
    _check_lengths(pred, gt)
    total = sum((p - g / 10.0) ** 2 for p, g in zip(pred, gt))
    return (total / len(pred)) ** 0.5


# ---------------------------------------------------------------------------
# dataset-level aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VideoScores:
    """Input row for evaluation: predictions + ground truth for one video."""

    video_id: str
    pred: tuple[float, ...]
    gt: tuple[int, ...]
    spans: tuple[tuple[float, float], ...]


@dataclass
class EvaluationReport:
    """Per-metric means plus per-video values and exclusion counts."""

    config: dict
    means: dict
    per_video: list[dict] = field(default_factory=list)
    excluded: dict = field(default_factory=dict)
    n_videos: int = 0

    def to_json(self) -> str:
        payload = {
            "config": self.config,
            "means": self.means,
            "excluded": self.excluded,
            "n_videos": self.n_videos,
            "per_video": self.per_video,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


def evaluate(
    videos: Iterable[VideoScores],
    map_threshold: int = DEFAULT_MAP_THRESHOLD,
    hit_thresholds: Sequence[int] = DEFAULT_HIT_THRESHOLDS,
    iou_thresholds: Sequence[float] = DEFAULT_IOU_THRESHOLDS,
    f1_thresholds: Sequence[int] = DEFAULT_F1_THRESHOLDS,
    moment_tau: float = DEFAULT_MOMENT_TAU,
) -> EvaluationReport:
    """Run every metric over a collection of scored videos."""
    collected: dict[str, list[float]] = {}
    per_video: list[dict] = []
    excluded = {"map": 0, "recall": 0, "f1_vacuous": 0}
    n = 0

    for video in videos:
        n += 1
        row: dict = {"video_id": video.video_id}

        ap = average_precision(video.pred, video.gt, map_threshold)
        if ap is None:
            excluded["map"] += 1
        else:
            collected.setdefault("mAP", []).append(ap)
        row["ap"] = ap

        for k in hit_thresholds:
            value = hit_at_1(video.pred, video.gt, k)
            collected.setdefault(f"hit1@{k}", []).append(float(value))
            row[f"hit1@{k}"] = value

        pred_moments = extract_moments(video.pred, video.spans, moment_tau)
        truth = gt_moments(video.gt, video.spans, moment_tau)
        recall_defined = bool(truth)
        if not recall_defined:
            excluded["recall"] += 1
        for alpha in iou_thresholds:
            value = recall_at_1(pred_moments, truth, alpha)
            row[f"r1@{alpha}"] = value
            if value is not None:
                collected.setdefault(f"r1@{alpha}", []).append(float(value))

        vacuous = False
        for t in f1_thresholds:
            value = f1_at(video.pred, video.gt, t)
            collected.setdefault(f"f1@{t}", []).append(value)
            row[f"f1@{t}"] = value
            threshold = t / 10.0
            if not any(p >= threshold for p in video.pred) and not any(
                g >= t for g in video.gt
            ):
                vacuous = True
        if vacuous:
            excluded["f1_vacuous"] += 1

        value = rmse(video.pred, video.gt)
        collected.setdefault("rmse", []).append(value)
        row["rmse"] = value

        per_video.append(row)

    means = {name: _mean(values) for name, values in sorted(collected.items())}
    config = {
        "map_threshold": map_threshold,
        "hit_thresholds": list(hit_thresholds),
        "iou_thresholds": list(iou_thresholds),
        "f1_thresholds": list(f1_thresholds),
        "moment_tau": moment_tau,
        "tie_rule": TIE_RULE,
    }
    return EvaluationReport(
        config=config, means=means, per_video=per_video, excluded=excluded, n_videos=n
    )
