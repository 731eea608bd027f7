"""Deterministic train/test splitting, stratified by seed topic."""

from __future__ import annotations

import random
import warnings
from collections.abc import Callable, Sequence
from typing import Any, TypeVar

from ..seeding import derive_seed

T = TypeVar("T")


def _default_topic(record: Any) -> str:
    return record.seed_topic


def split_dataset(
    records: Sequence[T],
    train_fraction: float,
    seed: int,
    topic_of: Callable[[T], str] = _default_topic,
) -> tuple[list[T], list[T]]:
    """Split records into (train, test), stratified by seed topic.

    Every topic contributes round(n * train_fraction) records to train, so
    per-topic ratios stay within 1/n of the requested fraction. The split is
    a function of (records, train_fraction, seed) only; input order is
    preserved within each side. Topics with fewer than 2 records cannot be
    stratified and go to train with a warning.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")

    by_topic: dict[str, list[int]] = {}
    for i, record in enumerate(records):
        by_topic.setdefault(topic_of(record), []).append(i)

    train_idx: set[int] = set()
    for topic in sorted(by_topic):
        indices = by_topic[topic]
        if len(indices) < 2:
            warnings.warn(
                f"topic {topic!r} has fewer than 2 records and cannot be stratified; "
                "assigning to train",
                RuntimeWarning,
                stacklevel=2,
            )
            train_idx.update(indices)
            continue
        rng = random.Random(derive_seed(seed, "split", topic))
        shuffled = indices[:]
        rng.shuffle(shuffled)
        n_train = int(len(indices) * train_fraction + 0.5)
        train_idx.update(shuffled[:n_train])

    train = [records[i] for i in range(len(records)) if i in train_idx]
    test = [records[i] for i in range(len(records)) if i not in train_idx]
    return train, test
