"""
Reading learned expressions: which features they use, how large they are, what those features look like per class,
and how faithfully a symbolic student reproduces another model's labels.
"""

import logging

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .data import LABEL_NAMES, SplitSpec, split
from .errors import DimensionError
from .exprtree import feature_indices, predict_label
from .genetic import evolve

__all__ = [
    'DistillationResult',
    'FeatureCountRanking',
    'FeatureSummary',
    'LengthStats',
    'distill',
    'feature_counts',
    'feature_summary',
    'fidelity',
    'length_stats',
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FeatureCountRanking:
    """``(feature_name, count)`` pairs, most frequent first, ties in name order."""

    entries: tuple
    per_expression: bool = False

    @property
    def total(self):
        return sum(count for _, count in self.entries)

    def top(self, k):
        return self.entries[:k]

    def rows(self):
        return [{'rank': rank, 'feature': name, 'count': count}
                for rank, (name, count) in enumerate(self.entries, start=1)]


def feature_counts(exprs, feature_names, per_expression=False):
    """
    Count feature occurrences across `exprs`. By default a feature used twice in one expression counts twice; with
    `per_expression` it counts once per expression that uses it.
    """

    counts = Counter()
    for expr in exprs:
        indices = feature_indices(expr)
        for index in indices:
            if index >= len(feature_names):
                raise DimensionError(f'no feature name for X{index}', index=index)
        counts.update(set(indices) if per_expression else indices)
    entries = sorted(((feature_names[i], c) for i, c in counts.items()), key=lambda e: (-e[1], e[0]))
    return FeatureCountRanking(entries=tuple(entries), per_expression=per_expression)


@dataclass(frozen=True)
class LengthStats:
    mean: float
    stddev: float
    sizes: tuple


def length_stats(exprs):
    """Mean and population standard deviation of expression sizes (node counts)."""

    sizes = tuple(expr.size for expr in exprs)
    if not sizes:
        raise DimensionError('no expressions to measure')
    return LengthStats(mean=float(np.mean(sizes)), stddev=float(np.std(sizes)), sizes=sizes)


@dataclass(frozen=True)
class FeatureSummary:
    feature: str
    label: str
    mean: float
    stddev: float
    n: int


def feature_summary(table, labels, features):
    """
    Per requested feature and class, the mean and population standard deviation of its relative abundance. A class
    without samples reports None for both statistics.
    """

    labels = np.asarray(labels, dtype=int)
    if len(labels) != table.n_samples:
        raise DimensionError(f'{len(labels)} labels for {table.n_samples} samples')
    summary = []
    for name in features:
        column = table.values[:, table.feature_index(name)]
        for label in sorted(LABEL_NAMES):
            values = column[labels == label]
            if len(values):
                mean, stddev = float(np.mean(values)), float(np.std(values))
            else:
                mean = stddev = None
            summary.append(FeatureSummary(feature=name, label=LABEL_NAMES[label], mean=mean, stddev=stddev,
                                          n=len(values)))
    return summary


def fidelity(student, teacher_labels, table):
    """Fraction of rows on which the student's label equals the teacher's."""

    teacher_labels = np.asarray(teacher_labels, dtype=int)
    predicted = predict_label(student, table)
    if len(teacher_labels) != len(predicted):
        raise DimensionError(f'{len(teacher_labels)} teacher labels for {len(predicted)} rows')
    if not len(predicted):
        raise DimensionError('no rows to compare')
    return int(np.sum(predicted == teacher_labels)) / len(predicted)


@dataclass(frozen=True)
class DistillationResult:
    student: object
    fidelity: float
    teacher_source: str
    config_echo: object
    history: object = None
    train_ids: tuple = ()
    held_out_ids: tuple = ()


def distill(table, teacher_labels, cfg, rng, teacher_source='', test_fraction=0.25, split_rng=None):
    """
    Fit a symbolic student to a teacher's labels.

    A stratified quarter of the rows (by teacher label) is held out from the search; the reported fidelity is
    measured on those rows only. `split_rng` draws the hold-out (default: `rng`, before the search starts).
    """

    teacher_labels = np.asarray(teacher_labels, dtype=int)
    if len(teacher_labels) != table.n_samples:
        raise DimensionError(f'{len(teacher_labels)} teacher labels for {table.n_samples} samples')
    relabeled = table.with_labels(teacher_labels)
    train, test = split(relabeled, SplitSpec(test_fraction=test_fraction), split_rng or rng)
    best, history = evolve(cfg, train, train.labels, rng)
    score = fidelity(best.expr, test.labels, test)
    logger.info('distilled student of size %d, held-out fidelity %.4f', best.size, score)
    return DistillationResult(
        student=best,
        fidelity=score,
        teacher_source=teacher_source,
        config_echo=cfg,
        history=history,
        train_ids=train.sample_ids,
        held_out_ids=test.sample_ids,
    )
