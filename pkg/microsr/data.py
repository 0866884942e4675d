"""
Relative-abundance tables: loading, validation, normalization, balancing, splitting and synthetic data.

Every derivation returns a new :py:class:`AbundanceTable`; tables are never modified in place.
"""

import csv
import logging
import math
import os

from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from .errors import ConfigurationError, DataError, DimensionError, StateError
from .exprtree import evaluate, feature_indices, to_sexpr

__all__ = [
    'LABELS',
    'AbundanceTable',
    'SplitSpec',
    'align_labels',
    'as_matrix',
    'load_predictions',
    'load_table',
    'normalize_rows',
    'save_predictions',
    'save_table',
    'split',
    'synth_planted',
    'undersample_balance',
]

logger = logging.getLogger(__name__)

LABELS = {'healthy': 0, 'CRC': 1}
LABEL_NAMES = {v: k for k, v in LABELS.items()}
ROW_TOTAL = 100.0


@dataclass(frozen=True, eq=False)
class AbundanceTable:
    """
    Samples x features matrix of relative abundances.

    `labels` is either None (unlabeled table) or an integer vector with 0 for healthy and 1 for CRC samples.
    `metadata` carries free-form provenance (for synthetic tables: the generating rule and noise level) and
    `warnings` accumulates non-fatal findings such as all-zero rows.
    """

    feature_names: tuple
    sample_ids: tuple
    values: np.ndarray
    labels: np.ndarray = None
    metadata: dict = field(default_factory=dict)
    warnings: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError('values must be a samples x features matrix', ndim=values.ndim)
        names = tuple(str(n) for n in self.feature_names)
        ids = tuple(str(s) for s in self.sample_ids)
        if values.shape != (len(ids), len(names)):
            raise DimensionError(f'values have shape {values.shape}, expected ({len(ids)}, {len(names)})')
        _check_unique(names, 'feature name')
        _check_unique(ids, 'sample id')
        bad = np.argwhere(~(values >= 0))
        if len(bad):
            i, j = bad[0]
            raise DataError(f'invalid abundance {values[i, j]!r} for sample {ids[i]}, feature {names[j]}',
                            row=int(i), column=names[j])
        values.setflags(write=False)

        labels = self.labels
        if labels is not None:
            labels = np.array(labels, dtype=int)
            if labels.shape != (len(ids),):
                raise DimensionError(f'{len(labels)} labels for {len(ids)} samples')
            if not np.isin(labels, (0, 1)).all():
                raise DataError('labels must be 0 (healthy) or 1 (CRC)')
            labels.setflags(write=False)

        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'feature_names', names)
        object.__setattr__(self, 'sample_ids', ids)
        object.__setattr__(self, 'labels', labels)
        object.__setattr__(self, 'warnings', tuple(self.warnings))

    @property
    def n_samples(self):
        return self.values.shape[0]

    @property
    def n_features(self):
        return self.values.shape[1]

    @property
    def is_labeled(self):
        return self.labels is not None

    def feature_index(self, name):
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise DataError(f'unknown feature: {name}', feature=name)

    def subset(self, indices):
        """Rows at `indices`, in the given order."""

        indices = np.asarray(indices, dtype=int)
        return replace(
            self,
            sample_ids=tuple(self.sample_ids[i] for i in indices),
            values=self.values[indices],
            labels=None if self.labels is None else self.labels[indices],
        )

    def with_labels(self, labels):
        return replace(self, labels=labels)

    def class_indices(self, label):
        self._require_labels()
        return np.flatnonzero(self.labels == label)

    def _require_labels(self):
        if self.labels is None:
            raise StateError('table has no labels')


def _check_unique(items, what):
    seen = set()
    for item in items:
        if item in seen:
            raise DataError(f'duplicate {what}: {item}', duplicate=item)
        seen.add(item)


def as_matrix(table):
    if isinstance(table, AbundanceTable):
        return table.values
    return np.asarray(table, dtype=float)


def _read_csv(path):
    if not os.path.isfile(path):
        raise DataError(f'no such file: {path}', path=str(path))
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False, encoding='utf-8',
                            skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        raise DataError(f'empty file: {path}', path=str(path))
    except pd.errors.ParserError as ex:
        raise DataError(f'ragged rows in {path}: {ex}', path=str(path))
    except UnicodeDecodeError as ex:
        raise DataError(f'{path} is not valid UTF-8: {ex}', path=str(path))
    # pandas pads short rows with empty cells, so widths are checked on the raw records
    with open(path, newline='', encoding='utf-8') as fp:
        widths = [len(record) for record in csv.reader(fp) if record]
    for row, width in enumerate(widths):
        if width != widths[0]:
            raise DataError(f'ragged row {row} in {path}: {width} field(s), header has {widths[0]}',
                            path=str(path), row=row)
    return frame


def load_table(path):
    """
    Load a table from CSV: header ``sample_id[,label],feature...``, one sample per row.

    The label column is optional and holds ``healthy`` or ``CRC``. Values are parsed but not normalized.
    """

    frame = _read_csv(path)
    header = [h.strip() for h in frame.iloc[0]]
    body = frame.iloc[1:]
    if not header or header[0] != 'sample_id':
        raise DataError('first header column must be "sample_id"', path=str(path))
    has_labels = len(header) > 1 and header[1] == 'label'
    first_feature = 2 if has_labels else 1
    names = header[first_feature:]
    if any(not n for n in names):
        raise DataError('empty feature name in header', path=str(path))
    _check_unique(names, 'feature name')

    ids = [s.strip() for s in body.iloc[:, 0]]
    if '' in ids:
        row = ids.index('') + 1
        raise DataError(f'empty sample_id in row {row} of {path}', path=str(path), row=row)
    cells = body.iloc[:, first_feature:].to_numpy()
    try:
        values = cells.astype(float)
    except ValueError:
        values = np.empty(cells.shape)
        for (i, j), cell in np.ndenumerate(cells):
            try:
                values[i, j] = float(cell)
            except ValueError:
                raise DataError(f'not a number: {cell!r} (row {i + 1}, column {names[j]})',
                                row=i + 1, column=names[j])
    bad = np.argwhere(~(values >= 0) | ~np.isfinite(values))
    if len(bad):
        i, j = bad[0]
        raise DataError(f'invalid abundance {values[i, j]!r} (row {i + 1}, column {names[j]})',
                        row=int(i) + 1, column=names[j])

    labels = None
    if has_labels:
        tokens = [t.strip() for t in body.iloc[:, 1]]
        unknown = [(i + 1, t) for i, t in enumerate(tokens) if t not in LABELS]
        if unknown:
            row, token = unknown[0]
            raise DataError(f'unknown label {token!r} in row {row}', row=row, label=token)
        labels = [LABELS[t] for t in tokens]

    return AbundanceTable(feature_names=names, sample_ids=ids, values=values, labels=labels)


def save_table(table, path):
    """
    Write `table` in the format read by :py:func:`load_table`.

    Values are written with 12 significant digits, so reading them back is exact to a relative 5e-12, not 1e-12.
    """

    frame = pd.DataFrame(table.values, columns=list(table.feature_names))
    if table.labels is not None:
        frame.insert(0, 'label', [LABEL_NAMES[int(v)] for v in table.labels])
    frame.insert(0, 'sample_id', list(table.sample_ids))
    frame.to_csv(path, index=False, float_format='%.12g', encoding='utf-8', lineterminator='\n')


def normalize_rows(table):
    """
    Scale each row to sum to 100. All-zero rows stay zero and are reported in the table's warnings.
    """

    values = np.array(table.values)
    totals = values.sum(axis=1)
    zero = totals == 0
    # divide before scaling; 100 / total overflows for subnormal totals
    values = np.divide(values, totals[:, np.newaxis], out=np.zeros_like(values), where=~zero[:, np.newaxis])
    values = values * ROW_TOTAL

    warnings = list(table.warnings)
    for i in np.flatnonzero(zero):
        message = f'sample {table.sample_ids[i]} has all-zero abundances'
        logger.warning(message)
        warnings.append(message)
    return replace(table, values=values, warnings=tuple(warnings))


def undersample_balance(table, rng):
    """
    Keep every sample of the minority class and an equally sized random sample of the majority class.
    Kept rows stay in their original order.
    """

    table._require_labels()
    pos = table.class_indices(1)
    neg = table.class_indices(0)
    if len(pos) == 0 or len(neg) == 0:
        raise StateError('both classes must be present to balance', positives=len(pos), negatives=len(neg))
    if len(pos) == len(neg):
        return table
    minority, majority = (pos, neg) if len(pos) < len(neg) else (neg, pos)
    chosen = rng.choice(majority, size=len(minority), replace=False)
    return table.subset(np.sort(np.concatenate([minority, chosen])))


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.25
    seed: int = 0
    stratified: bool = True

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError('test_fraction must lie in (0, 1)', test_fraction=self.test_fraction)

    def test_count(self, n):
        """Number of test rows drawn from a group of `n` rows; at least one row stays on each side."""

        if n < 2:
            raise ConfigurationError(f'cannot split a group of {n} sample(s) into train and test', group_size=n)
        return min(max(math.floor(self.test_fraction * n + 0.5), 1), n - 1)


def split(table, spec, rng):
    """
    Partition `table` into (train, test). With `spec.stratified`, each class is split separately so both sides keep
    the class proportions up to rounding. Rows keep their original order on both sides.
    """

    if spec.stratified:
        table._require_labels()
        groups = [table.class_indices(c) for c in (0, 1)]
        groups = [g for g in groups if len(g)]
    else:
        groups = [np.arange(table.n_samples)]

    test = []
    for group in groups:
        test.extend(rng.permutation(group)[:spec.test_count(len(group))])
    is_test = np.zeros(table.n_samples, dtype=bool)
    is_test[test] = True
    return table.subset(np.flatnonzero(~is_test)), table.subset(np.flatnonzero(is_test))


def synth_planted(n_samples, n_features, rule, noise, rng, zero_probability=0.7):
    """
    Synthetic sparse table labeled by a known boolean expression.

    Each cell is zero with probability `zero_probability`, otherwise uniform on (0, 10]; rows are normalized to 100.
    A sample is CRC when `rule` evaluates above 0.5 on its normalized row, then each label flips with probability
    `noise`.
    """

    if not 0.0 <= noise < 0.5:
        raise ConfigurationError('noise must lie in [0, 0.5)', noise=noise)
    for index in feature_indices(rule):
        if index >= n_features:
            raise ConfigurationError(f'rule references X{index} but only {n_features} features exist', index=index)

    values = 10.0 * (1.0 - rng.random((n_samples, n_features)))
    values[rng.random((n_samples, n_features)) < zero_probability] = 0.0
    table = normalize_rows(AbundanceTable(
        feature_names=[f'taxon_{j}' for j in range(n_features)],
        sample_ids=[f'sample_{i:05d}' for i in range(n_samples)],
        values=values,
    ))
    clean = (evaluate(rule, table) > 0.5).astype(int)
    flips = rng.random(n_samples) < noise
    labels = np.where(flips, 1 - clean, clean)
    return replace(table, labels=labels, metadata={'rule': to_sexpr(rule), 'noise': noise})


def load_predictions(path):
    """
    Read a teacher prediction file (CSV with header ``sample_id,pred``, pred in {0, 1}) into a dict.
    """

    frame = _read_csv(path)
    header = [h.strip() for h in frame.iloc[0]]
    if header != ['sample_id', 'pred']:
        raise DataError('prediction file header must be "sample_id,pred"', path=str(path), header=header)
    predictions = {}
    for row, (sample_id, pred) in enumerate(frame.iloc[1:].itertuples(index=False), start=1):
        sample_id, pred = sample_id.strip(), pred.strip()
        if not sample_id:
            raise DataError(f'empty sample_id in row {row}', row=row)
        if pred not in ('0', '1'):
            raise DataError(f'prediction must be 0 or 1, got {pred!r} in row {row}', row=row)
        if sample_id in predictions:
            raise DataError(f'duplicate sample id: {sample_id}', duplicate=sample_id)
        predictions[sample_id] = int(pred)
    return predictions


def save_predictions(path, sample_ids, predictions):
    frame = pd.DataFrame({'sample_id': list(sample_ids), 'pred': np.asarray(predictions, dtype=int)})
    frame.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')


def align_labels(table, predictions):
    """
    Order the `predictions` dict by the table's sample ids. Ids of the table missing from `predictions` are an
    error listing all of them; extra ids in `predictions` are ignored with a warning.
    """

    missing = [s for s in table.sample_ids if s not in predictions]
    if missing:
        raise DataError(f'{len(missing)} sample id(s) have no teacher prediction', unmatched=missing)
    extra = len(predictions) - len(table.sample_ids)
    if extra > 0:
        logger.warning('%d teacher prediction(s) match no sample in the table', extra)
    return np.array([predictions[s] for s in table.sample_ids], dtype=int)
