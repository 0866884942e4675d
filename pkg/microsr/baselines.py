"""
Reference classifiers benchmarked against the symbolic models: logistic regression, a CART decision tree and a random
forest, plus the metric suite shared by all models. Everything is written against numpy so fitted models are
deterministic for a given seed and serialize to plain JSON documents.
"""

import logging
import math

from dataclasses import dataclass, field

import numpy as np

from joblib import Parallel, delayed

from .data import as_matrix
from .errors import ConfigurationError, DataError, DimensionError, FitError

__all__ = [
    'BaselineConfig',
    'DecisionTree',
    'ForestConfig',
    'LinearModel',
    'LogRegConfig',
    'MetricReport',
    'RandomForest',
    'TreeConfig',
    'fit_cart',
    'fit_forest',
    'fit_logreg',
    'logreg_loss_and_gradient',
    'metrics',
    'model_from_dict',
]

logger = logging.getLogger(__name__)

GRADIENT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class MetricReport:
    """Accuracy and F1 (positive class = 1, CRC) with the confusion matrix ``[[TN, FP], [FN, TP]]``."""

    accuracy: float
    f1: float
    confusion: tuple
    n: int


def metrics(pred, truth):
    pred = np.asarray(pred, dtype=int)
    truth = np.asarray(truth, dtype=int)
    if pred.shape != truth.shape:
        raise DimensionError(f'{len(pred)} predictions for {len(truth)} labels')
    n = len(truth)
    if n < 1:
        raise DimensionError('no predictions to score')
    tp = int(np.sum((pred == 1) & (truth == 1)))
    tn = int(np.sum((pred == 0) & (truth == 0)))
    fp = int(np.sum((pred == 1) & (truth == 0)))
    fn = int(np.sum((pred == 0) & (truth == 1)))
    denominator = 2 * tp + fp + fn
    return MetricReport(
        accuracy=(tp + tn) / n,
        f1=2 * tp / denominator if denominator else 0.0,
        confusion=((tn, fp), (fn, tp)),
        n=n,
    )


def _check_training_data(table, labels):
    X = as_matrix(table)
    y = np.asarray(labels, dtype=int)
    if X.shape[0] == 0:
        raise DataError('cannot fit a model on an empty table')
    if len(y) != X.shape[0]:
        raise DimensionError(f'{len(y)} labels for {X.shape[0]} rows')
    return X, y


# Logistic regression

@dataclass(frozen=True)
class LogRegConfig:
    max_iterations: int = 500
    learning_rate: float = 0.1
    l2: float = 1e-3

    def __post_init__(self):
        if self.max_iterations < 0 or self.learning_rate <= 0 or self.l2 < 0:
            raise ConfigurationError('invalid logistic regression config', max_iterations=self.max_iterations,
                                     learning_rate=self.learning_rate, l2=self.l2)


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 5
    min_samples_split: int = 2

    def __post_init__(self):
        if (self.max_depth is not None and self.max_depth < 0) or self.min_samples_split < 2:
            raise ConfigurationError('invalid decision tree config', max_depth=self.max_depth,
                                     min_samples_split=self.min_samples_split)


@dataclass(frozen=True)
class ForestConfig:
    """`feature_subsample` is ``'sqrt'`` (ceil of the square root of the feature count), an integer, or None for all."""

    n_trees: int = 50
    bootstrap: bool = True
    feature_subsample: object = 'sqrt'
    max_depth: int = None
    min_samples_split: int = 2
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 1 or self.n_jobs < 1:
            raise ConfigurationError('n_trees and n_jobs must be positive', n_trees=self.n_trees, n_jobs=self.n_jobs)
        if not (self.feature_subsample in (None, 'sqrt') or
                (isinstance(self.feature_subsample, int) and self.feature_subsample > 0)):
            raise ConfigurationError('feature_subsample must be "sqrt", a positive integer or None',
                                     feature_subsample=self.feature_subsample)

    def candidates(self, n_features):
        if self.feature_subsample is None:
            return n_features
        if self.feature_subsample == 'sqrt':
            return max(1, math.ceil(math.sqrt(n_features)))
        return min(self.feature_subsample, n_features)


@dataclass(frozen=True)
class BaselineConfig:
    logreg: LogRegConfig = field(default_factory=LogRegConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)


def _standardize(X):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _sigmoid(z):
    with np.errstate(over='ignore'):
        return 1.0 / (1.0 + np.exp(-z))


def logreg_loss_and_gradient(weights, bias, Xs, y, l2):
    """
    L2-regularized mean log loss on standardized inputs `Xs` and its gradient ``(d_weights, d_bias)``. The penalty is
    ``0.5 * l2 * |w|^2`` and does not apply to the bias.
    """

    p = _sigmoid(Xs @ weights + bias)
    eps = 1e-15
    pc = np.clip(p, eps, 1 - eps)
    loss = -np.mean(y * np.log(pc) + (1 - y) * np.log(1 - pc)) + 0.5 * l2 * float(weights @ weights)
    residual = p - y
    return float(loss), Xs.T @ residual / len(y) + l2 * weights, float(np.mean(residual))


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Logistic regression with weights in standardized space; `mean` and `scale` standardize raw inputs."""

    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    iterations: int = 0

    kind = 'logreg'

    def decision_function(self, table):
        return ((as_matrix(table) - self.mean) / self.scale) @ self.weights + self.bias

    def predict_proba(self, table):
        return _sigmoid(self.decision_function(table))

    def predict(self, table):
        return (self.predict_proba(table) >= 0.5).astype(int)

    def to_dict(self):
        return {
            'kind': self.kind,
            'weights': self.weights.tolist(),
            'bias': self.bias,
            'mean': self.mean.tolist(),
            'scale': self.scale.tolist(),
            'iterations': self.iterations,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(weights=np.asarray(data['weights'], dtype=float), bias=float(data['bias']),
                   mean=np.asarray(data['mean'], dtype=float), scale=np.asarray(data['scale'], dtype=float),
                   iterations=int(data.get('iterations', 0)))


def fit_logreg(table, labels, cfg, rng=None):
    """
    Full-batch gradient descent on the regularized log loss, stopping after `cfg.max_iterations` steps or once the
    largest gradient component drops below 1e-6. The bias starts at the log-odds of the positive rate.
    """

    X, y = _check_training_data(table, labels)
    rate = y.mean()
    if rate in (0.0, 1.0):
        raise FitError('logistic regression needs both classes in the training labels')
    mean, scale = _standardize(X)
    Xs = (X - mean) / scale
    weights = np.zeros(X.shape[1])
    bias = math.log(rate / (1 - rate))

    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        _, grad_w, grad_b = logreg_loss_and_gradient(weights, bias, Xs, y, cfg.l2)
        if max(np.max(np.abs(grad_w), initial=0.0), abs(grad_b)) < GRADIENT_TOLERANCE:
            iterations -= 1
            break
        weights = weights - cfg.learning_rate * grad_w
        bias -= cfg.learning_rate * grad_b
    return LinearModel(weights=weights, bias=bias, mean=mean, scale=scale, iterations=iterations)


# Decision trees

@dataclass(frozen=True, eq=False)
class DecisionTree:
    """
    Binary tree stored as parallel arrays indexed by node id (root = 0). Leaves have ``feature == -1``; rows with
    ``x[feature] <= threshold`` go to `left`, the rest to `right`. `value` is the majority class of each node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    kind = 'tree'

    @property
    def node_count(self):
        return len(self.feature)

    @property
    def depth(self):
        def walk(node):
            if self.feature[node] < 0:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))
        return walk(0)

    def apply(self, table):
        """Leaf id reached by each row."""

        X = as_matrix(table)
        nodes = np.zeros(X.shape[0], dtype=int)
        active = self.feature[nodes] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            current = nodes[idx]
            go_left = X[idx, self.feature[current]] <= self.threshold[current]
            nodes[idx] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[nodes] >= 0
        return nodes

    def predict(self, table):
        return self.value[self.apply(table)].astype(int)

    def to_dict(self):
        return {
            'kind': self.kind,
            'feature': self.feature.tolist(),
            'threshold': self.threshold.tolist(),
            'left': self.left.tolist(),
            'right': self.right.tolist(),
            'value': self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(feature=np.asarray(data['feature'], dtype=int),
                   threshold=np.asarray(data['threshold'], dtype=float),
                   left=np.asarray(data['left'], dtype=int),
                   right=np.asarray(data['right'], dtype=int),
                   value=np.asarray(data['value'], dtype=int))


def _gini_split(x, y):
    """
    Best threshold on one feature: ``(weighted child impurity, threshold)``, or None if the feature is constant.
    Candidate thresholds are midpoints between consecutive distinct sorted values.
    """

    order = np.argsort(x, kind='stable')
    xs, ys = x[order], y[order]
    n = len(xs)
    valid = np.flatnonzero(xs[:-1] < xs[1:])
    if not len(valid):
        return None
    positives = np.cumsum(ys)
    n_left = valid + 1.0
    pos_left = positives[valid]
    n_right = n - n_left
    pos_right = positives[-1] - pos_left
    p_left = pos_left / n_left
    p_right = pos_right / n_right
    gini_left = 2.0 * p_left * (1.0 - p_left)
    gini_right = 2.0 * p_right * (1.0 - p_right)
    impurity = (n_left * gini_left + n_right * gini_right) / n
    best = int(np.argmin(impurity))
    i = valid[best]
    return float(impurity[best]), float((xs[i] + xs[i + 1]) / 2.0)


class _TreeBuilder:

    def __init__(self, X, y, max_depth, min_samples_split, n_candidates, rng):
        self.X = X
        self.y = y
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.n_candidates = n_candidates
        self.rng = rng
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def _candidates(self):
        n_features = self.X.shape[1]
        if self.n_candidates >= n_features:
            return range(n_features)
        return self.rng.choice(n_features, size=self.n_candidates, replace=False)

    def _new_node(self, y):
        positives = int(y.sum())
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        # ties go to class 0
        self.value.append(1 if 2 * positives > len(y) else 0)
        return len(self.feature) - 1, positives

    def build(self, rows, depth=0):
        y = self.y[rows]
        node, positives = self._new_node(y)
        if (positives in (0, len(rows)) or len(rows) < self.min_samples_split or
                (self.max_depth is not None and depth >= self.max_depth)):
            return node

        best = None
        for j in self._candidates():
            found = _gini_split(self.X[rows, j], y)
            if found is not None and (best is None or found[0] < best[0]):
                best = (found[0], found[1], int(j))
        if best is None:
            return node

        _, threshold, j = best
        go_left = self.X[rows, j] <= threshold
        self.feature[node] = j
        self.threshold[node] = threshold
        self.left[node] = self.build(rows[go_left], depth + 1)
        self.right[node] = self.build(rows[~go_left], depth + 1)
        return node

    def tree(self):
        return DecisionTree(feature=np.asarray(self.feature, dtype=int),
                            threshold=np.asarray(self.threshold, dtype=float),
                            left=np.asarray(self.left, dtype=int),
                            right=np.asarray(self.right, dtype=int),
                            value=np.asarray(self.value, dtype=int))


def _grow_tree(X, y, rows, max_depth, min_samples_split, n_candidates, rng):
    builder = _TreeBuilder(X, y, max_depth, min_samples_split, n_candidates, rng)
    builder.build(rows)
    return builder.tree()


def fit_cart(table, labels, cfg, rng=None):
    """
    Greedy CART with Gini impurity and an exhaustive threshold search over all features. Nodes stop splitting at
    `cfg.max_depth` (None for unlimited), when pure, or below `cfg.min_samples_split` rows.
    """

    X, y = _check_training_data(table, labels)
    return _grow_tree(X, y, np.arange(len(y)), cfg.max_depth, cfg.min_samples_split, X.shape[1], rng)


@dataclass(frozen=True, eq=False)
class RandomForest:
    trees: tuple

    kind = 'forest'

    def votes(self, table):
        """Number of trees voting CRC for each row."""
        return np.sum([tree.predict(table) for tree in self.trees], axis=0)

    def predict(self, table):
        # ties go to class 0
        return (2 * self.votes(table) > len(self.trees)).astype(int)

    def to_dict(self):
        return {'kind': self.kind, 'trees': [tree.to_dict() for tree in self.trees]}

    @classmethod
    def from_dict(cls, data):
        return cls(trees=tuple(DecisionTree.from_dict(t) for t in data['trees']))


def fit_forest(table, labels, cfg, rng):
    """
    `cfg.n_trees` CART trees, each grown on a bootstrap resample with a fresh feature subsample at every split.

    Each tree gets its own generator seeded from `rng` in tree order before any tree is grown, so fitting on several
    threads (`cfg.n_jobs`) yields the same forest as fitting sequentially.
    """

    X, y = _check_training_data(table, labels)
    n = len(y)
    n_candidates = cfg.candidates(X.shape[1])
    seeds = rng.integers(0, 2 ** 63 - 1, size=cfg.n_trees)

    def grow(seed):
        tree_rng = np.random.default_rng(int(seed))
        rows = tree_rng.integers(0, n, size=n) if cfg.bootstrap else np.arange(n)
        return _grow_tree(X, y, rows, cfg.max_depth, cfg.min_samples_split, n_candidates, tree_rng)

    if cfg.n_jobs == 1:
        trees = [grow(seed) for seed in seeds]
    else:
        trees = Parallel(n_jobs=cfg.n_jobs, prefer='threads')(delayed(grow)(seed) for seed in seeds)
    return RandomForest(trees=tuple(trees))


_MODEL_KINDS = {cls.kind: cls for cls in (LinearModel, DecisionTree, RandomForest)}


def model_from_dict(data):
    """Rebuild a prediction-only model from the JSON document written by its ``to_dict()``."""

    try:
        cls = _MODEL_KINDS[data['kind']]
    except KeyError:
        raise DataError(f'unknown model kind: {data.get("kind")!r}', kind=data.get('kind'))
    return cls.from_dict(data)
