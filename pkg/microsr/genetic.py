"""
Genetic programming search for classification expressions.

The search follows the classic tree-based scheme: a ramped half-and-half initial population, parsimony-penalized
log-loss fitness, tournament selection, and subtree crossover plus subtree, hoist and point mutation. One elite
individual survives each generation unchanged.

All randomness comes from a single :py:class:`numpy.random.Generator` consumed sequentially by the generation loop.
Fitness evaluation draws no random numbers, so it may run on several worker threads without changing the result.
"""

import logging
import math
import time

from dataclasses import dataclass, field, fields, replace

import numpy as np

from joblib import Parallel, delayed

from .errors import ConfigurationError, DimensionError, EvaluationError, StateError
from .exprtree import SRF, Call, Constant, Feature, FunctionSet, evaluate, predict_label, preorder, \
    replace_subtree, sigmoid, to_sexpr

__all__ = [
    'EvolutionHistory',
    'GenerationRecord',
    'GPConfig',
    'Individual',
    'SymbolicClassifier',
    'crossover',
    'evolve',
    'fitness',
    'hoist_mutation',
    'init_population',
    'point_mutation',
    'random_tree',
    'subtree_mutation',
    'tournament',
]

logger = logging.getLogger(__name__)

PROBA_CLIP = 1e-15
WORST_LOSS = -math.log(PROBA_CLIP)
FEATURE_LEAF_PROB = 0.9
INTERNAL_PICK_PROB = 0.9


@dataclass(frozen=True)
class GPConfig:
    """
    Hyperparameters of the evolutionary search. Defaults reproduce a 6000 x 20 symbolic classifier run with tournament
    size 25, initial depths 2-6 and parsimony coefficient 0.001; all other values follow the conventional defaults.

    `seed` may be None, in which case callers pick the stream seed (the commands use ``--seed``). `n_jobs` only
    controls how many threads evaluate fitness and never changes results.
    """

    population_size: int = 6000
    generations: int = 20
    tournament_size: int = 25
    init_depth_min: int = 2
    init_depth_max: int = 6
    parsimony_coefficient: float = 0.001
    crossover_prob: float = 0.9
    subtree_mutation_prob: float = 0.01
    hoist_mutation_prob: float = 0.01
    point_mutation_prob: float = 0.01
    point_replace_prob: float = 0.05
    constant_range: tuple = (-1.0, 1.0)
    function_set: FunctionSet = SRF
    max_tree_depth: int = 17
    seed: int = None
    n_jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'function_set', FunctionSet.from_spec(self.function_set))
        object.__setattr__(self, 'constant_range', tuple(float(v) for v in self.constant_range))

        if self.population_size < 2:
            raise ConfigurationError('population_size must be at least 2', population_size=self.population_size)
        if not 1 <= self.tournament_size <= self.population_size:
            raise ConfigurationError('tournament_size must lie in [1, population_size]',
                                     tournament_size=self.tournament_size)
        if self.generations < 0:
            raise ConfigurationError('generations must be non-negative', generations=self.generations)
        if not 0 <= self.init_depth_min <= self.init_depth_max:
            raise ConfigurationError('init depths must satisfy 0 <= init_depth_min <= init_depth_max',
                                     init_depth_min=self.init_depth_min, init_depth_max=self.init_depth_max)
        if self.init_depth_max > self.max_tree_depth:
            raise ConfigurationError('init_depth_max exceeds max_tree_depth', init_depth_max=self.init_depth_max,
                                     max_tree_depth=self.max_tree_depth)
        for name in ('crossover_prob', 'subtree_mutation_prob', 'hoist_mutation_prob', 'point_mutation_prob',
                     'point_replace_prob'):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigurationError(f'{name} must lie in [0, 1]', **{name: getattr(self, name)})
        total = sum(self.variation_probs)
        if total > 1.0 + 1e-12:
            raise ConfigurationError('variation probabilities sum to more than 1', total=total)
        if self.parsimony_coefficient < 0:
            raise ConfigurationError('parsimony_coefficient must be non-negative',
                                     parsimony_coefficient=self.parsimony_coefficient)
        if len(self.constant_range) != 2 or self.constant_range[0] > self.constant_range[1]:
            raise ConfigurationError('constant_range must be (low, high) with low <= high',
                                     constant_range=list(self.constant_range))
        if self.seed is not None and not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError('seed must be an unsigned 64-bit integer', seed=self.seed)
        if self.n_jobs < 1:
            raise ConfigurationError('n_jobs must be at least 1', n_jobs=self.n_jobs)

    @property
    def variation_probs(self):
        return (self.crossover_prob, self.subtree_mutation_prob, self.hoist_mutation_prob, self.point_mutation_prob)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class Individual:
    expr: object
    raw_fitness: float = None
    penalized_fitness: float = None

    @property
    def size(self):
        return self.expr.size

    @property
    def depth(self):
        return self.expr.depth

    @property
    def evaluated(self):
        return self.penalized_fitness is not None

    def sort_key(self):
        return (self.penalized_fitness, self.size)


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_raw_fitness: float
    best_penalized_fitness: float
    mean_size: float
    best_expression: str


@dataclass
class EvolutionHistory:
    records: list = field(default_factory=list)
    elitism: int = 1
    wall_time_ms: int = 0

    def append(self, record):
        self.records.append(record)


# Tree construction

def _random_leaf(cfg, n_features, rng):
    if rng.random() < FEATURE_LEAF_PROB:
        return Feature(int(rng.integers(n_features)))
    low, high = cfg.constant_range
    return Constant(float(rng.uniform(low, high)))


def random_tree(cfg, n_features, max_depth, method, rng):
    """
    Grow a random tree no deeper than `max_depth`.

    With ``method='full'`` every branch reaches `max_depth`. With ``'grow'`` the root is a primitive (when
    `max_depth` > 0) and each lower node is a primitive with probability proportional to the number of primitives
    among primitives plus features.
    """

    primitives = cfg.function_set.primitives
    n_choices = len(primitives) + n_features

    def build(remaining, is_root):
        if remaining == 0:
            return _random_leaf(cfg, n_features, rng)
        if method == 'full' or is_root or rng.integers(n_choices) < len(primitives):
            primitive = primitives[int(rng.integers(len(primitives)))]
            return Call(primitive, [build(remaining - 1, False) for _ in range(primitive.arity)])
        return _random_leaf(cfg, n_features, rng)

    return build(max_depth, True)


def init_population(cfg, n_features, rng):
    """Ramped half-and-half: per tree, a depth uniform in the init range and full or grow with equal odds."""

    if n_features < 1:
        raise DimensionError('at least one feature is required', n_features=n_features)
    population = []
    for _ in range(cfg.population_size):
        target = int(rng.integers(cfg.init_depth_min, cfg.init_depth_max + 1))
        method = 'full' if rng.random() < 0.5 else 'grow'
        population.append(Individual(random_tree(cfg, n_features, target, method, rng)))
    return population


# Fitness

def _log_loss(proba, labels):
    p = np.clip(proba, PROBA_CLIP, 1.0 - PROBA_CLIP)
    return float(-np.mean(labels * np.log(p) + (1 - labels) * np.log(1.0 - p)))


def fitness(expr, table, labels, parsimony):
    """Mean log loss of the sigmoid-transformed expression, and the same plus `parsimony` per node."""

    labels = np.asarray(labels, dtype=float)
    X = getattr(table, 'values', table)
    if len(labels) != len(X):
        raise DimensionError(f'{len(labels)} labels for {len(X)} rows')
    raw = _log_loss(sigmoid(evaluate(expr, X)), labels)
    return raw, raw + parsimony * expr.size


def _evaluate_one(individual, X, labels, parsimony):
    if individual.evaluated:
        return individual
    try:
        raw, penalized = fitness(individual.expr, X, labels, parsimony)
    except EvaluationError:
        raw = WORST_LOSS
        penalized = raw + parsimony * individual.size
    return replace(individual, raw_fitness=raw, penalized_fitness=penalized)


def _evaluate_population(population, X, labels, parsimony, n_jobs):
    if n_jobs == 1:
        return [_evaluate_one(ind, X, labels, parsimony) for ind in population]
    chunks = np.array_split(np.arange(len(population)), n_jobs)
    results = Parallel(n_jobs=n_jobs, prefer='threads')(
        delayed(lambda idx: [_evaluate_one(population[i], X, labels, parsimony) for i in idx])(chunk)
        for chunk in chunks
    )
    return [ind for chunk in results for ind in chunk]


# Selection and variation

def tournament(population, k, rng):
    """
    Index of the winner among `k` distinct, uniformly drawn contenders: lowest penalized fitness, then smaller size,
    then lower index.
    """

    if not 1 <= k <= len(population):
        raise ConfigurationError('tournament size must lie in [1, population size]', k=k)
    contenders = rng.choice(len(population), size=k, replace=False)
    for i in contenders:
        if not population[i].evaluated:
            raise StateError(f'individual {int(i)} has not been evaluated', index=int(i))
    return int(min(contenders, key=lambda i: (population[i].penalized_fitness, population[i].size, i)))


def _pick_node(expr, rng):
    """Preorder index of a random node: a primitive with probability 0.9 (when there is one), else a leaf."""

    nodes = preorder(expr)
    internal = [i for i, n in enumerate(nodes) if isinstance(n, Call)]
    leaves = [i for i, n in enumerate(nodes) if not isinstance(n, Call)]
    pool = internal if internal and rng.random() < INTERNAL_PICK_PROB else leaves
    return pool[int(rng.integers(len(pool)))], nodes


def crossover(parent, donor, rng, max_tree_depth=17):
    """Replace a random subtree of `parent` with a random subtree of `donor`; too deep offspring fall back to parent."""

    target, _ = _pick_node(parent, rng)
    source, donor_nodes = _pick_node(donor, rng)
    child = replace_subtree(parent, target, donor_nodes[source])
    if child.depth > max_tree_depth:
        return parent
    return child


def subtree_mutation(expr, cfg, rng, n_features):
    """Crossover with a freshly grown random tree."""

    target = int(rng.integers(cfg.init_depth_min, cfg.init_depth_max + 1))
    method = 'full' if rng.random() < 0.5 else 'grow'
    donor = random_tree(cfg, n_features, target, method, rng)
    return crossover(expr, donor, rng, cfg.max_tree_depth)


def hoist_mutation(expr, rng):
    """Replace a random subtree with one of its own subtrees; the result is never larger than `expr`."""

    target, nodes = _pick_node(expr, rng)
    subtree = nodes[target]
    source, sub_nodes = _pick_node(subtree, rng)
    return replace_subtree(expr, target, sub_nodes[source])


def point_mutation(expr, cfg, rng, n_features):
    """Replace each node independently with probability `cfg.point_replace_prob`, keeping the tree's shape."""

    def walk(node):
        replace_node = rng.random() < cfg.point_replace_prob
        if isinstance(node, Call):
            primitive = node.primitive
            if replace_node:
                candidates = cfg.function_set.by_arity(primitive.arity) or [primitive]
                primitive = candidates[int(rng.integers(len(candidates)))]
            children = [walk(c) for c in node.children]
            if primitive is node.primitive and all(a is b for a, b in zip(children, node.children)):
                return node
            return Call(primitive, children)
        if replace_node:
            return _random_leaf(cfg, n_features, rng)
        return node

    return walk(expr)


def _best(population):
    return min(range(len(population)), key=lambda i: population[i].sort_key() + (i,))


def _record(generation, population):
    best = population[_best(population)]
    return GenerationRecord(
        generation=generation,
        best_raw_fitness=best.raw_fitness,
        best_penalized_fitness=best.penalized_fitness,
        mean_size=float(np.mean([ind.size for ind in population])),
        best_expression=to_sexpr(best.expr),
    )


def _breed(population, cfg, rng, n_features):
    thresholds = np.cumsum(cfg.variation_probs)
    parent = population[tournament(population, cfg.tournament_size, rng)]
    r = rng.random()
    if r < thresholds[0]:
        donor = population[tournament(population, cfg.tournament_size, rng)]
        expr = crossover(parent.expr, donor.expr, rng, cfg.max_tree_depth)
    elif r < thresholds[1]:
        expr = subtree_mutation(parent.expr, cfg, rng, n_features)
    elif r < thresholds[2]:
        expr = hoist_mutation(parent.expr, rng)
    elif r < thresholds[3]:
        expr = point_mutation(parent.expr, cfg, rng, n_features)
    else:
        return parent
    if expr is parent.expr:
        return parent
    return Individual(expr)


def evolve(cfg, table, labels, rng):
    """
    Run the search and return ``(best, history)``: the individual with the lowest penalized fitness seen in any
    generation, and one :py:class:`GenerationRecord` per generation (generation 0 is the initial population).
    """

    started = time.monotonic()
    X = np.asarray(getattr(table, 'values', table), dtype=float)
    labels = np.asarray(labels, dtype=float)
    if X.shape[0] == 0:
        raise DimensionError('cannot evolve on an empty table')
    if len(labels) != X.shape[0]:
        raise DimensionError(f'{len(labels)} labels for {X.shape[0]} rows')
    n_features = X.shape[1]
    parsimony = cfg.parsimony_coefficient

    history = EvolutionHistory()
    population = _evaluate_population(init_population(cfg, n_features, rng), X, labels, parsimony, cfg.n_jobs)
    best = population[_best(population)]

    for generation in range(cfg.generations + 1):
        if generation:
            elite = population[_best(population)]
            children = [_breed(population, cfg, rng, n_features) for _ in range(cfg.population_size - 1)]
            population = _evaluate_population([elite] + children, X, labels, parsimony, cfg.n_jobs)
            leader = population[_best(population)]
            if leader.sort_key() < best.sort_key():
                best = leader

        record = _record(generation, population)
        history.append(record)
        logger.info('generation %d: best raw %.6f, best penalized %.6f, mean size %.2f', generation,
                    record.best_raw_fitness, record.best_penalized_fitness, record.mean_size)

    history.wall_time_ms = int((time.monotonic() - started) * 1000)
    return best, history


class SymbolicClassifier:
    """
    Estimator-style wrapper around :py:func:`evolve`, so symbolic models can be benchmarked next to the baselines.
    """

    kind = 'symbolic'

    def __init__(self, cfg):
        self.cfg = cfg
        self.best = None
        self.history = None

    def fit(self, table, labels, rng):
        self.best, self.history = evolve(self.cfg, table, labels, rng)
        return self

    @property
    def expr(self):
        if self.best is None:
            raise StateError('classifier has not been fitted')
        return self.best.expr

    def predict(self, table):
        return predict_label(self.expr, table)

    def to_dict(self):
        return {
            'kind': self.kind,
            'expression': to_sexpr(self.expr),
            'function_set': str(self.cfg.function_set),
        }
