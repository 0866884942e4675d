import math

from dataclasses import replace

import numpy as np

from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from microsr.data import synth_planted
from microsr.errors import ConfigurationError, DimensionError, StateError
from microsr.exprtree import SR, Call, Constant, Feature, parse_sexpr, predict_label, to_sexpr
from microsr.genetic import WORST_LOSS, GPConfig, Individual, SymbolicClassifier, crossover, evolve, fitness, \
    hoist_mutation, init_population, point_mutation, random_tree, subtree_mutation, tournament

from .utils import N_FEATURES, make_table, small_config, trees


def rng(seed=0):
    return np.random.default_rng(seed)


def evaluated(fitnesses, sizes=None):
    sizes = sizes or [1] * len(fitnesses)
    population = []
    for f, s in zip(fitnesses, sizes):
        expr = Feature(0)
        while expr.size < s:
            expr = Call.of('add', expr, Feature(0))
        population.append(Individual(expr, raw_fitness=f, penalized_fitness=f))
    return population


class TestConfig(SimpleTestCase):

    def test_defaults(self):
        """Test the default search parameters"""

        cfg = GPConfig()
        self.assertEqual((cfg.population_size, cfg.generations, cfg.tournament_size), (6000, 20, 25))
        self.assertEqual((cfg.init_depth_min, cfg.init_depth_max), (2, 6))
        self.assertEqual(cfg.parsimony_coefficient, 0.001)
        self.assertEqual(cfg.variation_probs, (0.9, 0.01, 0.01, 0.01))
        self.assertEqual(cfg.constant_range, (-1.0, 1.0))
        self.assertEqual(str(cfg.function_set), 'srf')
        self.assertEqual(cfg.max_tree_depth, 17)

    def test_invalid(self):
        """Test that inconsistent settings are configuration errors"""

        for kwargs in [
            dict(population_size=1),
            dict(tournament_size=0),
            dict(population_size=10, tournament_size=11),
            dict(init_depth_min=4, init_depth_max=3),
            dict(crossover_prob=0.99, subtree_mutation_prob=0.02),
            dict(point_replace_prob=1.5),
            dict(parsimony_coefficient=-1.0),
            dict(constant_range=(1.0, -1.0)),
            dict(generations=-1),
            dict(n_jobs=0),
        ]:
            with self.assertRaises(ConfigurationError, msg=str(kwargs)):
                GPConfig(**kwargs)

    def test_function_set_from_text(self):
        """Test the function set can be given as text"""

        self.assertEqual(GPConfig(function_set='sr').function_set, SR)


class TestInitialization(SimpleTestCase):

    def test_depth_zero_gives_leaves(self):
        """Test init depth (0, 0) produces single leaves"""

        cfg = small_config(init_depth_min=0, init_depth_max=0)
        population = init_population(cfg, N_FEATURES, rng())
        self.assertEqual(len(population), cfg.population_size)
        self.assertTrue(all(ind.size == 1 for ind in population))

    def test_depth_bounds(self):
        """Test full trees hit their target depth and grown trees stay within it"""

        cfg = GPConfig(population_size=2000, tournament_size=5)
        generator = rng(3)
        for _ in range(300):
            target = int(generator.integers(2, 7))
            self.assertEqual(random_tree(cfg, N_FEATURES, target, 'full', generator).depth, target)
            grown = random_tree(cfg, N_FEATURES, target, 'grow', generator)
            self.assertTrue(1 <= grown.depth <= target)
        depths = [ind.depth for ind in init_population(cfg, N_FEATURES, rng(4))]
        self.assertLessEqual(max(depths), 6)
        self.assertGreaterEqual(min(depths), 1)

    def test_unevaluated(self):
        """Test fresh individuals carry no fitness"""

        population = init_population(small_config(), N_FEATURES, rng())
        self.assertFalse(any(ind.evaluated for ind in population))

    def test_deterministic(self):
        """Test the same seed gives the same population"""

        cfg = small_config()
        a = [to_sexpr(ind.expr) for ind in init_population(cfg, N_FEATURES, rng(7))]
        b = [to_sexpr(ind.expr) for ind in init_population(cfg, N_FEATURES, rng(7))]
        self.assertEqual(a, b)

    def test_needs_features(self):
        """Test a table without features is rejected"""

        with self.assertRaises(DimensionError):
            init_population(small_config(), 0, rng())


class TestFitness(SimpleTestCase):

    def setUp(self):
        self.table = make_table([[0.0, 1.0], [3.0, 0.0], [1.0, 1.0], [0.0, 0.0]])
        self.labels = [0, 1, 1, 0]

    def test_constant_zero(self):
        """Test a zero output scores ln 2 regardless of labels"""

        raw, penalized = fitness(Constant(0), self.table, self.labels, 0.0)
        self.assertAlmostEqual(raw, math.log(2), places=12)
        self.assertEqual(raw, penalized)

    def test_parsimony(self):
        """Test the penalty is the coefficient times the tree size"""

        expr = parse_sexpr('(ifelse (mul (presence_both X0 X1) (add X1 0.25)) (sub (div X0 (abs X1)) (presence X0)))')
        self.assertEqual(expr.size, 15)
        raw, penalized = fitness(expr, self.table, self.labels, 0.001)
        self.assertAlmostEqual(penalized - raw, 0.015, places=12)

    def test_perfect_separator(self):
        """Test large correct logits give near-zero loss"""

        expr = Call.of('sub', Call.of('mul', Call.of('presence', Feature(0)), Constant(100)), Constant(50))
        raw, _ = fitness(expr, self.table, self.labels, 0.0)
        self.assertLess(raw, 1e-6)

    def test_clipped_loss_is_finite(self):
        """Test confidently wrong predictions are clipped rather than infinite"""

        raw, _ = fitness(Constant(-1000.0), self.table, [1, 1, 1, 1], 0.0)
        self.assertAlmostEqual(raw, WORST_LOSS)

    def test_length_mismatch(self):
        """Test labels must match the rows"""

        with self.assertRaises(DimensionError):
            fitness(Constant(0), self.table, [0, 1], 0.0)


class TestTournament(SimpleTestCase):

    def test_exhaustive(self):
        """Test a tournament over the whole population returns the global best"""

        population = evaluated([0.5, 0.2, 0.9, 0.3])
        self.assertEqual(tournament(population, 4, rng()), 1)

    def test_single(self):
        """Test k=1 returns some valid index"""

        population = evaluated([0.5, 0.2, 0.9, 0.3])
        seen = {tournament(population, 1, rng(s)) for s in range(50)}
        self.assertTrue(seen <= {0, 1, 2, 3})
        self.assertGreater(len(seen), 1)

    def test_size_tie_break(self):
        """Test equal fitness prefers the smaller tree, then the lower index"""

        self.assertEqual(tournament(evaluated([0.4, 0.4], sizes=[7, 3]), 2, rng()), 1)
        self.assertEqual(tournament(evaluated([0.4, 0.4], sizes=[3, 3]), 2, rng()), 0)

    def test_unevaluated(self):
        """Test unevaluated contenders are a state error"""

        with self.assertRaises(StateError):
            tournament([Individual(Feature(0)), Individual(Feature(1))], 2, rng())

    def test_bad_k(self):
        """Test k outside [1, population size]"""

        with self.assertRaises(ConfigurationError):
            tournament(evaluated([0.1]), 2, rng())


class TestVariation(SimpleTestCase):

    def setUp(self):
        self.cfg = small_config()

    def test_crossover_into_leaf(self):
        """Test crossing into a single leaf yields a donor subtree"""

        donor = parse_sexpr('(add (neg X1) X2)')
        generator = rng(1)
        subtrees = {to_sexpr(e) for e in ('(add (neg X1) X2)', '(neg X1)', 'X1', 'X2')}
        for _ in range(30):
            child = crossover(Feature(0), donor, generator)
            self.assertIn(to_sexpr(child), subtrees)

    def test_crossover_deterministic(self):
        """Test the same seed gives the same offspring"""

        a, b = parse_sexpr('(add (mul X0 X1) (log X2))'), parse_sexpr('(ifelse (presence X3) (sqrt X4))')
        self.assertEqual(crossover(a, b, rng(5)), crossover(a, b, rng(5)))

    @settings(max_examples=300, deadline=None)
    @given(parent=trees, donor=trees, seed=st.integers(0, 2 ** 32 - 1), limit=st.integers(2, 8))
    def test_crossover_depth_guard(self, parent, donor, seed, limit):
        """Test offspring never exceed the depth limit unless the parent already did"""

        child = crossover(parent, donor, rng(seed), max_tree_depth=limit)
        if parent.depth <= limit:
            self.assertLessEqual(child.depth, limit)
        else:
            self.assertTrue(child is parent or child.depth <= limit)

    def test_hoist_on_leaf(self):
        """Test hoisting a single leaf returns it unchanged"""

        self.assertEqual(hoist_mutation(Feature(3), rng()), Feature(3))

    @settings(max_examples=500, deadline=None)
    @given(expr=trees, seed=st.integers(0, 2 ** 32 - 1))
    def test_hoist_never_grows(self, expr, seed):
        """Test hoisting never increases size"""

        self.assertLessEqual(hoist_mutation(expr, rng(seed)).size, expr.size)

    @given(expr=trees, seed=st.integers(0, 2 ** 32 - 1))
    def test_point_mutation_disabled(self, expr, seed):
        """Test point mutation with zero replacement probability returns the same tree"""

        cfg = replace(self.cfg, point_replace_prob=0.0)
        self.assertEqual(point_mutation(expr, cfg, rng(seed), N_FEATURES), expr)

    @given(expr=trees, seed=st.integers(0, 2 ** 32 - 1))
    def test_point_mutation_keeps_shape(self, expr, seed):
        """Test point mutation keeps size and depth"""

        cfg = replace(self.cfg, point_replace_prob=0.5)
        mutated = point_mutation(expr, cfg, rng(seed), N_FEATURES)
        self.assertEqual((mutated.size, mutated.depth), (expr.size, expr.depth))

    def test_subtree_mutation_depth(self):
        """Test subtree mutation respects the depth limit"""

        generator = rng(2)
        expr = parse_sexpr('(add X0 X1)')
        for _ in range(100):
            expr = subtree_mutation(expr, self.cfg, generator, N_FEATURES)
            self.assertLessEqual(expr.depth, self.cfg.max_tree_depth)


class TestEvolve(SimpleTestCase):

    def setUp(self):
        self.table = synth_planted(300, 8, parse_sexpr('(presence X3)'), 0.0, rng(11))

    def test_generations_zero(self):
        """Test zero generations returns the best initial individual"""

        cfg = small_config(generations=0)
        best, history = evolve(cfg, self.table, self.table.labels, rng(1))
        self.assertEqual(len(history.records), 1)
        self.assertEqual(history.records[0].best_penalized_fitness, best.penalized_fitness)
        population = init_population(cfg, self.table.n_features, rng(1))
        self.assertIn(best.expr, [ind.expr for ind in population])

    def test_history_and_invariants(self):
        """Test the history length, monotone best fitness and the parsimony identity"""

        cfg = small_config(generations=5)
        best, history = evolve(cfg, self.table, self.table.labels, rng(2))
        self.assertEqual([r.generation for r in history.records], list(range(6)))
        self.assertEqual(history.elitism, 1)
        bests = [r.best_penalized_fitness for r in history.records]
        self.assertEqual(bests, sorted(bests, reverse=True))
        self.assertAlmostEqual(best.penalized_fitness - best.raw_fitness,
                               cfg.parsimony_coefficient * best.size, places=12)
        self.assertLessEqual(best.depth, cfg.max_tree_depth)

    def test_pure_copy_schedule(self):
        """Test that without variation the elite's raw fitness never worsens"""

        cfg = small_config(generations=4, parsimony_coefficient=0.0, crossover_prob=0.0, subtree_mutation_prob=0.0,
                           hoist_mutation_prob=0.0, point_mutation_prob=0.0)
        _, history = evolve(cfg, self.table, self.table.labels, rng(3))
        raws = [r.best_raw_fitness for r in history.records]
        self.assertEqual(raws, sorted(raws, reverse=True))

    def test_deterministic_across_workers(self):
        """Test the result doesn't depend on the number of evaluation threads"""

        cfg = small_config(generations=3)
        best1, history1 = evolve(cfg, self.table, self.table.labels, rng(9))
        best4, history4 = evolve(replace(cfg, n_jobs=4), self.table, self.table.labels, rng(9))
        self.assertEqual(to_sexpr(best1.expr), to_sexpr(best4.expr))
        self.assertEqual(history1.records, history4.records)

    def test_recovers_planted_rule(self):
        """Test a modest search finds the planted presence rule"""

        cfg = small_config(population_size=500, generations=10, tournament_size=10)
        best, _ = evolve(cfg, self.table, self.table.labels, rng(5))
        accuracy = np.mean(predict_label(best.expr, self.table) == self.table.labels)
        self.assertGreaterEqual(accuracy, 0.9)

    def test_empty_table(self):
        """Test evolving on no rows is a dimension error"""

        with self.assertRaises(DimensionError):
            evolve(small_config(), self.table.subset([]), [], rng())


class TestSymbolicClassifier(SimpleTestCase):

    def test_fit_predict(self):
        """Test the estimator wrapper"""

        table = synth_planted(200, 6, parse_sexpr('(presence X1)'), 0.0, rng(1))
        model = SymbolicClassifier(small_config())
        with self.assertRaises(StateError):
            model.predict(table)
        model.fit(table, table.labels, rng(2))
        self.assertEqual(len(model.predict(table)), table.n_samples)
        self.assertEqual(model.to_dict()['kind'], 'symbolic')
        self.assertEqual(model.to_dict()['expression'], to_sexpr(model.expr))
