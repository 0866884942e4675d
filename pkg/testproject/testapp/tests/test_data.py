import numpy as np

from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from microsr.data import SplitSpec, align_labels, load_predictions, load_table, normalize_rows, save_predictions, \
    save_table, split, synth_planted, undersample_balance
from microsr.errors import ConfigurationError, DataError, DimensionError, StateError
from microsr.exprtree import evaluate, parse_sexpr

from .utils import TempDirMixin, make_table

abundances = st.integers(1, 12).flatmap(lambda f: st.integers(1, 15).flatmap(
    lambda n: arrays(float, (n, f), elements=st.one_of(st.just(0.0), st.floats(0.0, 1e4, allow_nan=False)))))


@st.composite
def labeled_tables(draw, min_per_class=0):
    positives = draw(st.integers(min_per_class, 20))
    negatives = draw(st.integers(min_per_class, 20))
    labels = draw(st.permutations([1] * positives + [0] * negatives))
    n = len(labels)
    values = np.arange(n * 2, dtype=float).reshape(n, 2)
    return make_table(values, labels=list(labels))


class TestAbundanceTable(SimpleTestCase):

    def test_validation(self):
        """Test shape, uniqueness and sign checks"""

        with self.assertRaises(DataError):
            make_table([[1.0, -0.1]])
        with self.assertRaises(DataError):
            make_table([[1.0], [2.0]], ids=['a', 'a'])
        with self.assertRaises(DimensionError):
            make_table([[1.0], [2.0]], labels=[0])
        with self.assertRaises(DataError):
            make_table([[1.0]], labels=[2])

    def test_immutable(self):
        """Test the value matrix is read-only"""

        table = make_table([[1.0, 2.0]])
        with self.assertRaises(ValueError):
            table.values[0, 0] = 5.0

    def test_subset_keeps_order(self):
        """Test subsetting by row indices"""

        table = make_table([[1.0], [2.0], [3.0]], labels=[0, 1, 0])
        sub = table.subset([2, 0])
        self.assertEqual(sub.sample_ids, ('s2', 's0'))
        self.assertEqual(sub.labels.tolist(), [0, 0])


class TestLoadTable(TempDirMixin, SimpleTestCase):

    def test_small_file(self):
        """Test a two sample, two feature table with labels"""

        path = self.write('t.csv', 'sample_id,label,A,B\nx,healthy,1,3\ny,CRC,0.5,0\n')
        table = load_table(path)
        self.assertEqual((table.n_samples, table.n_features), (2, 2))
        self.assertEqual(table.labels.tolist(), [0, 1])
        self.assertEqual(table.feature_names, ('A', 'B'))
        self.assertEqual(table.values.tolist(), [[1.0, 3.0], [0.5, 0.0]])

    def test_unlabeled(self):
        """Test the label column is optional"""

        table = load_table(self.write('t.csv', 'sample_id,A\nx,1\n'))
        self.assertFalse(table.is_labeled)

    def test_negative_value(self):
        """Test a negative cell is reported by row and column"""

        with self.assertRaises(DataError) as ctx:
            load_table(self.write('t.csv', 'sample_id,label,A,B\nx,healthy,1,3\ny,CRC,-0.1,0\n'))
        self.assertEqual(ctx.exception.additional_data['row'], 2)
        self.assertEqual(ctx.exception.additional_data['column'], 'A')

    def test_bad_files(self):
        """Test header, label and shape violations"""

        cases = {
            'dup.csv': 'sample_id,A,A\nx,1,2\n',
            'noid.csv': 'id,A\nx,1\n',
            'label.csv': 'sample_id,label,A\nx,sick,1\n',
            'ragged.csv': 'sample_id,A,B\nx,1,2\ny,1\n',
            'text.csv': 'sample_id,A\nx,lots\n',
            'empty.csv': '',
            'dupid.csv': 'sample_id,A\nx,1\nx,2\n',
            'short_mid.csv': 'sample_id,A,B\nx,1\ny,1,2\n',
            'blank_id.csv': 'sample_id,A\nx,1\n,2\n',
        }
        for name, text in cases.items():
            with self.assertRaises(DataError, msg=name):
                load_table(self.write(name, text))

    def test_short_row_and_blank_id(self):
        """Test a short row is reported as ragged and an empty sample id is rejected"""

        with self.assertRaises(DataError) as ctx:
            load_table(self.write('short.csv', 'sample_id,A,B\nx,1\ny,1,2\n'))
        self.assertIn('ragged', ctx.exception.reason)
        self.assertEqual(ctx.exception.additional_data['row'], 1)

        with self.assertRaises(DataError) as ctx:
            load_table(self.write('blank.csv', 'sample_id,A\nx,1\n,2\n'))
        self.assertIn('sample_id', ctx.exception.reason)
        self.assertEqual(ctx.exception.additional_data['row'], 2)

        with self.assertRaises(DataError):
            load_predictions(self.write('blank_pred.csv', 'sample_id,pred\n,1\n'))

    def test_missing_file(self):
        """Test a missing file names the path"""

        with self.assertRaises(DataError) as ctx:
            load_table(self.path('nope.csv'))
        self.assertIn('nope.csv', ctx.exception.reason)
        self.assertEqual(ctx.exception.exit_status, 2)

    def test_round_trip(self):
        """Test save then load keeps names, labels and values"""

        table = synth_planted(50, 7, parse_sexpr('(presence X2)'), 0.1, np.random.default_rng(1))
        path = self.path('round.csv')
        save_table(table, path)
        loaded = load_table(path)
        self.assertEqual(loaded.feature_names, table.feature_names)
        self.assertEqual(loaded.sample_ids, table.sample_ids)
        self.assertEqual(loaded.labels.tolist(), table.labels.tolist())
        np.testing.assert_allclose(loaded.values, table.values, rtol=1e-11, atol=0)


class TestNormalize(SimpleTestCase):

    def test_scaling(self):
        """Test proportional scaling to 100"""

        table = normalize_rows(make_table([[1.0, 1.0, 2.0]]))
        self.assertEqual(table.values.tolist(), [[25.0, 25.0, 50.0]])

    def test_zero_row(self):
        """Test all-zero rows stay zero and produce a warning"""

        with self.assertLogs('microsr.data', level='WARNING'):
            table = normalize_rows(make_table([[0.0, 0.0], [1.0, 3.0]], ids=['empty', 'full']))
        self.assertEqual(table.values[0].tolist(), [0.0, 0.0])
        self.assertEqual(len(table.warnings), 1)
        self.assertIn('empty', table.warnings[0])

    @settings(max_examples=1000, deadline=None)
    @given(abundances)
    def test_row_sums_and_idempotence(self, values):
        """Test nonzero rows sum to 100 and a second pass changes nothing"""

        once = normalize_rows(make_table(values))
        sums = once.values.sum(axis=1)
        nonzero = values.sum(axis=1) > 0
        np.testing.assert_allclose(sums[nonzero], 100.0, atol=1e-6)
        np.testing.assert_array_equal(sums[~nonzero], 0.0)
        twice = normalize_rows(once)
        np.testing.assert_allclose(twice.values, once.values, rtol=1e-12, atol=1e-12)


class TestUndersample(SimpleTestCase):

    def test_counts(self):
        """Test the majority class is cut down to the minority size"""

        labels = [0] * 10473 + [1] * 664
        table = make_table(np.zeros((len(labels), 1)), labels=labels)
        balanced = undersample_balance(table, np.random.default_rng(0))
        self.assertEqual(balanced.n_samples, 1328)
        self.assertEqual(int(balanced.labels.sum()), 664)

    def test_balanced_is_identity(self):
        """Test an already balanced table keeps every row"""

        table = make_table(np.zeros((4, 1)), labels=[0, 1, 1, 0])
        self.assertEqual(undersample_balance(table, np.random.default_rng(0)).sample_ids, table.sample_ids)

    def test_deterministic(self):
        """Test the same seed keeps the same samples"""

        table = make_table(np.zeros((30, 1)), labels=[0] * 25 + [1] * 5)
        a = undersample_balance(table, np.random.default_rng(3)).sample_ids
        b = undersample_balance(table, np.random.default_rng(3)).sample_ids
        self.assertEqual(a, b)

    def test_requires_labels(self):
        """Test unlabeled tables and single-class tables are state errors"""

        with self.assertRaises(StateError):
            undersample_balance(make_table([[1.0]]), np.random.default_rng(0))
        with self.assertRaises(StateError):
            undersample_balance(make_table([[1.0], [2.0]], labels=[1, 1]), np.random.default_rng(0))

    @settings(max_examples=1000, deadline=None)
    @given(table=labeled_tables(min_per_class=1), seed=st.integers(0, 2 ** 32 - 1))
    def test_equal_classes(self, table, seed):
        """Test equal class counts, a subset of the input and the original order"""

        balanced = undersample_balance(table, np.random.default_rng(seed))
        self.assertEqual(int(balanced.labels.sum()) * 2, balanced.n_samples)
        positions = [table.sample_ids.index(s) for s in balanced.sample_ids]
        self.assertEqual(positions, sorted(positions))


class TestSplit(SimpleTestCase):

    def test_stratified_counts(self):
        """Test 4/4 samples at fraction 0.25 put one of each class in test"""

        table = make_table(np.zeros((8, 1)), labels=[0, 1] * 4)
        train, test = split(table, SplitSpec(test_fraction=0.25), np.random.default_rng(0))
        self.assertEqual(sorted(test.labels.tolist()), [0, 1])
        self.assertEqual(train.n_samples, 6)

    def test_two_samples(self):
        """Test fraction 0.5 on two samples puts one on each side"""

        table = make_table(np.zeros((2, 1)), labels=[0, 1])
        train, test = split(table, SplitSpec(test_fraction=0.5, stratified=False), np.random.default_rng(0))
        self.assertEqual((train.n_samples, test.n_samples), (1, 1))

    def test_infeasible(self):
        """Test a class with a single sample can't be stratified"""

        table = make_table(np.zeros((3, 1)), labels=[0, 0, 1])
        with self.assertRaises(ConfigurationError):
            split(table, SplitSpec(), np.random.default_rng(0))
        with self.assertRaises(ConfigurationError):
            SplitSpec(test_fraction=1.0)

    @settings(max_examples=1000, deadline=None)
    @given(table=labeled_tables(min_per_class=2), fraction=st.floats(0.05, 0.95), seed=st.integers(0, 2 ** 32 - 1))
    def test_partition(self, table, fraction, seed):
        """Test the split is a stratified partition"""

        spec = SplitSpec(test_fraction=fraction)
        train, test = split(table, spec, np.random.default_rng(seed))
        self.assertEqual(set(train.sample_ids) | set(test.sample_ids), set(table.sample_ids))
        self.assertFalse(set(train.sample_ids) & set(test.sample_ids))
        for label in (0, 1):
            n = int(np.sum(table.labels == label))
            self.assertEqual(int(np.sum(test.labels == label)), spec.test_count(n))

    def test_deterministic(self):
        """Test the same seed gives the same split"""

        table = make_table(np.zeros((20, 1)), labels=[0, 1] * 10)
        a = split(table, SplitSpec(), np.random.default_rng(4))[1].sample_ids
        b = split(table, SplitSpec(), np.random.default_rng(4))[1].sample_ids
        self.assertEqual(a, b)


class TestSynthPlanted(SimpleTestCase):

    def test_noise_free(self):
        """Test labels follow the rule when there is no noise"""

        table = synth_planted(500, 5, parse_sexpr('(presence X0)'), 0.0, np.random.default_rng(0))
        self.assertEqual(table.labels.tolist(), (table.values[:, 0] > 0).astype(int).tolist())
        self.assertEqual(table.metadata['rule'], '(presence X0)')
        np.testing.assert_allclose(table.values.sum(axis=1)[table.values.sum(axis=1) > 0], 100.0)

    def test_noise_rate(self):
        """Test about a tenth of the labels disagree with the rule at noise 0.1"""

        rule = parse_sexpr('(presence X0)')
        table = synth_planted(10000, 5, rule, 0.1, np.random.default_rng(1))
        agreement = np.mean((evaluate(rule, table) > 0.5).astype(int) == table.labels)
        self.assertAlmostEqual(agreement, 0.9, delta=0.03)

    def test_class_balance(self):
        """Test a presence rule marks about 30% of samples positive"""

        table = synth_planted(10000, 5, parse_sexpr('(presence X0)'), 0.0, np.random.default_rng(2))
        self.assertAlmostEqual(table.labels.mean(), 0.3, delta=0.03)

    def test_rule_out_of_range(self):
        """Test a rule referencing a missing feature is rejected"""

        with self.assertRaises(ConfigurationError):
            synth_planted(10, 3, parse_sexpr('(presence X3)'), 0.0, np.random.default_rng(0))


class TestPredictions(TempDirMixin, SimpleTestCase):

    def test_round_trip_and_align(self):
        """Test prediction files join by sample id whatever the row order"""

        table = make_table(np.ones((3, 1)), ids=['a', 'b', 'c'])
        path = self.path('pred.csv')
        save_predictions(path, ['c', 'a', 'b'], [1, 0, 1])
        self.assertEqual(align_labels(table, load_predictions(path)).tolist(), [0, 1, 1])

    def test_unmatched_ids_listed(self):
        """Test every sample without a prediction is named"""

        table = make_table(np.ones((3, 1)), ids=['a', 'b', 'c'])
        with self.assertRaises(DataError) as ctx:
            align_labels(table, {'b': 1})
        self.assertEqual(ctx.exception.additional_data['unmatched'], ['a', 'c'])

    def test_bad_prediction_files(self):
        """Test header and value checks"""

        for name, text in {
            'header.csv': 'id,pred\na,1\n',
            'value.csv': 'sample_id,pred\na,2\n',
            'dup.csv': 'sample_id,pred\na,1\na,0\n',
        }.items():
            with self.assertRaises(DataError, msg=name):
                load_predictions(self.write(name, text))
