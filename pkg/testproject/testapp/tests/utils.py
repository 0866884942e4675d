import math
import os
import shutil
import tempfile

import numpy as np

from hypothesis import strategies as st

from microsr.data import AbundanceTable
from microsr.exprtree import PRIMITIVES, Call, Constant, Feature
from microsr.genetic import GPConfig

N_FEATURES = 6

leaves = st.one_of(
    st.builds(Feature, st.integers(0, N_FEATURES - 1)),
    st.builds(Constant, st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)),
)


def _extend(children):
    return st.sampled_from(sorted(PRIMITIVES.values(), key=lambda p: p.name)).flatmap(
        lambda p: st.lists(children, min_size=p.arity, max_size=p.arity).map(lambda cs: Call(p, cs)))


trees = st.recursive(leaves, _extend, max_leaves=40).filter(lambda e: e.depth <= 8)

rows = st.lists(
    st.one_of(st.just(0.0), st.floats(0.0, 100.0, allow_nan=False, allow_infinity=False)),
    min_size=N_FEATURES, max_size=N_FEATURES)


def naive_eval(expr, row):
    """Plain recursive interpreter used as an oracle for the evaluators under test."""

    if isinstance(expr, Constant):
        return expr.value
    if isinstance(expr, Feature):
        return float(row[expr.index])
    args = [naive_eval(c, row) for c in expr.children]
    name = expr.primitive.name
    if name == 'add':
        out = args[0] + args[1]
    elif name == 'sub':
        out = args[0] - args[1]
    elif name == 'mul':
        out = args[0] * args[1]
    elif name == 'div':
        out = 1.0 if abs(args[1]) < 1e-3 else args[0] / args[1]
    elif name == 'log':
        out = 0.0 if abs(args[0]) < 1e-3 else math.log(abs(args[0]))
    elif name == 'sqrt':
        out = math.sqrt(abs(args[0]))
    elif name == 'abs':
        out = abs(args[0])
    elif name == 'neg':
        out = -args[0]
    elif name == 'presence':
        out = 1.0 if args[0] > 0 else 0.0
    elif name == 'absence':
        out = 1.0 if args[0] <= 0 else 0.0
    elif name == 'presence_both':
        out = 1.0 if args[0] > 0 and args[1] > 0 else 0.0
    elif name == 'absence_both':
        out = 1.0 if args[0] <= 0 and args[1] <= 0 else 0.0
    elif name in ('ifelse', 'max'):
        out = args[0] if args[0] > args[1] else args[1]
    elif name == 'min':
        out = args[0] if args[0] < args[1] else args[1]
    else:
        raise AssertionError(name)
    if not math.isfinite(out):
        raise OverflowError(name)
    return out


def make_table(values, labels=None, names=None, ids=None):
    values = np.asarray(values, dtype=float)
    n, f = values.shape
    return AbundanceTable(
        feature_names=names or [f'X{j}' for j in range(f)],
        sample_ids=ids or [f's{i}' for i in range(n)],
        values=values,
        labels=labels,
    )


def small_config(**kwargs):
    params = dict(population_size=60, generations=3, tournament_size=5, seed=0)
    params.update(kwargs)
    return GPConfig(**params)


class TempDirMixin:

    def setUp(self):
        super(TempDirMixin, self).setUp()
        self.tmp = tempfile.mkdtemp(prefix='microsr-test-')

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)
        super(TempDirMixin, self).tearDown()

    def path(self, *parts):
        return os.path.join(self.tmp, *parts)

    def write(self, name, text):
        path = self.path(name)
        with open(path, 'w', encoding='utf-8') as fp:
            fp.write(text)
        return path
