import logging

from dataclasses import dataclass, replace

import numpy as np

from joblib import Parallel, delayed

from microsr.baselines import BaselineConfig, ForestConfig, fit_cart, fit_forest, fit_logreg, metrics
from microsr.data import SplitSpec, split, undersample_balance
from microsr.errors import ConfigurationError
from microsr.exprtree import SR, SRF, to_sexpr
from microsr.genetic import SymbolicClassifier
from microsr.management.base import RunReport, SRCommand

logger = logging.getLogger(__name__)

MODELS = ('logreg', 'tree', 'forest', 'sr', 'srf')
METRICS = ('accuracy', 'f1')


@dataclass
class BenchmarkRun:
    run: int
    data_seed: int
    gp_seed: int
    metrics: dict
    sr_expression: str
    srf_expression: str
    sr_size: int
    srf_size: int
    n_train: int
    n_test: int


def run_seeds(seed, gp_seed, index):
    """
    Seeds of benchmark run `index`: ``seed ^ index`` for subsampling, splitting and the baselines, and
    ``gp_seed ^ index`` for both symbolic searches.
    """
    return seed ^ index, gp_seed ^ index


def benchmark_run(table, index, seed, cfg, baselines, spec_kwargs, imbalanced):
    data_seed, gp_seed = run_seeds(seed, cfg.seed, index)
    data_rng = np.random.default_rng(data_seed)
    if not imbalanced:
        table = undersample_balance(table, data_rng)
    train, test = split(table, SplitSpec(seed=data_seed, **spec_kwargs), data_rng)
    baseline_rng = np.random.default_rng([data_seed, 1])

    fitted = {
        'logreg': fit_logreg(train, train.labels, baselines.logreg, baseline_rng),
        'tree': fit_cart(train, train.labels, baselines.tree, baseline_rng),
        'forest': fit_forest(train, train.labels, baselines.forest, baseline_rng),
    }
    for name, function_set in (('sr', SR), ('srf', SRF)):
        fitted[name] = SymbolicClassifier(replace(cfg, function_set=function_set)).fit(
            train, train.labels, np.random.default_rng(gp_seed))

    scores = {name: metrics(model.predict(test), test.labels) for name, model in fitted.items()}
    logger.info('run %d: %s', index, ', '.join(f'{m} {scores[m].accuracy:.3f}' for m in MODELS))
    return BenchmarkRun(
        run=index,
        data_seed=data_seed,
        gp_seed=gp_seed,
        metrics=scores,
        sr_expression=to_sexpr(fitted['sr'].expr),
        srf_expression=to_sexpr(fitted['srf'].expr),
        sr_size=fitted['sr'].expr.size,
        srf_size=fitted['srf'].expr.size,
        n_train=train.n_samples,
        n_test=test.n_samples,
    )


def aggregate(runs):
    """Mean and population standard deviation of every metric of every model, over runs in run order."""

    summary = {}
    for model in MODELS:
        summary[model] = {}
        for metric in METRICS:
            values = [getattr(run.metrics[model], metric) for run in runs]
            summary[model][metric] = {'mean': float(np.mean(values)), 'stddev': float(np.std(values))}
    sr_sizes = [run.sr_size for run in runs]
    srf_sizes = [run.srf_size for run in runs]
    summary['sizes'] = {
        'sr': {'mean': float(np.mean(sr_sizes)), 'stddev': float(np.std(sr_sizes))},
        'srf': {'mean': float(np.mean(srf_sizes)), 'stddev': float(np.std(srf_sizes))},
        'srf_smaller_runs': sum(1 for a, b in zip(srf_sizes, sr_sizes) if a < b),
    }
    return summary


class Command(SRCommand):
    help = ('Benchmark logistic regression, decision tree, random forest, SR and SRf over repeated balanced '
            'subsamples. Writes report.json with per-run records and aggregates, plus every learned expression '
            'under runs/.')

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--data', required=True, help='labeled abundance table (CSV)')
        parser.add_argument('--runs', type=int, default=20, help='number of random subsamples')
        parser.add_argument('--test-fraction', type=float, default=0.25)
        parser.add_argument('--imbalanced', action='store_true', help='skip undersampling of the majority class')
        parser.add_argument('--trees', type=int, default=50, help='random forest size')

    def check_options(self, options):
        super(Command, self).check_options(options)
        if options['runs'] < 1:
            raise ConfigurationError('--runs must be at least 1', runs=options['runs'])

    def run(self, **options):
        cfg = self.gp_config(options)
        seed = options['seed']
        n_runs = options['runs']
        workers = options['workers']
        table = self.load(options['data'])

        # parallelism either across runs or inside each run, never both
        outer = max(1, min(workers, n_runs))
        inner = 1 if outer > 1 else workers
        cfg = replace(cfg, n_jobs=inner)
        baselines = BaselineConfig(forest=ForestConfig(n_trees=options['trees'], n_jobs=inner))
        spec_kwargs = {'test_fraction': options['test_fraction']}

        def job(index):
            return benchmark_run(table, index, seed, cfg, baselines, spec_kwargs, options['imbalanced'])

        if outer == 1:
            runs = [job(i) for i in range(n_runs)]
        else:
            runs = Parallel(n_jobs=outer, prefer='threads')(delayed(job)(i) for i in range(n_runs))

        for run in runs:
            self.write_artifact(options, f'runs/run_{run.run:02d}_sr.sexpr', run.sr_expression + '\n')
            self.write_artifact(options, f'runs/run_{run.run:02d}_srf.sexpr', run.srf_expression + '\n')

        report = RunReport(
            command='benchmark',
            seeds={'data': seed, 'gp': cfg.seed},
            config_echo={
                'gp': self.echo(cfg),
                'baselines': replace(baselines, forest=replace(baselines.forest, n_jobs=1)),
                'split': spec_kwargs,
                'runs': n_runs,
                'imbalanced': options['imbalanced'],
                'data': options['data'],
            },
            metrics=aggregate(runs),
            details={'runs': runs},
        )
        self.write_report(options, report)
