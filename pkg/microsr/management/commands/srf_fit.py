from microsr.baselines import metrics
from microsr.data import SplitSpec, split, undersample_balance
from microsr.exprtree import predict_label, to_dot, to_sexpr
from microsr.genetic import evolve
from microsr.management.base import RunReport, SRCommand


class Command(SRCommand):
    help = ('Fit a symbolic classifier: normalize, balance and split the table, evolve an expression on the training '
            'part and score it on the test part. Writes report.json, expression.sexpr and expression.dot.')

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--data', required=True, help='labeled abundance table (CSV)')
        parser.add_argument('--test-fraction', type=float, default=0.25)
        parser.add_argument('--imbalanced', action='store_true', help='skip undersampling of the majority class')

    def run(self, **options):
        cfg = self.gp_config(options)
        seed = options['seed']
        data_rng = self.rng(seed)
        gp_rng = self.rng(cfg.seed)

        table = self.load(options['data'])
        if not options['imbalanced']:
            table = undersample_balance(table, data_rng)
        spec = SplitSpec(test_fraction=options['test_fraction'], seed=seed)
        train, test = split(table, spec, data_rng)

        best, history = evolve(cfg, train, train.labels, gp_rng)
        model = str(cfg.function_set)

        report = RunReport(
            command='fit',
            seeds={'data': seed, 'gp': cfg.seed},
            config_echo={
                'gp': self.echo(cfg),
                'split': spec,
                'imbalanced': options['imbalanced'],
                'data': options['data'],
            },
            metrics={
                model: metrics(predict_label(best.expr, test), test.labels),
                f'{model}_train': metrics(predict_label(best.expr, train), train.labels),
            },
            best_expression=to_sexpr(best.expr),
            expression_size=best.size,
            expression_depth=best.depth,
            details={
                'raw_fitness': best.raw_fitness,
                'penalized_fitness': best.penalized_fitness,
                'n_train': train.n_samples,
                'n_test': test.n_samples,
                'history': history.records,
                'elitism': history.elitism,
            },
        )
        self.write_artifact(options, 'expression.sexpr', to_sexpr(best.expr) + '\n')
        self.write_artifact(options, 'expression.dot', to_dot(best.expr, table.feature_names))
        self.write_report(options, report)
