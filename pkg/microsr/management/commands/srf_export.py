import os

from microsr.baselines import ForestConfig, fit_forest
from microsr.data import save_predictions, save_table, synth_planted
from microsr.errors import DataError, StructuralError
from microsr.exprtree import feature_indices, parse_sexpr, to_dot
from microsr.json import dumps
from microsr.management.base import SRCommand


class Command(SRCommand):
    help = ('Export artifacts: "dot" renders an S-expression file as Graphviz, "teacher" fits the in-repo random '
            'forest and writes its predictions as a teacher file, "planted" writes a synthetic table labeled by a '
            'known rule.')

    needs_gp_config = False

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--what', choices=['dot', 'teacher', 'planted'], required=True)
        parser.add_argument('--data', default=None, help='abundance table (teacher; feature names for dot)')
        parser.add_argument('--expr', default=None, help='S-expression file (dot)')
        parser.add_argument('--trees', type=int, default=50, help='forest size (teacher)')
        parser.add_argument('--rule', default='(presence_both X3 X7)', help='labeling rule (planted)')
        parser.add_argument('--samples', type=int, default=2000, help='rows (planted)')
        parser.add_argument('--features', type=int, default=50, help='columns (planted)')
        parser.add_argument('--noise', type=float, default=0.05, help='label flip probability (planted)')

    def run(self, **options):
        getattr(self, f'export_{options["what"]}')(options)

    def export_dot(self, options):
        if not options['expr']:
            raise DataError('--expr is required to export a DOT file')
        if not os.path.isfile(options['expr']):
            raise DataError(f'no such file: {options["expr"]}', path=options['expr'])
        with open(options['expr'], encoding='utf-8') as fp:
            expr = parse_sexpr(fp.read())
        if options['data']:
            names = self.load(options['data'], require_labels=False).feature_names
        else:
            names = [f'X{i}' for i in range(max(feature_indices(expr), default=-1) + 1)]
        stem = os.path.splitext(os.path.basename(options['expr']))[0]
        self.write_artifact(options, f'{stem}.dot', to_dot(expr, names))

    def export_teacher(self, options):
        if not options['data']:
            raise DataError('--data is required to fit a teacher')
        table = self.load(options['data'])
        forest = fit_forest(table, table.labels, ForestConfig(n_trees=options['trees'], n_jobs=options['workers']),
                            self.rng(options['seed']))
        predictions = forest.predict(table)
        path = self.write_artifact(options, 'teacher.csv', '')
        save_predictions(path, table.sample_ids, predictions)
        self.write_artifact(options, 'forest.json', dumps(forest))

    def export_planted(self, options):
        try:
            rule = parse_sexpr(options['rule'])
        except StructuralError as err:
            raise DataError(f'invalid rule: {err.reason}', rule=options['rule'])
        table = synth_planted(options['samples'], options['features'], rule, options['noise'],
                              self.rng(options['seed']))
        path = self.write_artifact(options, 'planted.csv', '')
        save_table(table, path)
        self.write_artifact(options, 'planted.json', dumps({'metadata': table.metadata, 'seed': options['seed']}))
