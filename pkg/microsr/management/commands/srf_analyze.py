import glob
import logging

import pandas as pd

from microsr.analysis import feature_counts, feature_summary, length_stats
from microsr.conf import get_setting
from microsr.errors import DataError, StructuralError
from microsr.exprtree import feature_indices, parse_sexpr
from microsr.json import dumps
from microsr.management.base import SRCommand

logger = logging.getLogger(__name__)


class Command(SRCommand):
    help = ('Rank features by how often learned expressions use them, summarize expression sizes and, given the '
            'data, report per-class mean and standard deviation of the top-ranked features.')

    needs_gp_config = False

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--exprs', required=True, help='glob of S-expression files, e.g. "runs/*_srf.sexpr"')
        parser.add_argument('--data', default=None, help='abundance table providing feature names and labels')
        parser.add_argument('--top-k', type=int, default=None, help='features to summarize per class')
        parser.add_argument('--per-expression', action='store_true',
                            help='count each feature at most once per expression')

    def read_expressions(self, pattern):
        exprs, sources = [], []
        for path in sorted(glob.glob(pattern)):
            with open(path, encoding='utf-8') as fp:
                text = fp.read()
            try:
                exprs.append(parse_sexpr(text))
            except StructuralError as err:
                message = f'skipped {path}: {err.reason}'
                logger.warning(message)
                self.warnings.append(message)
                continue
            sources.append(path)
        if not exprs:
            raise DataError(f'no parseable expression matches {pattern}', pattern=pattern)
        return exprs, sources

    def run(self, **options):
        exprs, sources = self.read_expressions(options['exprs'])
        top_k = options['top_k'] if options['top_k'] is not None else get_setting('MICROSR_TOP_K')

        table = None
        if options['data']:
            table = self.load(options['data'])
            names = table.feature_names
        else:
            highest = max((max(feature_indices(e), default=-1) for e in exprs), default=-1)
            names = [f'X{i}' for i in range(highest + 1)]

        ranking = feature_counts(exprs, names, per_expression=options['per_expression'])
        self.write_frame(options, 'feature_counts.csv',
                         pd.DataFrame(ranking.rows(), columns=['rank', 'feature', 'count']))
        self.write_artifact(options, 'feature_counts.json', dumps({
            'per_expression': ranking.per_expression,
            'total': ranking.total,
            'ranking': ranking.rows(),
            'sources': sources,
        }))

        stats = length_stats(exprs)
        self.write_artifact(options, 'length_stats.json', dumps({'stats': stats, 'sources': sources}))

        if table is not None:
            top = [name for name, _ in ranking.top(top_k)]
            summary = feature_summary(table, table.labels, top)
            self.write_frame(options, 'feature_summary.csv', pd.DataFrame(
                [{'feature': s.feature, 'class': s.label, 'mean': s.mean, 'stddev': s.stddev} for s in summary],
                columns=['feature', 'class', 'mean', 'stddev']))
            self.write_artifact(options, 'feature_summary.json', dumps({'top_k': top_k, 'summary': summary}))

        self.stdout.write(f'{len(exprs)} expression(s), {ranking.total} feature occurrence(s)')
