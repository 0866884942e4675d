from microsr.analysis import distill
from microsr.baselines import metrics
from microsr.data import align_labels, load_predictions
from microsr.exprtree import predict_label, to_dot, to_sexpr
from microsr.json import flatten, serialize
from microsr.management.base import RunReport, SRCommand


class Command(SRCommand):
    help = ("Distill a teacher model's predictions into a symbolic student. Teacher labels are joined to the table by "
            "sample_id; fidelity is measured on a held-out quarter of the rows. Writes report.json, student.sexpr "
            "and student.dot.")

    def add_arguments(self, parser):
        super(Command, self).add_arguments(parser)
        parser.add_argument('--data', required=True, help='abundance table (CSV); labels are optional')
        parser.add_argument('--teacher', required=True, help='teacher predictions, CSV with header sample_id,pred')
        parser.add_argument('--test-fraction', type=float, default=0.25)

    def run(self, **options):
        cfg = self.gp_config(options)
        seed = options['seed']

        table = self.load(options['data'], require_labels=False)
        teacher_labels = align_labels(table, load_predictions(options['teacher']))

        result = distill(table, teacher_labels, cfg, self.rng(cfg.seed), teacher_source=options['teacher'],
                         test_fraction=options['test_fraction'], split_rng=self.rng(seed))
        student = result.student.expr

        scores = {'fidelity': result.fidelity}
        if table.is_labeled:
            held_out = table.subset([table.sample_ids.index(s) for s in result.held_out_ids])
            scores['student_vs_truth'] = metrics(predict_label(student, held_out), held_out.labels)

        report = RunReport(
            command='distill',
            seeds={'data': seed, 'gp': cfg.seed},
            config_echo={
                'gp': self.echo(cfg),
                'test_fraction': options['test_fraction'],
                'data': options['data'],
                'teacher': options['teacher'],
            },
            metrics=scores,
            best_expression=to_sexpr(student),
            expression_size=student.size,
            expression_depth=student.depth,
            details=serialize(result, exclude=['config_echo', 'history', 'train_ids'], include=[
                ('student', dict(include=['size', 'depth'])),
                ('history', lambda r: r.history.records),
            ], fixup=flatten('student')),
        )
        self.write_artifact(options, 'student.sexpr', to_sexpr(student) + '\n')
        self.write_artifact(options, 'student.dot', to_dot(student, table.feature_names))
        self.write_report(options, report)
