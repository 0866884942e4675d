import logging
import os
import sys
import time
import traceback

from dataclasses import dataclass, field, replace

import numpy as np

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError, handle_default_options

from ..conf import get_setting, gp_config, parse_overrides
from ..data import load_table, normalize_rows
from ..errors import ConfigurationError, DataError, SRError
from ..json import dumps, serialize

__all__ = [
    'RunReport',
    'SRCommand',
]

logger = logging.getLogger(__name__)


@dataclass
class RunReport:
    """
    Machine-readable record of one command invocation. `config_echo` and `seeds` are enough to repeat the run and get
    the same artifacts; only `wall_time_ms` differs between repetitions.
    """

    command: str
    seeds: dict
    config_echo: dict
    metrics: dict = field(default_factory=dict)
    best_expression: str = None
    expression_size: int = None
    expression_depth: int = None
    wall_time_ms: int = 0
    warnings: list = field(default_factory=list)
    details: dict = field(default_factory=dict)


class SRCommand(BaseCommand):
    """
    Base class for the microsr management commands.

    Subclasses implement `run(**options)` and write their artifacts with :py:meth:`write_artifact`. Any
    :py:class:`microsr.errors.SRError` raised along the way is turned into a single JSON error line on stderr with
    the error's exit status (2 for input problems, 1 for runtime failures), and every artifact already written by
    the failing invocation is removed.
    """

    requires_system_checks = []
    needs_gp_config = True

    def add_arguments(self, parser):
        parser.add_argument('--out-dir', default='.', help='directory receiving the output files')
        parser.add_argument('--seed', type=int, default=0, help='master seed for data subsampling and splits')
        parser.add_argument('--workers', type=int, default=None,
                            help='worker threads (results do not depend on this)')
        if self.needs_gp_config:
            parser.add_argument('--config', default=None, help='flat key = value file of GP settings')
            parser.add_argument('--preset', choices=['sr', 'srf'], default=None, help='primitive set preset')
            parser.add_argument('--gp-seed', type=int, default=None,
                                help='seed of the evolutionary search (default: --seed)')
            parser.add_argument('--set', action='append', default=[], metavar='KEY=VALUE',
                                help='override one GP setting; may be repeated')

    def run_from_argv(self, argv):
        self._called_from_command_line = True
        parser = self.create_parser(argv[0], argv[1])
        options = parser.parse_args(argv[2:])
        cmd_options = vars(options)
        args = cmd_options.pop('args', ())
        handle_default_options(options)
        try:
            self.execute(*args, **cmd_options)
        except CommandError as e:
            if options.traceback:
                raise
            self.stderr.write(str(e))
            sys.exit(e.returncode)

    def execute(self, *args, **options):
        self.written = []
        try:
            return super(SRCommand, self).execute(*args, **options)
        except SRError as err:
            self.discard_artifacts()
            raise CommandError(err.to_json(), returncode=err.exit_status) from err
        except CommandError:
            self.discard_artifacts()
            raise
        except Exception as ex:
            self.discard_artifacts()
            extra = {'traceback': traceback.format_exc()} if settings.DEBUG else {}
            raise CommandError(SRError(str(ex), **extra).to_json(), returncode=1) from ex

    def handle(self, *args, **options):
        self.started = time.monotonic()
        self.warnings = []
        if options.get('workers') is None:
            options['workers'] = get_setting('MICROSR_WORKERS')
        self.check_options(options)
        os.makedirs(options['out_dir'], exist_ok=True)
        self.run(**options)

    def check_options(self, options):
        """Reject argument values the commands can't use; called before any file is read or written."""

        for name in ('seed', 'gp_seed'):
            value = options.get(name)
            if value is not None and not 0 <= value < 2 ** 64:
                raise ConfigurationError(f'--{name.replace("_", "-")} must be an unsigned 64-bit integer',
                                         **{name: value})
        if options['workers'] < 1:
            raise ConfigurationError('--workers must be at least 1', workers=options['workers'])

    def run(self, **options):
        raise NotImplementedError('subclasses of SRCommand must provide a run() method')

    # Inputs

    def gp_config(self, options):
        """Resolve the GP configuration; an unset GP seed falls back to --seed."""

        overrides = parse_overrides(options.get('set'))
        if options.get('preset'):
            overrides['function_set'] = options['preset']
        if options.get('gp_seed') is not None:
            overrides['seed'] = options['gp_seed']
        overrides['n_jobs'] = options['workers']
        cfg = gp_config(options.get('config'), overrides)
        if cfg.seed is None:
            cfg = replace(cfg, seed=options['seed'])
        return cfg

    def load(self, path, require_labels=True):
        table = normalize_rows(load_table(path))
        if require_labels and not table.is_labeled:
            raise DataError(f'{path} has no label column', path=str(path))
        self.warnings.extend(table.warnings)
        return table

    @staticmethod
    def echo(cfg):
        """Configuration as recorded in reports; the worker count is left out since it never changes results."""
        return serialize(cfg, exclude=['n_jobs'])

    @staticmethod
    def rng(seed):
        return np.random.default_rng(seed)

    # Outputs

    def elapsed_ms(self):
        return int((time.monotonic() - self.started) * 1000)

    def write_artifact(self, options, name, content):
        path = os.path.join(options['out_dir'], name)
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.written.append(path)
        with open(path, 'w', encoding='utf-8') as fp:
            fp.write(content)
        logger.info('wrote %s', path)
        return path

    def write_report(self, options, report, name='report.json'):
        report.wall_time_ms = self.elapsed_ms()
        report.warnings = list(self.warnings)
        path = self.write_artifact(options, name, dumps(report))
        self.stdout.write(path)
        return path

    def write_frame(self, options, name, frame):
        return self.write_artifact(options, name, frame.to_csv(index=False, lineterminator='\n'))

    def discard_artifacts(self):
        for path in reversed(getattr(self, 'written', [])):
            try:
                os.remove(path)
            except OSError:
                pass
        self.written = []
