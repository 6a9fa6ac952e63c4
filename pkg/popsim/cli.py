'''
Command line harness: single runs, sweeps over n, baseline processes and exact
verification, with CSV or JSON output.

Every trial draws from its own substream of the master seed, so repeating a
command with the same seed reproduces its output byte for byte.
'''
from __future__ import annotations
import csv
import io
import json
import logging
import os
import sys
import typing as t
from argparse import ArgumentParser, ArgumentTypeError, Namespace
from dataclasses import dataclass
from pathlib import Path

from popsim import oracle
from popsim.adversary import InitKind, generate_initial
from popsim.analysis import epidemic_trial, fit_loglog, reset_recovery_trial, roll_call_trial
from popsim.engine import Params, RngStream, run
from popsim.exceptions import OutputError, PopSimError, SchemaError, UsageError
from popsim.protocols import protocol_names
from popsim.utils import TrialPool


logger = logging.getLogger('popsim.cli')

T_ROW = t.Dict[str, t.Any]

RUN_COLUMNS = (
    'protocol', 'n', 'init', 'seed', 'trial', 'interactions', 'parallel_time',
    'silence_interaction', 'convergence_interaction', 'timed_out', 'reset_triggers',
)
#: Trial rows then, once at least three sizes finished, one 'fit' summary row.
SWEEP_COLUMNS = ('record',) + RUN_COLUMNS + ('slope', 'intercept', 'r_squared')
BASELINE_COLUMNS = ('process', 'n', 'seed', 'trial', 'interactions', 'parallel_time', 'timed_out')
PROCESSES = ('epidemic', 'roll_call', 'reset_recovery')
FORMATS = ('csv', 'json')
_SEED_LIMIT = 2 ** 64


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    protocol: str
    init: InitKind
    ns: t.Tuple[int, ...]
    trials: int
    seed: int
    max_interactions: t.Optional[int] = None
    tail_margin: t.Optional[int] = None
    name_space: t.Optional[int] = None
    r_max: t.Optional[int] = None
    d_max: t.Optional[int] = None
    c_max: t.Optional[int] = None
    out: t.Optional[Path] = None
    format: str = 'csv'
    jobs: int = 1
    process: str = 'epidemic'

    def validate(self) -> None:
        if self.trials < 1:
            raise UsageError('--trials must be at least 1')
        if self.jobs < 1:
            raise UsageError('--jobs must be at least 1')
        if not self.ns:
            raise UsageError('--n needs at least one population size')
        if any(later <= earlier for earlier, later in zip(self.ns, self.ns[1:])):
            raise UsageError('--n values must be strictly increasing')
        if self.command in ('run', 'verify') and len(self.ns) != 1:
            raise UsageError(f'{self.command} takes a single --n')
        if not 0 <= self.seed < _SEED_LIMIT:
            raise UsageError('--seed must be a 64-bit unsigned integer')

    def params(self, n: int, protocol: t.Optional[str] = None) -> Params:
        return Params.for_population(
            n,
            protocol=protocol or self.protocol,
            max_interactions=self.max_interactions,
            tail_margin=self.tail_margin,
            name_space=self.name_space,
            r_max=self.r_max,
            d_max=self.d_max,
            c_max=self.c_max,
        )


def _format_csv_value(value: t.Any) -> str:
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return f'{value:.6f}'
    return str(value)


def _format_json_value(value: t.Any) -> t.Any:
    if isinstance(value, float):
        return round(value, 6)
    return value


def write_rows(
    rows: t.Sequence[T_ROW],
    format: str,
    path: t.Optional[Path],
    columns: t.Optional[t.Sequence[str]] = None,
) -> None:
    '''
    Write homogeneous rows as CSV (header first, LF line endings) or as a JSON
    array of objects. Without a path the rows go to stdout.

    :raises SchemaError: if the rows do not all have the same fields
    :raises OutputError: if the file cannot be written
    '''
    if columns is None:
        columns = tuple(rows[0]) if rows else ()
    for row in rows:
        if tuple(row) != tuple(columns):
            raise SchemaError(f'row fields {sorted(row)} do not match {list(columns)}')
    if format == 'csv':
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_csv_value(row[column]) for column in columns])
        text = buffer.getvalue()
    elif format == 'json':
        objects = [{column: _format_json_value(row[column]) for column in columns} for row in rows]
        text = json.dumps(objects, indent=2) + '\n'
    else:
        raise UsageError(f'unknown output format {format!r}')
    _write_text(text, path)


def _write_text(text: str, path: t.Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
    except OSError as error:
        raise OutputError(path, error.strerror or str(error)) from None


def _run_row(spec: ExperimentSpec, n: int, trial: int, rng: RngStream) -> T_ROW:
    params = spec.params(n)
    config = generate_initial(spec.init, spec.protocol, params, rng)
    metrics = run(spec.protocol, config, params, rng, trial=trial).metrics
    return {
        'protocol': spec.protocol,
        'n': n,
        'init': spec.init.value,
        'seed': spec.seed,
        'trial': trial,
        'interactions': metrics.interactions,
        'parallel_time': float(metrics.parallel_time),
        'silence_interaction': metrics.silence_interaction,
        'convergence_interaction': metrics.convergence_interaction,
        'timed_out': metrics.timed_out,
        'reset_triggers': metrics.reset_triggers,
    }


def _execute_run(spec: ExperimentSpec) -> None:
    n = spec.ns[0]
    logger.info('run %s from %s, n=%d, %d trials', spec.protocol, spec.init.value, n, spec.trials)
    rows = TrialPool(spec.jobs).map(
        lambda trial: _run_row(spec, n, trial, RngStream.substream(spec.seed, n, trial)),
        range(spec.trials),
    )
    write_rows(rows, spec.format, spec.out, RUN_COLUMNS)


def _sweep_record(record: str, values: T_ROW) -> T_ROW:
    row: T_ROW = {column: values.get(column) for column in SWEEP_COLUMNS}
    row['record'] = record
    return row


def _finish_time(row: T_ROW) -> t.Optional[int]:
    if row['silence_interaction'] is not None:
        return row['silence_interaction']
    return row['convergence_interaction']


def _execute_sweep(spec: ExperimentSpec) -> None:
    items = [(n, trial) for n in spec.ns for trial in range(spec.trials)]
    logger.info('sweep %s from %s over n=%s, %d trials each', spec.protocol, spec.init.value,
        ','.join(map(str, spec.ns)), spec.trials)
    rows = TrialPool(spec.jobs).map(
        lambda item: _run_row(spec, item[0], item[1], RngStream.substream(spec.seed, *item)),
        items,
    )
    records = [_sweep_record('trial', row) for row in rows]
    means: t.Dict[int, float] = dict()
    for n in spec.ns:
        times = [_finish_time(row) for row in rows if row['n'] == n and not row['timed_out']]
        finished = [time / n for time in times if time is not None]
        if len(finished) < spec.trials:
            logger.warning('n=%d: %d of %d trials left out of the fit', n, spec.trials - len(finished), spec.trials)
        if finished:
            means[n] = sum(finished) / len(finished)
    if len(means) < 3:
        logger.warning('not enough population sizes with finished trials to fit a scaling law')
        write_rows(records, spec.format, spec.out, SWEEP_COLUMNS)
        return
    fit = fit_loglog([(n, mean) for n, mean in means.items()])
    logger.info('fit: slope=%.4f intercept=%.4f r^2=%.4f', fit.slope, fit.intercept, fit.r_squared)
    summary = fit.to_json()
    records.append(_sweep_record('fit', dict(protocol=spec.protocol, init=spec.init.value, seed=spec.seed, **summary)))
    write_rows(records, spec.format, spec.out, SWEEP_COLUMNS)
    if spec.out is not None:
        summary['means'] = [{'n': n, 'parallel_time': round(mean, 6)} for n, mean in means.items()]
        _write_text(json.dumps(summary, indent=2) + '\n', spec.out.with_suffix('.fit.json'))


def _baseline_row(spec: ExperimentSpec, n: int, trial: int) -> T_ROW:
    rng = RngStream.substream(spec.seed, n, trial)
    interactions: t.Optional[int]
    if spec.process == 'epidemic':
        interactions = epidemic_trial(n, rng)
    elif spec.process == 'roll_call':
        interactions = roll_call_trial(n, rng)
    else:
        interactions = reset_recovery_trial(spec.params(n, 'linear_time'), rng)
    return {
        'process': spec.process,
        'n': n,
        'seed': spec.seed,
        'trial': trial,
        'interactions': interactions,
        'parallel_time': None if interactions is None else interactions / n,
        'timed_out': interactions is None,
    }


def _execute_baseline(spec: ExperimentSpec) -> None:
    items = [(n, trial) for n in spec.ns for trial in range(spec.trials)]
    logger.info('baseline %s over n=%s, %d trials each', spec.process, ','.join(map(str, spec.ns)), spec.trials)
    rows = TrialPool(spec.jobs).map(lambda item: _baseline_row(spec, *item), items)
    write_rows(rows, spec.format, spec.out, BASELINE_COLUMNS)


def _execute_verify(spec: ExperimentSpec) -> None:
    params = spec.params(spec.ns[0])
    graph = oracle.build_config_graph(spec.protocol, params)
    report = oracle.verify_self_stabilizing(graph)
    _write_text(json.dumps(report.to_json(), indent=2) + '\n', spec.out)


_COMMANDS: t.Dict[str, t.Callable[[ExperimentSpec], None]] = {
    'run': _execute_run,
    'sweep': _execute_sweep,
    'baseline': _execute_baseline,
    'verify': _execute_verify,
}


def execute(spec: ExperimentSpec) -> None:
    ''' Validate the experiment and write its output. '''
    spec.validate()
    _COMMANDS[spec.command](spec)


def _n_list(text: str) -> t.Tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(','))
    except ValueError:
        raise ArgumentTypeError(f'{text!r} is not an integer or a comma-separated list of integers') from None


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ArgumentTypeError(f'{text!r} is not an integer') from None
    if value < 0:
        raise ArgumentTypeError(f'{text!r} is negative')
    return value


class _Parser(ArgumentParser):

    def error(self, message):
        raise UsageError(message)


def _parser() -> ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument('--n', type=_n_list, required=True,
        help='population size, or a comma-separated increasing list for sweep and baseline')
    common.add_argument('--trials', type=int, default=1, help='trials per population size')
    common.add_argument('--seed', type=_positive, default=None,
        help='master seed (default: $POPSIM_SEED, else 0)')
    common.add_argument('--format', choices=FORMATS, default='csv', help='output format')
    common.add_argument('--out', type=Path, default=None, help='output file (default: stdout)')
    common.add_argument('--jobs', type=int, default=1, help='worker threads for independent trials')
    common.add_argument('--max-interactions', type=_positive, default=None,
        help='run horizon in interactions (default: protocol-specific)')
    common.add_argument('--tail-margin', type=_positive, default=None,
        help='trailing correct interactions required for a stable tail')
    common.add_argument('--name-space', type=_positive, default=None, help='override the name space size')
    common.add_argument('--r-max', type=_positive, default=None, help='override the reset propagation count')
    common.add_argument('--d-max', type=_positive, default=None, help='override the dormancy delay')
    common.add_argument('--c-max', type=_positive, default=None, help='override the phase clock countdown')

    protocols = _Parser(add_help=False)
    protocols.add_argument('--protocol', choices=protocol_names(), required=True, help='protocol id')
    protocols.add_argument('--init', choices=[kind.value for kind in InitKind], default=InitKind.UNIFORM_RANDOM.value,
        help='initial configuration kind')

    parser = _Parser(
        prog='popsim',
        usage='%(prog)s <command> <arguments>',
        description='Simulate and verify self-stabilizing ranking population protocols.',
    )
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('run', parents=[common, protocols], help='independent runs at one population size')
    commands.add_parser('sweep', parents=[common, protocols], help='runs over several sizes plus a log-log fit')
    baseline = commands.add_parser('baseline', parents=[common], help='epidemic, roll call or reset recovery')
    baseline.add_argument('--process', choices=PROCESSES, default='epidemic', help='baseline process')
    verify = commands.add_parser('verify', parents=[common], help='exact self-stabilization check')
    verify.add_argument('--protocol', choices=protocol_names(), required=True, help='protocol id')
    return parser


def _spec_from_args(args: Namespace) -> ExperimentSpec:
    seed = args.seed
    if seed is None:
        env_seed = os.environ.get('POPSIM_SEED')
        try:
            seed = int(env_seed) if env_seed else 0
        except ValueError:
            raise UsageError(f'POPSIM_SEED={env_seed!r} is not an integer') from None
    return ExperimentSpec(
        command=args.command,
        protocol=getattr(args, 'protocol', 'linear_time'),
        init=InitKind.from_json(getattr(args, 'init', InitKind.UNIFORM_RANDOM.value)),
        ns=args.n,
        trials=args.trials,
        seed=seed,
        max_interactions=args.max_interactions,
        tail_margin=args.tail_margin,
        name_space=args.name_space,
        r_max=args.r_max,
        d_max=args.d_max,
        c_max=args.c_max,
        out=args.out,
        format=args.format,
        jobs=args.jobs,
        process=getattr(args, 'process', 'epidemic'),
    )


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    log_level = getattr(logging, os.environ.get('LOG_LEVEL', 'info').upper(), logging.INFO)
    logging.basicConfig(level=log_level)
    try:
        args = _parser().parse_args(argv)
        execute(_spec_from_args(args))
    except PopSimError as error:
        message = ' '.join(str(error).split())
        print(f'error: kind={type(error).__name__} message={message}', file=sys.stderr)
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
