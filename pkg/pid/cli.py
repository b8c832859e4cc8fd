import argparse
import logging
import os
import sys
import time
from typing import Dict, List, Optional, Sequence

from pid.builtin_systems import PUBLISHED_VALUES, builtin_system
from pid.distfile import format_distribution, read_channels, read_distribution, write_distribution
from pid.errors import OptimizerError, MeasureMismatchError, PIDError
from pid.measures import (CHAIN_ORDER, MeasureKind, check_wb_axioms, decompose, decompose_all,
                          specific_information_domination)
from pid.optimize import OptimizerConfig
from pid.preorders import (DEFAULT_DS_DEPTH, DEFAULT_GRID_RESOLUTION, DEFAULT_MAX_OPS, RELATIONS,
                           LessNoisyCounterexample, MoreCapableCounterexample, PreorderVerdict,
                           check_relation, describe_verdict)
from pid.probcore import joint_to_system
from pid.report import ReportDocument, decomposition_rows, sampling_metadata, save_to_excel

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FALSIFIED = 1
EXIT_INPUT = 2
EXIT_OPTIMIZER = 3
EXIT_UNKNOWN = 4

MEASURE_CHOICES = [kind.value for kind in CHAIN_ORDER] + ['all']


def resolve_seed(seed: Optional[int]) -> int:
    """--seed, else the PID_SEED environment variable, else 0."""
    if seed is not None:
        return seed
    try:
        return int(os.environ.get('PID_SEED', '0'))
    except ValueError:
        logger.warning(f"Ignoring non-integer PID_SEED={os.environ['PID_SEED']!r}")
        return 0


def optimizer_config(args) -> OptimizerConfig:
    defaults = OptimizerConfig()
    return OptimizerConfig(
        support_size=getattr(args, 'support', None),
        num_starts=getattr(args, 'starts', None) or defaults.num_starts,
        seed=resolve_seed(getattr(args, 'seed', None)),
        grid_resolution=getattr(args, 'grid', None) or defaults.grid_resolution,
    )


def _emit(report: ReportDocument, as_json: bool, started: float):
    report.runtime = time.perf_counter() - started
    logger.info(f"{report.command} finished in {report.runtime:.2f} s")
    print(report.to_json() if as_json else report.render_text())


def _config_metadata(config: OptimizerConfig) -> Dict:
    return {'seed': config.seed, 'num_starts': config.num_starts, 'grid_resolution': config.grid_resolution,
            'support_size': config.support_size, 'max_iters': config.max_iters}


def _decomposition_report(command: str, source: str, system, kinds: Sequence[str], config: OptimizerConfig,
                          published=None) -> ReportDocument:
    if 'all' in kinds:
        decompositions = decompose_all(system, config)
    else:
        decompositions = {MeasureKind(k): decompose(system, k, config) for k in kinds}
    metadata = dict(_config_metadata(config), source=source, n_sources=system.n_sources)
    sampling = sampling_metadata(decompositions)
    if sampling:
        metadata['sampling'] = sampling
    mc = decompositions.get(MeasureKind.MC)
    if mc is not None and mc.argmax_channel is not None:
        failures = specific_information_domination(system, mc.argmax_channel)
        metadata['domination_failures'] = len(failures)
    rows = decomposition_rows(source, decompositions, published)
    flags = {kind.symbol: d.flags[0] for kind, d in decompositions.items() if d.flags}
    return ReportDocument(command, metadata, rows, flags)


def cmd_decompose(args) -> int:
    started = time.perf_counter()
    if args.example:
        source = args.example
        system = builtin_system(args.example)
    elif args.file:
        source = args.file
        system = joint_to_system(read_distribution(args.file))
    else:
        logger.error("decompose needs a distribution file or --example NAME")
        return EXIT_INPUT
    config = optimizer_config(args)
    published = PUBLISHED_VALUES.get(args.example) if args.example else None
    report = _decomposition_report('decompose', source, system, [args.measure], config, published)
    if args.xlsx:
        save_to_excel(report.rows, args.xlsx)
    _emit(report, args.json, started)
    return EXIT_OK


def _verdict_payload(verdict: PreorderVerdict) -> Dict:
    payload = {'status': verdict.status.value, 'budget': verdict.budget_info}
    if verdict.holds:
        if verdict.relation == 's':
            payload['witness'] = [[i + 1, j + 1] for i, j in verdict.witness]
        elif verdict.relation == 'ds':
            payload['witness'] = [step.describe() for step in verdict.witness]
        elif verdict.relation == 'd':
            payload['witness'] = verdict.witness.rows
    elif verdict.falsified:
        ce = verdict.counterexample
        if isinstance(ce, LessNoisyCounterexample):
            payload['counterexample'] = {'p': ce.p.probs, 'q': ce.q.probs, 'chi2_W': ce.chi_w, 'chi2_V': ce.chi_v}
        elif isinstance(ce, MoreCapableCounterexample):
            payload['counterexample'] = {'p': ce.p.probs, 'I_W': ce.info_w, 'I_V': ce.info_v}
        else:
            payload['counterexample'] = {'residual': ce}
    return payload


def cmd_preorder(args) -> int:
    started = time.perf_counter()
    channel_file = read_channels(args.file)
    names = list(channel_file.channels)
    a = args.a or names[0]
    b = args.b or (names[1] if len(names) > 1 else names[0])
    W, V = channel_file.channel(a), channel_file.channel(b)
    verdict = check_relation(W, V, args.relation, grid_resolution=args.grid, max_ops=args.max_ops, depth=args.depth)
    logger.info(f"{a} ⪯_{args.relation} {b}: {verdict.status.value}")
    row = {'relation': args.relation, 'a': a, 'b': b, 'status': verdict.status.value}
    if args.json:
        row.update(_verdict_payload(verdict))
    else:
        row['detail'] = describe_verdict(verdict)
    metadata = {'grid_resolution': args.grid, 'depth': args.depth, 'max_ops': args.max_ops, 'file': args.file}
    _emit(ReportDocument('preorder', metadata, [row]), args.json, started)
    if verdict.holds:
        return EXIT_OK
    return EXIT_FALSIFIED if verdict.falsified else EXIT_UNKNOWN


def cmd_examples(args) -> int:
    started = time.perf_counter()
    system = builtin_system(args.name)
    if args.out:
        write_distribution(system.joint, args.out)
    if args.table or args.json or args.xlsx:
        config = optimizer_config(args)
        report = _decomposition_report('examples', args.name, system, ['all'], config, PUBLISHED_VALUES[args.name])
        if args.xlsx:
            save_to_excel(report.rows, args.xlsx)
        _emit(report, args.json, started)
    elif not args.out:
        sys.stdout.write(format_distribution(system.joint))
    return EXIT_OK


def cmd_axioms(args) -> int:
    started = time.perf_counter()
    config = optimizer_config(args)
    kinds = [kind.value for kind in CHAIN_ORDER] if args.measure == 'all' else [args.measure]
    rows: List[Dict] = []
    total = 0
    for kind in kinds:
        report = check_wb_axioms(kind, trials=args.trials, config=config)
        total += len(report.violations)
        if not report.violations:
            rows.append({'measure': kind, 'axiom': 'all', 'trial': None, 'detail': 'ok'})
        for v in report.violations:
            rows.append({'measure': kind, 'axiom': v.axiom, 'trial': v.trial, 'detail': v.detail})
    metadata = dict(_config_metadata(config), trials=args.trials, violations=total)
    _emit(ReportDocument('axioms', metadata, rows), args.json, started)
    return EXIT_OK if total == 0 else EXIT_FALSIFIED


def _add_optimizer_flags(parser: argparse.ArgumentParser):
    parser.add_argument('--support', type=int, help="size of the Q alphabet (default: sum |Y_i| - n + 1)")
    parser.add_argument('--starts', type=int, help="number of random starts")
    parser.add_argument('--grid', type=int, help=f"simplex grid resolution (default {DEFAULT_GRID_RESOLUTION})")
    parser.add_argument('--seed', type=int, help="random seed (default: $PID_SEED or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='pid', description="Preorder-based partial information decomposition")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('--verbose', action='store_true', help="debug logging")
    verbosity.add_argument('--quiet', action='store_true', help="warnings and errors only")
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('decompose', help="R, U1, U2, S for one or all measures")
    p.add_argument('file', nargs='?', help="distribution file")
    p.add_argument('--example', help="built-in system instead of a file")
    p.add_argument('--measure', choices=MEASURE_CHOICES, default='all')
    _add_optimizer_flags(p)
    p.add_argument('--json', action='store_true')
    p.add_argument('--xlsx', help="append rows to this Excel workbook")
    p.set_defaults(func=cmd_decompose)

    p = commands.add_parser('preorder', help="test channel a ⪯ channel b")
    p.add_argument('file', help="channel file with @channel blocks")
    p.add_argument('--relation', choices=RELATIONS, default='d')
    p.add_argument('--a', help="lower channel (default: first in the file)")
    p.add_argument('--b', help="upper channel (default: second in the file)")
    p.add_argument('--grid', type=int, default=DEFAULT_GRID_RESOLUTION)
    p.add_argument('--depth', type=int, default=DEFAULT_DS_DEPTH)
    p.add_argument('--max-ops', dest='max_ops', type=int, default=DEFAULT_MAX_OPS)
    p.add_argument('--json', action='store_true')
    p.set_defaults(func=cmd_preorder)

    p = commands.add_parser('examples', help="built-in systems and their comparison tables")
    p.add_argument('name', help="and, sum, copy-target, unq, cex1 or cex2-ds")
    p.add_argument('--out', help="write the distribution file here")
    p.add_argument('--table', action='store_true', help="compute all measures next to the published values")
    _add_optimizer_flags(p)
    p.add_argument('--json', action='store_true')
    p.add_argument('--xlsx', help="append rows to this Excel workbook")
    p.set_defaults(func=cmd_examples)

    p = commands.add_parser('axioms', help="Williams-Beer axiom suite on random systems")
    p.add_argument('--measure', choices=MEASURE_CHOICES, default='mmi')
    p.add_argument('--trials', type=int, default=100)
    _add_optimizer_flags(p)
    p.add_argument('--json', action='store_true')
    p.set_defaults(func=cmd_axioms)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)
    try:
        return args.func(args)
    except (OptimizerError, MeasureMismatchError) as e:
        logger.error(f"Optimizer failure: {e}")
        return EXIT_OPTIMIZER
    except PIDError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_INPUT
    except ValueError as e:
        logger.error(f"Invalid option: {e}")
        return EXIT_INPUT
