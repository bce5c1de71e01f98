"""
Command-line interface

SUBCOMMANDS:
    sim      --config CFG --out DATASET                  generate a response dataset
    stats    DATASET --out TABLE [--mode MODE]           uniqueness / reliability table
    sweep    --config CFG --out CURVE --knob sigma ...   statistic vs sigma or epsilon
    fit      CURVE --out FIT [--floor MU]                saturating-exponential fit
    compare  A B [--statistic mu_inter] [--out REPORT]   Z-score comparison

EXIT CODES:
    0 success, 1 generation or fit failure, 2 usage or config error,
    3 I/O or file format error
"""

import argparse
import sys
from dataclasses import replace
from typing import List, Optional

from src.controller import HBNController
from src.errors import DatasetFormatError, FitError, GenerationError, ParameterError
from src.network.parameters import PAIR_NORM_MODES
from src.analysis.statistics import SWEEP_KNOBS, sweep_values
from src.tools.config import COMPARE_STATISTICS, ExperimentConfig, load_experiment_config


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3


def _parse_values(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _parse_log_range(text: str) -> List[float]:
    parts = text.split(',')
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected start,stop,count")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad log range {text!r}")
    return list(sweep_values(start, stop, count, log_spaced=True))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='hbn_puf',
        description='Hybrid Boolean Network PUF simulator'
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON experiment config')
    common.add_argument('--out', help='output path (overrides the config outputs)')
    common.add_argument('--threads', type=int, help='worker processes (default: HBN_THREADS or 1)')
    common.add_argument('--mode', choices=PAIR_NORM_MODES, help='pair normalization')
    common.add_argument('--seed', type=int, help='override simulation.master_seed')
    common.add_argument('-q', '--quiet', action='store_true', help='suppress stage lines')

    sub = parser.add_subparsers(dest='command', required=True)

    sub.add_parser('sim', parents=[common], help='generate a response dataset')

    stats = sub.add_parser('stats', parents=[common], help='uniqueness / reliability table')
    stats.add_argument('dataset', help='dataset file written by sim')

    sweep = sub.add_parser('sweep', parents=[common], help='statistic vs sigma or epsilon')
    sweep.add_argument('--knob', choices=SWEEP_KNOBS)
    values = sweep.add_mutually_exclusive_group()
    values.add_argument('--values', type=_parse_values, help='v1,v2,...')
    values.add_argument('--log-range', type=_parse_log_range, help='start,stop,count (log spaced)')
    sweep.add_argument('--eval-time-ns', type=float, help='read-out time (default 6 ns)')

    fit = sub.add_parser('fit', parents=[common], help='fit y = B - A exp(-C x) to a sweep')
    fit.add_argument('sweep', help='sweep CSV written by sweep')
    fit.add_argument('--floor', type=float, help='report where the fit reaches this level')
    fit.add_argument('--weighted', action='store_true', help='weight rows by 1 / std_err^2')

    compare = sub.add_parser('compare', parents=[common], help='Z-score comparison')
    compare.add_argument('a', help='dataset file or stats table')
    compare.add_argument('b', help='dataset file or stats table')
    compare.add_argument('--statistic', choices=COMPARE_STATISTICS, default='mu_inter')

    return parser


def run(args: argparse.Namespace) -> int:
    experiment = load_experiment_config(args.config) if args.config else ExperimentConfig()
    if args.mode:
        experiment = replace(experiment, sim=experiment.sim.with_overrides(pair_norm_mode=args.mode))
    controller = HBNController(experiment, n_workers=args.threads, verbose=not args.quiet)

    if args.command == 'sim':
        controller.run_sim(out_path=args.out, seed=args.seed)
    elif args.command == 'stats':
        controller.run_stats(args.dataset, mode=args.mode, out_path=args.out)
    elif args.command == 'sweep':
        values = args.values if args.values is not None else args.log_range
        controller.run_sweep(
            knob=args.knob, values=values, eval_time=args.eval_time_ns,
            out_path=args.out, seed=args.seed
        )
    elif args.command == 'fit':
        controller.run_fit(args.sweep, out_path=args.out, floor=args.floor, weighted=args.weighted)
    elif args.command == 'compare':
        controller.run_compare(args.a, args.b, statistic=args.statistic, mode=args.mode, out_path=args.out)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and run one subcommand

    Returns:
        Process exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    try:
        return run(args)
    except (DatasetFormatError, OSError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_IO
    except ParameterError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_USAGE
    except (GenerationError, FitError) as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_FAILURE
