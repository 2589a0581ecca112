"""
Command line entry point.

Sub-commands:
    find     random circuit search (optionally enumerating all circuits up to the given size),
    exclude  certified systematic search,
    near     epsilon-near circuit search, with bisection on epsilon,
    bench    reproduction of the detection tables,
    gen      generation of planted test instances.
Reports are printed as JSON on stdout (or written to --output); logging goes to stderr.
Exit codes: 0 found, 1 usage error, 2 input error, 3 not found.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np
import yaml

import circuit_bench
from circuit_model import make_circuit, prunable_columns
from instance_gen import PlantSpec, orthonormal_row_instance, planted_circuit_matrix, planted_near_instance
from matrix_core import Tolerances, lq_factor, matrix_scale
from matrix_io import load_matrix, save_matrix
from near_circuit import minimal_epsilon_bisection, near_search
from random_search import SearchConfig, enumerate_circuits, search
from report import CircuitRecord, Report
from search_types import CircuitryError, InfeasibleError, InputError, MatrixFormat, Mode, SpectralSplitError, \
    Status, UsageError, Variant
from systematic_search import circuitfind

logger = logging.getLogger(__name__)

EXIT_FOUND = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_NOT_FOUND = 3

SEED_ENV = 'CIRCUITRY_SEED'


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError('{}: {}'.format(self.prog, message))


def _add_common_arguments(parser, matrix_input=True):
    if matrix_input:
        parser.add_argument('--input', required=True, type=str, help='Matrix file (Matrix Market .mtx or CSV)')
        parser.add_argument('--format', default=None, choices=[f.value for f in MatrixFormat],
                            help='Matrix file format (default: guessed from the extension)')
        parser.add_argument('--rank-tol', default=None, type=float,
                            help='Relative rank threshold (default: 10 * eps * max(M, N))')
        parser.add_argument('--support-tol', default=None, type=float,
                            help='Relative support threshold (default 1e-9)')
    parser.add_argument('--seed', default=None, type=int, help='Random seed (default: ${} or 0)'.format(SEED_ENV))
    parser.add_argument('--threads', default=os.cpu_count() or 1, type=int,
                        help='Worker threads (results do not depend on it)')
    parser.add_argument('--output', default=None, type=str, help='Write the report to this file instead of stdout')
    parser.add_argument('-v', '--verbose', action='store_true', help='Debug logging')
    parser.add_argument('--config', default=None, type=str, help='YAML file with default values for the flags')


def build_parser(defaults=None):
    """Builds the argument parser; `defaults` (flag name to value) override the built-in defaults."""

    parser = ArgumentParser(prog='circuitry', description='Circuit search in real matrices.')
    subparsers = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)

    find = subparsers.add_parser('find', help='Random circuit search')
    _add_common_arguments(find)
    find.add_argument('--max-size', required=True, type=int, help='Largest circuit size n')
    find.add_argument('--confidence', default=0.99, type=float, help='Confidence 1 - epsilon (default 0.99)')
    find.add_argument('--variant', default=Variant.ON_Q.value, choices=[v.value for v in Variant],
                      help='Search on Q or on the reduced factor Q* (default q)')
    find.add_argument('--max-trials', default=None, type=int, help='Cap on the number of trials')
    find.add_argument('--all', action='store_true', help='Enumerate circuits by repeated search')
    find.set_defaults(handler=cmd_find)

    exclude = subparsers.add_parser('exclude', help='Certified systematic search')
    _add_common_arguments(exclude)
    exclude.add_argument('--max-size', required=True, type=int, help='Largest circuit size n')
    exclude.set_defaults(handler=cmd_exclude)

    near = subparsers.add_parser('near', help='Epsilon-near circuit search')
    _add_common_arguments(near)
    near.add_argument('--max-size', required=True, type=int, help='Largest near circuit size n')
    near.add_argument('--epsilon', default=None, type=float, help='Residual bound epsilon')
    near.add_argument('--bisect', action='store_true', help='Bisect on epsilon within [--eps-lo, --eps-hi]')
    near.add_argument('--eps-lo', default=1e-9, type=float, help='Lower end of the bisection window')
    near.add_argument('--eps-hi', default=1e-2, type=float, help='Upper end of the bisection window')
    near.add_argument('--iters', default=20, type=int, help='Bisection steps (default 20)')
    near.add_argument('--delta', default=0.01, type=float, help='Residual miss probability (default 0.01)')
    near.add_argument('--max-trials', default=None, type=int, help='Cap on the number of trials per search')
    near.set_defaults(handler=cmd_near)

    bench = subparsers.add_parser('bench', help='Reproduce the detection tables')
    _add_common_arguments(bench, matrix_input=False)
    bench.add_argument('--table', required=True, type=int, choices=[1, 2], help='Table to reproduce')
    bench.add_argument('--n-cols', default=None, type=int, nargs='+', help='Column counts (default: bench tables)')
    bench.add_argument('--reps', default=None, type=int, help='Trials or attempts per row (default 1000 / 100)')
    bench.add_argument('--wandb', action='store_true', help='Log results to Weights & Biases')
    bench.set_defaults(handler=cmd_bench)

    gen = subparsers.add_parser('gen', help='Generate a planted instance')
    _add_common_arguments(gen, matrix_input=False)
    gen.add_argument('--n-cols', required=True, type=int, help='Number of columns N')
    gen.add_argument('--rho', default=None, type=float, help='Rank ratio m / N')
    gen.add_argument('--sizes', default='', type=str, help='Planted circuit sizes, comma separated (e.g. 4,4)')
    gen.add_argument('--orthonormal', action='store_true', help='Orthonormalize the rows (single circuit)')
    gen.add_argument('--near-sigma', default=None, type=float, help='Plant a near dependency with this sigma_min')
    gen.add_argument('--rows', default=None, type=int, help='Rows M of a near instance (default rho * N)')
    gen.add_argument('--near-size', default=4, type=int, help='Columns in the near dependency (default 4)')
    gen.add_argument('--format', default=None, choices=[f.value for f in MatrixFormat],
                     help='Matrix file format (default: guessed from the extension)')
    gen.add_argument('--manifest', default=None, type=str, help='Plant manifest path (default <output>.json)')
    gen.set_defaults(handler=cmd_gen)

    if defaults:
        for subparser in (find, exclude, near, bench, gen):
            subparser.set_defaults(**defaults)
    return parser


def parse_args(argv=None):
    """Parses the command line; values from --config act as defaults that explicit flags override."""

    pre_parser = argparse.ArgumentParser(add_help=False)
    pre_parser.add_argument('--config', default=None)
    known, _ = pre_parser.parse_known_args(argv)

    if known.config is not None:
        try:
            with open(known.config) as f:
                config = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise UsageError('cannot read config {}: {}'.format(known.config, e))
        if not isinstance(config, dict):
            raise UsageError('config {} must be a mapping of flag names to values'.format(known.config))
        defaults = {str(key).replace('-', '_'): value for key, value in config.items()
                    if key not in ('handler', 'command', 'config')}
    else:
        defaults = None

    args = build_parser(defaults).parse_args(argv)
    if args.seed is None:
        seed = os.environ.get(SEED_ENV)
        try:
            args.seed = int(seed) if seed is not None else 0
        except ValueError:
            raise UsageError('{} must be an integer, got "{}"'.format(SEED_ENV, seed))
    if args.seed < 0:
        raise UsageError('seed must be non-negative, got {}'.format(args.seed))
    if args.threads < 1:
        raise UsageError('threads must be positive, got {}'.format(args.threads))
    return args


def _tolerances(args, A):
    return Tolerances.for_matrix(A, args.rank_tol, args.support_tol)


def _check_size(n, N):
    if not 1 <= n <= N:
        raise InfeasibleError('circuit size {} is infeasible for a matrix with {} columns'.format(n, N))


def _matrix_descriptor(args, A):
    return {'rows': int(A.shape[0]), 'cols': int(A.shape[1]), 'source': str(args.input)}


def _stats(states, start, residual_p):
    return {'trials': int(sum(s.trials for s in states)),
            'nullspace_evals': int(sum(s.nullspace_evals for s in states)),
            'residual_p': float(residual_p),
            'truncated': any(s.truncated for s in states),
            'seconds': time.time() - start}


def _emit(args, payload):
    if args.output is not None:
        with open(args.output, 'w') as f:
            f.write(payload + '\n')
        logger.info('report written to %s', args.output)
    else:
        sys.stdout.write(payload + '\n')


def _finish(args, report):
    _emit(args, report.to_json())
    return EXIT_FOUND if report.status == Status.FOUND else EXIT_NOT_FOUND


def cmd_find(args):
    """Random search for circuits of size <= n after pruning the columns that lie in no circuit."""

    A = load_matrix(args.input, args.format)
    tol = _tolerances(args, A)
    N = A.shape[1]
    _check_size(args.max_size, N)
    if not 0 < args.confidence < 1:
        raise InputError('confidence must lie in (0, 1), got {}'.format(args.confidence))

    start = time.time()
    F = lq_factor(A, tol)
    scale = matrix_scale(A)
    pruned = prunable_columns(F, tol)
    keep = np.setdiff1d(np.arange(N), pruned)
    logger.info('pruned %d of %d columns that belong to no circuit', len(pruned), N)

    mode = Mode.ENUMERATE if args.all else Mode.FIND
    config = {'max_size': args.max_size, 'confidence': args.confidence, 'variant': args.variant,
              'max_trials': args.max_trials, 'pruned': [int(j) + 1 for j in pruned]}
    report = Report(mode=mode, matrix=_matrix_descriptor(args, A), config=config, status=Status.NOT_FOUND,
                    seed=args.seed)

    if keep.size == 0:
        report.stats = _stats([], start, 0.0)
        return _finish(args, report)

    sub = A[:, keep]
    cfg = SearchConfig(n=min(args.max_size, len(keep)), epsilon=1 - args.confidence, seed=args.seed,
                       variant=Variant(args.variant), max_trials=args.max_trials, threads=args.threads)

    if args.all:
        outcome = enumerate_circuits(sub, cfg, tol, scale)
        circuits = [make_circuit(A, keep[c.indices], tol, scale) for c in outcome.circuits]
        exhausted = len(outcome.states) == len(outcome.circuits)
        report.stats = _stats(outcome.states, start, 0.0 if exhausted else outcome.states[-1].p)
    else:
        outcome = search(sub, lq_factor(sub, tol, scale), cfg, tol, scale=scale)
        circuit = outcome.circuit
        circuits = [make_circuit(A, keep[circuit.indices], tol, scale)] if circuit is not None else []
        report.stats = _stats([outcome.state], start, outcome.state.p)

    report.circuits = [CircuitRecord.from_circuit(c) for c in circuits]
    report.status = Status.FOUND if circuits else Status.NOT_FOUND
    return _finish(args, report)


def cmd_exclude(args):
    A = load_matrix(args.input, args.format)
    tol = _tolerances(args, A)
    _check_size(args.max_size, A.shape[1])

    start = time.time()
    found, circuit, stats = circuitfind(A, args.max_size, tol, rng=np.random.default_rng(args.seed))
    report = Report(mode=Mode.EXCLUDE, matrix=_matrix_descriptor(args, A), config={'max_size': args.max_size},
                    status=Status.FOUND if found else Status.NOT_FOUND,
                    circuits=[CircuitRecord.from_circuit(circuit)] if found else [],
                    stats={'trials': stats.subsets_examined, 'nullspace_evals': stats.nullspace_evals,
                           'residual_p': 0.0, 'recursive_calls': stats.recursive_calls,
                           'seconds': time.time() - start},
                    seed=args.seed)
    return _finish(args, report)


def cmd_near(args):
    if args.epsilon is None and not args.bisect:
        raise UsageError('near: one of --epsilon or --bisect is required')

    A = load_matrix(args.input, args.format)
    tol = _tolerances(args, A)
    _check_size(args.max_size, A.shape[1])

    start = time.time()
    if args.bisect:
        outcome = minimal_epsilon_bisection(A, args.max_size, args.delta, args.eps_lo, args.eps_hi, args.iters,
                                            args.seed, args.max_trials, args.threads, tol)
        config = {'max_size': args.max_size, 'delta': args.delta, 'eps_lo': args.eps_lo, 'eps_hi': args.eps_hi,
                  'iters': args.iters, 'max_trials': args.max_trials, 'epsilon_star': outcome.epsilon}
        near, states, rejected = outcome.near_circuit, outcome.states, []
        mode = Mode.NEAR_BISECT
    else:
        outcome = near_search(A, args.max_size, args.epsilon, args.delta, args.seed, args.max_trials, args.threads,
                              tol)
        config = {'max_size': args.max_size, 'delta': args.delta, 'epsilon': args.epsilon,
                  'max_trials': args.max_trials, 'rank': outcome.split.m}
        near, states, rejected = outcome.near_circuit, [outcome.state], outcome.rejected
        mode = Mode.NEAR

    residual_p = states[-1].p if states else 1.0
    report = Report(mode=mode, matrix=_matrix_descriptor(args, A), config=config,
                    status=Status.FOUND if near is not None else Status.NOT_FOUND,
                    circuits=[CircuitRecord.from_circuit(near)] if near is not None else [],
                    stats=_stats(states, start, residual_p), seed=args.seed,
                    rejected=[[int(i) + 1 for i in r] for r in rejected])
    return _finish(args, report)


def cmd_bench(args):
    if args.table == 1:
        results = circuit_bench.run_table1(n_cols=args.n_cols, reps=args.reps, seed=args.seed, log=args.wandb)
    else:
        n_cols = args.n_cols[0] if args.n_cols else None
        results = circuit_bench.run_table2(reps=args.reps, n_cols=n_cols, seed=args.seed, log=args.wandb)

    # The text table owns stdout; the JSON rows go only to --output.
    sys.stdout.write(results.drop(columns='seconds').to_string(index=False, float_format='%.3f') + '\n')
    if args.output is not None:
        payload = json.dumps({'table': args.table, 'seed': args.seed, 'rows': json.loads(results.to_json(
            orient='records'))}, sort_keys=True, indent=2)
        _emit(args, payload)
    return EXIT_FOUND


def _parse_sizes(text):
    try:
        return tuple(int(s) for s in text.split(',') if s.strip())
    except ValueError:
        raise UsageError('--sizes must be a comma separated list of integers, got "{}"'.format(text))


def cmd_gen(args):
    if args.output is None:
        raise UsageError('gen: --output is required')
    sizes = _parse_sizes(args.sizes)
    manifest = {'n_cols': args.n_cols, 'seed': args.seed}

    if args.near_sigma is not None:
        rows = args.rows if args.rows is not None else (int(round(args.rho * args.n_cols)) if args.rho else None)
        if rows is None:
            raise UsageError('gen: near instances need --rows or --rho')
        A, plant = planted_near_instance(args.n_cols, rows, args.near_sigma, args.near_size, args.seed)
        plants = [plant]
        manifest.update({'generator': 'near', 'rows': rows, 'near_sigma': args.near_sigma})
    else:
        if args.rho is None:
            raise UsageError('gen: --rho is required')
        if args.orthonormal:
            if len(sizes) != 1:
                raise InfeasibleError('orthonormal instances hold exactly one circuit, got sizes {}'.format(
                    list(sizes)))
            A, plant = orthonormal_row_instance(args.n_cols, args.rho, sizes[0], args.seed)
            plants = [plant]
            manifest['generator'] = 'orthonormal'
        else:
            A, plants = planted_circuit_matrix(PlantSpec(N=args.n_cols, rho=args.rho, sizes=sizes, seed=args.seed))
            manifest['generator'] = 'planted'
        manifest.update({'rho': args.rho, 'sizes': list(sizes), 'rows': int(A.shape[0])})

    save_matrix(args.output, A, args.format)
    manifest['plants'] = [[int(i) + 1 for i in plant] for plant in plants]
    manifest['matrix'] = args.output
    payload = json.dumps(manifest, sort_keys=True, indent=2)
    with open(args.manifest or args.output + '.json', 'w') as f:
        f.write(payload + '\n')
    sys.stdout.write(payload + '\n')
    return EXIT_FOUND


def main(argv=None):
    try:
        args = parse_args(argv)
    except UsageError as e:
        sys.stderr.write('{}\n'.format(e))
        return EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, stream=sys.stderr, force=True,
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')

    try:
        return args.handler(args)
    except UsageError as e:
        logger.error('%s', e)
        return EXIT_USAGE
    except SpectralSplitError as e:
        logger.error('%s', e)
        logger.error('singular values: %s', np.array2string(np.asarray(e.sigmas), precision=6))
        return EXIT_INPUT
    except CircuitryError as e:
        logger.error('%s', e)
        return EXIT_INPUT


if __name__ == '__main__':
    sys.exit(main())
