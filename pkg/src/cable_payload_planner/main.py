# Copyright (c) 2024 cable-payload-planner authors
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in
# all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

"""
CLI interface to the planning pipeline
"""
from __future__ import annotations
from typing import TYPE_CHECKING, Tuple, List, Optional
from pathlib import Path
import argparse
import logging
import asyncio
import os
import sys
from .config import ProblemConfig
from .const import (
    LOGGING_LEVELS, ENV_LOGGING_LEVEL, ENV_WORKERS, SCENARIO_KINDS,
    DEFAULT_CONFIG_GENERAL_LOGGING_LEVEL, EXIT_SUCCESS, EXIT_NO_SOLUTION,
    EXIT_VALIDATION_FAILURE, EXIT_BAD_INPUT,
)
from .exceptions import (
    PlannerConfigError, NoSolutionError, OptimizationDivergedError,
    TrajectoryFileError, InsufficientSeedsError, InfeasibleHoverError,
)
from .harness import (
    PIPELINE_MODES, Problem, generate_scenario, run_pipeline,
    validate_trajectory, lift_reference, optimize_reference, write_csv,
    write_report, refine_energy_trace, bench_sampler, bench_optimizer,
    summarize_reports, load_reports,
)
from .reference_export import export_trajectory, load_trajectory
from .traj_opt import Trajectory
if TYPE_CHECKING:
    from argparse import Namespace

_LOGGER = logging.getLogger(__name__)


def process_cmdline(
    argv: Optional[List[str]] = None
) -> Tuple[str, Namespace]:
    """
    Processes command line parameters.

    :param argv: Arguments, ``sys.argv`` by default
    :return: Processed parameters
    """

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '-d', '--debug',
        action='store_true',
        default=False,
        help="Enable debug logging"
    )
    common.add_argument(
        '--out',
        default='.',
        help="Output directory (default: '%(default)s')"
    )
    common.add_argument(
        '--seed',
        type=int,
        default=None,
        help="Seed overriding the problem one"
    )

    problem_args = argparse.ArgumentParser(add_help=False)
    problem_args.add_argument(
        '--problem',
        required=True,
        help="Path to problem file"
    )
    problem_args.add_argument(
        '--timeout',
        type=float,
        default=None,
        help="Geometric planner timeout in seconds"
    )
    problem_args.add_argument(
        '--iters',
        type=int,
        default=None,
        help="Refinement iterations of the optimizer"
    )

    bench = argparse.ArgumentParser(add_help=False)
    bench.add_argument(
        '--seeds',
        type=int,
        default=10,
        help="Number of consecutive seeds, starting from '--seed' or 0"
        " (default: %(default)s)"
    )
    bench.add_argument(
        '--workers',
        type=int,
        default=None,
        help="Runs in flight (default: from problem file or"
        f" '{ENV_WORKERS}', otherwise 1)"
    )

    parser = argparse.ArgumentParser()
    commands = parser.add_subparsers(dest='command', required=True)

    gen = commands.add_parser(
        'gen', parents=[common], help='Generate scenario problem file'
    )
    gen.add_argument('--kind', choices=SCENARIO_KINDS, required=True,
                     help='Scenario kind')
    gen.add_argument('--robots', type=int, required=True,
                     help='Number of multirotors')

    commands.add_parser(
        'plan', parents=[common, problem_args],
        help='Plan geometric path and export the reference'
    )
    opt = commands.add_parser(
        'opt', parents=[common, problem_args],
        help='Optimize a reference or refine a trajectory'
    )
    opt.add_argument(
        '--reference',
        default=None,
        help="Trajectory file to start from (default: plan one)"
    )
    pipeline = commands.add_parser(
        'pipeline', parents=[common, problem_args],
        help='Run end-to-end pipeline'
    )
    pipeline.add_argument('--mode', choices=PIPELINE_MODES, default='opt',
                          help="Pipeline mode (default: '%(default)s')")
    validate = commands.add_parser(
        'validate', parents=[common, problem_args],
        help='Validate trajectory file'
    )
    validate.add_argument('--trajectory', required=True,
                          help='Trajectory file')

    sampler = commands.add_parser(
        'bench-sampler', parents=[common, problem_args, bench],
        help='Compare witness and uniform samplers'
    )
    sampler.add_argument(
        '--budgets', type=int, nargs='+', default=[250, 500, 1000, 2000],
        help='Iteration checkpoints (default: %(default)s)'
    )
    bench_opt = commands.add_parser(
        'bench-opt', parents=[common, bench],
        help='Measure optimization effort over team sizes'
    )
    bench_opt.add_argument('--kind', choices=SCENARIO_KINDS, required=True,
                           help='Scenario kind')
    bench_opt.add_argument('--robots', type=int, nargs='+', required=True,
                           help='Team sizes')
    bench_opt.add_argument('--timeout', type=float, default=None,
                           help='Geometric planner timeout in seconds')

    metrics = commands.add_parser(
        'metrics', parents=[common], help='Summarize report files'
    )
    metrics.add_argument('reports', nargs='+', help='Report files')

    return (parser.prog, parser.parse_args(argv))


def _load_problem(
    args: Namespace, prog: str
) -> Tuple[ProblemConfig, Problem]:
    """
    Loads the problem file, applies command line overrides and configures
    logging.
    """
    config = ProblemConfig(args.problem)
    if args.debug:
        config.of.general.logging_level = 'debug'

    # Print configuration details
    print(f'Starting {prog}, problem:')
    print(config)

    logging.basicConfig(level=config.logging_level)
    problem = Problem.from_config(
        config, seed=args.seed, timeout=args.timeout,
        n_iters=getattr(args, 'iters', None)
    )
    return config, problem


def _basic_logging(args: Namespace) -> None:
    """
    Configures logging of the commands having no problem file.
    """
    level = os.environ.get(ENV_LOGGING_LEVEL,
                           DEFAULT_CONFIG_GENERAL_LOGGING_LEVEL)
    if args.debug:
        level = 'debug'
    if level not in LOGGING_LEVELS:
        raise PlannerConfigError(f"Unknown logging level '{level}'")
    logging.basicConfig(level=LOGGING_LEVELS[level])


def _workers(args: Namespace, config: Optional[ProblemConfig]) -> int:
    if args.workers is not None:
        workers = int(args.workers)
    elif config is not None:
        workers = config.of.general.workers
    else:
        try:
            workers = int(os.environ.get(ENV_WORKERS, '1'))
        except ValueError:
            workers = 0
    if workers < 1:
        raise PlannerConfigError('Number of workers should be positive')
    return workers


def _seeds(args: Namespace) -> List[int]:
    first = args.seed or 0
    return list(range(first, first + args.seeds))


def _cmd_gen(args: Namespace) -> int:
    _basic_logging(args)
    seed = args.seed or 0
    config = generate_scenario(args.kind, args.robots, seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f'{args.kind}_n{args.robots}_s{seed}.yaml'
    with open(path, 'w', encoding='ascii') as file:
        file.write(config.dump())
    print(f"Problem written to '{path}'")
    return EXIT_SUCCESS


def _cmd_pipeline(args: Namespace, prog: str, mode: str) -> int:
    _, problem = _load_problem(args, prog)
    result = run_pipeline(problem, mode, out=args.out)
    print(f"Report of '{mode}' run: success={result.report.success}")
    if mode != 'opt':
        # References are not expected to satisfy the dynamics
        return EXIT_SUCCESS
    return EXIT_SUCCESS if result.report.success else EXIT_VALIDATION_FAILURE


def _cmd_opt(args: Namespace, prog: str) -> int:
    if args.reference is None:
        return _cmd_pipeline(args, prog, 'opt')
    _, problem = _load_problem(args, prog)
    source, _ = load_trajectory(args.reference)
    iterates = optimize_reference(problem, source)
    traj = iterates[-1]
    report = validate_trajectory(traj, problem).model_copy(
        update=dict(mode='opt')
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    export_trajectory(traj, out / 'opt_trajectory.csv', problem.params,
                      dict(mode='opt', reference=str(args.reference)))
    write_report(report, out / 'opt_report.json')
    write_csv(out / 'opt_opt_log.csv',
              ('iteration', 'cost', 'defect', 'min_sdf', 'dt'), traj.log)
    write_csv(out / 'opt_refine_energy.csv',
              ('iteration', 'dt0', 'energy_wh', 'duration_s'),
              refine_energy_trace(iterates))
    print(f'Report of optimization: success={report.success}')
    return EXIT_SUCCESS if report.success else EXIT_VALIDATION_FAILURE


def _cmd_validate(args: Namespace, prog: str) -> int:
    _, problem = _load_problem(args, prog)
    source, _ = load_trajectory(args.trajectory)
    if isinstance(source, Trajectory):
        report = validate_trajectory(source, problem)
    else:
        report = validate_trajectory(lift_reference(source, problem.params),
                                     problem, reference_only=True)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / f'{Path(args.trajectory).stem}_report.json')
    print(f'Validation: success={report.success}')
    return EXIT_SUCCESS if report.success else EXIT_VALIDATION_FAILURE


async def _cmd_bench_sampler(args: Namespace, prog: str) -> int:
    config, problem = _load_problem(args, prog)
    traces, summary = await bench_sampler(
        problem, args.budgets, _seeds(args), _workers(args, config)
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / 'sampler_traces.csv',
              ('sampler', 'seed', 't_s', 'iteration', 'cost'), traces)
    write_csv(out / 'sampler_summary.csv',
              ('sampler', 'budget', 'solved', 'cost_mean', 'cost_std',
               'first_solution_iteration', 'first_solution_s'), summary)
    return EXIT_SUCCESS


async def _cmd_bench_opt(args: Namespace) -> int:
    _basic_logging(args)
    rows = await bench_optimizer(
        args.kind, args.robots, _seeds(args), _workers(args, None),
        timeout=args.timeout
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f'opt_effort_{args.kind}.csv',
              ('kind', 'n', 'seed', 'success', 'opt_time_s', 'iterations',
               'energy_wh'), rows)
    return EXIT_SUCCESS


def _cmd_metrics(args: Namespace) -> int:
    _basic_logging(args)
    rows = summarize_reports(load_reports(args.reports))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = list(rows[0].keys()) if rows else ['environment', 'n', 'mode']
    write_csv(out / 'metrics.csv', header,
              [[row[k] for k in header] for row in rows])
    return EXIT_SUCCESS


async def async_main(argv: Optional[List[str]] = None) -> int:
    """
    Primary async entry point.

    :param argv: Arguments, ``sys.argv`` by default
    :return: Exit code
    """
    prog, args = process_cmdline(argv)

    try:
        if args.command == 'gen':
            return _cmd_gen(args)
        if args.command == 'plan':
            return _cmd_pipeline(args, prog, 'geom')
        if args.command == 'pipeline':
            return _cmd_pipeline(args, prog, args.mode)
        if args.command == 'opt':
            return _cmd_opt(args, prog)
        if args.command == 'validate':
            return _cmd_validate(args, prog)
        if args.command == 'bench-sampler':
            return await _cmd_bench_sampler(args, prog)
        if args.command == 'bench-opt':
            return await _cmd_bench_opt(args)
        return _cmd_metrics(args)
    except (PlannerConfigError, TrajectoryFileError, InsufficientSeedsError,
            InfeasibleHoverError) as exc:
        logging.error(exc)
        return EXIT_BAD_INPUT
    except NoSolutionError as exc:
        logging.error(exc)
        return EXIT_NO_SOLUTION
    except OptimizationDivergedError as exc:
        logging.error(exc)
        return EXIT_VALIDATION_FAILURE
    except OSError as exc:
        logging.error('Error writing results: %s', exc)
        return EXIT_BAD_INPUT


def main() -> None:
    """
    Main entry point for the CLI.
    """
    sys.exit(asyncio.run(async_main()))


if __name__ == '__main__':
    main()
