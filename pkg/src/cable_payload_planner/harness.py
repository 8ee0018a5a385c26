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
Scenario generation, end-to-end pipeline, trajectory validation, energy
metric and benchmark runners.
"""
from __future__ import annotations
from typing import (
    List, Tuple, Optional, Dict, Any, Sequence, Union, Callable, TypeVar,
)
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
import asyncio
import csv
import json
import logging
import math
import time
import numpy as np
import numpy.typing as npt
from .config import ProblemConfig
from .const import (
    DEFAULT_POWER_P_IDLE, DEFAULT_POWER_P_SLOPE, DEFAULT_CONFIG_GENERAL,
    DEFAULT_CONFIG_PARAMS, SCENARIO_KINDS, SCENARIO_MIN_ROBOTS,
    SCENARIO_MAX_ROBOTS, SCENARIO_START_ELEVATION, SCENARIO_HEIGHT,
    SCENARIO_FOREST_CYLINDERS, SCENARIO_FOREST_RADIUS,
    SCENARIO_FOREST_FOOTPRINT, SCENARIO_FOREST_CLEARANCE,
    SCENARIO_WINDOW_HALF_WIDTH, SCENARIO_WINDOW_THICKNESS,
    VALIDATION_MAX_DEFECT, VALIDATION_MAX_BOUND_VIOLATION,
)
from .exceptions import (
    PlannerConfigError, NoSolutionError, InsufficientSeedsError,
    OptimizationDivergedError,
)
from .geom_planner import (
    GeomState, GeomPath, ReferenceTrajectory, azel_to_unit,
    path_to_reference,
)
from .model import (
    SystemParams, FullState, hover_control, interpolate_full,
    full_state_from_geometry, rollout,
)
from .planner import PlannerSettings, TraceRow, plan_geometric
from .reference_export import export_trajectory
from .schema import ValidationReport
from .traj_opt import (
    OptSettings, OptProblem, Trajectory, build_initial_guess,
    dynamics_defect, iterative_refine,
)
from .world import Environment, Cylinder, is_state_valid, signed_distance

DoubleMatrix = npt.NDArray[np.float64]
CsvRow = Sequence[Any]
_T = TypeVar('_T')

_LOGGER = logging.getLogger(__name__)

PIPELINE_MODES = ('payload', 'geom', 'opt')
# Workspace of the empty and window scenarios, the forest one spans the
# footprint
_WORKSPACE_HALF = 1.5
_SCENARIO_ENDPOINTS = dict(
    empty=((-0.5, 0.0, 1.0), (0.5, 0.0, 1.0)),
    forest=((-1.5, 0.0, 1.0), (1.5, 0.0, 1.0)),
    window=((-1.0, 0.0, 1.0), (1.0, 0.0, 1.0)),
)
_FOREST_ATTEMPTS = 10000

__all__ = [
    'PowerModel', 'Problem', 'PipelineResult', 'energy', 'rollout',
    'lift_reference', 'validate_trajectory', 'generate_scenario',
    'window_half_width', 'run_pipeline', 'write_artifacts', 'bench_sampler',
    'bench_optimizer', 'summarize_reports', 'refine_energy_trace',
    'load_reports', 'write_csv', 'write_report', 'optimize_reference',
    'PIPELINE_MODES', 'vertical_cables',
]


@dataclass(frozen=True)
class PowerModel:
    """
    Per-rotor electrical power affine in the motor force.
    """
    p_idle: float = DEFAULT_POWER_P_IDLE
    p_slope: float = DEFAULT_POWER_P_SLOPE

    def __post_init__(self) -> None:
        assert self.p_idle >= 0 and self.p_slope >= 0, \
            'Power coefficients should be non-negative'


@dataclass(frozen=True, eq=False)
class Problem:  # pylint: disable=too-many-instance-attributes
    """
    Materialized planning problem.
    """
    params: SystemParams
    env: Environment
    start: GeomState
    p0_goal: DoubleMatrix
    goal_angles: Optional[Tuple[DoubleMatrix, DoubleMatrix]]
    planner: PlannerSettings
    optimizer: OptSettings
    power: PowerModel = field(default_factory=PowerModel)
    environment_name: Optional[str] = None

    @classmethod
    def from_config(
        cls, config: ProblemConfig, seed: Optional[int] = None,
        timeout: Optional[float] = None, n_iters: Optional[int] = None
    ) -> Problem:
        """
        Materializes the problem, with command line overrides.

        :param config: Problem file
        :param seed: Planner seed
        :param timeout: Planner timeout, s
        :param n_iters: Refinement iterations of the optimizer
        :return: Problem
        :raises PlannerConfigError: Start state is not valid
        """
        params = config.system_params()
        env = config.environment()
        start = config.start_state()
        planner = config.planner_settings(seed=seed, timeout=timeout)
        if not is_state_valid(start, env, params, planner.margin,
                              planner.tilt_min):
            raise PlannerConfigError(
                'Start state is in collision, outside of the workspace or'
                ' has a cable below the tilt bound'
            )
        scenario = config.of.scenario
        return cls(
            params=params, env=env, start=start,
            p0_goal=config.goal_position(), goal_angles=config.goal_angles(),
            planner=planner, optimizer=config.opt_settings(n_iters),
            power=PowerModel(**config.of.power.model_dump()),
            environment_name=scenario.kind if scenario else None,
        )


@dataclass(eq=False)
class PipelineResult:  # pylint: disable=too-many-instance-attributes
    """
    Artifacts of a pipeline run. ``trajectory`` is the optimized one in the
    ``opt`` mode and the hover-lifted reference otherwise.
    """
    mode: str
    path: GeomPath
    trace: List[TraceRow]
    reference: ReferenceTrajectory
    trajectory: Trajectory
    report: ValidationReport
    iterates: List[Trajectory] = field(default_factory=list)


def energy(traj: Trajectory, power: PowerModel) -> float:
    """
    Electrical energy spent by all rotors over the trajectory.

    :param traj: Trajectory
    :param power: Power model
    :return: Energy, Wh
    """
    assert traj.horizon > 0, 'Trajectory should not be empty'
    rotors = traj.us[0].size
    joules = traj.dt * (
        power.p_idle * rotors * traj.horizon
        + power.p_slope * float(np.sum(traj.us))
    )
    return joules / 3600.0


def lift_reference(
    ref: ReferenceTrajectory, params: SystemParams
) -> Trajectory:
    """
    Pairs the states of a geometric reference with hover controls.

    :param ref: Reference trajectory
    :param params: System parameters
    :return: Trajectory, generally violating the dynamics
    """
    us = np.repeat(hover_control(params)[None], len(ref) - 1, axis=0)
    return Trajectory(dt=ref.dt, xs=ref.full_states(), us=us)


def _min_clearance(
    xs: List[FullState], env: Environment, params: SystemParams
) -> float:
    """
    Smallest signed distance over the states and the midpoints between
    consecutive states.
    """
    res = min(signed_distance(x, env, params) for x in xs)
    for a, b in zip(xs[:-1], xs[1:]):
        res = min(res, signed_distance(interpolate_full(a, b, 0.5), env,
                                       params))
    return res


def validate_trajectory(
    traj: Trajectory, problem: Problem, reference_only: bool = False
) -> ValidationReport:
    """
    Checks a trajectory against the dynamics, the obstacles, the motor
    bounds and the goal. Success requires every threshold to hold.

    :param traj: Trajectory
    :param problem: Problem
    :param reference_only: Trajectory is a hover-lifted geometric reference
    :return: Report
    """
    params = problem.params
    if traj.horizon > 0:
        defect = dynamics_defect(traj.xs, traj.us, traj.dt, params)
        over = traj.us - np.asarray(params.f_max)[None, :, None]
        under = np.asarray(params.f_min)[None, :, None] - traj.us
        bound_violation = max(0.0, float(np.max(over)),
                              float(np.max(under)))
        spent = energy(traj, problem.power)
    else:
        defect = bound_violation = spent = 0.0
    min_sdf = _min_clearance(traj.xs, problem.env, params)
    goal_error = float(np.linalg.norm(traj.xs[-1].p0 - problem.p0_goal))
    collision_free = min_sdf >= 0

    success = bool(
        defect <= VALIDATION_MAX_DEFECT and collision_free
        and bound_violation <= VALIDATION_MAX_BOUND_VIOLATION
        and goal_error <= problem.planner.goal_tolerance
    )
    _LOGGER.debug(
        'Validation: success %s, defect %s, min sdf %s, bound violation %s,'
        ' goal error %s', success, defect, min_sdf, bound_violation,
        goal_error
    )
    return ValidationReport(
        success=success, defect=defect, min_sdf=min_sdf,
        bound_violation=bound_violation, goal_error=goal_error,
        duration=traj.duration, energy_wh=spent,
        collision_free=collision_free, reference_only=reference_only,
        n=params.n, environment=problem.environment_name,
        seed=problem.planner.seed,
    )


def window_half_width(n: int) -> float:
    """
    Half-width of the window gap, growing linearly with the team size.
    """
    lower, upper = SCENARIO_WINDOW_HALF_WIDTH
    return lower + (upper - lower) * (n - SCENARIO_MIN_ROBOTS) / (
        SCENARIO_MAX_ROBOTS - SCENARIO_MIN_ROBOTS
    )


def _window_obstacles(n: int) -> List[Dict[str, Any]]:
    half_width = window_half_width(n)
    half_y = (_WORKSPACE_HALF - half_width) / 2
    center_y = half_width + half_y
    return [
        dict(
            shape='box',
            center=[0.0, sign * center_y, SCENARIO_HEIGHT / 2],
            half_extents=[
                SCENARIO_WINDOW_THICKNESS / 2, half_y, SCENARIO_HEIGHT / 2
            ],
        )
        for sign in (-1.0, 1.0)
    ]


def _forest_obstacles(
    rng: np.random.Generator, anchors: Sequence[Tuple[float, ...]],
    accept: Callable[[List[Dict[str, Any]]], bool]
) -> List[Dict[str, Any]]:
    """
    Draws vertical cylinders over the footprint, keeping clear of the
    anchors, until ``accept`` holds for the whole forest.
    """
    half = SCENARIO_FOREST_FOOTPRINT / 2
    for _ in range(_FOREST_ATTEMPTS):
        res: List[Dict[str, Any]] = []
        while len(res) < SCENARIO_FOREST_CYLINDERS:
            xy = rng.uniform(-half, half, size=2)
            if any(np.hypot(xy[0] - a[0], xy[1] - a[1])
                   < SCENARIO_FOREST_CLEARANCE for a in anchors):
                continue
            res.append(dict(
                shape='cylinder',
                center=[float(xy[0]), float(xy[1]), SCENARIO_HEIGHT / 2],
                radius=SCENARIO_FOREST_RADIUS,
                half_height=SCENARIO_HEIGHT / 2,
            ))
        if accept(res):
            return res
    raise PlannerConfigError('Unable to place a forest keeping start and goal'
                             ' valid')


def generate_scenario(kind: str, n: int, seed: int) -> ProblemConfig:
    """
    Generates a benchmark problem. Start formation has evenly spaced
    azimuths; the goal formation is left to the planner.

    :param kind: ``empty``, ``forest`` or ``window``
    :param n: Number of multirotors
    :param seed: Seed of random obstacle placement
    :return: Problem
    :raises PlannerConfigError: Unknown kind or team size out of range
    """
    if kind not in SCENARIO_KINDS:
        raise PlannerConfigError(
            f"Unknown scenario '{kind}', expected one of {SCENARIO_KINDS}"
        )
    if not SCENARIO_MIN_ROBOTS <= n <= SCENARIO_MAX_ROBOTS:
        raise PlannerConfigError(
            f'Scenarios support {SCENARIO_MIN_ROBOTS} to'
            f' {SCENARIO_MAX_ROBOTS} multirotors, got {n}'
        )

    start_p0, goal_p0 = _SCENARIO_ENDPOINTS[kind]
    half = (SCENARIO_FOREST_FOOTPRINT / 2 if kind == 'forest'
            else _WORKSPACE_HALF)
    workspace = dict(lo=[-half, -half, 0.0],
                     hi=[half, half, SCENARIO_HEIGHT])
    alpha = [2 * math.pi * i / n for i in range(n)]
    gamma = [SCENARIO_START_ELEVATION] * n

    data: Dict[str, Any] = dict(
        general=dict(DEFAULT_CONFIG_GENERAL),
        params=dict(DEFAULT_CONFIG_PARAMS),
        environment=dict(workspace=workspace, obstacles=[]),
        start=dict(p0=list(start_p0), alpha=alpha, gamma=gamma),
        goal=dict(p0=list(goal_p0)),
        scenario=dict(kind=kind, seed=seed),
    )
    if kind == 'window':
        data['environment']['obstacles'] = _window_obstacles(n)
    elif kind == 'forest':
        base = ProblemConfig.from_dict(data)
        params = base.system_params()
        start = base.start_state()

        def accept(obstacles: List[Dict[str, Any]]) -> bool:
            env = Environment(
                obstacles=tuple(
                    Cylinder(np.array(x['center']), x['radius'],
                             x['half_height'])
                    for x in obstacles
                ),
                workspace_lo=np.array(workspace['lo']),
                workspace_hi=np.array(workspace['hi']),
            )
            return all(
                is_state_valid(start.with_p0(np.array(p0)), env, params)
                for p0 in (start_p0, goal_p0)
            )

        rng = np.random.default_rng(seed)
        data['environment']['obstacles'] = _forest_obstacles(
            rng, (start_p0, goal_p0), accept
        )

    _LOGGER.debug("Generated '%s' scenario for %s multirotors, seed %s",
                  kind, n, seed)
    return ProblemConfig.from_dict(data)


def _goal_state(problem: Problem, last_q: DoubleMatrix) -> FullState:
    """
    Goal of the optimizer: the desired payload position with the problem
    goal formation, or the last planned one.
    """
    if problem.goal_angles is not None:
        qs = azel_to_unit(*problem.goal_angles)
    else:
        qs = last_q
    return full_state_from_geometry(problem.p0_goal, qs)


def _extend_guess(
    xs: List[FullState], us: DoubleMatrix, params: SystemParams
) -> Tuple[List[FullState], DoubleMatrix]:
    """
    Pads a too short guess by holding its last state at hover.
    """
    while len(us) < 2:
        xs = xs + [xs[-1]]
        us = np.concatenate([us.reshape(-1, params.n, 4),
                             hover_control(params)[None]])
    return xs, us


def optimize_reference(
    problem: Problem, source: Union[Trajectory, ReferenceTrajectory]
) -> List[Trajectory]:
    """
    Optimizes a geometric reference, or refines a trajectory warm-starting
    from its states and controls.

    :param problem: Problem
    :param source: Reference or trajectory
    :return: Refinement iterates, the last one is the result
    :raises OptimizationDivergedError: Optimizer cost is not finite
    """
    params = problem.params
    if isinstance(source, Trajectory):
        xs, us = list(source.xs), source.us
    else:
        xs, us, _ = build_initial_guess(source, params)
    xs, us = _extend_guess(xs, us, params)
    opt_problem = OptProblem(
        params=params, env=problem.env, x_start=xs[0],
        x_goal=_goal_state(problem, xs[-1].q), horizon=len(us),
        settings=problem.optimizer,
    )
    return iterative_refine(
        opt_problem, xs, us,
        energy_fn=lambda traj: energy(traj, problem.power)
    )


def vertical_cables(path: GeomPath) -> GeomPath:
    """
    Same payload path with every cable hanging straight down.
    """
    return GeomPath(
        tuple(
            GeomState(p0=state.p0, alpha=np.zeros(state.n),
                      gamma=np.full(state.n, np.pi / 2))
            for state in path.states
        ),
        path.cost,
    )


def run_pipeline(
    problem: Problem, mode: str, out: Optional[Union[str, Path]] = None
) -> PipelineResult:
    """
    Runs a planning pipeline:

    - ``payload``: geometric planning of the payload alone, lifted to a
      reference with vertical cables
    - ``geom``: geometric planning of payload and cables
    - ``opt``: geometric planning followed by trajectory optimization

    References of the first two modes are validated with hover controls and
    reported as reference-only.

    :param problem: Problem
    :param mode: Pipeline mode
    :param out: Directory to write the artifacts to
    :return: Artifacts and the validation report
    :raises PlannerConfigError: Unknown mode or invalid start
    :raises NoSolutionError: Geometric planner found no path
    :raises OptimizationDivergedError: Optimizer cost is not finite
    """
    if mode not in PIPELINE_MODES:
        raise PlannerConfigError(
            f"Unknown mode '{mode}', expected one of {PIPELINE_MODES}"
        )
    params = problem.params
    started = time.monotonic()
    settings = replace(problem.planner, payload_only=mode == 'payload')
    path, trace = plan_geometric(problem.start, problem.p0_goal, problem.env,
                                 params, settings)
    if mode == 'payload':
        path = vertical_cables(path)
    reference = path_to_reference(path, problem.optimizer.dt0,
                                  settings.speed, params)
    geom_time = time.monotonic() - started
    _LOGGER.debug('Geometric path of cost %s in %.3f s', path.cost,
                  geom_time)

    opt_time: Optional[float] = None
    iterates: List[Trajectory] = []
    if mode == 'opt':
        started = time.monotonic()
        iterates = optimize_reference(problem, reference)
        traj = iterates[-1]
        opt_time = time.monotonic() - started
    else:
        traj = lift_reference(reference, params)

    report = validate_trajectory(traj, problem, reference_only=mode != 'opt')
    report = report.model_copy(update=dict(
        mode=mode, plan_time_geom_s=geom_time, plan_time_opt_s=opt_time,
    ))
    result = PipelineResult(mode=mode, path=path, trace=trace,
                            reference=reference, trajectory=traj,
                            report=report, iterates=iterates)
    if out is not None:
        write_artifacts(result, out, problem)
    return result


def write_csv(
    path: Union[str, Path], header: Sequence[str], rows: Sequence[CsvRow]
) -> None:
    """
    Writes a CSV table, floats in their shortest exact representation.
    """
    with open(path, 'w', encoding='ascii', newline='') as file:
        writer = csv.writer(file)
        writer.writerow(header)
        for row in rows:
            writer.writerow([
                repr(float(x)) if isinstance(x, (float, np.floating)) else x
                for x in row
            ])


def write_report(report: ValidationReport, path: Union[str, Path]) -> None:
    """
    Writes a report as JSON.
    """
    with open(path, 'w', encoding='ascii') as file:
        json.dump(report.model_dump(), file, indent=2)


def write_artifacts(
    result: PipelineResult, out: Union[str, Path], problem: Problem
) -> None:
    """
    Writes trajectory file, report and logs of a pipeline run to ``out``,
    file names prefixed by the mode.

    :param result: Pipeline artifacts
    :param out: Output directory
    :param problem: Problem
    """
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    mode = result.mode
    provenance = dict(mode=mode, seed=problem.planner.seed,
                      sampler=problem.planner.sampler,
                      environment=problem.environment_name)
    source: Union[Trajectory, ReferenceTrajectory] = (
        result.trajectory if mode == 'opt' else result.reference
    )
    export_trajectory(source, out / f'{mode}_trajectory.csv', problem.params,
                      provenance)
    write_report(result.report, out / f'{mode}_report.json')
    write_csv(out / f'{mode}_plan_trace.csv', ('t_s', 'iteration', 'cost'),
              result.trace)
    if result.iterates:
        write_csv(out / f'{mode}_opt_log.csv',
                  ('iteration', 'cost', 'defect', 'min_sdf', 'dt'),
                  result.trajectory.log)
        write_csv(out / f'{mode}_refine_energy.csv',
                  ('iteration', 'dt0', 'energy_wh', 'duration_s'),
                  refine_energy_trace(result.iterates))
    _LOGGER.debug("Artifacts of '%s' run written to '%s'", mode, out)


def refine_energy_trace(
    iterates: Sequence[Trajectory]
) -> List[Tuple[int, float, float, float]]:
    """
    Energy and duration over refinement iterations.

    :param iterates: Iterates of :func:`~.traj_opt.iterative_refine`
    :return: Rows of iteration (from one), nominal time step, energy (Wh)
     and duration (s)
    """
    return [
        (j + 1, traj.metrics.get('dt0', math.nan),
         traj.metrics.get('energy_wh', math.nan), traj.duration)
        for j, traj in enumerate(iterates)
    ]


def summarize_reports(
    reports: Sequence[ValidationReport]
) -> List[Dict[str, Any]]:
    """
    Aggregates reports per environment, team size and mode.

    :param reports: Validation reports
    :return: Rows sorted by key, with success and collision-free rates,
     mean and standard deviation of energy and goal error and the mean
     planning time
    """
    groups: Dict[Tuple[str, int, str], List[ValidationReport]] = {}
    for report in reports:
        key = (report.environment or '', report.n or 0, report.mode or '')
        groups.setdefault(key, []).append(report)

    res = []
    for (environment, n, mode), items in sorted(groups.items()):
        energies = np.array([x.energy_wh for x in items])
        errors = np.array([x.goal_error for x in items])
        times = np.array([
            (x.plan_time_geom_s or 0.0) + (x.plan_time_opt_s or 0.0)
            for x in items
        ])
        res.append(dict(
            environment=environment, n=n, mode=mode, runs=len(items),
            success_rate=float(np.mean([x.success for x in items])),
            collision_free_rate=float(
                np.mean([x.collision_free for x in items])
            ),
            energy_mean=float(np.mean(energies)),
            energy_std=float(np.std(energies)),
            goal_error_mean=float(np.mean(errors)),
            goal_error_std=float(np.std(errors)),
            plan_time_mean=float(np.mean(times)),
        ))
    return res


def load_reports(paths: Sequence[Union[str, Path]]) -> List[ValidationReport]:
    """
    Reads report files written by :func:`write_artifacts`.

    :raises PlannerConfigError: A report cannot be read
    """
    res = []
    for path in paths:
        try:
            with open(path, encoding='ascii') as file:
                res.append(ValidationReport.model_validate(json.load(file)))
        except (OSError, ValueError) as exc:
            raise PlannerConfigError(
                f"Error loading report '{path}':\n{str(exc)}"
            ) from None
    return res


@dataclass(frozen=True)
class SamplerRun:
    """
    Outcome of one geometric planner run.
    """
    sampler: str
    seed: int
    trace: Tuple[TraceRow, ...]

    @property
    def first_solution(self) -> Optional[TraceRow]:
        """
        Trace row of the first solution, if any.
        """
        return self.trace[0] if self.trace else None

    def cost_at(self, budget: int) -> float:
        """
        Best cost found within ``budget`` iterations.
        """
        res = math.inf
        for _, iteration, cost in self.trace:
            if iteration <= budget:
                res = cost
        return res


def _sampler_cell(
    problem: Problem, sampler: str, seed: int, max_samples: int
) -> SamplerRun:
    settings = replace(problem.planner, sampler=sampler, seed=seed,
                       max_samples=max_samples)
    try:
        _, trace = plan_geometric(problem.start, problem.p0_goal,
                                  problem.env, problem.params, settings)
    except NoSolutionError:
        trace = []
    return SamplerRun(sampler, seed, tuple(trace))


async def _run_cells(
    cells: Sequence[Tuple[Callable[..., _T], Tuple[Any, ...]]],
    workers: int, executor: Optional[Executor]
) -> List[_T]:
    """
    Runs cells in the executor with at most ``workers`` in flight, results
    in the order of ``cells``.
    """
    loop = asyncio.get_running_loop()
    semaphore = asyncio.Semaphore(workers)

    async def run(
        pool: Executor, func: Callable[..., _T], args: Tuple[Any, ...]
    ) -> _T:
        async with semaphore:
            return await loop.run_in_executor(pool, func, *args)

    if executor is not None:
        return list(await asyncio.gather(
            *[run(executor, f, a) for f, a in cells]
        ))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(await asyncio.gather(
            *[run(pool, f, a) for f, a in cells]
        ))


def _checked_seeds(seeds: Sequence[int]) -> List[int]:
    seeds = sorted(set(seeds))
    if len(seeds) < 2:
        raise InsufficientSeedsError(
            f'At least two distinct seeds are required, got {len(seeds)}'
        )
    return seeds


async def bench_sampler(
    problem: Problem, budgets: Sequence[int], seeds: Sequence[int],
    workers: int = 1, executor: Optional[Executor] = None
) -> Tuple[List[CsvRow], List[CsvRow]]:
    """
    Compares the witness sampler with uniform sampling.

    :param problem: Problem
    :param budgets: Iteration counts at which costs are reported, the
     largest one bounds every run
    :param seeds: Planner seeds, at least two
    :param workers: Runs in flight
    :param executor: Executor to run in, a process pool by default
    :return: Cost trace rows (sampler, seed, t, iteration, cost) and summary
     rows (sampler, budget, solved, cost mean, cost std, median iterations
     and median time to the first solution)
    :raises InsufficientSeedsError: Less than two seeds
    """
    seeds = _checked_seeds(seeds)
    budgets = sorted(set(budgets))
    assert budgets and budgets[0] > 0, 'Budgets should be positive'
    cells = [
        (_sampler_cell, (problem, sampler, seed, budgets[-1]))
        for sampler in ('uniform', 'witness') for seed in seeds
    ]
    runs: List[SamplerRun] = await _run_cells(cells, workers, executor)

    traces: List[CsvRow] = [
        (run.sampler, run.seed, t, iteration, cost)
        for run in runs for t, iteration, cost in run.trace
    ]
    summary: List[CsvRow] = []
    for sampler in ('uniform', 'witness'):
        mine = [x for x in runs if x.sampler == sampler]
        firsts = [x.first_solution for x in mine if x.first_solution]
        first_iter = (float(np.median([x[1] for x in firsts]))
                      if firsts else math.nan)
        first_time = (float(np.median([x[0] for x in firsts]))
                      if firsts else math.nan)
        for budget in budgets:
            costs = np.array([x.cost_at(budget) for x in mine])
            solved = costs[np.isfinite(costs)]
            summary.append((
                sampler, budget, len(solved),
                float(np.mean(solved)) if len(solved) else math.nan,
                float(np.std(solved)) if len(solved) else math.nan,
                first_iter, first_time,
            ))
        _LOGGER.debug("Sampler '%s': %s of %s runs solved", sampler,
                      len(firsts), len(mine))
    return traces, summary


def _optimizer_cell(
    kind: str, n: int, seed: int, timeout: Optional[float]
) -> CsvRow:
    problem = Problem.from_config(generate_scenario(kind, n, seed), seed=seed,
                                  timeout=timeout)
    try:
        result = run_pipeline(problem, 'opt')
    except NoSolutionError:
        return (kind, n, seed, False, math.nan, 0, math.nan)
    except OptimizationDivergedError as exc:
        _LOGGER.warning("Optimization of '%s' n=%s seed %s diverged: %s",
                        kind, n, seed, exc)
        return (kind, n, seed, False, math.nan, 0, math.nan)
    traj = result.trajectory
    return (
        kind, n, seed, result.report.success,
        result.report.plan_time_opt_s or 0.0, traj.iterations,
        result.report.energy_wh,
    )


async def bench_optimizer(
    kind: str, robots: Sequence[int], seeds: Sequence[int],
    workers: int = 1, executor: Optional[Executor] = None,
    timeout: Optional[float] = None
) -> List[CsvRow]:
    """
    Computational effort of the optimization stage over team sizes.

    :param kind: Scenario kind
    :param robots: Team sizes
    :param seeds: Seeds, at least two
    :param workers: Runs in flight
    :param executor: Executor to run in, a process pool by default
    :param timeout: Geometric planner timeout, s
    :return: Rows of kind, n, seed, success, optimization wall time (s),
     DDP iterations and energy (Wh), sorted by team size and seed
    :raises InsufficientSeedsError: Less than two seeds
    """
    seeds = _checked_seeds(seeds)
    cells = [
        (_optimizer_cell, (kind, n, seed, timeout))
        for n in sorted(set(robots)) for seed in seeds
    ]
    return await _run_cells(cells, workers, executor)
