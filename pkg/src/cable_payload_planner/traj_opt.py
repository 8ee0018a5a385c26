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
Trajectory optimization: turns a geometric reference into a dynamically
feasible, actuation bounded and collision-free trajectory.

The cost of a trajectory with time step ``dt`` and ``T`` steps is

.. code-block:: text

    sum_k [(dt - dt0)^2 + beta1 |u_k|^2 + beta2 |acc(x_k, u_k)|^2
           + P(x_k, u_k)]
        + P_T(x_T)

where ``acc`` concatenates the accelerations of all bodies and the penalties
``P`` are squared violations of clearance, workspace, cable tilt, body rate
and motor bounds; the terminal penalty adds the payload/cable goal term and
a regularization of the multirotor attitudes and rates.

The time step is optimized by golden-section search in alternation with DDP
solves at fixed time step.
"""
from __future__ import annotations
from typing import List, Tuple, Optional, Dict, Callable
from dataclasses import dataclass, field, replace
import logging
import math
import time
import numpy as np
import numpy.typing as npt
from .const import (
    DEFAULT_OPT_DT0, DEFAULT_OPT_BETA1, DEFAULT_OPT_BETA2, DEFAULT_OPT_W_GOAL,
    DEFAULT_OPT_W_BOUND, DEFAULT_OPT_W_COLL, DEFAULT_OPT_W_REG,
    DEFAULT_OPT_MARGIN, DEFAULT_OPT_OMEGA_MAX, DEFAULT_OPT_MAX_ITERS,
    DEFAULT_OPT_TOL, DEFAULT_OPT_N_ITERS, DEFAULT_OPT_SHRINK,
    DEFAULT_OPT_DT_BRACKET, DEFAULT_OPT_GOLDEN_EVALS, DEFAULT_OPT_MAX_OUTER,
    DEFAULT_OPT_ESCALATION, DEFAULT_TILT_MIN, DEFAULT_PLANNER_GOAL_TOLERANCE,
    DEFAULT_GUESS_TRACKING_WEIGHTS,
)
from .ddp import StageExpansion, DDPSettings, solve, track_reference
from .exceptions import OptimizationDivergedError
from .geom_planner import ReferenceTrajectory
from .lie import so3_log, right_jacobian_inv, tangent_projector
from .model import (
    SystemParams, FullState, Control, TangentLayout, continuous_dynamics,
    accel_vector, accel_jacobians, dynamics_jacobians, step, rollout,
    state_difference, hover_control, full_state_from_geometry, E3,
)
from .numerics import golden_section
from .world import Environment, signed_distance, signed_distance_gradient

DoubleMatrix = npt.NDArray[np.float64]
# Iteration, cost, dynamics defect, minimal signed distance, time step
LogRow = Tuple[int, float, float, float, float]

_LOGGER = logging.getLogger(__name__)

# Guesses with a larger defect are tracked in closed loop before solving
_CONSISTENCY_TOL = 1e-10


@dataclass(frozen=True)
class OptSettings:  # pylint: disable=too-many-instance-attributes
    """
    Weights, bounds and solver settings of the trajectory optimizer.
    """
    dt0: float = DEFAULT_OPT_DT0
    beta1: float = DEFAULT_OPT_BETA1
    beta2: float = DEFAULT_OPT_BETA2
    w_goal: float = DEFAULT_OPT_W_GOAL
    w_bound: float = DEFAULT_OPT_W_BOUND
    w_coll: float = DEFAULT_OPT_W_COLL
    w_reg: float = DEFAULT_OPT_W_REG
    margin: float = DEFAULT_OPT_MARGIN
    omega_max: float = DEFAULT_OPT_OMEGA_MAX
    max_iters: int = DEFAULT_OPT_MAX_ITERS
    tol: float = DEFAULT_OPT_TOL
    n_iters: int = DEFAULT_OPT_N_ITERS
    shrink: float = DEFAULT_OPT_SHRINK
    dt_bracket: Tuple[float, float] = DEFAULT_OPT_DT_BRACKET
    golden_evals: int = DEFAULT_OPT_GOLDEN_EVALS
    max_outer: int = DEFAULT_OPT_MAX_OUTER
    tilt_min: float = DEFAULT_TILT_MIN
    goal_tolerance: float = DEFAULT_PLANNER_GOAL_TOLERANCE

    def __post_init__(self) -> None:
        object.__setattr__(self, 'dt_bracket', tuple(self.dt_bracket))
        assert self.dt0 > 0, 'Nominal time step should be positive'
        for name in ('beta1', 'beta2', 'w_goal', 'w_bound', 'w_coll',
                     'w_reg'):
            assert getattr(self, name) >= 0, f'{name} should be non-negative'
        assert self.n_iters >= 1, 'At least one refinement iteration'
        assert 0 < self.shrink < 1, 'Shrink factor should be in (0, 1)'
        lower, upper = self.dt_bracket
        assert 0 < lower <= 1 <= upper, 'Time step bracket should contain 1'


@dataclass(frozen=True, eq=False)
class OptProblem:
    """
    Fixed-horizon optimization problem between two full states.
    """
    params: SystemParams
    env: Environment
    x_start: FullState
    x_goal: FullState
    horizon: int
    settings: OptSettings = field(default_factory=OptSettings)

    def __post_init__(self) -> None:
        assert self.horizon >= 2, 'Horizon should have at least two steps'
        assert self.x_start.n == self.params.n == self.x_goal.n, \
            'States should match the number of multirotors'

    def with_settings(self, **changes: float) -> OptProblem:
        """
        Copy of the problem with some settings replaced.
        """
        return replace(self, settings=replace(self.settings, **changes))


@dataclass(eq=False)
class Trajectory:  # pylint: disable=too-many-instance-attributes
    """
    State and control sequences at a constant time step, with diagnostics.
    """
    dt: float
    xs: List[FullState]
    us: Control
    cost: float = math.nan
    defect: float = 0.0
    min_sdf: float = math.inf
    goal_error: float = math.nan
    iterations: int = 0
    log: List[LogRow] = field(default_factory=list)
    cost_history: List[float] = field(default_factory=list)
    metrics: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.us = np.asarray(self.us, dtype=float)
        assert self.dt > 0, 'Time step should be positive'
        assert len(self.xs) == len(self.us) + 1, \
            'There should be one more state than controls'

    @property
    def horizon(self) -> int:
        """
        Number of steps.
        """
        return len(self.us)

    @property
    def n(self) -> int:
        """
        Number of multirotors.
        """
        return self.xs[0].n

    @property
    def duration(self) -> float:
        """
        Duration, s.
        """
        return self.dt * self.horizon


def build_initial_guess(
    ref: ReferenceTrajectory, params: SystemParams
) -> Tuple[List[FullState], Control, int]:
    """
    Initial guess from a reference: positions and cable directions of the
    reference with all velocities zero, level multirotors and hover controls.

    :param ref: Reference trajectory
    :param params: System parameters
    :return: States, controls of shape ``(T, n, 4)`` and the horizon ``T``
    """
    horizon = len(ref) - 1
    xs = [full_state_from_geometry(ref.p0[k], ref.q[k])
          for k in range(len(ref))]
    us = np.repeat(hover_control(params)[None], horizon, axis=0)
    return xs, us, horizon


def stage_cost(
    x: FullState, u: Control, dt: float, problem: OptProblem
) -> float:
    """
    Running cost of one step.

    :param x: State
    :param u: Motor forces, shape ``(n, 4)``
    :param dt: Time step, s
    :param problem: Problem
    :return: ``(dt - dt0)^2 + beta1 |u|^2 + beta2 |acc|^2``
    """
    settings = problem.settings
    _, acc = continuous_dynamics(x, u, problem.params)
    acc_vec = accel_vector(acc)
    return float(
        (dt - settings.dt0) ** 2
        + settings.beta1 * np.sum(np.square(u))
        + settings.beta2 * acc_vec @ acc_vec
    )


@dataclass
class _Penalty:
    """
    Accumulated penalty value with Gauss-Newton derivatives.
    """
    value: float
    gx: DoubleMatrix
    gu: DoubleMatrix
    hxx: DoubleMatrix
    huu: DoubleMatrix


def _upper_bound_terms(
    value: DoubleMatrix, limit: DoubleMatrix, weight: float
) -> Tuple[float, DoubleMatrix, DoubleMatrix]:
    """
    Squared violation of ``value <= limit``: total, gradient and Hessian
    diagonal.
    """
    excess = np.maximum(value - limit, 0.0)
    return (
        weight * float(excess @ excess),
        2.0 * weight * excess,
        2.0 * weight * (excess > 0).astype(float),
    )


def _penalties(  # pylint: disable=too-many-locals
    x: FullState, k: int, problem: OptProblem, u: Optional[Control],
    derivatives: bool
) -> _Penalty:
    settings = problem.settings
    params = problem.params
    layout = TangentLayout(x.n)
    res = _Penalty(
        0.0, np.zeros(layout.dim), np.zeros(params.control_dim),
        np.zeros((layout.dim, layout.dim)),
        np.zeros((params.control_dim, params.control_dim)),
    )

    if settings.w_coll > 0:
        if derivatives:
            dist, grad = signed_distance_gradient(x, problem.env, params)
        else:
            dist = signed_distance(x, problem.env, params)
            grad = np.zeros(layout.dim)
        viol = settings.margin - dist
        if math.isfinite(dist) and viol > 0:
            res.value += settings.w_coll * viol ** 2
            res.gx += -2.0 * settings.w_coll * viol * grad
            res.hxx += 2.0 * settings.w_coll * np.outer(grad, grad)

    w_bound = settings.w_bound
    env = problem.env
    for sign, value, limit in ((1.0, x.p0, env.workspace_hi),
                               (-1.0, -x.p0, -env.workspace_lo)):
        total, grad, hess = _upper_bound_terms(value, limit, w_bound)
        res.value += total
        res.gx[layout.p0] += sign * grad
        res.hxx[layout.p0, layout.p0] += np.diag(hess)

    for i in range(x.n):
        viol = settings.tilt_min + x.q[i, 2]
        if viol > 0:
            direction = tangent_projector(x.q[i]) @ E3
            res.value += w_bound * viol ** 2
            res.gx[layout.q(i)] += 2.0 * w_bound * viol * direction
            res.hxx[layout.q(i), layout.q(i)] += (
                2.0 * w_bound * np.outer(direction, direction)
            )
        total, grad, hess = _upper_bound_terms(
            np.abs(x.omega[i]), np.full(3, settings.omega_max), w_bound
        )
        res.value += total
        res.gx[layout.omega(i)] += grad * np.sign(x.omega[i])
        res.hxx[layout.omega(i), layout.omega(i)] += np.diag(hess)

    if u is not None:
        flat = np.asarray(u, dtype=float).ravel()
        f_max = np.repeat(np.asarray(params.f_max), 4)
        f_min = np.repeat(np.asarray(params.f_min), 4)
        for sign, value, limit in ((1.0, flat, f_max), (-1.0, -flat, -f_min)):
            total, grad, hess = _upper_bound_terms(value, limit, w_bound)
            res.value += total
            res.gu += sign * grad
            res.huu += np.diag(hess)

    if k == problem.horizon:
        _terminal_terms(x, problem, layout, res)
    return res


def _terminal_terms(
    x: FullState, problem: OptProblem, layout: TangentLayout, res: _Penalty
) -> None:
    """
    Goal term on payload and cables, regularization of multirotor attitudes,
    body rates and cable rates.
    """
    settings = problem.settings
    goal = problem.x_goal
    w_goal = settings.w_goal
    w_reg = settings.w_reg
    eye = np.eye(3)

    for block, diff in ((layout.p0, x.p0 - goal.p0),
                        (layout.v0, x.v0 - goal.v0)):
        res.value += w_goal * float(diff @ diff)
        res.gx[block] += 2.0 * w_goal * diff
        res.hxx[block, block] += 2.0 * w_goal * eye

    rotvecs = [so3_log(rot) for rot in x.rotations()]
    for i in range(x.n):
        diff = x.q[i] - goal.q[i]
        proj = tangent_projector(x.q[i])
        res.value += w_goal * float(diff @ diff)
        res.gx[layout.q(i)] += 2.0 * w_goal * proj @ diff
        res.hxx[layout.q(i), layout.q(i)] += 2.0 * w_goal * proj

        phi = rotvecs[i]
        jac = right_jacobian_inv(phi)
        res.value += w_reg * float(phi @ phi)
        res.gx[layout.theta(i)] += 2.0 * w_reg * jac.T @ phi
        res.hxx[layout.theta(i), layout.theta(i)] += 2.0 * w_reg * jac.T @ jac
        for block, value in ((layout.omega(i), x.omega[i]),
                             (layout.w(i), x.w[i])):
            res.value += w_reg * float(value @ value)
            res.gx[block] += 2.0 * w_reg * value
            res.hxx[block, block] += 2.0 * w_reg * eye


def penalty_cost(
    x: FullState, k: int, problem: OptProblem, u: Optional[Control] = None
) -> float:
    """
    Squared penalty of constraint violations at step ``k``; the goal and
    regularization terms are added at the terminal step.

    :param x: State
    :param k: Step index, ``problem.horizon`` for the terminal state
    :param problem: Problem
    :param u: Motor forces of the step, bounds are not checked if omitted
    :return: Penalty
    """
    return _penalties(x, k, problem, u, derivatives=False).value


def trajectory_cost(
    xs: List[FullState], us: Control, dt: float, problem: OptProblem
) -> float:
    """
    Total cost of a trajectory.
    """
    total = 0.0
    for k, u in enumerate(us):
        total += stage_cost(xs[k], u, dt, problem)
        total += penalty_cost(xs[k], k, problem, u)
    total += penalty_cost(xs[-1], len(us), problem)
    return total


def _stage_expansion(
    x: FullState, u: Control, k: int, problem: OptProblem
) -> StageExpansion:
    settings = problem.settings
    params = problem.params
    _, acc = continuous_dynamics(x, u, params)
    acc_vec = accel_vector(acc)
    jac_x, jac_u = accel_jacobians(x, u, params)
    pen = _penalties(x, k, problem, u, derivatives=True)
    beta1 = settings.beta1
    beta2 = settings.beta2
    flat = np.asarray(u, dtype=float).ravel()
    return StageExpansion(
        lx=2.0 * beta2 * jac_x.T @ acc_vec + pen.gx,
        lu=2.0 * beta1 * flat + 2.0 * beta2 * jac_u.T @ acc_vec + pen.gu,
        lxx=2.0 * beta2 * jac_x.T @ jac_x + pen.hxx,
        luu=(2.0 * beta1 * np.eye(flat.size)
             + 2.0 * beta2 * jac_u.T @ jac_u + pen.huu),
        lux=2.0 * beta2 * jac_u.T @ jac_x,
    )


class FixedStepModel:
    """
    Problem at a fixed time step as seen by the DDP solver.

    :param problem: Problem
    :param dt: Time step, s
    """
    def __init__(self, problem: OptProblem, dt: float) -> None:
        self.problem = problem
        self.dt = dt

    def step(self, x: FullState, u: Control) -> FullState:
        """
        Discrete dynamics.
        """
        return step(x, u, self.dt, self.problem.params)

    def jacobians(
        self, x: FullState, u: Control
    ) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        Derivatives of the discrete dynamics.
        """
        return dynamics_jacobians(x, u, self.dt, self.problem.params)

    def cost(self, xs: List[FullState], us: Control) -> float:
        """
        Total cost.
        """
        return trajectory_cost(xs, us, self.dt, self.problem)

    def expansion(
        self, xs: List[FullState], us: Control
    ) -> List[StageExpansion]:
        """
        Quadratic cost expansions along a trajectory.
        """
        res = [_stage_expansion(xs[k], u, k, self.problem)
               for k, u in enumerate(us)]
        pen = _penalties(xs[-1], len(us), self.problem, None,
                         derivatives=True)
        res.append(StageExpansion(
            lx=pen.gx, lu=np.zeros(0), lxx=pen.hxx, luu=np.zeros((0, 0)),
            lux=np.zeros((0, pen.gx.size)),
        ))
        return res


def guess_tracking_weights(
    n: int, weights: Optional[Dict[str, float]] = None
) -> Tuple[DoubleMatrix, DoubleMatrix]:
    """
    Diagonal weights of the tracking pass applied to inconsistent guesses.

    :param n: Number of multirotors
    :param weights: Per-block weights, see ``DEFAULT_GUESS_TRACKING_WEIGHTS``
    :return: State and control weight vectors
    """
    weights = weights or DEFAULT_GUESS_TRACKING_WEIGHTS
    layout = TangentLayout(n)
    state = np.empty(layout.dim)
    state[layout.p0] = weights['p0']
    state[layout.v0] = weights['v0']
    for i in range(n):
        state[layout.q(i)] = weights['q']
        state[layout.w(i)] = weights['w']
        state[layout.theta(i)] = weights['theta']
        state[layout.omega(i)] = weights['omega']
    return state, np.full(4 * n, weights['u'])


def dynamics_defect(
    xs: List[FullState], us: Control, dt: float, params: SystemParams
) -> float:
    """
    Largest tangent-space distance between a state and the step of its
    predecessor.
    """
    res = 0.0
    for k, u in enumerate(us):
        diff = state_difference(xs[k + 1], step(xs[k], u, dt, params))
        res = max(res, float(np.linalg.norm(diff)))
    return res


def min_signed_distance(
    xs: List[FullState], env: Environment, params: SystemParams
) -> float:
    """
    Smallest signed distance over the states.
    """
    return min(signed_distance(x, env, params) for x in xs)


def _finalize(  # pylint: disable=too-many-arguments
    problem: OptProblem, xs: List[FullState], us: Control, dt: float,
    cost: float, iterations: int, log: List[LogRow], history: List[float]
) -> Trajectory:
    return Trajectory(
        dt=dt, xs=xs, us=us, cost=cost,
        defect=dynamics_defect(xs, us, dt, problem.params),
        min_sdf=min_signed_distance(xs, problem.env, problem.params),
        goal_error=float(np.linalg.norm(xs[-1].p0 - problem.x_goal.p0)),
        iterations=iterations, log=log, cost_history=history,
    )


def _last_finite(
    problem: OptProblem, xs: List[FullState], us: Control, dt: float,
    cost: float
) -> Optional[Trajectory]:
    """
    Trajectory of the given iterate if its states and controls are finite.
    """
    finite = bool(np.all(np.isfinite(us))) and all(
        np.all(np.isfinite(x.to_vector())) for x in xs
    )
    if not finite:
        return None
    return Trajectory(
        dt=dt, xs=list(xs), us=us, cost=cost,
        defect=dynamics_defect(xs, us, dt, problem.params),
        goal_error=float(np.linalg.norm(xs[-1].p0 - problem.x_goal.p0)),
    )


def solve_ddp(
    problem: OptProblem, xs: List[FullState], us: Control, dt: float
) -> Trajectory:
    """
    Solves the problem at a fixed time step. A guess that does not satisfy
    the dynamics is first followed in closed loop by a tracking controller.

    :param problem: Problem
    :param xs: Guess states
    :param us: Guess controls, shape ``(T, n, 4)``
    :param dt: Time step, s
    :return: Optimized trajectory
    :raises OptimizationDivergedError: Cost of the guess is not finite
    """
    assert len(us) == problem.horizon, 'Guess should match the horizon'
    assert len(xs) == len(us) + 1, 'Guess dimensions are inconsistent'
    params = problem.params
    model = FixedStepModel(problem, dt)
    us = np.asarray(us, dtype=float)
    if dynamics_defect(xs, us, dt, params) > _CONSISTENCY_TOL:
        _LOGGER.debug('Guess is not dynamically consistent, tracking it')
        state_w, control_w = guess_tracking_weights(params.n)
        xs, us = track_reference(model, xs, us, state_w, control_w)

    log: List[LogRow] = []

    def on_iteration(
        iteration: int, it_xs: List[FullState], it_us: Control, cost: float
    ) -> None:
        log.append((
            iteration, cost, dynamics_defect(it_xs, it_us, dt, params),
            min_signed_distance(it_xs, problem.env, params), dt
        ))

    settings = DDPSettings(max_iters=problem.settings.max_iters,
                           tol=problem.settings.tol)
    on_iteration(0, xs, us, model.cost(xs, us))
    result = solve(model, xs, us, settings, on_iteration)
    if result.diverged:
        raise OptimizationDivergedError(
            f'Cost of the initial trajectory is {result.cost} at dt {dt}',
            trajectory=_last_finite(problem, result.xs, result.us, dt,
                                    result.cost),
        )
    _LOGGER.debug('DDP at dt %s: cost %s after %s iterations', dt,
                  result.cost, result.iterations)
    return _finalize(problem, result.xs, result.us, dt, result.cost,
                     result.iterations, log, result.history)


def _improves(new: float, old: float, tol: float) -> bool:
    return new < old - tol * abs(old)


def _coordinate_descent(
    problem: OptProblem, traj: Trajectory
) -> Trajectory:
    """
    Alternates time step search and DDP solves until neither improves the
    cost.
    """
    settings = problem.settings
    lower, upper = settings.dt_bracket
    params = problem.params
    for outer in range(settings.max_outer):
        us = traj.us

        def dt_cost(dt: float) -> float:
            # pylint: disable=cell-var-from-loop
            return trajectory_cost(rollout(problem.x_start, us, dt, params),
                                   us, dt, problem)

        dt_new, cost_new = golden_section(
            dt_cost, lower * settings.dt0, upper * settings.dt0,
            settings.golden_evals
        )
        dt_improved = _improves(cost_new, traj.cost, settings.tol)
        if dt_improved:
            _LOGGER.debug('Outer %s: dt %s -> %s, cost %s -> %s', outer,
                          traj.dt, dt_new, traj.cost, cost_new)
            xs = rollout(problem.x_start, us, dt_new, params)
            traj = _finalize(problem, xs, us, dt_new, cost_new,
                             traj.iterations, traj.log,
                             traj.cost_history + [cost_new])

        solved = solve_ddp(problem, traj.xs, traj.us, traj.dt)
        ddp_improved = _improves(solved.cost, traj.cost, settings.tol)
        if solved.cost <= traj.cost:
            solved.iterations += traj.iterations
            solved.log = traj.log + solved.log
            solved.cost_history = traj.cost_history + solved.cost_history[1:]
            traj = solved
        if not (dt_improved or ddp_improved):
            break
    return traj


def optimize(
    problem: OptProblem, xs: List[FullState], us: Control,
    dt: Optional[float] = None
) -> Trajectory:
    """
    Optimizes states, controls and the time step. If the goal is still
    missed, the goal weight is escalated once and the optimization resumed.

    :param problem: Problem
    :param xs: Guess states
    :param us: Guess controls, shape ``(T, n, 4)``
    :param dt: Starting time step, nominal time step by default
    :return: Best trajectory found
    :raises OptimizationDivergedError: Cost of the guess is not finite
    """
    started = time.monotonic()
    settings = problem.settings
    dt = settings.dt0 if dt is None else dt
    traj = _coordinate_descent(problem, solve_ddp(problem, xs, us, dt))

    if traj.goal_error > settings.goal_tolerance:
        w_goal = settings.w_goal * DEFAULT_OPT_ESCALATION
        _LOGGER.warning(
            'Goal error %.4f m exceeds %s m, escalating goal weight to %s',
            traj.goal_error, settings.goal_tolerance, w_goal
        )
        escalated = problem.with_settings(w_goal=w_goal)
        retry = _coordinate_descent(
            escalated, solve_ddp(escalated, traj.xs, traj.us, traj.dt)
        )
        if retry.goal_error <= traj.goal_error:
            retry.iterations += traj.iterations
            retry.log = traj.log + retry.log
            traj = retry

    traj.metrics['wall_time_s'] = time.monotonic() - started
    traj.metrics['dt0'] = settings.dt0
    _LOGGER.debug(
        'Optimized: dt %s, cost %s, goal error %s, min sdf %s, %s iterations',
        traj.dt, traj.cost, traj.goal_error, traj.min_sdf, traj.iterations
    )
    return traj


def iterative_refine(  # pylint: disable=too-many-arguments
    problem: OptProblem, xs: List[FullState], us: Control,
    n_iters: Optional[int] = None, shrink: Optional[float] = None,
    energy_fn: Optional[Callable[[Trajectory], float]] = None
) -> List[Trajectory]:
    """
    Solves a sequence of problems with decreasing nominal time step, each
    warm-started from the previous solution.

    :param problem: Problem
    :param xs: Guess states
    :param us: Guess controls
    :param n_iters: Number of iterations, from the settings by default
    :param shrink: Factor applied to the nominal time step per iteration
    :param energy_fn: Energy metric stored as ``metrics['energy_wh']``
    :return: All iterates
    """
    settings = problem.settings
    n_iters = settings.n_iters if n_iters is None else n_iters
    shrink = settings.shrink if shrink is None else shrink
    assert n_iters >= 1 and 0 < shrink < 1, 'Invalid refinement schedule'

    res: List[Trajectory] = []
    dt: Optional[float] = None
    for j in range(n_iters):
        dt0 = settings.dt0 * shrink ** j
        traj = optimize(problem.with_settings(dt0=dt0), xs, us, dt)
        if energy_fn is not None:
            traj.metrics['energy_wh'] = energy_fn(traj)
        _LOGGER.debug('Refine iteration %s: dt0 %s, dt %s, cost %s', j + 1,
                      dt0, traj.dt, traj.cost)
        res.append(traj)
        xs, us, dt = traj.xs, traj.us, traj.dt
    return res
