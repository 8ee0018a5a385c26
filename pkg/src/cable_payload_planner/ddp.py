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
Iterative LQR flavour of differential dynamic programming over full states.

Deviations are taken in tangent coordinates (:func:`~.model.state_difference`),
so the same backward/forward passes serve every manifold component. The
forward pass always rolls out the true dynamics, so every iterate satisfies
the dynamics exactly.
"""
from __future__ import annotations
from typing import List, Tuple, Optional, Callable, Protocol
from dataclasses import dataclass, field
import logging
import math
import numpy as np
import numpy.typing as npt
from scipy.linalg import cho_factor, cho_solve, LinAlgError
from .const import (
    DDP_REG_INIT, DDP_REG_MIN, DDP_REG_MAX, DDP_REG_FACTOR,
    DDP_LINE_SEARCH_STEPS, DEFAULT_OPT_MAX_ITERS, DEFAULT_OPT_TOL,
)
from .model import FullState, Control, state_difference

DoubleMatrix = npt.NDArray[np.float64]
# Called after every accepted iteration with (iteration, X, U, cost)
IterationCallback = Callable[[int, List[FullState], Control, float], None]

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StageExpansion:
    """
    Quadratic expansion of the cost at one step, controls flattened. Terminal
    expansions have zero-sized control blocks.
    """
    lx: DoubleMatrix
    lu: DoubleMatrix
    lxx: DoubleMatrix
    luu: DoubleMatrix
    lux: DoubleMatrix


class DDPModel(Protocol):
    """
    Dynamics and cost of a fixed-step optimal control problem.
    """
    def step(self, x: FullState, u: DoubleMatrix) -> FullState:
        """
        Discrete dynamics, ``u`` of shape ``(n, 4)``.
        """

    def jacobians(
        self, x: FullState, u: DoubleMatrix
    ) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        Derivatives of :meth:`step` in tangent coordinates.
        """

    def cost(self, xs: List[FullState], us: Control) -> float:
        """
        Total cost of a trajectory.
        """

    def expansion(
        self, xs: List[FullState], us: Control
    ) -> List[StageExpansion]:
        """
        Cost expansions of all steps, the terminal one last.
        """


@dataclass(frozen=True)
class DDPSettings:
    """
    Solver settings.
    """
    max_iters: int = DEFAULT_OPT_MAX_ITERS
    tol: float = DEFAULT_OPT_TOL
    reg_init: float = DDP_REG_INIT
    reg_min: float = DDP_REG_MIN
    reg_max: float = DDP_REG_MAX
    reg_factor: float = DDP_REG_FACTOR
    line_search_steps: int = DDP_LINE_SEARCH_STEPS

    def __post_init__(self) -> None:
        assert self.max_iters >= 0, 'Iteration cap should be non-negative'
        assert self.tol >= 0, 'Tolerance should be non-negative'
        assert self.reg_factor > 1, 'Regularization factor should exceed one'


@dataclass(frozen=True, eq=False)
class DDPResult:
    """
    Outcome of a solve: last accepted iterate, its cost and the cost of every
    accepted iteration. ``diverged`` is set when the cost of the guess is not
    finite.
    """
    xs: List[FullState]
    us: Control
    cost: float
    iterations: int
    history: List[float] = field(default_factory=list)
    converged: bool = False
    diverged: bool = False


@dataclass(frozen=True, eq=False)
class _Policy:
    gains: List[DoubleMatrix]
    feedforward: List[DoubleMatrix]
    # Expected cost change is ``alpha * dv[0] + alpha ** 2 * dv[1]``
    dv: Tuple[float, float]


def rollout(
    model: DDPModel, x0: FullState, us: Control
) -> List[FullState]:
    """
    Rolls controls through the model dynamics.
    """
    xs = [x0]
    for u in us:
        xs.append(model.step(xs[-1], u))
    return xs


def _backward_pass(
    jacobians: List[Tuple[DoubleMatrix, DoubleMatrix]],
    expansions: List[StageExpansion], reg: float
) -> _Policy:
    """
    Riccati recursion with Levenberg-Marquardt regularization of the control
    Hessian.

    :raises LinAlgError: Regularized control Hessian is not positive definite
    """
    # pylint: disable=too-many-locals
    terminal = expansions[-1]
    v_x = terminal.lx
    v_xx = terminal.lxx
    horizon = len(jacobians)
    gains: List[DoubleMatrix] = [np.empty(0)] * horizon
    feedforward: List[DoubleMatrix] = [np.empty(0)] * horizon
    dv_lin = 0.0
    dv_quad = 0.0

    for k in reversed(range(horizon)):
        a_mat, b_mat = jacobians[k]
        exp = expansions[k]
        q_x = exp.lx + a_mat.T @ v_x
        q_u = exp.lu + b_mat.T @ v_x
        q_xx = exp.lxx + a_mat.T @ v_xx @ a_mat
        q_uu = exp.luu + b_mat.T @ v_xx @ b_mat
        q_ux = exp.lux + b_mat.T @ v_xx @ a_mat

        factor = cho_factor(q_uu + reg * np.eye(q_uu.shape[0]))
        k_ff = -cho_solve(factor, q_u)
        k_fb = -cho_solve(factor, q_ux)
        if not (np.all(np.isfinite(k_ff)) and np.all(np.isfinite(k_fb))):
            raise LinAlgError('Non-finite feedback gains')

        dv_lin += float(k_ff @ q_u)
        dv_quad += 0.5 * float(k_ff @ q_uu @ k_ff)
        v_x = q_x + k_fb.T @ q_uu @ k_ff + k_fb.T @ q_u + q_ux.T @ k_ff
        v_xx = q_xx + k_fb.T @ q_uu @ k_fb + k_fb.T @ q_ux + q_ux.T @ k_fb
        v_xx = 0.5 * (v_xx + v_xx.T)
        gains[k] = k_fb
        feedforward[k] = k_ff

    return _Policy(gains, feedforward, (dv_lin, dv_quad))


def _forward_pass(
    model: DDPModel, xs: List[FullState], us: Control, policy: _Policy,
    alpha: float
) -> Tuple[List[FullState], Control]:
    shape = us.shape[1:]
    new_xs = [xs[0]]
    new_us = np.empty_like(us)
    for k in range(len(us)):
        delta = state_difference(new_xs[-1], xs[k])
        u_flat = (
            us[k].ravel() + alpha * policy.feedforward[k]
            + policy.gains[k] @ delta
        )
        new_us[k] = u_flat.reshape(shape)
        new_xs.append(model.step(new_xs[-1], new_us[k]))
    return new_xs, new_us


def track_reference(
    model: DDPModel, xs: List[FullState], us: Control,
    state_weights: DoubleMatrix, control_weights: DoubleMatrix
) -> Tuple[List[FullState], Control]:
    """
    Turns a possibly dynamically inconsistent guess into a consistent one:
    an LQR tracking policy is computed around the guess and the guess is
    followed in closed loop from its first state.

    :param model: Dynamics
    :param xs: Guess states
    :param us: Guess controls, shape ``(T, n, 4)``
    :param state_weights: Diagonal state tracking weights (tangent space)
    :param control_weights: Diagonal control tracking weights
    :return: Dynamically consistent states and controls
    """
    q_mat = np.diag(state_weights)
    r_mat = np.diag(control_weights)
    dim_x = q_mat.shape[0]
    dim_u = r_mat.shape[0]
    expansions = [
        StageExpansion(np.zeros(dim_x), np.zeros(dim_u), q_mat, r_mat,
                       np.zeros((dim_u, dim_x)))
        for _ in range(len(us))
    ]
    expansions.append(StageExpansion(
        np.zeros(dim_x), np.zeros(0), q_mat, np.zeros((0, 0)),
        np.zeros((0, dim_x))
    ))
    jacobians = [model.jacobians(x, u) for x, u in zip(xs[:-1], us)]
    policy = _backward_pass(jacobians, expansions, 0.0)
    return _forward_pass(model, xs, us, policy, 0.0)


def solve(  # pylint: disable=too-many-locals,too-many-branches
    model: DDPModel, xs: List[FullState], us: Control,
    settings: Optional[DDPSettings] = None,
    callback: Optional[IterationCallback] = None
) -> DDPResult:
    """
    Minimizes the model cost starting from a dynamically consistent guess.
    Only iterations lowering the cost are accepted. Stops when the relative
    cost decrease falls below the tolerance, when no step along the line
    search decreases the cost at maximal regularization, or at the iteration
    cap.

    :param model: Dynamics and cost
    :param xs: Guess states, consistent with ``us``
    :param us: Guess controls, shape ``(T, n, 4)``
    :param settings: Solver settings
    :param callback: Called after every accepted iteration
    :return: Result
    """
    settings = settings or DDPSettings()
    cost = model.cost(xs, us)
    history = [cost]
    if not math.isfinite(cost):
        _LOGGER.warning('Initial cost is not finite')
        return DDPResult(xs, us, cost, 0, history, diverged=True)

    reg = settings.reg_init
    alphas = [2.0 ** -j for j in range(settings.line_search_steps)]
    iteration = 0
    converged = False
    while iteration < settings.max_iters:
        jacobians = [model.jacobians(x, u) for x, u in zip(xs[:-1], us)]
        expansions = model.expansion(xs, us)
        try:
            policy = _backward_pass(jacobians, expansions, reg)
        except LinAlgError:
            reg *= settings.reg_factor
            _LOGGER.debug('Backward pass failed, regularization %s', reg)
            if reg > settings.reg_max:
                _LOGGER.warning('Regularization exceeded %s, stopping',
                                settings.reg_max)
                break
            continue

        accepted = False
        for alpha in alphas:
            new_xs, new_us = _forward_pass(model, xs, us, policy, alpha)
            new_cost = model.cost(new_xs, new_us)
            if math.isfinite(new_cost) and new_cost < cost:
                accepted = True
                break

        if not accepted:
            reg *= settings.reg_factor
            if reg > settings.reg_max:
                _LOGGER.debug('No descent at maximal regularization')
                converged = True
                break
            continue

        iteration += 1
        decrease = cost - new_cost
        xs, us, cost = new_xs, new_us, new_cost
        history.append(cost)
        reg = max(settings.reg_min, reg / settings.reg_factor)
        _LOGGER.debug(
            'Iteration %s: cost %s, step %s, expected %s, regularization %s',
            iteration, cost, alpha,
            alpha * policy.dv[0] + alpha ** 2 * policy.dv[1], reg
        )
        if callback is not None:
            callback(iteration, xs, us, cost)
        if decrease <= settings.tol * max(abs(cost), 1e-12):
            converged = True
            break

    return DDPResult(xs, us, cost, iteration, history, converged)
