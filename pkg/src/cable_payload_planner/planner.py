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
Asymptotically optimal rewiring tree search over geometric states with the
witness formation sampler.
"""
from __future__ import annotations
from typing import List, Tuple, Optional
from dataclasses import dataclass
import logging
import math
import time
import numpy as np
import numpy.typing as npt
from .const import (
    DEFAULT_PLANNER_TIMEOUT, DEFAULT_PLANNER_MAX_SAMPLES,
    DEFAULT_PLANNER_WITNESSES, DEFAULT_PLANNER_ATTEMPTS_PER_WITNESS,
    DEFAULT_PLANNER_SIGMA, DEFAULT_PLANNER_GOAL_BIAS,
    DEFAULT_PLANNER_RESOLUTION, DEFAULT_PLANNER_GOAL_TOLERANCE,
    DEFAULT_PLANNER_MAX_STEP, DEFAULT_PLANNER_REWIRE_FACTOR,
    DEFAULT_PLANNER_SPEED, DEFAULT_TILT_MIN, DEFAULT_PLANNER_MARGIN,
    DEFAULT_PLANNER_SEED, DEFAULT_PLANNER_SAMPLER, DEFAULT_EDGE_COST_BETA,
    PLANNER_SAMPLERS,
)
from .exceptions import NoSolutionError, PlannerConfigError, FormationError
from .geom_planner import (
    GeomState, GeomPath, WitnessSet, edge_cost, preprocess_witnesses,
    sample_state, sample_goal, sample_uniform, wrap_angle,
)
from .model import SystemParams
from .world import Environment, is_state_valid, is_motion_valid

DoubleMatrix = npt.NDArray[np.float64]
# Wall time since start, iteration, best cost
TraceRow = Tuple[float, int, float]

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerSettings:  # pylint: disable=too-many-instance-attributes
    """
    Settings of the geometric planner.
    """
    timeout: float = DEFAULT_PLANNER_TIMEOUT
    max_samples: int = DEFAULT_PLANNER_MAX_SAMPLES
    witnesses: int = DEFAULT_PLANNER_WITNESSES
    attempts_per_witness: int = DEFAULT_PLANNER_ATTEMPTS_PER_WITNESS
    sigma: float = DEFAULT_PLANNER_SIGMA
    goal_bias: float = DEFAULT_PLANNER_GOAL_BIAS
    resolution: float = DEFAULT_PLANNER_RESOLUTION
    goal_tolerance: float = DEFAULT_PLANNER_GOAL_TOLERANCE
    max_step: float = DEFAULT_PLANNER_MAX_STEP
    rewire_factor: float = DEFAULT_PLANNER_REWIRE_FACTOR
    speed: float = DEFAULT_PLANNER_SPEED
    tilt_min: float = DEFAULT_TILT_MIN
    margin: float = DEFAULT_PLANNER_MARGIN
    seed: int = DEFAULT_PLANNER_SEED
    sampler: str = DEFAULT_PLANNER_SAMPLER
    edge_beta: float = DEFAULT_EDGE_COST_BETA
    payload_only: bool = False

    def __post_init__(self) -> None:
        assert self.timeout > 0, 'Timeout should be positive'
        assert self.max_samples > 0, 'Sample budget should be positive'
        assert self.witnesses >= 1, 'At least one witness is required'
        assert self.sigma >= 0, 'Noise should be non-negative'
        assert 0 <= self.goal_bias <= 1, 'Goal bias should be in [0, 1]'
        assert self.resolution > 0 and self.max_step > 0, \
            'Resolution and step should be positive'
        if self.sampler not in PLANNER_SAMPLERS:
            raise PlannerConfigError(
                f"Unknown sampler '{self.sampler}', expected one of"
                f' {PLANNER_SAMPLERS}'
            )


class _Tree:  # pylint: disable=too-many-instance-attributes
    """
    Search tree stored in preallocated arrays for vectorized distance
    queries.
    """
    def __init__(
        self, root: GeomState, capacity: int, lengths: DoubleMatrix
    ) -> None:
        n = root.n
        self.lengths = lengths
        self.p0 = np.empty((capacity, 3))
        self.alpha = np.empty((capacity, n))
        self.gamma = np.empty((capacity, n))
        self.states: List[GeomState] = []
        self.parents: List[int] = []
        self.costs: List[float] = []
        self.children: List[List[int]] = []
        self.add(root, -1, 0.0)

    def __len__(self) -> int:
        return len(self.states)

    def add(self, state: GeomState, parent: int, cost: float) -> int:
        """
        Appends node, returns its index.
        """
        idx = len(self.states)
        self.p0[idx] = state.p0
        self.alpha[idx] = state.alpha
        self.gamma[idx] = state.gamma
        self.states.append(state)
        self.parents.append(parent)
        self.costs.append(cost)
        self.children.append([])
        if parent >= 0:
            self.children[parent].append(idx)
        return idx

    def distances(self, state: GeomState) -> DoubleMatrix:
        """
        Composite distance from every node to ``state``.
        """
        size = len(self.states)
        return np.asarray(
            np.linalg.norm(self.p0[:size] - state.p0, axis=1)
            + np.sum(self.lengths * (
                np.abs(wrap_angle(self.alpha[:size] - state.alpha))
                + np.abs(self.gamma[:size] - state.gamma)
            ), axis=1)
        )

    def reparent(self, idx: int, parent: int, cost: float) -> None:
        """
        Moves node under a new parent and propagates the cost change to its
        descendants.
        """
        self.children[self.parents[idx]].remove(idx)
        self.children[parent].append(idx)
        self.parents[idx] = parent
        delta = cost - self.costs[idx]
        stack = [idx]
        while stack:
            node = stack.pop()
            self.costs[node] += delta
            stack.extend(self.children[node])

    def path_to(self, idx: int) -> List[GeomState]:
        """
        States from the root to node ``idx``.
        """
        res = []
        while idx >= 0:
            res.append(self.states[idx])
            idx = self.parents[idx]
        return res[::-1]


def _safe_edge_cost(
    a: GeomState, b: GeomState, params: SystemParams,
    settings: PlannerSettings
) -> float:
    try:
        return edge_cost(a, b, params, settings.edge_beta, settings.tilt_min)
    except FormationError:
        return math.inf


def plan_geometric(
    start: GeomState, p0_goal: DoubleMatrix, env: Environment,
    params: SystemParams, settings: Optional[PlannerSettings] = None
) -> Tuple[GeomPath, List[TraceRow]]:
    """
    Plans a geometric path from ``start`` to any state with the payload
    within the goal tolerance of ``p0_goal``, minimizing the edge cost.

    The search stops at the timeout or after ``max_samples`` iterations,
    whichever comes first; with the sample budget binding the result only
    depends on the seed.

    :param start: Start state
    :param p0_goal: Desired payload position
    :param env: Environment
    :param params: System parameters
    :param settings: Planner settings
    :return: Best path found and the anytime cost trace
    :raises PlannerConfigError: Start state is invalid
    :raises NoSolutionError: No goal-connected node was found
    """
    # pylint: disable=too-many-locals,too-many-branches,too-many-statements
    settings = settings or PlannerSettings()
    started = time.monotonic()
    rng = np.random.default_rng(settings.seed)
    p0_goal = np.asarray(p0_goal, dtype=float)
    payload_only = settings.payload_only

    def state_ok(x: GeomState) -> bool:
        return is_state_valid(x, env, params, settings.margin,
                              settings.tilt_min, payload_only)

    def motion_ok(a: GeomState, b: GeomState) -> bool:
        return is_motion_valid(a, b, env, params, settings.resolution,
                               settings.margin, settings.tilt_min,
                               payload_only)

    if not state_ok(start):
        raise PlannerConfigError('Start state is not valid')

    if np.linalg.norm(start.p0 - p0_goal) <= settings.goal_tolerance:
        _LOGGER.debug('Start already satisfies the goal')
        return (
            GeomPath((start,), 0.0),
            [(time.monotonic() - started, 0, 0.0)]
        )

    sigma = settings.sigma
    if payload_only:
        # Formation frozen to the start one
        witnesses = WitnessSet((start,))
        sigma = 0.0
    elif settings.sampler == 'witness':
        witnesses = preprocess_witnesses(
            settings.witnesses, start, env, params, rng,
            attempts=settings.attempts_per_witness * settings.witnesses,
            resolution=settings.resolution, tilt_min=settings.tilt_min,
            margin=settings.margin,
        )
    else:
        witnesses = WitnessSet((start,))

    def sample(goal: bool) -> GeomState:
        if payload_only or settings.sampler == 'witness':
            if goal:
                return sample_goal(witnesses, sigma, p0_goal, rng)
            return sample_state(witnesses, sigma, env, rng)
        return sample_uniform(start.n, env, rng,
                              p0=p0_goal if goal else None)

    tree = _Tree(start, settings.max_samples + 1, params.lengths)
    goal_nodes: List[int] = []
    best_cost = math.inf
    best_node = -1
    trace: List[TraceRow] = []
    dim = 3 + 2 * start.n

    iteration = 0
    while iteration < settings.max_samples:
        if time.monotonic() - started > settings.timeout:
            _LOGGER.debug('Timeout reached after %s iterations', iteration)
            break
        iteration += 1

        x_rand = sample(rng.uniform() < settings.goal_bias)
        dists = tree.distances(x_rand)
        nearest = int(np.argmin(dists))
        if dists[nearest] > settings.max_step:
            x_new = tree.states[nearest].interpolate(
                x_rand, settings.max_step / float(dists[nearest])
            )
        else:
            x_new = x_rand
        if not state_ok(x_new):
            continue

        size = len(tree)
        radius = settings.max_step
        if size > 1:
            radius = min(
                radius,
                settings.rewire_factor * settings.max_step
                * (math.log(size) / size) ** (1.0 / dim)
            )
        dists = tree.distances(x_new)
        near = set(np.flatnonzero(dists <= radius).tolist())
        near.add(int(np.argmin(dists)))

        candidates = sorted(
            (tree.costs[j] + _safe_edge_cost(tree.states[j], x_new, params,
                                             settings), j)
            for j in near
        )
        parent = -1
        new_cost = math.inf
        for cost, j in candidates:
            if not math.isfinite(cost):
                break
            if motion_ok(tree.states[j], x_new):
                parent, new_cost = j, cost
                break
        if parent < 0:
            continue
        idx = tree.add(x_new, parent, new_cost)

        for j in sorted(near - {parent}):
            rewired = new_cost + _safe_edge_cost(x_new, tree.states[j],
                                                 params, settings)
            if rewired < tree.costs[j] and motion_ok(x_new, tree.states[j]):
                tree.reparent(j, idx, rewired)

        if np.linalg.norm(x_new.p0 - p0_goal) <= settings.goal_tolerance:
            goal_nodes.append(idx)

        if goal_nodes:
            node = min(goal_nodes, key=lambda k: tree.costs[k])
            if tree.costs[node] < best_cost:
                best_cost, best_node = tree.costs[node], node
                elapsed = time.monotonic() - started
                trace.append((elapsed, iteration, best_cost))
                _LOGGER.debug(
                    'Iteration %s: best cost %s after %.3f s, %s nodes',
                    iteration, best_cost, elapsed, len(tree)
                )

    if best_node < 0:
        raise NoSolutionError(
            f'No goal-connected state after {iteration} iterations'
            f' ({len(tree)} nodes)'
        )
    path = GeomPath(tuple(tree.path_to(best_node)), tree.costs[best_node])
    _LOGGER.debug('Path of %s states, cost %s', len(path), path.cost)
    return path, trace
