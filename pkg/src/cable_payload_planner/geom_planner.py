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
Reduced geometric state (payload position plus cable azimuth/elevation),
witness formations, samplers and conversion of geometric paths into
time-parametrized references.
"""
from __future__ import annotations
from typing import Tuple, List, Iterator, Optional
from dataclasses import dataclass
import logging
import math
import numpy as np
import numpy.typing as npt
from scipy.optimize import linear_sum_assignment
from .const import (
    DEFAULT_TILT_MIN, DEFAULT_EDGE_COST_BETA, DEFAULT_PLANNER_RESOLUTION,
    DEFAULT_PLANNER_ATTEMPTS_PER_WITNESS,
)
from .exceptions import FormationError
from .model import (
    SystemParams, FullState, uav_positions, full_state_from_geometry,
)
from .world import Environment, is_state_valid, is_motion_valid

DoubleMatrix = npt.NDArray[np.float64]

_LOGGER = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
# Largest elevation drawn by the samplers, vertical cables are never sampled
GAMMA_SAMPLE_MAX = float(np.nextafter(math.pi / 2, 0.0))
# Below this horizontal component a cable is taken as vertical
_POLE_EPS = 1e-12


def wrap_angle(angle: npt.ArrayLike) -> DoubleMatrix:
    """
    Wraps angles to ``[-pi, pi)``.
    """
    return np.asarray(
        np.mod(np.asarray(angle, dtype=float) + math.pi, TWO_PI) - math.pi
    )


def _azimuth_range(alpha: DoubleMatrix) -> DoubleMatrix:
    """
    Maps azimuths to ``[0, 2 pi)``.
    """
    res = np.mod(alpha, TWO_PI)
    return np.where(res >= TWO_PI, 0.0, res)


def azel_to_unit(alpha: npt.ArrayLike, gamma: npt.ArrayLike) -> DoubleMatrix:
    """
    Cable unit vector from azimuth and elevation. Elevation ``pi / 2`` gives
    a vertical cable, the multirotor straight above the payload.

    :param alpha: Azimuth(s), rad
    :param gamma: Elevation(s), rad
    :return: Unit vector(s), shape ``(..., 3)``
    """
    alpha = np.asarray(alpha, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    cos_g = np.cos(gamma)
    return -np.stack(
        [np.cos(alpha) * cos_g, np.sin(alpha) * cos_g, np.sin(gamma)],
        axis=-1
    )


def unit_to_azel(q: npt.ArrayLike) -> Tuple[DoubleMatrix, DoubleMatrix]:
    """
    Inverse of :func:`azel_to_unit` for lower-hemisphere vectors. Azimuth of
    a vertical cable is zero.

    :param q: Unit vector(s), shape ``(..., 3)``
    :return: Azimuth(s) in ``[0, 2 pi)`` and elevation(s), rad
    """
    q = np.asarray(q, dtype=float)
    horizontal = np.hypot(q[..., 0], q[..., 1])
    gamma = np.arctan2(-q[..., 2], horizontal)
    alpha = _azimuth_range(np.arctan2(-q[..., 1], -q[..., 0]))
    alpha = np.where(horizontal < _POLE_EPS, 0.0, alpha)
    return alpha, gamma


@dataclass(frozen=True, eq=False)
class GeomState:
    """
    Reduced planning state: payload position and per-cable azimuth and
    elevation.
    """
    p0: DoubleMatrix
    alpha: DoubleMatrix
    gamma: DoubleMatrix

    def __post_init__(self) -> None:
        object.__setattr__(self, 'p0', np.array(self.p0, dtype=float))
        object.__setattr__(
            self, 'alpha', _azimuth_range(np.array(self.alpha, dtype=float))
        )
        object.__setattr__(self, 'gamma', np.array(self.gamma, dtype=float))
        assert self.p0.shape == (3,), 'Payload position should be a 3-vector'
        assert self.alpha.shape == self.gamma.shape \
            and self.alpha.ndim == 1, 'One azimuth/elevation pair per cable'

    @property
    def n(self) -> int:
        """
        Number of cables.
        """
        return int(self.alpha.shape[0])

    @classmethod
    def from_directions(
        cls, p0: DoubleMatrix, qs: DoubleMatrix
    ) -> GeomState:
        """
        Builds geometric state from cable unit vectors.
        """
        alpha, gamma = unit_to_azel(qs)
        return cls(p0=p0, alpha=alpha, gamma=gamma)

    def cable_directions(self) -> DoubleMatrix:
        """
        Returns cable unit vectors, shape ``(n, 3)``.
        """
        return azel_to_unit(self.alpha, self.gamma)

    def with_p0(self, p0: DoubleMatrix) -> GeomState:
        """
        Same formation at another payload position.
        """
        return GeomState(p0=p0, alpha=self.alpha, gamma=self.gamma)

    def interpolate(self, other: GeomState, t: float) -> GeomState:
        """
        Straight interpolation in geometric coordinates, azimuths along the
        shortest arc.

        :param other: State at ``t = 1``
        :param t: Interpolation parameter
        :return: Interpolated state
        """
        if t >= 1.0:
            return other
        return GeomState(
            p0=self.p0 + t * (other.p0 - self.p0),
            alpha=self.alpha + t * wrap_angle(other.alpha - self.alpha),
            gamma=self.gamma + t * (other.gamma - self.gamma),
        )

    def distance(self, other: GeomState, lengths: DoubleMatrix) -> float:
        """
        Composite metric: payload displacement plus angular differences
        scaled by cable lengths.
        """
        return float(
            np.linalg.norm(other.p0 - self.p0)
            + np.sum(lengths * (
                np.abs(wrap_angle(other.alpha - self.alpha))
                + np.abs(other.gamma - self.gamma)
            ))
        )

    def max_displacement(
        self, other: GeomState, lengths: DoubleMatrix
    ) -> float:
        """
        Upper bound of the displacement of any body point along the straight
        motion to ``other``.
        """
        return float(
            np.linalg.norm(other.p0 - self.p0)
            + np.max(lengths * (
                np.abs(wrap_angle(other.alpha - self.alpha))
                + np.abs(other.gamma - self.gamma)
            ))
        )

    def to_full_state(self, v0: Optional[DoubleMatrix] = None) -> FullState:
        """
        Full state with cables at rest and level multirotors.
        """
        return full_state_from_geometry(
            self.p0, self.cable_directions(), v0=v0
        )


@dataclass(frozen=True, eq=False)
class WitnessSet:
    """
    Formations sharing the start payload position; each one reachable from
    an earlier member by a valid straight motion.
    """
    formations: Tuple[GeomState, ...]

    def __post_init__(self) -> None:
        assert len(self.formations) > 0, 'Witness set should not be empty'

    def __len__(self) -> int:
        return len(self.formations)

    def __iter__(self) -> Iterator[GeomState]:
        return iter(self.formations)

    def choose(self, rng: np.random.Generator) -> GeomState:
        """
        Picks a formation uniformly.
        """
        return self.formations[int(rng.integers(len(self.formations)))]


@dataclass(frozen=True, eq=False)
class GeomPath:
    """
    Geometric path from the start to a goal-satisfying state.
    """
    states: Tuple[GeomState, ...]
    cost: float

    def __post_init__(self) -> None:
        object.__setattr__(self, 'states', tuple(self.states))
        assert len(self.states) > 0, 'Path should not be empty'

    def __len__(self) -> int:
        return len(self.states)

    @property
    def p0(self) -> DoubleMatrix:
        """
        Payload positions along the path, shape ``(k, 3)``.
        """
        return np.stack([x.p0 for x in self.states])


@dataclass(frozen=True, eq=False)
class ReferenceTrajectory:
    """
    Time-parametrized geometric reference. Cable angular velocities and body
    rates are zero and attitudes are level.
    """
    dt: float
    p0: DoubleMatrix
    v0: DoubleMatrix
    q: DoubleMatrix

    def __post_init__(self) -> None:
        for name in ('p0', 'v0', 'q'):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=float)
            )
        assert self.dt > 0, 'Time step should be positive'
        count = self.p0.shape[0]
        assert self.p0.shape == (count, 3) and self.v0.shape == (count, 3), \
            'Payload positions and velocities should be (N, 3)'
        assert self.q.ndim == 3 and self.q.shape[0] == count \
            and self.q.shape[2] == 3, 'Cable directions should be (N, n, 3)'

    def __len__(self) -> int:
        return int(self.p0.shape[0])

    @property
    def n(self) -> int:
        """
        Number of cables.
        """
        return int(self.q.shape[1])

    @property
    def duration(self) -> float:
        """
        Duration, s.
        """
        return self.dt * (len(self) - 1)

    def full_state(self, k: int) -> FullState:
        """
        Full state of sample ``k``.
        """
        return full_state_from_geometry(self.p0[k], self.q[k], v0=self.v0[k])

    def full_states(self) -> List[FullState]:
        """
        All samples as full states.
        """
        return [self.full_state(k) for k in range(len(self))]


def formation_force(
    qs: DoubleMatrix, tilt_min: float = DEFAULT_TILT_MIN
) -> float:
    """
    Mean normalized force needed to carry the payload with the given cable
    directions, one for vertical cables.

    :param qs: Cable unit vectors, shape ``(n, 3)``
    :param tilt_min: Minimal vertical component of every cable
    :return: Normalized force
    :raises FormationError: A cable is too close to horizontal
    """
    vertical = -np.asarray(qs, dtype=float)[:, 2]
    if np.any(vertical < tilt_min):
        raise FormationError(
            f'Cable vertical components {vertical.tolist()} are below'
            f' {tilt_min}'
        )
    return float(np.mean(1.0 / vertical))


def edge_cost(
    a: GeomState, b: GeomState, params: SystemParams,
    beta: float = DEFAULT_EDGE_COST_BETA, tilt_min: float = DEFAULT_TILT_MIN
) -> float:
    """
    Energy-like cost of moving between two geometric states: mean formation
    force at the ends times weighted payload and multirotor displacements.

    :param a: Start state
    :param b: End state
    :param params: System parameters
    :param beta: Weight of the payload displacement
    :param tilt_min: Minimal vertical component of every cable
    :return: Cost
    """
    force = 0.5 * (
        formation_force(a.cable_directions(), tilt_min)
        + formation_force(b.cable_directions(), tilt_min)
    )
    uav_moves = np.linalg.norm(
        uav_positions(a, params) - uav_positions(b, params), axis=1
    )
    return force * (
        beta * float(np.linalg.norm(a.p0 - b.p0))
        + (1.0 - beta) * float(np.sum(uav_moves))
    )


def optimal_assignment(cost: npt.ArrayLike) -> npt.NDArray[np.int64]:
    """
    Permutation minimizing the total assignment cost.

    :param cost: Square cost matrix
    :return: Array ``perm`` with ``sum(cost[i, perm[i]])`` minimal
    """
    matrix = np.asarray(cost, dtype=float)
    assert matrix.ndim == 2 and matrix.shape[0] == matrix.shape[1], \
        'Cost matrix should be square'
    _, cols = linear_sum_assignment(matrix)
    return np.asarray(cols, dtype=np.int64)


def _uniform_angles(
    n: int, rng: np.random.Generator
) -> Tuple[DoubleMatrix, DoubleMatrix]:
    alpha = rng.uniform(0.0, TWO_PI, n)
    gamma = rng.uniform(0.0, math.pi / 2, n)
    return alpha, np.minimum(gamma, GAMMA_SAMPLE_MAX)


def _perturbed(
    witness: GeomState, sigma: float, rng: np.random.Generator
) -> Tuple[DoubleMatrix, DoubleMatrix]:
    n = witness.n
    alpha = witness.alpha + rng.normal(0.0, sigma, n) if sigma > 0 \
        else witness.alpha.copy()
    gamma = witness.gamma + rng.normal(0.0, sigma, n) if sigma > 0 \
        else witness.gamma.copy()
    return alpha, np.clip(gamma, 0.0, GAMMA_SAMPLE_MAX)


def preprocess_witnesses(  # pylint: disable=too-many-arguments,too-many-locals
    count: int, start: GeomState, env: Environment, params: SystemParams,
    rng: np.random.Generator, attempts: Optional[int] = None,
    resolution: float = DEFAULT_PLANNER_RESOLUTION,
    tilt_min: float = DEFAULT_TILT_MIN, margin: float = 0.0
) -> WitnessSet:
    """
    Builds the set of witness formations. Random formations are matched to a
    base witness by optimal assignment of cables to multirotors and accepted
    when valid and reachable from the base by a valid straight motion.

    :param count: Desired number of witnesses, start included
    :param start: Start state
    :param env: Environment
    :param params: System parameters
    :param rng: Random generator
    :param attempts: Attempt budget, ``1000 * count`` by default
    :param resolution: Motion check resolution, m
    :param tilt_min: Minimal vertical component of every cable
    :param margin: Required clearance, m
    :return: Witness set, possibly smaller than requested
    """
    assert count >= 1, 'At least one witness is required'
    budget = (
        DEFAULT_PLANNER_ATTEMPTS_PER_WITNESS * count
        if attempts is None else attempts
    )
    lengths = params.lengths
    witnesses = [start]
    tries = 0
    while len(witnesses) < count and tries < budget:
        tries += 1
        base = witnesses[int(rng.integers(len(witnesses)))]
        alpha, gamma = _uniform_angles(start.n, rng)

        base_pos = lengths[:, None] * base.cable_directions()
        rand_dirs = azel_to_unit(alpha, gamma)
        cost = np.linalg.norm(
            base_pos[:, None, :] - lengths[:, None, None] * rand_dirs[None],
            axis=2
        )
        perm = optimal_assignment(cost)
        candidate = GeomState(p0=start.p0, alpha=alpha[perm],
                              gamma=gamma[perm])

        if not is_state_valid(candidate, env, params, margin, tilt_min):
            continue
        if not is_motion_valid(base, candidate, env, params, resolution,
                               margin, tilt_min):
            continue
        witnesses.append(candidate)
        _LOGGER.debug('Accepted witness %s after %s attempts',
                      len(witnesses), tries)

    if len(witnesses) < count:
        _LOGGER.warning(
            'Attempt budget of %s exhausted, using %s witnesses out of %s',
            budget, len(witnesses), count
        )
    return WitnessSet(tuple(witnesses))


def sample_state(
    witnesses: WitnessSet, sigma: float, env: Environment,
    rng: np.random.Generator
) -> GeomState:
    """
    Samples a state around a uniformly chosen witness formation with the
    payload drawn uniformly from the workspace.

    :param witnesses: Witness set
    :param sigma: Standard deviation of the angle noise, rad
    :param env: Environment
    :param rng: Random generator
    :return: Sampled state
    """
    assert sigma >= 0, 'Noise should be non-negative'
    alpha, gamma = _perturbed(witnesses.choose(rng), sigma, rng)
    p0 = rng.uniform(env.workspace_lo, env.workspace_hi)
    return GeomState(p0=p0, alpha=alpha, gamma=gamma)


def sample_goal(
    witnesses: WitnessSet, sigma: float, p0_goal: DoubleMatrix,
    rng: np.random.Generator
) -> GeomState:
    """
    Samples a goal state: a perturbed witness formation at the desired
    payload position.

    :param witnesses: Witness set
    :param sigma: Standard deviation of the angle noise, rad
    :param p0_goal: Desired payload position
    :param rng: Random generator
    :return: Sampled state
    """
    assert sigma >= 0, 'Noise should be non-negative'
    alpha, gamma = _perturbed(witnesses.choose(rng), sigma, rng)
    return GeomState(p0=p0_goal, alpha=alpha, gamma=gamma)


def sample_uniform(
    n: int, env: Environment, rng: np.random.Generator,
    p0: Optional[DoubleMatrix] = None
) -> GeomState:
    """
    Samples angles uniformly and the payload uniformly from the workspace,
    unless ``p0`` is given.

    :param n: Number of cables
    :param env: Environment
    :param rng: Random generator
    :param p0: Fixed payload position
    :return: Sampled state
    """
    alpha, gamma = _uniform_angles(n, rng)
    if p0 is None:
        p0 = rng.uniform(env.workspace_lo, env.workspace_hi)
    return GeomState(p0=p0, alpha=alpha, gamma=gamma)


def interpolate_path(
    path: GeomPath, spacing: float, lengths: DoubleMatrix
) -> List[GeomState]:
    """
    Resamples a path at constant arc length in the composite metric, the
    last state always included.

    :param path: Geometric path
    :param spacing: Arc length between samples
    :param lengths: Cable lengths, m
    :return: States at arc lengths ``0, spacing, ...`` up to the path length
    """
    assert spacing > 0, 'Spacing should be positive'
    states = path.states
    if len(states) == 1:
        return [states[0]]
    seg = np.array([
        a.distance(b, lengths) for a, b in zip(states[:-1], states[1:])
    ])
    cumulative = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cumulative[-1])
    count = int(math.ceil(total / spacing - 1e-9)) + 1
    arc = np.minimum(np.arange(count) * spacing, total)

    res = []
    for s in arc:
        k = int(np.searchsorted(cumulative, s, side='right')) - 1
        k = min(max(k, 0), len(seg) - 1)
        local = (s - cumulative[k]) / seg[k] if seg[k] > 0 else 1.0
        res.append(states[k].interpolate(states[k + 1], float(local)))
    return res


def path_to_reference(
    path: GeomPath, dt: float, speed: float, params: SystemParams
) -> ReferenceTrajectory:
    """
    Time-parametrizes a geometric path at constant speed. Payload velocity
    comes from central differences, one-sided at the ends.

    :param path: Geometric path
    :param dt: Time step, s
    :param speed: Geometric speed, m/s
    :param params: System parameters
    :return: Reference trajectory
    """
    assert dt > 0 and speed > 0, 'Time step and speed should be positive'
    samples = interpolate_path(path, speed * dt, params.lengths)
    p0 = np.stack([x.p0 for x in samples])
    q = np.stack([x.cable_directions() for x in samples])
    if len(samples) > 1:
        v0 = np.gradient(p0, dt, axis=0)
    else:
        v0 = np.zeros_like(p0)
    _LOGGER.debug('Reference of %s samples, %s s', len(samples),
                  dt * (len(samples) - 1))
    return ReferenceTrajectory(dt=dt, p0=p0, v0=v0, q=q)
