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

'''
Tests for the geometric state, witness formations and reference conversion.
'''
from __future__ import annotations
from itertools import permutations
import numpy as np
import pytest
from cable_payload_planner.const import DEFAULT_TILT_MIN
from cable_payload_planner.exceptions import FormationError
from cable_payload_planner.geom_planner import (
    GeomState, GeomPath, azel_to_unit, unit_to_azel, wrap_angle,
    formation_force, edge_cost, optimal_assignment, preprocess_witnesses,
    sample_state, sample_goal, sample_uniform, interpolate_path,
    path_to_reference, GAMMA_SAMPLE_MAX,
)
from cable_payload_planner.model import SystemParams, uav_positions
from cable_payload_planner.world import Environment, is_state_valid
from conftest import evenly_spaced


def test_azel_round_trip(rng: np.random.Generator) -> None:
    '''
    Tests cable angles are recovered from unit vectors.
    '''
    alpha = rng.uniform(0.0, 2 * np.pi, 50)
    gamma = rng.uniform(0.05, 1.5, 50)
    q = azel_to_unit(alpha, gamma)
    assert np.allclose(np.linalg.norm(q, axis=1), 1.0)
    assert np.all(q[:, 2] < 0)
    res_alpha, res_gamma = unit_to_azel(q)
    assert np.allclose(res_gamma, gamma)
    assert np.allclose(np.abs(wrap_angle(res_alpha - alpha)), 0.0,
                       atol=1e-9)


def test_azel_vertical() -> None:
    '''
    Tests a vertical cable has zero azimuth and puts the multirotor above
    the payload.
    '''
    q = azel_to_unit(0.3, np.pi / 2)
    assert np.allclose(q, [0.0, 0.0, -1.0])
    alpha, gamma = unit_to_azel(np.array([0.0, 0.0, -1.0]))
    assert float(alpha) == 0.0
    assert float(gamma) == pytest.approx(np.pi / 2)


def test_geom_state_wraps_azimuth() -> None:
    '''
    Tests azimuths are kept within a full turn.
    '''
    x = GeomState(p0=np.zeros(3), alpha=np.array([-0.5, 7.0]),
                  gamma=np.array([1.0, 1.0]))
    assert np.all((x.alpha >= 0) & (x.alpha < 2 * np.pi))
    assert x.alpha[0] == pytest.approx(2 * np.pi - 0.5)


def test_interpolate_shortest_arc() -> None:
    '''
    Tests azimuths are interpolated across the wrap-around.
    '''
    a = GeomState(p0=np.zeros(3), alpha=np.array([6.2, 0.0]),
                  gamma=np.array([1.0, 1.0]))
    b = GeomState(p0=np.ones(3), alpha=np.array([0.1, 0.0]),
                  gamma=np.array([0.5, 1.0]))
    mid = a.interpolate(b, 0.5)
    gap = wrap_angle(0.1 - 6.2)
    assert float(wrap_angle(mid.alpha[0] - 6.2)) == pytest.approx(gap / 2)
    assert np.allclose(mid.p0, 0.5)
    assert mid.gamma[0] == pytest.approx(0.75)
    assert a.interpolate(b, 1.0) is b


def test_formation_force() -> None:
    '''
    Tests the normalized force of vertical and tilted formations.
    '''
    vertical = np.tile([0.0, 0.0, -1.0], (3, 1))
    assert formation_force(vertical) == pytest.approx(1.0)
    tilted = azel_to_unit(np.array([0.0, np.pi]), np.array([np.pi / 6] * 2))
    assert formation_force(tilted) == pytest.approx(2.0)
    with pytest.raises(FormationError):
        formation_force(azel_to_unit(np.array([0.0, 1.0]),
                                     np.array([0.05, 1.0])))


def test_edge_cost(params2: SystemParams) -> None:
    '''
    Tests a pure translation with vertical-ish cables.
    '''
    a = evenly_spaced(np.zeros(3), 2, gamma=np.pi / 2)
    b = a.with_p0(np.array([1.0, 0.0, 0.0]))
    # Payload and both multirotors move by 1 m
    assert edge_cost(a, b, params2, beta=0.5) == pytest.approx(
        0.5 * 1.0 + 0.5 * 2.0
    )
    assert edge_cost(a, a, params2) == 0.0


def test_optimal_assignment_small() -> None:
    '''
    Tests an identity-favoring matrix and ties.
    '''
    assert optimal_assignment([[1, 2], [3, 1]]).tolist() == [0, 1]
    perm = optimal_assignment(np.full((4, 4), 2.5))
    assert sorted(perm.tolist()) == [0, 1, 2, 3]


def test_formation_force_minimum(rng: np.random.Generator) -> None:
    '''
    Tests no valid formation needs less force than hanging straight down.
    '''
    low = np.arcsin(DEFAULT_TILT_MIN)
    forces = np.array([
        formation_force(azel_to_unit(rng.uniform(0.0, 2 * np.pi, 3),
                                     rng.uniform(low, np.pi / 2, 3)))
        for _ in range(100000)
    ])
    vertical = formation_force(np.tile([0.0, 0.0, -1.0], (3, 1)))
    assert vertical == 1.0
    assert np.all(forces > vertical)


def test_edge_cost_symmetry(
    params3: SystemParams, rng: np.random.Generator
) -> None:
    '''
    Tests edge costs are symmetric and positive between distinct states.
    '''
    def state() -> GeomState:
        return GeomState(p0=rng.uniform(-1.0, 1.0, 3),
                         alpha=rng.uniform(0.0, 2 * np.pi, 3),
                         gamma=rng.uniform(0.2, 1.4, 3))

    for _ in range(1000):
        a, b = state(), state()
        cost = edge_cost(a, b, params3)
        assert cost > 0.0
        assert edge_cost(b, a, params3) == pytest.approx(cost, rel=1e-12)
    # Formation change alone
    a = evenly_spaced(np.zeros(3), 3)
    b = GeomState(p0=a.p0, alpha=a.alpha + 0.1, gamma=a.gamma)
    assert edge_cost(a, b, params3) > 0.0


@pytest.mark.parametrize('size', [2, 3, 4, 5, 6])
def test_optimal_assignment_brute_force(
    size: int, rng: np.random.Generator
) -> None:
    '''
    Tests the assignment against exhaustive search over all permutations on
    100 random integer matrices.
    '''
    perms = np.array(list(permutations(range(size))))
    rows = np.arange(size)
    for _ in range(100):
        cost = rng.integers(0, 50, (size, size))
        perm = optimal_assignment(cost)
        best = int(np.min(np.sum(cost[rows, perms], axis=1)))
        assert sorted(perm.tolist()) == list(range(size))
        assert int(np.sum(cost[rows, perm])) == best


def test_preprocess_witnesses(
    params3: SystemParams, empty_env: Environment, rng: np.random.Generator
) -> None:
    '''
    Tests witnesses share the start payload position and are valid.
    '''
    start = evenly_spaced(np.array([0.0, 0.0, 1.0]), 3)
    witnesses = preprocess_witnesses(5, start, empty_env, params3, rng,
                                     attempts=500)
    assert 1 <= len(witnesses) <= 5
    assert list(witnesses)[0] is start
    for x in witnesses:
        assert np.array_equal(x.p0, start.p0)
        assert is_state_valid(x, empty_env, params3)


def test_preprocess_witnesses_budget(
    params2: SystemParams, empty_env: Environment, rng: np.random.Generator
) -> None:
    '''
    Tests an exhausted attempt budget returns the witnesses found so far.
    '''
    start = evenly_spaced(np.array([0.0, 0.0, 1.0]), 2)
    witnesses = preprocess_witnesses(10, start, empty_env, params2, rng,
                                     attempts=0)
    assert len(witnesses) == 1


def test_samplers(
    params2: SystemParams, empty_env: Environment, rng: np.random.Generator
) -> None:
    '''
    Tests samplers keep elevations below vertical and respect the goal
    position.
    '''
    start = evenly_spaced(np.array([0.0, 0.0, 1.0]), 2)
    witnesses = preprocess_witnesses(3, start, empty_env, params2, rng,
                                     attempts=300)
    goal = np.array([0.5, 0.0, 1.0])
    for _ in range(200):
        x = sample_state(witnesses, 0.5, empty_env, rng)
        assert empty_env.contains(x.p0)
        assert np.all(x.gamma <= GAMMA_SAMPLE_MAX)
        assert np.all(x.gamma >= 0)
        assert np.array_equal(sample_goal(witnesses, 0.5, goal, rng).p0, goal)
        y = sample_uniform(2, empty_env, rng)
        assert np.all(y.gamma < np.pi / 2)
    # No noise reproduces a witness formation
    x = sample_state(witnesses, 0.0, empty_env, rng)
    assert any(np.allclose(x.alpha, w.alpha) for w in witnesses)
    fixed = sample_uniform(2, empty_env, rng, p0=goal)
    assert np.array_equal(fixed.p0, goal)


def _straight_path(params: SystemParams) -> GeomPath:
    a = evenly_spaced(np.array([0.0, 0.0, 1.0]), params.n)
    return GeomPath((a, a.with_p0(np.array([0.5, 0.0, 1.0])),
                     a.with_p0(np.array([0.5, 0.5, 1.0]))), 1.0)


def test_interpolate_path(params2: SystemParams) -> None:
    '''
    Tests resampling at constant arc length keeps both ends.
    '''
    path = _straight_path(params2)
    samples = interpolate_path(path, 0.1, params2.lengths)
    assert len(samples) == 11
    assert np.allclose(samples[0].p0, path.states[0].p0)
    assert np.allclose(samples[-1].p0, path.states[-1].p0)
    steps = [
        a.distance(b, params2.lengths) for a, b in zip(samples[:-1],
                                                         samples[1:])
    ]
    assert np.allclose(steps, 0.1)


def test_interpolate_path_single() -> None:
    '''
    Tests a single-state path is returned as is.
    '''
    a = evenly_spaced(np.zeros(3), 2)
    assert interpolate_path(GeomPath((a,), 0.0), 0.1, np.full(2, 0.5)) == [a]


def test_path_to_reference(params2: SystemParams) -> None:
    '''
    Tests time parametrization at constant speed.
    '''
    ref = path_to_reference(_straight_path(params2), 0.01, 0.5, params2)
    # 1 m long path sampled every 5 mm
    assert len(ref) == 201
    assert ref.duration == pytest.approx(2.0)
    assert ref.n == 2
    assert np.allclose(ref.v0[1], [0.5, 0.0, 0.0])
    assert np.allclose(ref.v0[-1], [0.0, 0.5, 0.0])
    assert np.allclose(np.linalg.norm(ref.q, axis=2), 1.0)
    states = ref.full_states()
    assert np.allclose(states[0].w, 0.0)
    assert np.allclose(states[0].quat[:, 3], 1.0)
    assert np.allclose(uav_positions(states[-1], params2)[:, 1], 0.5)
