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
Tests for obstacle geometry, signed distance and validity queries.
'''
from __future__ import annotations
from typing import Callable, List, Tuple
from dataclasses import replace
from functools import partial
import numpy as np
import pytest
from cable_payload_planner.geom_planner import GeomState
from cable_payload_planner.model import SystemParams
from cable_payload_planner.world import (
    Sphere, Box, Cylinder, Environment, closest_pair, signed_distance,
    closest_points_segments, segment_obstacle_distance, is_state_valid,
    is_motion_valid, signed_distance_gradient,
)
from conftest import evenly_spaced, hover_state, random_full_state


Surface = Callable[[np.ndarray], np.ndarray]


def _grid_min(
    func: Callable[[np.ndarray], np.ndarray], lo: np.ndarray,
    hi: np.ndarray, count: int = 24, rounds: int = 4
) -> np.ndarray:
    '''
    Brute-force minimum over boxes of parameters, one box per query: a
    regular grid, then grids shrunk around the best node.

    :param func: Values of parameters ``(P, m, d)``, shape ``(P, m)``
    :param lo: Lower parameter bounds ``(P, d)``
    :param hi: Upper parameter bounds ``(P, d)``
    :return: Minima, shape ``(P,)``
    '''
    bound_lo, bound_hi = lo.astype(float), hi.astype(float)
    lo, hi = bound_lo.copy(), bound_hi.copy()
    dim = lo.shape[1]
    axis = np.linspace(0.0, 1.0, count)
    frac = np.stack(
        np.meshgrid(*([axis] * dim), indexing='ij'), axis=-1
    ).reshape(-1, dim)
    rows = np.arange(lo.shape[0])
    best = np.full(lo.shape[0], np.inf)
    for _ in range(rounds + 1):
        params = lo[:, None] + frac[None] * (hi - lo)[:, None]
        values = func(params)
        idx = np.argmin(values, axis=1)
        best = np.minimum(best, values[rows, idx])
        center = params[rows, idx]
        cell = (hi - lo) / (count - 1)
        lo = np.maximum(center - 2 * cell, bound_lo)
        hi = np.minimum(center + 2 * cell, bound_hi)
    return best


def _box_face(box: Box, axis: int, sign: float) -> Tuple[
    Surface, np.ndarray, np.ndarray
]:
    others = [k for k in range(3) if k != axis]

    def face(uv: np.ndarray) -> np.ndarray:
        points = np.empty(uv.shape[:-1] + (3,))
        points[..., axis] = sign * box.half_extents[axis]
        points[..., others[0]] = uv[..., 0]
        points[..., others[1]] = uv[..., 1]
        return box.center + points

    return face, -box.half_extents[others], box.half_extents[others]


def _cylinder_cap(cylinder: Cylinder, sign: float) -> Tuple[
    Surface, np.ndarray, np.ndarray
]:
    def cap(uv: np.ndarray) -> np.ndarray:
        rho, phi = uv[..., 0], uv[..., 1]
        return cylinder.center + np.stack([
            rho * np.cos(phi), rho * np.sin(phi),
            np.full(rho.shape, sign * cylinder.half_height),
        ], axis=-1)

    return cap, np.zeros(2), np.array([cylinder.radius, 2 * np.pi])


def _patches(obstacle: object) -> List[Tuple[Surface, np.ndarray,
                                             np.ndarray]]:
    '''
    Obstacle surface as patches parametrized over rectangles.
    '''
    if isinstance(obstacle, Sphere):
        sphere = obstacle

        def shell(uv: np.ndarray) -> np.ndarray:
            u, v = uv[..., 0], uv[..., 1]
            return sphere.center + sphere.radius * np.stack([
                np.sin(u) * np.cos(v), np.sin(u) * np.sin(v), np.cos(u),
            ], axis=-1)

        return [(shell, np.zeros(2), np.array([np.pi, 2 * np.pi]))]
    if isinstance(obstacle, Box):
        return [_box_face(obstacle, axis, sign)
                for axis in range(3) for sign in (-1.0, 1.0)]
    assert isinstance(obstacle, Cylinder)
    cylinder = obstacle

    def side(uv: np.ndarray) -> np.ndarray:
        phi, z = uv[..., 0], uv[..., 1]
        return cylinder.center + np.stack([
            cylinder.radius * np.cos(phi), cylinder.radius * np.sin(phi), z,
        ], axis=-1)

    return [
        (side, np.array([0.0, -cylinder.half_height]),
         np.array([2 * np.pi, cylinder.half_height])),
        _cylinder_cap(cylinder, -1.0),
        _cylinder_cap(cylinder, 1.0),
    ]


def _patch_distance(
    surface: Surface, points: np.ndarray, params: np.ndarray
) -> np.ndarray:
    return np.linalg.norm(surface(params) - points[:, None], axis=-1)


def _surface_oracle(obstacle: object, points: np.ndarray) -> np.ndarray:
    '''
    Unsigned distance to the obstacle surface by grid search over every
    surface patch.
    '''
    best = np.full(len(points), np.inf)
    for surface, lo, hi in _patches(obstacle):
        best = np.minimum(best, _grid_min(
            partial(_patch_distance, surface, points),
            np.tile(lo, (len(points), 1)), np.tile(hi, (len(points), 1)),
        ))
    return best


def _inside(obstacle: object, points: np.ndarray) -> np.ndarray:
    if isinstance(obstacle, Sphere):
        return np.linalg.norm(points - obstacle.center, axis=1) \
            < obstacle.radius
    if isinstance(obstacle, Box):
        return np.all(
            np.abs(points - obstacle.center) < obstacle.half_extents, axis=1
        )
    assert isinstance(obstacle, Cylinder)
    rel = points - obstacle.center
    return (np.linalg.norm(rel[:, :2], axis=1) < obstacle.radius) \
        & (np.abs(rel[:, 2]) < obstacle.half_height)


OBSTACLES = [
    Sphere(np.array([0.1, 0.2, 0.3]), 0.4),
    Box(np.array([0.0, 0.1, -0.1]), np.array([0.3, 0.2, 0.4])),
    Cylinder(np.array([0.2, 0.0, 0.0]), 0.25, 0.35),
]


@pytest.mark.parametrize('obstacle', OBSTACLES)
def test_sdf_surface_oracle(
    obstacle: object, rng: np.random.Generator
) -> None:
    '''
    Tests obstacle signed distances against a brute-force search over the
    obstacle surface on 1000 points: magnitudes agree within 1 mm, signs
    follow inside/outside.
    '''
    points = rng.uniform(-1.0, 1.0, (1000, 3))
    dist, grad = obstacle.sdf(points)  # type: ignore[attr-defined]
    oracle = _surface_oracle(obstacle, points)
    assert np.max(np.abs(np.abs(dist) - oracle)) <= 1e-3
    assert np.array_equal(dist < 0, _inside(obstacle, points))
    assert np.allclose(np.linalg.norm(grad, axis=1), 1.0)


@pytest.mark.parametrize('obstacle', OBSTACLES)
def test_sphere_body_oracle(
    obstacle: object, params2: SystemParams, rng: np.random.Generator
) -> None:
    '''
    Tests the clearance of the payload sphere against the surface search
    on 1000 payload positions.
    '''
    env = Environment(
        obstacles=(obstacle,),  # type: ignore[arg-type]
        workspace_lo=np.full(3, -2.0), workspace_hi=np.full(3, 2.0),
    )
    centers = rng.uniform(-1.0, 1.0, (1000, 3))
    oracle = _surface_oracle(obstacle, centers)
    expected = np.where(_inside(obstacle, centers), -oracle, oracle) \
        - params2.r_payload
    actual = np.array([
        signed_distance(
            GeomState(p0=center, alpha=np.zeros(2),
                      gamma=np.full(2, np.pi / 4)),
            env, params2, payload_only=True,
        )
        for center in centers
    ])
    assert np.max(np.abs(actual - expected)) <= 1e-3


def test_box_sdf_exact() -> None:
    '''
    Tests box distances at known points.
    '''
    box = Box(np.zeros(3), np.array([1.0, 1.0, 1.0]))
    dist, grad = box.sdf(np.array([
        [2.0, 0.0, 0.0], [2.0, 2.0, 0.0], [0.5, 0.0, 0.0],
    ]))
    assert np.allclose(dist, [1.0, np.sqrt(2.0), -0.5])
    assert np.allclose(grad[0], [1.0, 0.0, 0.0])
    assert np.allclose(grad[2], [1.0, 0.0, 0.0])


def test_cylinder_sdf_exact() -> None:
    '''
    Tests cylinder distances at known points.
    '''
    cylinder = Cylinder(np.zeros(3), 1.0, 1.0)
    dist, _ = cylinder.sdf(np.array([
        [0.0, 3.0, 0.0], [0.0, 0.0, 3.0], [0.0, 0.0, 0.0], [4.0, 0.0, 5.0],
    ]))
    assert np.allclose(dist, [2.0, 2.0, -1.0, 5.0])


def test_closest_points_segments() -> None:
    '''
    Tests closest points of crossing, parallel and degenerate segments.
    '''
    s, t, p, q = closest_points_segments(
        np.array([-1.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]),
        np.array([0.0, -1.0, 1.0]), np.array([0.0, 1.0, 1.0]),
    )
    assert (s, t) == pytest.approx((0.5, 0.5))
    assert np.linalg.norm(p - q) == pytest.approx(1.0)

    _, _, p, q = closest_points_segments(
        np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]),
        np.array([2.0, 1.0, 0.0]), np.array([3.0, 1.0, 0.0]),
    )
    assert np.allclose(p, [1.0, 0.0, 0.0])
    assert np.allclose(q, [2.0, 1.0, 0.0])

    _, _, p, q = closest_points_segments(
        np.zeros(3), np.zeros(3), np.array([1.0, -1.0, 0.0]),
        np.array([1.0, 1.0, 0.0]),
    )
    assert np.allclose(q, [1.0, 0.0, 0.0])


def _segment_pair_distance(
    ends: np.ndarray, params: np.ndarray
) -> np.ndarray:
    p1, q1, p2, q2 = (ends[:, k, None] for k in range(4))
    first = p1 + params[..., :1] * (q1 - p1)
    second = p2 + params[..., 1:] * (q2 - p2)
    return np.linalg.norm(first - second, axis=-1)


def test_closest_points_segments_oracle(rng: np.random.Generator) -> None:
    '''
    Tests segment distances against a grid search over both segment
    parameters on 1000 random pairs.
    '''
    ends = rng.uniform(-1.0, 1.0, (1000, 4, 3))
    oracle = _grid_min(
        partial(_segment_pair_distance, ends), np.zeros((1000, 2)),
        np.ones((1000, 2)), count=41,
    )
    actual = np.array([
        np.linalg.norm(np.subtract(*closest_points_segments(*pair)[2:]))
        for pair in ends
    ])
    assert np.all(actual <= oracle + 1e-9)
    assert np.max(oracle - actual) <= 1e-3


@pytest.mark.parametrize('obstacle', [
    Box(np.array([0.0, 0.0, 0.0]), np.array([0.2, 0.2, 0.2])),
    Cylinder(np.array([0.0, 0.0, 0.0]), 0.2, 0.5),
    Sphere(np.array([0.0, 0.0, 0.0]), 0.2),
])
def test_segment_obstacle_distance(obstacle: object) -> None:
    '''
    Tests the segment distance finds the closest point along the segment.
    '''
    a = np.array([-1.0, 0.5, 0.0])
    b = np.array([1.0, 0.5, 0.0])
    dist, _, t = segment_obstacle_distance(
        a, b, obstacle, 0.05  # type: ignore[arg-type]
    )
    assert dist == pytest.approx(0.3, abs=1e-6)
    assert t == pytest.approx(0.5, abs=0.13)


def _segment_sdf(
    obstacle: object, a: np.ndarray, b: np.ndarray, params: np.ndarray
) -> np.ndarray:
    points = a[:, None] + params * (b - a)[:, None]
    dist, _ = obstacle.sdf(  # type: ignore[attr-defined]
        points.reshape(-1, 3)
    )
    return dist.reshape(points.shape[:-1])


@pytest.mark.parametrize('obstacle', OBSTACLES)
def test_segment_obstacle_oracle(
    obstacle: object, rng: np.random.Generator
) -> None:
    '''
    Tests segment clearances against a grid search along the segment on
    1000 random segments, crossing ones included.
    '''
    a = rng.uniform(-1.0, 1.0, (1000, 3))
    b = rng.uniform(-1.0, 1.0, (1000, 3))
    oracle = _grid_min(
        partial(_segment_sdf, obstacle, a, b), np.zeros((1000, 1)),
        np.ones((1000, 1)), count=101,
    )
    actual = np.array([
        segment_obstacle_distance(
            start, end, obstacle, 0.01  # type: ignore[arg-type]
        )[0]
        for start, end in zip(a, b)
    ])
    assert np.max(np.abs(actual - oracle)) <= 1e-3


def test_signed_distance_empty(
    params2: SystemParams, empty_env: Environment
) -> None:
    '''
    Tests the signed distance of an obstacle-free scene is the distance
    between the cables where the joint offset ends.
    '''
    start = evenly_spaced(np.array([0.0, 0.0, 1.0]), 2)
    # Cable points next to the joint are 2 c cos(gamma) apart
    expected = 2 * 0.1 * np.cos(np.pi / 4) - 2 * 0.005
    assert signed_distance(start, empty_env, params2) == pytest.approx(
        expected
    )
    contact = closest_pair(start, empty_env, params2)
    assert contact.kind == 'cable-cable'


def test_signed_distance_payload_only(params2: SystemParams) -> None:
    '''
    Tests payload-only queries ignore cables and multirotors.
    '''
    env = Environment(
        obstacles=(Sphere(np.array([0.0, 0.0, 2.0]), 0.1),),
        workspace_lo=np.array([-3.0, -3.0, 0.0]),
        workspace_hi=np.array([3.0, 3.0, 3.0]),
    )
    x = hover_state(np.array([0.0, 0.0, 1.0]), 2)
    assert signed_distance(x, env, params2, payload_only=True) \
        == pytest.approx(1.0 - 0.1 - 0.01)
    # Multirotors at 1.5 m are closer
    assert signed_distance(x, env, params2) < 0.5


def test_vertical_cables_collide(params2: SystemParams) -> None:
    '''
    Tests coincident multirotors are reported in collision.
    '''
    env = Environment((), np.array([-3.0, -3.0, 0.0]),
                      np.array([3.0, 3.0, 3.0]))
    x = hover_state(np.array([0.0, 0.0, 1.0]), 2)
    assert signed_distance(x, env, params2) == pytest.approx(-0.2)


def test_signed_distance_gradient(
    params2: SystemParams, rng: np.random.Generator
) -> None:
    '''
    Tests the gradient of the closest pair against finite differences of
    the payload position.
    '''
    env = Environment(
        obstacles=(Sphere(np.array([0.3, 0.3, 0.2]), 0.1),),
        workspace_lo=np.array([-3.0, -3.0, -3.0]),
        workspace_hi=np.array([3.0, 3.0, 3.0]),
    )
    x = random_full_state(rng, 2)
    dist, grad = signed_distance_gradient(x, env, params2)
    eps = 1e-6
    for k in range(3):
        p0 = x.p0.copy()
        p0[k] += eps
        shifted = type(x)(p0=p0, v0=x.v0, q=x.q, w=x.w, quat=x.quat,
                          omega=x.omega)
        contact = closest_pair(shifted, env, params2)
        if contact.kind != closest_pair(x, env, params2).kind:
            continue
        assert (contact.distance - dist) / eps == pytest.approx(
            grad[k], abs=1e-3
        )


def test_state_validity(params2: SystemParams, empty_env: Environment) -> None:
    '''
    Tests workspace, elevation and collision checks.
    '''
    p0 = np.array([0.0, 0.0, 1.0])
    assert is_state_valid(evenly_spaced(p0, 2), empty_env, params2)
    # Payload outside of the workspace
    assert not is_state_valid(evenly_spaced(np.array([0.0, 0.0, 3.0]), 2),
                              empty_env, params2)
    # Multirotor outside of the workspace
    assert not is_state_valid(evenly_spaced(np.array([1.3, 0.0, 1.0]), 2),
                              empty_env, params2)
    # Cable below the tilt bound
    assert not is_state_valid(evenly_spaced(p0, 2, gamma=0.05), empty_env,
                              params2)
    # Both multirotors straight above the payload
    assert not is_state_valid(evenly_spaced(p0, 2, gamma=np.pi / 2),
                              empty_env, params2)
    # Clearance margin
    clearance = signed_distance(evenly_spaced(p0, 2), empty_env, params2)
    assert not is_state_valid(evenly_spaced(p0, 2), empty_env, params2,
                              margin=clearance + 0.01)


def test_motion_validity(params2: SystemParams) -> None:
    '''
    Tests a straight motion through a wall is rejected while the end points
    are valid.
    '''
    env = Environment(
        obstacles=(Box(np.array([0.0, 0.0, 1.25]),
                       np.array([0.05, 1.5, 1.25])),),
        workspace_lo=np.array([-1.5, -1.5, 0.0]),
        workspace_hi=np.array([1.5, 1.5, 2.5]),
    )
    a = GeomState(p0=np.array([-0.8, 0.0, 1.0]), alpha=np.array([
        np.pi / 2, 3 * np.pi / 2
    ]), gamma=np.array([np.pi / 4, np.pi / 4]))
    b = a.with_p0(np.array([0.8, 0.0, 1.0]))
    assert is_state_valid(a, env, params2)
    assert is_state_valid(b, env, params2)
    assert not is_motion_valid(a, b, env, params2)
    assert is_motion_valid(a, a.with_p0(np.array([-0.6, 0.0, 1.0])), env,
                           params2)


def _random_geom_state(
    rng: np.random.Generator, env: Environment, n: int
) -> GeomState:
    return GeomState(
        p0=rng.uniform(env.workspace_lo, env.workspace_hi),
        alpha=rng.uniform(0.0, 2 * np.pi, n),
        gamma=rng.uniform(0.2, 1.4, n),
    )


def _cluttered_env() -> Environment:
    return Environment(
        obstacles=(
            Box(np.array([0.0, 0.0, 1.0]), np.array([0.3, 0.3, 1.0])),
            Cylinder(np.array([-0.9, 0.6, 1.0]), 0.15, 1.0),
            Sphere(np.array([0.8, -0.7, 1.2]), 0.3),
        ),
        workspace_lo=np.array([-1.5, -1.5, 0.0]),
        workspace_hi=np.array([1.5, 1.5, 2.5]),
    )


def test_signed_distance_translation(
    params3: SystemParams, rng: np.random.Generator
) -> None:
    '''
    Tests translating the whole scene, obstacles, workspace and state,
    keeps the signed distance and the validity.
    '''
    env = _cluttered_env()
    offset = np.array([0.7, -1.3, 0.4])
    moved = Environment(
        obstacles=tuple(replace(obstacle, center=obstacle.center + offset)
                        for obstacle in env.obstacles),
        workspace_lo=env.workspace_lo + offset,
        workspace_hi=env.workspace_hi + offset,
    )
    for _ in range(100):
        x = _random_geom_state(rng, env, 3)
        y = x.with_p0(x.p0 + offset)
        assert signed_distance(y, moved, params3) == pytest.approx(
            signed_distance(x, env, params3), abs=1e-9
        )
        assert closest_pair(y, moved, params3).kind \
            == closest_pair(x, env, params3).kind
        assert is_state_valid(y, moved, params3) \
            == is_state_valid(x, env, params3)


def test_motion_validity_zero_length(
    params2: SystemParams, rng: np.random.Generator
) -> None:
    '''
    Tests a motion from a state to itself is valid exactly when the state
    is.
    '''
    env = _cluttered_env()
    states = [_random_geom_state(rng, env, 2) for _ in range(200)]
    states.append(evenly_spaced(np.array([1.0, 1.0, 1.0]), 2))
    states.append(evenly_spaced(np.array([0.0, 0.0, 1.0]), 2))
    outcomes = set()
    for x in states:
        valid = is_state_valid(x, env, params2)
        assert is_motion_valid(x, x, env, params2) == valid
        outcomes.add(valid)
    assert outcomes == {True, False}


def test_uav_cable_contact(params2: SystemParams) -> None:
    '''
    Tests a multirotor sitting on the longer cable of another one is the
    closest pair.
    '''
    params = replace(params2, cable_length=np.array([0.5, 1.0]))
    env = Environment((), np.full(3, -3.0), np.full(3, 3.0))
    x = GeomState(p0=np.array([0.0, 0.0, 1.0]), alpha=np.zeros(2),
                  gamma=np.array([1.0, 1.1]))
    contact = closest_pair(x, env, params)
    assert contact.kind == 'uav-cable'
    assert contact.body_a[0] == 0
    assert contact.body_b is not None and contact.body_b[0] == 1
    assert contact.distance == pytest.approx(
        0.5 * np.sin(0.1) - params.r_robot[0] - params.r_cable
    )


def test_payload_uav_contact(params2: SystemParams) -> None:
    '''
    Tests a cable shorter than the payload and multirotor radii puts the
    multirotor into the payload.
    '''
    params = replace(params2, cable_length=np.array([0.15, 0.5]))
    env = Environment((), np.full(3, -3.0), np.full(3, 3.0))
    x = evenly_spaced(np.array([0.0, 0.0, 1.0]), 2)
    contact = closest_pair(x, env, params)
    assert contact.kind == 'payload-uav'
    assert contact.distance == pytest.approx(
        0.15 - params.r_payload - params.r_robot[0]
    )
