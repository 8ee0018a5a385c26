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
Static environment, mapping of system states to collision geometry, signed
distance and state/motion validity queries.

Every point of the system geometry is of the form ``p0 - c q_i``: a
multirotor centre has ``c = l_i``, the payload ``c = 0`` and points on cable
``i`` lie in between. Contacts keep track of ``(i, c)`` for both bodies, so
the gradient of the signed distance with respect to the state follows
directly from the normal of the closest pair.
"""
from __future__ import annotations
from typing import Tuple, Optional, Union, List, Iterator, TYPE_CHECKING
from dataclasses import dataclass
import logging
import math
import numpy as np
import numpy.typing as npt
from .const import DEFAULT_PLANNER_RESOLUTION, DEFAULT_TILT_MIN
from .lie import tangent_projector
from .model import SystemParams, TangentLayout, uav_positions
from .numerics import golden_section
if TYPE_CHECKING:
    from .model import CableState, FullState
    from .geom_planner import GeomState

DoubleMatrix = npt.NDArray[np.float64]
# Cable index (-1 for the payload) and distance ``c`` along the cable
BodyPoint = Tuple[int, float]

_LOGGER = logging.getLogger(__name__)

# Evaluations of the golden-section refinement along a cable
_SEGMENT_REFINE_EVALS = 30


def _unit(vec: DoubleMatrix) -> DoubleMatrix:
    norm = float(np.linalg.norm(vec))
    if norm == 0:
        return np.zeros(3)
    return vec / norm


@dataclass(frozen=True, eq=False)
class Sphere:
    """
    Spherical obstacle.
    """
    center: DoubleMatrix
    radius: float
    shape = 'sphere'

    def __post_init__(self) -> None:
        object.__setattr__(self, 'center', np.asarray(self.center, float))
        assert self.radius > 0, 'Sphere radius should be positive'

    def sdf(self, points: DoubleMatrix) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        Signed distance and its gradient for points of shape ``(m, 3)``.
        """
        rel = points - self.center
        norm = np.linalg.norm(rel, axis=1)
        safe = np.where(norm > 0, norm, 1.0)
        return norm - self.radius, rel / safe[:, None]

    def aabb(self) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        Axis-aligned bounding box.
        """
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True, eq=False)
class Box:
    """
    Axis-aligned box obstacle.
    """
    center: DoubleMatrix
    half_extents: DoubleMatrix
    shape = 'box'

    def __post_init__(self) -> None:
        object.__setattr__(self, 'center', np.asarray(self.center, float))
        object.__setattr__(
            self, 'half_extents', np.asarray(self.half_extents, float)
        )
        assert np.all(self.half_extents > 0), 'Box extents should be positive'

    def sdf(self, points: DoubleMatrix) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        Signed distance and its gradient for points of shape ``(m, 3)``.
        """
        rel = points - self.center
        excess = np.abs(rel) - self.half_extents
        outside = np.linalg.norm(np.maximum(excess, 0.0), axis=1)
        inside = np.minimum(np.max(excess, axis=1), 0.0)

        grad = np.zeros_like(rel)
        ext = outside > 0
        if np.any(ext):
            clamped = np.clip(rel[ext], -self.half_extents, self.half_extents)
            grad[ext] = (rel[ext] - clamped) / outside[ext][:, None]
        interior = np.flatnonzero(~ext)
        if interior.size:
            axes = np.argmax(excess[interior], axis=1)
            signs = np.where(rel[interior, axes] < 0, -1.0, 1.0)
            grad[interior, axes] = signs
        return outside + inside, grad

    def aabb(self) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        Axis-aligned bounding box.
        """
        return self.center - self.half_extents, self.center + self.half_extents


@dataclass(frozen=True, eq=False)
class Cylinder:
    """
    Cylinder obstacle with vertical axis.
    """
    center: DoubleMatrix
    radius: float
    half_height: float
    shape = 'cylinder'

    def __post_init__(self) -> None:
        object.__setattr__(self, 'center', np.asarray(self.center, float))
        assert self.radius > 0 and self.half_height > 0, \
            'Cylinder extents should be positive'

    def sdf(self, points: DoubleMatrix) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        Signed distance and its gradient for points of shape ``(m, 3)``.
        """
        rel = points - self.center
        radial = np.linalg.norm(rel[:, :2], axis=1)
        d_r = radial - self.radius
        d_z = np.abs(rel[:, 2]) - self.half_height
        outside = np.hypot(np.maximum(d_r, 0.0), np.maximum(d_z, 0.0))
        inside = np.minimum(np.maximum(d_r, d_z), 0.0)

        radial_dir = np.zeros_like(rel)
        safe = np.where(radial > 0, radial, 1.0)
        radial_dir[:, :2] = rel[:, :2] / safe[:, None]
        radial_dir[radial == 0, 0] = 1.0
        axial_dir = np.zeros_like(rel)
        axial_dir[:, 2] = np.where(rel[:, 2] < 0, -1.0, 1.0)

        ext = outside > 0
        safe_out = np.where(ext, outside, 1.0)
        grad_ext = (
            np.maximum(d_r, 0.0)[:, None] * radial_dir
            + np.maximum(d_z, 0.0)[:, None] * axial_dir
        ) / safe_out[:, None]
        grad_int = np.where((d_r > d_z)[:, None], radial_dir, axial_dir)
        return outside + inside, np.where(ext[:, None], grad_ext, grad_int)

    def aabb(self) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        Axis-aligned bounding box.
        """
        ext = np.array([self.radius, self.radius, self.half_height])
        return self.center - ext, self.center + ext


Obstacle = Union[Sphere, Box, Cylinder]


@dataclass(frozen=True, eq=False)
class Environment:
    """
    Static obstacles and the workspace box.
    """
    obstacles: Tuple[Obstacle, ...]
    workspace_lo: DoubleMatrix
    workspace_hi: DoubleMatrix

    def __post_init__(self) -> None:
        object.__setattr__(self, 'obstacles', tuple(self.obstacles))
        object.__setattr__(
            self, 'workspace_lo', np.asarray(self.workspace_lo, float)
        )
        object.__setattr__(
            self, 'workspace_hi', np.asarray(self.workspace_hi, float)
        )
        assert np.all(self.workspace_hi > self.workspace_lo), \
            'Workspace should be non-degenerate'

    def contains(self, points: DoubleMatrix) -> bool:
        """
        Checks whether all points (shape ``(3,)`` or ``(m, 3)``) are inside
        the workspace.
        """
        points = np.atleast_2d(points)
        return bool(np.all(
            (points >= self.workspace_lo) & (points <= self.workspace_hi)
        ))


@dataclass(frozen=True, eq=False)
class BodySet:
    """
    Collision geometry of a state: multirotor spheres, payload sphere and
    cable capsules. Capsules span ``c`` from ``c_top`` (multirotor end,
    shortened by the multirotor radius) to ``c_bottom`` (payload end,
    shortened by the payload radius).
    """
    p0: DoubleMatrix
    r_payload: float
    uav_centers: DoubleMatrix
    r_robot: DoubleMatrix
    directions: DoubleMatrix
    c_top: DoubleMatrix
    c_bottom: float
    r_cable: float
    cable_joint_offset: float

    @property
    def n_robots(self) -> int:
        """
        Number of multirotors in the set.
        """
        return int(self.uav_centers.shape[0])

    def point(self, body: BodyPoint) -> DoubleMatrix:
        """
        Position of a body point.
        """
        idx, c = body
        if idx < 0:
            return self.p0
        return self.p0 - c * self.directions[idx]

    def capsule(self, i: int) -> Tuple[DoubleMatrix, DoubleMatrix]:
        """
        End points of capsule ``i``, multirotor end first.
        """
        return (
            self.p0 - self.c_top[i] * self.directions[i],
            self.p0 - self.c_bottom * self.directions[i],
        )


@dataclass(frozen=True)
class Contact:
    """
    Closest pair of the scene. ``normal`` is the gradient of the distance
    with respect to the position of ``body_a``; ``body_b`` is ``None`` for
    obstacles.
    """
    distance: float
    normal: DoubleMatrix
    body_a: BodyPoint
    body_b: Optional[BodyPoint]
    kind: str


_NO_CONTACT = Contact(math.inf, np.zeros(3), (-1, 0.0), None, 'none')


def body_geometries(
    x: CableState, params: SystemParams, payload_only: bool = False
) -> BodySet:
    """
    Collision geometry of a full or geometric state.

    :param x: State
    :param params: System parameters
    :param payload_only: Only the payload sphere is included
    :return: Body set
    """
    directions = np.asarray(x.cable_directions(), dtype=float)
    if payload_only:
        empty = np.zeros((0, 3))
        return BodySet(
            p0=np.asarray(x.p0, float), r_payload=params.r_payload,
            uav_centers=empty, r_robot=np.zeros(0), directions=empty,
            c_top=np.zeros(0), c_bottom=params.r_payload,
            r_cable=params.r_cable,
            cable_joint_offset=params.cable_joint_offset,
        )
    r_robot = np.asarray(params.r_robot)
    return BodySet(
        p0=np.asarray(x.p0, float), r_payload=params.r_payload,
        uav_centers=uav_positions(x, params), r_robot=r_robot,
        directions=directions, c_top=params.lengths - r_robot,
        c_bottom=params.r_payload, r_cable=params.r_cable,
        cable_joint_offset=params.cable_joint_offset,
    )


def closest_point_segment(
    a: DoubleMatrix, b: DoubleMatrix, point: DoubleMatrix
) -> Tuple[float, DoubleMatrix]:
    """
    Closest point of segment ``ab`` to ``point``.

    :return: Segment parameter in ``[0, 1]`` and the closest point
    """
    edge = b - a
    length_sq = float(edge @ edge)
    if length_sq == 0:
        return 0.0, a.copy()
    t = min(max(float((point - a) @ edge) / length_sq, 0.0), 1.0)
    return t, a + t * edge


def closest_points_segments(
    p1: DoubleMatrix, q1: DoubleMatrix, p2: DoubleMatrix, q2: DoubleMatrix
) -> Tuple[float, float, DoubleMatrix, DoubleMatrix]:
    """
    Closest points of segments ``p1 q1`` and ``p2 q2`` by the clamped
    parametric method.

    :return: Parameters ``s``, ``t`` and the closest points
    """
    # pylint: disable=too-many-locals
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    f = float(d2 @ r)
    eps = 1e-15
    if a <= eps and e <= eps:
        return 0.0, 0.0, p1.copy(), p2.copy()
    if a <= eps:
        s = 0.0
        t = min(max(f / e, 0.0), 1.0)
    else:
        c = float(d1 @ r)
        if e <= eps:
            t = 0.0
            s = min(max(-c / a, 0.0), 1.0)
        else:
            b = float(d1 @ d2)
            denom = a * e - b * b
            s = (
                min(max((b * f - c * e) / denom, 0.0), 1.0)
                if denom > eps else 0.0
            )
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = min(max(-c / a, 0.0), 1.0)
            elif t > 1.0:
                t = 1.0
                s = min(max((b - c) / a, 0.0), 1.0)
    return s, t, p1 + s * d1, p2 + t * d2


def segment_obstacle_distance(
    a: DoubleMatrix, b: DoubleMatrix, obstacle: Obstacle, spacing: float
) -> Tuple[float, DoubleMatrix, float]:
    """
    Signed distance between segment ``ab`` and an obstacle. Spheres are
    handled exactly; boxes and cylinders are sampled at the given spacing and
    the best sample is refined by golden-section search, the signed distance
    of a convex obstacle being convex along the segment.

    :return: Distance, its gradient at the closest point and the segment
     parameter of the closest point
    """
    if isinstance(obstacle, Sphere):
        t, point = closest_point_segment(a, b, obstacle.center)
        dist, grad = obstacle.sdf(point[None])
        return float(dist[0]), grad[0], t

    length = float(np.linalg.norm(b - a))
    count = max(2, int(math.ceil(length / spacing)) + 1)
    ts = np.linspace(0.0, 1.0, count)
    dists, _ = obstacle.sdf(a + ts[:, None] * (b - a))
    best = int(np.argmin(dists))
    lower = ts[max(best - 1, 0)]
    upper = ts[min(best + 1, count - 1)]

    def along(t: float) -> float:
        return float(obstacle.sdf((a + t * (b - a))[None])[0][0])

    t_best, _ = golden_section(along, lower, upper, _SEGMENT_REFINE_EVALS)
    if dists[best] < along(t_best):
        t_best = float(ts[best])
    dist, grad = obstacle.sdf((a + t_best * (b - a))[None])
    return float(dist[0]), grad[0], t_best


def _aabb_gap(
    lo_a: DoubleMatrix, hi_a: DoubleMatrix,
    lo_b: DoubleMatrix, hi_b: DoubleMatrix
) -> float:
    """
    Lower bound of the distance between two boxes.
    """
    gap = np.maximum(0.0, np.maximum(lo_a - hi_b, lo_b - hi_a))
    return float(np.linalg.norm(gap))


def _obstacle_bounds(
    obstacles: Tuple[Obstacle, ...]
) -> Iterator[Tuple[int, Obstacle, DoubleMatrix, DoubleMatrix]]:
    for k, obstacle in enumerate(obstacles):
        lo, hi = obstacle.aabb()
        yield k, obstacle, lo, hi


def _scene_contacts(  # pylint: disable=too-many-locals,too-many-branches
    bodies: BodySet, env: Environment, best: Contact
) -> Contact:
    """
    Walks all pairs in a fixed order (multirotor pairs, cable pairs,
    multirotors against the cables of the others, payload against
    multirotors, then payload, multirotors and cables against obstacles)
    keeping the first minimum.
    """
    k = bodies.n_robots
    centers = bodies.uav_centers

    for i in range(k):
        for j in range(i + 1, k):
            rel = centers[i] - centers[j]
            dist = (
                float(np.linalg.norm(rel))
                - bodies.r_robot[i] - bodies.r_robot[j]
            )
            if dist < best.distance:
                best = Contact(
                    dist, _unit(rel), (i, float(bodies.c_top[i]
                                                + bodies.r_robot[i])),
                    (j, float(bodies.c_top[j] + bodies.r_robot[j])),
                    'uav-uav'
                )

    c_joint = max(bodies.c_bottom, bodies.cable_joint_offset)
    for i in range(k):
        if bodies.c_top[i] <= c_joint:
            continue
        a_i = bodies.point((i, float(bodies.c_top[i])))
        b_i = bodies.point((i, c_joint))
        for j in range(i + 1, k):
            if bodies.c_top[j] <= c_joint:
                continue
            a_j = bodies.point((j, float(bodies.c_top[j])))
            b_j = bodies.point((j, c_joint))
            s, t, p_i, p_j = closest_points_segments(a_i, b_i, a_j, b_j)
            dist = float(np.linalg.norm(p_i - p_j)) - 2 * bodies.r_cable
            if dist < best.distance:
                best = Contact(
                    dist, _unit(p_i - p_j),
                    (i, float(bodies.c_top[i]
                              + s * (c_joint - bodies.c_top[i]))),
                    (j, float(bodies.c_top[j]
                              + t * (c_joint - bodies.c_top[j]))),
                    'cable-cable'
                )

    for j in range(k):
        for i in range(k):
            if i == j:
                continue
            a_i, b_i = bodies.capsule(i)
            t, point = closest_point_segment(a_i, b_i, centers[j])
            rel = centers[j] - point
            dist = (
                float(np.linalg.norm(rel))
                - bodies.r_robot[j] - bodies.r_cable
            )
            if dist < best.distance:
                best = Contact(
                    dist, _unit(rel),
                    (j, float(bodies.c_top[j] + bodies.r_robot[j])),
                    (i, float(bodies.c_top[i]
                              + t * (bodies.c_bottom - bodies.c_top[i]))),
                    'uav-cable'
                )

    for j in range(k):
        rel = bodies.p0 - centers[j]
        dist = (
            float(np.linalg.norm(rel)) - bodies.r_payload - bodies.r_robot[j]
        )
        if dist < best.distance:
            best = Contact(
                dist, _unit(rel), (-1, 0.0),
                (j, float(bodies.c_top[j] + bodies.r_robot[j])),
                'payload-uav'
            )

    pad_payload = np.full(3, bodies.r_payload)
    for _, obstacle, lo, hi in _obstacle_bounds(env.obstacles):
        if _aabb_gap(bodies.p0 - pad_payload, bodies.p0 + pad_payload,
                     lo, hi) >= best.distance:
            continue
        dist, grad = obstacle.sdf(bodies.p0[None])
        value = float(dist[0]) - bodies.r_payload
        if value < best.distance:
            best = Contact(value, grad[0], (-1, 0.0), None, 'payload-obstacle')

    for i in range(k):
        pad = np.full(3, bodies.r_robot[i])
        for _, obstacle, lo, hi in _obstacle_bounds(env.obstacles):
            if _aabb_gap(centers[i] - pad, centers[i] + pad,
                         lo, hi) >= best.distance:
                continue
            dist, grad = obstacle.sdf(centers[i][None])
            value = float(dist[0]) - bodies.r_robot[i]
            if value < best.distance:
                best = Contact(
                    value, grad[0],
                    (i, float(bodies.c_top[i] + bodies.r_robot[i])), None,
                    'uav-obstacle'
                )

    pad_cable = np.full(3, bodies.r_cable)
    for i in range(k):
        a, b = bodies.capsule(i)
        lo_c = np.minimum(a, b) - pad_cable
        hi_c = np.maximum(a, b) + pad_cable
        for _, obstacle, lo, hi in _obstacle_bounds(env.obstacles):
            if _aabb_gap(lo_c, hi_c, lo, hi) >= best.distance:
                continue
            dist, grad, t = segment_obstacle_distance(
                a, b, obstacle, bodies.r_cable
            )
            value = dist - bodies.r_cable
            if value < best.distance:
                c = float(bodies.c_top[i]
                          + t * (bodies.c_bottom - bodies.c_top[i]))
                best = Contact(value, grad, (i, c), None, 'cable-obstacle')

    return best


def closest_pair(
    x: CableState, env: Environment, params: SystemParams,
    payload_only: bool = False
) -> Contact:
    """
    Closest pair among all checked body/body and body/obstacle pairs. Cable
    ``i`` is not checked against multirotor ``i`` nor against the payload.
    Ties are broken by the lowest pair index.

    :param x: Full or geometric state
    :param env: Environment
    :param params: System parameters
    :param payload_only: Only the payload sphere is considered
    :return: Contact, with infinite distance when nothing can collide
    """
    return _scene_contacts(
        body_geometries(x, params, payload_only), env, _NO_CONTACT
    )


def signed_distance(
    x: CableState, env: Environment, params: SystemParams,
    payload_only: bool = False
) -> float:
    """
    Minimum clearance of the scene, negative when penetrating.

    :param x: Full or geometric state
    :param env: Environment
    :param params: System parameters
    :param payload_only: Only the payload sphere is considered
    :return: Signed distance, m
    """
    return closest_pair(x, env, params, payload_only).distance


def contact_gradient(contact: Contact, x: FullState) -> DoubleMatrix:
    """
    Gradient of the contact distance in tangent coordinates of the full
    state.

    :param contact: Closest pair
    :param x: Full state the contact was computed for
    :return: Vector of ``6 + 12 n`` entries
    """
    layout = TangentLayout(x.n)
    grad = np.zeros(layout.dim)
    if not math.isfinite(contact.distance):
        return grad
    bodies: List[Tuple[BodyPoint, float]] = [(contact.body_a, 1.0)]
    if contact.body_b is not None:
        bodies.append((contact.body_b, -1.0))
    for (idx, c), sign in bodies:
        grad[layout.p0] += sign * contact.normal
        if idx >= 0:
            grad[layout.q(idx)] += (
                -sign * c * tangent_projector(x.q[idx]) @ contact.normal
            )
    return grad


def signed_distance_gradient(
    x: FullState, env: Environment, params: SystemParams
) -> Tuple[float, DoubleMatrix]:
    """
    Signed distance together with the gradient of its closest pair.

    :param x: Full state
    :param env: Environment
    :param params: System parameters
    :return: Signed distance and its gradient in tangent coordinates
    """
    contact = closest_pair(x, env, params)
    return contact.distance, contact_gradient(contact, x)


def is_state_valid(  # pylint: disable=too-many-arguments
    x: CableState, env: Environment, params: SystemParams,
    margin: float = 0.0, tilt_min: float = DEFAULT_TILT_MIN,
    payload_only: bool = False
) -> bool:
    """
    Checks that the state is collision-free with clearance above ``margin``,
    that payload and multirotors are inside the workspace and, for geometric
    states, that elevations are within bounds.

    :param x: Full or geometric state
    :param env: Environment
    :param params: System parameters
    :param margin: Required clearance, m
    :param tilt_min: Minimal vertical component of cable directions
    :param payload_only: Only the payload is checked
    :return: Validity
    """
    if not env.contains(x.p0):
        return False
    gamma: Optional[DoubleMatrix] = getattr(x, 'gamma', None)
    if gamma is not None:
        if np.any(gamma < 0) or np.any(gamma > np.pi / 2):
            return False
        if np.any(np.sin(gamma) < tilt_min):
            return False
    if not payload_only and not env.contains(uav_positions(x, params)):
        return False
    return signed_distance(x, env, params, payload_only) > margin


def is_motion_valid(  # pylint: disable=too-many-arguments
    x_a: GeomState, x_b: GeomState, env: Environment, params: SystemParams,
    resolution: float = DEFAULT_PLANNER_RESOLUTION, margin: float = 0.0,
    tilt_min: float = DEFAULT_TILT_MIN, payload_only: bool = False
) -> bool:
    """
    Checks the straight motion between two geometric states, sampled so that
    no body point moves more than ``resolution`` between samples.

    :param x_a: Start state
    :param x_b: End state
    :param env: Environment
    :param params: System parameters
    :param resolution: Maximal displacement between samples, m
    :param margin: Required clearance, m
    :param tilt_min: Minimal vertical component of cable directions
    :param payload_only: Only the payload is checked
    :return: Validity of every sample, both end points included
    """
    displacement = x_a.max_displacement(x_b, params.lengths)
    count = max(1, int(math.ceil(displacement / resolution)))
    for t in np.linspace(0.0, 1.0, count + 1):
        sample = x_a.interpolate(x_b, float(t))
        if not is_state_valid(sample, env, params, margin, tilt_min,
                              payload_only):
            return False
    return True
