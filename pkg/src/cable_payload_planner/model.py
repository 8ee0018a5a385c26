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
System model: parameters of the payload and the multirotors, the full state,
continuous dynamics, the discrete step with manifold retraction and its
analytic derivatives.

Tangent coordinates of the full state are laid out as ``(dp0, dv0)``, then per
cable ``(dq_i, dw_i)``, then per multirotor ``(dtheta_i, dOmega_i)``, i.e.
``6 + 12 n`` entries. Cable directions are retracted as
``normalize(q + dq)``, rotations in the body frame as ``R Exp(dtheta)``.
"""
from __future__ import annotations
from typing import Tuple, List, Optional, Union, Protocol
from dataclasses import dataclass, field
from functools import cached_property
import logging
import numpy as np
import numpy.typing as npt
from scipy.spatial.transform import Rotation
from .const import (
    GRAVITY, DEFAULT_UAV_MASS, DEFAULT_PAYLOAD_MASS, DEFAULT_CABLE_LENGTH,
    DEFAULT_INERTIA, DEFAULT_ARM_LENGTH, DEFAULT_K_TAU, DEFAULT_F_MIN,
    DEFAULT_F_MAX, DEFAULT_R_ROBOT, DEFAULT_R_PAYLOAD, DEFAULT_R_CABLE,
    DEFAULT_CABLE_JOINT_OFFSET,
)
from .exceptions import InfeasibleHoverError
from .lie import (
    hat, so3_exp, right_jacobian, quat_exp, quat_multiply, quat_to_matrix,
    rotate_unit, tangent_projector,
)

DoubleMatrix = npt.NDArray[np.float64]
# Motor forces, shape ``(n, 4)``
Control = DoubleMatrix
ScalarOrArray = Union[float, DoubleMatrix]

_LOGGER = logging.getLogger(__name__)

E3 = np.array([0.0, 0.0, 1.0])
_HAT_E3 = hat(E3)


class CableState(Protocol):  # pylint: disable=too-few-public-methods
    """
    Anything carrying a payload position and cable directions.
    """
    p0: DoubleMatrix

    def cable_directions(self) -> DoubleMatrix:
        """
        Returns cable unit vectors, shape ``(n, 3)``.
        """


def _per_uav(value: ScalarOrArray, n: int) -> DoubleMatrix:
    """
    Broadcasts scalar to a per-multirotor array.
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    return arr.copy()


@dataclass(frozen=True, eq=False)
class SystemParams:  # pylint: disable=too-many-instance-attributes
    """
    Physical parameters of the payload and ``n`` multirotors. Per-multirotor
    fields accept a scalar, which is broadcast to every multirotor.
    """
    n: int
    payload_mass: float = DEFAULT_PAYLOAD_MASS
    mass: ScalarOrArray = DEFAULT_UAV_MASS
    # Diagonal inertia, shape ``(3,)`` or ``(n, 3)``
    inertia: ScalarOrArray = field(
        default_factory=lambda: np.array(DEFAULT_INERTIA)
    )
    cable_length: ScalarOrArray = DEFAULT_CABLE_LENGTH
    arm: ScalarOrArray = DEFAULT_ARM_LENGTH
    k_tau: ScalarOrArray = DEFAULT_K_TAU
    f_min: ScalarOrArray = DEFAULT_F_MIN
    f_max: ScalarOrArray = DEFAULT_F_MAX
    r_robot: ScalarOrArray = DEFAULT_R_ROBOT
    r_payload: float = DEFAULT_R_PAYLOAD
    r_cable: float = DEFAULT_R_CABLE
    gravity: float = GRAVITY
    cable_joint_offset: float = DEFAULT_CABLE_JOINT_OFFSET

    def __post_init__(self) -> None:
        """
        Broadcasts per-multirotor fields and checks the invariants.
        """
        assert self.n >= 2, 'At least two multirotors are required'
        for name in ('mass', 'cable_length', 'arm', 'k_tau', 'f_min',
                     'f_max', 'r_robot'):
            value = _per_uav(getattr(self, name), self.n)
            assert value.shape == (self.n,), f'{name} should have n entries'
            object.__setattr__(self, name, value)

        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.ndim == 1:
            inertia = np.tile(inertia, (self.n, 1))
        assert inertia.shape == (self.n, 3), 'inertia should be (n, 3)'
        object.__setattr__(self, 'inertia', inertia)

        assert self.payload_mass >= 0, 'Payload mass should be non-negative'
        for name in ('mass', 'cable_length', 'arm', 'r_robot', 'inertia'):
            assert np.all(getattr(self, name) > 0), f'{name} should be > 0'
        assert self.r_payload > 0 and self.r_cable > 0, 'Radii should be > 0'
        assert np.all(self.f_min >= 0), 'f_min should be non-negative'
        assert np.all(self.f_max > self.f_min), 'f_max should exceed f_min'
        assert self.gravity > 0, 'gravity should be positive'

    @property
    def masses(self) -> DoubleMatrix:
        """
        Per-multirotor masses as array.
        """
        return np.asarray(self.mass)

    @property
    def lengths(self) -> DoubleMatrix:
        """
        Per-cable lengths as array.
        """
        return np.asarray(self.cable_length)

    @property
    def inertias(self) -> DoubleMatrix:
        """
        Per-multirotor diagonal inertia, shape ``(n, 3)``.
        """
        return np.asarray(self.inertia)

    @property
    def total_mass(self) -> float:
        """
        Mass of the payload plus all multirotors.
        """
        return float(self.payload_mass + np.sum(self.masses))

    @property
    def state_dim(self) -> int:
        """
        Dimension of the tangent space of the full state.
        """
        return 6 + 12 * self.n

    @property
    def control_dim(self) -> int:
        """
        Number of motor forces.
        """
        return 4 * self.n

    @property
    def accel_dim(self) -> int:
        """
        Size of the concatenated acceleration vector.
        """
        return 3 + 6 * self.n

    @cached_property
    def mixers(self) -> DoubleMatrix:
        """
        Actuation matrices mapping motor forces to collective thrust and body
        torques, shape ``(n, 4, 4)``. Cross configuration with arms at 45
        degrees.
        """
        res = np.empty((self.n, 4, 4))
        for i in range(self.n):
            lever = float(np.asarray(self.arm)[i]) / np.sqrt(2.0)
            k_tau = float(np.asarray(self.k_tau)[i])
            res[i] = np.array([
                [1.0, 1.0, 1.0, 1.0],
                [-lever, -lever, lever, lever],
                [-lever, lever, lever, -lever],
                [-k_tau, k_tau, -k_tau, k_tau],
            ])
        return res


class TangentLayout:
    """
    Index helper for the tangent coordinates and the acceleration vector.

    :param n: Number of multirotors
    """
    p0 = slice(0, 3)
    v0 = slice(3, 6)
    a0 = slice(0, 3)

    def __init__(self, n: int) -> None:
        self.n = n
        self.dim = 6 + 12 * n

    @staticmethod
    def q(i: int) -> slice:  # pylint: disable=invalid-name
        """
        Cable direction block of cable ``i``.
        """
        return slice(6 + 6 * i, 9 + 6 * i)

    @staticmethod
    def w(i: int) -> slice:  # pylint: disable=invalid-name
        """
        Cable angular velocity block of cable ``i``.
        """
        return slice(9 + 6 * i, 12 + 6 * i)

    def theta(self, i: int) -> slice:
        """
        Attitude block of multirotor ``i``.
        """
        base = 6 + 6 * self.n + 6 * i
        return slice(base, base + 3)

    def omega(self, i: int) -> slice:
        """
        Body rate block of multirotor ``i``.
        """
        base = 9 + 6 * self.n + 6 * i
        return slice(base, base + 3)

    @staticmethod
    def dw(i: int) -> slice:  # pylint: disable=invalid-name
        """
        Cable angular acceleration block in the acceleration vector.
        """
        return slice(3 + 3 * i, 6 + 3 * i)

    def domega(self, i: int) -> slice:
        """
        Body angular acceleration block in the acceleration vector.
        """
        return slice(3 + 3 * self.n + 3 * i, 6 + 3 * self.n + 3 * i)

    @staticmethod
    def u(i: int) -> slice:  # pylint: disable=invalid-name
        """
        Motor forces of multirotor ``i`` in the flat control vector.
        """
        return slice(4 * i, 4 * i + 4)


@dataclass(frozen=True, eq=False)
class FullState:
    """
    Full system state: payload position and velocity, cable unit vectors
    (pointing from multirotor toward payload) with their angular velocities,
    multirotor attitudes (scalar-last quaternions) and body rates.
    """
    p0: DoubleMatrix
    v0: DoubleMatrix
    q: DoubleMatrix
    w: DoubleMatrix
    quat: DoubleMatrix
    omega: DoubleMatrix

    def __post_init__(self) -> None:
        for name in ('p0', 'v0', 'q', 'w', 'quat', 'omega'):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=float)
            )
        n = self.q.shape[0]
        assert self.p0.shape == (3,) and self.v0.shape == (3,), \
            'Payload position and velocity should be 3-vectors'
        assert self.q.shape == (n, 3) and self.w.shape == (n, 3), \
            'Cable blocks should be (n, 3)'
        assert self.quat.shape == (n, 4), 'Attitudes should be (n, 4)'
        assert self.omega.shape == (n, 3), 'Body rates should be (n, 3)'

    @property
    def n(self) -> int:
        """
        Number of multirotors.
        """
        return int(self.q.shape[0])

    def cable_directions(self) -> DoubleMatrix:
        """
        Returns cable unit vectors.
        """
        return self.q

    def rotations(self) -> DoubleMatrix:
        """
        Multirotor attitudes as rotation matrices, shape ``(n, 3, 3)``.
        """
        return quat_to_matrix(self.quat)

    def to_vector(self) -> DoubleMatrix:
        """
        Flattens the state into ``(p0, v0, q, w, quat, omega)``.
        """
        return np.concatenate([
            self.p0, self.v0, self.q.ravel(), self.w.ravel(),
            self.quat.ravel(), self.omega.ravel()
        ])

    @classmethod
    def from_vector(cls, vec: DoubleMatrix, n: int) -> FullState:
        """
        Inverse of :meth:`to_vector`.
        """
        assert vec.shape == (6 + 13 * n,), 'Unexpected state vector size'
        base = 6
        q = vec[base:base + 3 * n].reshape(n, 3)
        base += 3 * n
        w = vec[base:base + 3 * n].reshape(n, 3)
        base += 3 * n
        quat = vec[base:base + 4 * n].reshape(n, 4)
        base += 4 * n
        omega = vec[base:base + 3 * n].reshape(n, 3)
        return cls(p0=vec[0:3], v0=vec[3:6], q=q, w=w, quat=quat, omega=omega)


@dataclass(frozen=True, eq=False)
class StateDerivative:
    """
    Time derivatives of the full state components.
    """
    p0_dot: DoubleMatrix
    v0_dot: DoubleMatrix
    q_dot: DoubleMatrix
    w_dot: DoubleMatrix
    rot_dot: DoubleMatrix
    omega_dot: DoubleMatrix


@dataclass(frozen=True, eq=False)
class Accel:
    """
    Accelerations of all bodies: payload, cables and multirotor attitudes.
    """
    a0: DoubleMatrix
    dw: DoubleMatrix
    domega: DoubleMatrix


def accel_vector(acc: Accel) -> DoubleMatrix:
    """
    Concatenates accelerations as ``(a0, dw_1..n, dOmega_1..n)``.

    :param acc: Accelerations
    :return: Flat vector of ``3 + 6 n`` entries
    """
    return np.concatenate([acc.a0, acc.dw.ravel(), acc.domega.ravel()])


def full_state_from_geometry(
    p0: DoubleMatrix, qs: DoubleMatrix, v0: Optional[DoubleMatrix] = None
) -> FullState:
    """
    Builds a full state with cables and multirotors at rest and level.

    :param p0: Payload position
    :param qs: Cable unit vectors, shape ``(n, 3)``
    :param v0: Payload velocity, zero if omitted
    :return: Full state
    """
    n = qs.shape[0]
    quat = np.zeros((n, 4))
    quat[:, 3] = 1.0
    return FullState(
        p0=np.array(p0, dtype=float),
        v0=np.zeros(3) if v0 is None else np.array(v0, dtype=float),
        q=np.array(qs, dtype=float), w=np.zeros((n, 3)),
        quat=quat, omega=np.zeros((n, 3)),
    )


def actuation_wrench(
    u_i: DoubleMatrix, params: SystemParams, i: int = 0
) -> Tuple[float, DoubleMatrix]:
    """
    Collective thrust and body torques of a multirotor.

    :param u_i: Four motor forces
    :param params: System parameters
    :param i: Index of the multirotor, selects its arm length and torque
     coefficient
    :return: Collective thrust and torque vector
    """
    u_i = np.asarray(u_i, dtype=float)
    assert u_i.shape == (4,), 'Four motor forces are expected'
    res = params.mixers[i] @ u_i
    return float(res[0]), res[1:]


def uav_positions(x: CableState, params: SystemParams) -> DoubleMatrix:
    """
    Positions of the multirotors, ``p_i = p0 - l_i q_i``.

    :param x: Full or geometric state
    :param params: System parameters
    :return: Array of shape ``(n, 3)``
    """
    return x.p0 - params.lengths[:, None] * x.cable_directions()


def hover_control(params: SystemParams) -> Control:
    """
    Motor forces hovering each multirotor together with its share of the
    payload.

    :param params: System parameters
    :return: Motor forces, shape ``(n, 4)``
    :raises InfeasibleHoverError: Hover force is outside of motor bounds
    """
    per_motor = (
        (params.masses + params.payload_mass / params.n)
        * params.gravity / 4.0
    )
    bad = (per_motor < params.f_min) | (per_motor > params.f_max)
    if np.any(bad):
        raise InfeasibleHoverError(
            f'Hover motor force {per_motor[bad]} N is outside of motor bounds'
            f' for multirotors {np.flatnonzero(bad).tolist()}'
        )
    return np.repeat(per_motor[:, None], 4, axis=1)


def _wrenches(
    u: Control, params: SystemParams
) -> Tuple[DoubleMatrix, DoubleMatrix]:
    """
    Collective thrusts ``(n,)`` and torques ``(n, 3)`` of all multirotors.
    """
    mixed = np.einsum('nij,nj->ni', params.mixers, u)
    return mixed[:, 0], mixed[:, 1:]


def continuous_dynamics(
    x: FullState, u: Control, params: SystemParams
) -> Tuple[StateDerivative, Accel]:
    """
    Evaluates the system kinematics and dynamics.

    :param x: Full state
    :param u: Motor forces, shape ``(n, 4)``
    :param params: System parameters
    :return: State derivatives and accelerations
    """
    u = np.asarray(u, dtype=float).reshape(params.n, 4)
    rots = x.rotations()
    thrust_dirs = rots[:, :, 2]
    f_c, moments = _wrenches(u, params)
    masses = params.masses
    lengths = params.lengths

    w_sq = np.sum(x.w ** 2, axis=1)
    # s = a0 + g e3
    s = np.sum(
        f_c[:, None] * thrust_dirs
        - (masses * lengths * w_sq)[:, None] * x.q,
        axis=0
    ) / params.total_mass
    a0 = s - params.gravity * E3
    dw = (
        np.cross(x.q, s) / lengths[:, None]
        - (f_c / (masses * lengths))[:, None] * np.cross(x.q, thrust_dirs)
    )
    inertia = params.inertias
    domega = (np.cross(inertia * x.omega, x.omega) + moments) / inertia

    rot_dot = np.stack([rots[i] @ hat(x.omega[i]) for i in range(x.n)])
    deriv = StateDerivative(
        p0_dot=x.v0.copy(), v0_dot=a0, q_dot=np.cross(x.w, x.q), w_dot=dw,
        rot_dot=rot_dot, omega_dot=domega,
    )
    return deriv, Accel(a0=a0, dw=dw, domega=domega)


def step(
    x: FullState, u: Control, dt: float, params: SystemParams
) -> FullState:
    """
    One explicit Euler step. Position uses the pre-step velocity, cable
    directions and attitudes are advanced by the exponential map and
    renormalized.

    :param x: Full state
    :param u: Motor forces, shape ``(n, 4)``
    :param dt: Time step, s
    :param params: System parameters
    :return: Next state
    """
    assert dt >= 0, 'Time step should be non-negative'
    if dt == 0:
        return x

    _, acc = continuous_dynamics(x, u, params)
    q_next = np.stack([
        rotate_unit(x.q[i], x.w[i] * dt) for i in range(x.n)
    ])
    quat_next = np.stack([
        quat_multiply(x.quat[i], quat_exp(x.omega[i] * dt))
        for i in range(x.n)
    ])
    quat_next /= np.linalg.norm(quat_next, axis=1)[:, None]
    return FullState(
        p0=x.p0 + x.v0 * dt,
        v0=x.v0 + acc.a0 * dt,
        q=q_next,
        w=x.w + acc.dw * dt,
        quat=quat_next,
        omega=x.omega + acc.domega * dt,
    )


def retract(x: FullState, delta: DoubleMatrix) -> FullState:
    """
    Applies a tangent-space perturbation to a state.

    :param x: Full state
    :param delta: Tangent vector of ``6 + 12 n`` entries
    :return: Perturbed state
    """
    layout = TangentLayout(x.n)
    assert delta.shape == (layout.dim,), 'Unexpected tangent vector size'
    q = np.empty_like(x.q)
    w = np.empty_like(x.w)
    quat = np.empty_like(x.quat)
    omega = np.empty_like(x.omega)
    for i in range(x.n):
        q_i = x.q[i] + delta[layout.q(i)]
        q[i] = q_i / np.linalg.norm(q_i)
        w[i] = x.w[i] + delta[layout.w(i)]
        quat_i = quat_multiply(x.quat[i], quat_exp(delta[layout.theta(i)]))
        quat[i] = quat_i / np.linalg.norm(quat_i)
        omega[i] = x.omega[i] + delta[layout.omega(i)]
    return FullState(
        p0=x.p0 + delta[layout.p0], v0=x.v0 + delta[layout.v0],
        q=q, w=w, quat=quat, omega=omega,
    )


def state_difference(a: FullState, b: FullState) -> DoubleMatrix:
    """
    Tangent-space difference ``a - b`` expressed at ``b``.

    :param a: Full state
    :param b: Full state
    :return: Tangent vector of ``6 + 12 n`` entries
    """
    layout = TangentLayout(a.n)
    res = np.empty(layout.dim)
    res[layout.p0] = a.p0 - b.p0
    res[layout.v0] = a.v0 - b.v0
    rel = (
        Rotation.from_quat(b.quat).inv() * Rotation.from_quat(a.quat)
    ).as_rotvec().reshape(a.n, 3)
    for i in range(a.n):
        res[layout.q(i)] = a.q[i] - b.q[i]
        res[layout.w(i)] = a.w[i] - b.w[i]
        res[layout.theta(i)] = rel[i]
        res[layout.omega(i)] = a.omega[i] - b.omega[i]
    return res


def interpolate_full(a: FullState, b: FullState, t: float) -> FullState:
    """
    Interpolates two full states, normalizing the manifold parts.

    :param a: State at ``t = 0``
    :param b: State at ``t = 1``
    :param t: Interpolation parameter
    :return: Interpolated state
    """
    q = (1 - t) * a.q + t * b.q
    q /= np.linalg.norm(q, axis=1)[:, None]
    # Keep quaternions in the same hemisphere before blending
    sign = np.where(np.sum(a.quat * b.quat, axis=1) < 0, -1.0, 1.0)
    quat = (1 - t) * a.quat + t * sign[:, None] * b.quat
    quat /= np.linalg.norm(quat, axis=1)[:, None]
    return FullState(
        p0=(1 - t) * a.p0 + t * b.p0, v0=(1 - t) * a.v0 + t * b.v0,
        q=q, w=(1 - t) * a.w + t * b.w, quat=quat,
        omega=(1 - t) * a.omega + t * b.omega,
    )


def accel_jacobians(
    x: FullState, u: Control, params: SystemParams
) -> Tuple[DoubleMatrix, DoubleMatrix]:
    """
    Derivatives of the acceleration vector with respect to the state tangent
    coordinates and to the motor forces.

    :param x: Full state
    :param u: Motor forces, shape ``(n, 4)``
    :param params: System parameters
    :return: Matrices of shape ``(3 + 6 n, 6 + 12 n)`` and
     ``(3 + 6 n, 4 n)``
    """
    # pylint: disable=too-many-locals
    n = params.n
    layout = TangentLayout(n)
    u = np.asarray(u, dtype=float).reshape(n, 4)
    rots = x.rotations()
    thrust_dirs = rots[:, :, 2]
    f_c, _ = _wrenches(u, params)
    masses = params.masses
    lengths = params.lengths
    total_mass = params.total_mass
    ones = np.ones(4)

    jac_x = np.zeros((params.accel_dim, layout.dim))
    jac_u = np.zeros((params.accel_dim, params.control_dim))

    s = np.sum(
        f_c[:, None] * thrust_dirs
        - (masses * lengths * np.sum(x.w ** 2, axis=1))[:, None] * x.q,
        axis=0
    ) / total_mass
    ds_dx = np.zeros((3, layout.dim))
    ds_du = np.zeros((3, params.control_dim))
    projectors = [tangent_projector(x.q[j]) for j in range(n)]
    for j in range(n):
        m_l = masses[j] * lengths[j]
        ds_dx[:, layout.q(j)] = (
            -m_l * float(x.w[j] @ x.w[j]) / total_mass * projectors[j]
        )
        ds_dx[:, layout.w(j)] = (
            -2.0 * m_l / total_mass * np.outer(x.q[j], x.w[j])
        )
        ds_dx[:, layout.theta(j)] = -f_c[j] / total_mass * rots[j] @ _HAT_E3
        ds_du[:, layout.u(j)] = np.outer(thrust_dirs[j], ones) / total_mass
    jac_x[layout.a0] = ds_dx
    jac_u[layout.a0] = ds_du

    for i in range(n):
        rows = layout.dw(i)
        q_hat = hat(x.q[i])
        coef = f_c[i] / (masses[i] * lengths[i])
        jac_x[rows] = q_hat @ ds_dx / lengths[i]
        jac_u[rows] = q_hat @ ds_du / lengths[i]
        jac_x[rows, layout.q(i)] += (
            (-hat(s) / lengths[i] + coef * hat(thrust_dirs[i]))
            @ projectors[i]
        )
        jac_x[rows, layout.theta(i)] += coef * q_hat @ rots[i] @ _HAT_E3
        jac_u[rows, layout.u(i)] += -np.outer(
            np.cross(x.q[i], thrust_dirs[i]), ones
        ) / (masses[i] * lengths[i])

        rows = layout.domega(i)
        inertia = params.inertias[i]
        jac_x[rows, layout.omega(i)] = (
            (hat(inertia * x.omega[i]) - hat(x.omega[i]) @ np.diag(inertia))
            / inertia[:, None]
        )
        jac_u[rows, layout.u(i)] = params.mixers[i][1:] / inertia[:, None]

    return jac_x, jac_u


def dynamics_jacobians(
    x: FullState, u: Control, dt: float, params: SystemParams
) -> Tuple[DoubleMatrix, DoubleMatrix]:
    """
    Derivatives of :func:`step` in tangent coordinates. The cable blocks carry
    the projector onto the tangent plane, so for ``dt = 0`` the state
    Jacobian is the identity on the tangent space of the state manifold:
    ``np.eye`` in every other block and ``I - q q^T`` for cable directions,
    whose 3-vector coordinates have no component along ``q``.

    :param x: Full state
    :param u: Motor forces, shape ``(n, 4)``
    :param dt: Time step, s
    :param params: System parameters
    :return: State Jacobian ``(6 + 12 n, 6 + 12 n)`` and control Jacobian
     ``(6 + 12 n, 4 n)``
    """
    n = params.n
    layout = TangentLayout(n)
    jac_x, jac_u = accel_jacobians(x, u, params)
    eye = np.eye(3)

    a_mat = np.zeros((layout.dim, layout.dim))
    b_mat = np.zeros((layout.dim, params.control_dim))
    a_mat[layout.p0, layout.p0] = eye
    a_mat[layout.p0, layout.v0] = dt * eye
    a_mat[layout.v0] = dt * jac_x[layout.a0]
    a_mat[layout.v0, layout.v0] += eye
    b_mat[layout.v0] = dt * jac_u[layout.a0]

    for i in range(n):
        phi = x.w[i] * dt
        rot = so3_exp(phi)
        a_mat[layout.q(i), layout.q(i)] = rot @ tangent_projector(x.q[i])
        a_mat[layout.q(i), layout.w(i)] = (
            -dt * rot @ hat(x.q[i]) @ right_jacobian(phi)
        )
        a_mat[layout.w(i)] = dt * jac_x[layout.dw(i)]
        a_mat[layout.w(i), layout.w(i)] += eye
        b_mat[layout.w(i)] = dt * jac_u[layout.dw(i)]

        psi = x.omega[i] * dt
        a_mat[layout.theta(i), layout.theta(i)] = so3_exp(psi).T
        a_mat[layout.theta(i), layout.omega(i)] = dt * right_jacobian(psi)
        a_mat[layout.omega(i)] = dt * jac_x[layout.domega(i)]
        a_mat[layout.omega(i), layout.omega(i)] += eye
        b_mat[layout.omega(i)] = dt * jac_u[layout.domega(i)]

    return a_mat, b_mat


def tangent_identity(x: FullState) -> DoubleMatrix:
    """
    Identity on the tangent space of the state manifold at ``x``: the
    identity matrix with cable blocks replaced by tangent-plane projectors.

    :param x: Full state
    :return: Matrix of shape ``(6 + 12 n, 6 + 12 n)``
    """
    layout = TangentLayout(x.n)
    res = np.eye(layout.dim)
    for i in range(x.n):
        res[layout.q(i), layout.q(i)] = tangent_projector(x.q[i])
    return res


def rollout(
    x0: FullState, us: Control, dt: float, params: SystemParams
) -> List[FullState]:
    """
    Iterates :func:`step` over a control sequence.

    :param x0: Initial state
    :param us: Motor forces, shape ``(T, n, 4)``
    :param dt: Time step, s
    :param params: System parameters
    :return: ``T + 1`` states, ``x0`` first
    """
    xs = [x0]
    for u in us:
        xs.append(step(xs[-1], u, dt, params))
    return xs
