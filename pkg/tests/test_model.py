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
Tests for the system model: dynamics, discrete step and its derivatives.
'''
from __future__ import annotations
import numpy as np
import pytest
from cable_payload_planner.exceptions import InfeasibleHoverError
from cable_payload_planner.model import (
    SystemParams, FullState, TangentLayout, continuous_dynamics, step,
    hover_control, dynamics_jacobians, tangent_identity, retract,
    state_difference, interpolate_full, rollout, uav_positions,
    actuation_wrench,
)
from conftest import evenly_spaced, hover_state, random_full_state


def test_params_broadcast() -> None:
    '''
    Tests scalar per-multirotor parameters are broadcast.
    '''
    params = SystemParams(n=4, mass=0.05, cable_length=[0.4, 0.5, 0.6, 0.7])
    assert np.allclose(params.masses, 0.05)
    assert params.lengths.shape == (4,)
    assert params.inertias.shape == (4, 3)
    assert params.total_mass == pytest.approx(params.payload_mass + 0.2)
    assert params.state_dim == 54
    assert params.control_dim == 16


def test_params_invalid() -> None:
    '''
    Tests invalid parameters are rejected.
    '''
    with pytest.raises(AssertionError):
        SystemParams(n=1)
    with pytest.raises(AssertionError):
        SystemParams(n=2, f_min=0.2, f_max=0.1)
    with pytest.raises(AssertionError):
        SystemParams(n=2, cable_length=[0.5, 0.5, 0.5])


def test_hover_control(params2: SystemParams) -> None:
    '''
    Tests every motor carries a quarter of the multirotor and its payload
    share.
    '''
    u = hover_control(params2)
    assert u.shape == (2, 4)
    assert np.allclose(u, (0.034 + 0.005) * 9.81 / 4)
    thrust, torque = actuation_wrench(u[0], params2)
    assert thrust == pytest.approx((0.034 + 0.005) * 9.81)
    assert np.allclose(torque, 0.0)


def test_hover_infeasible() -> None:
    '''
    Tests hover beyond the motor bounds is reported.
    '''
    with pytest.raises(InfeasibleHoverError):
        hover_control(SystemParams(n=2, payload_mass=1.0))


@pytest.mark.parametrize('n', [2, 3, 6])
def test_equilibrium(n: int) -> None:
    '''
    Tests vertical cables with hover controls are an equilibrium.
    '''
    params = SystemParams(n=n)
    x = hover_state(np.array([0.1, -0.2, 1.0]), n)
    deriv, acc = continuous_dynamics(x, hover_control(params), params)
    assert np.allclose(acc.a0, 0.0, atol=1e-12)
    assert np.allclose(acc.dw, 0.0, atol=1e-12)
    assert np.allclose(acc.domega, 0.0, atol=1e-12)
    assert np.allclose(deriv.q_dot, 0.0)

    x_next = step(x, hover_control(params), 0.01, params)
    assert np.allclose(state_difference(x_next, x), 0.0, atol=1e-12)


def test_free_fall(params2: SystemParams) -> None:
    '''
    Tests the payload falls with gravity acceleration with motors off.
    '''
    x = hover_state(np.zeros(3), 2)
    _, acc = continuous_dynamics(x, np.zeros((2, 4)), params2)
    assert np.allclose(acc.a0, [0.0, 0.0, -9.81])


def test_step_zero_dt(params2: SystemParams, rng: np.random.Generator) -> None:
    '''
    Tests a zero time step returns the state unchanged.
    '''
    x = random_full_state(rng, 2)
    assert step(x, hover_control(params2), 0.0, params2) is x


def test_step_keeps_norms(
    params3: SystemParams, rng: np.random.Generator
) -> None:
    '''
    Tests cable directions and attitudes stay normalized along a long
    rollout of a swinging formation.
    '''
    x = evenly_spaced(np.array([0.0, 0.0, 1.0]), 3).to_full_state()
    us = hover_control(params3) + rng.normal(0.0, 1e-3, (10000, 3, 4))
    states = rollout(x, us, 1e-3, params3)
    assert len(states) == 10001
    q_norms = np.array([np.linalg.norm(s.q, axis=1) for s in states])
    quat_norms = np.array([np.linalg.norm(s.quat, axis=1) for s in states])
    assert np.all(np.isfinite(q_norms))
    assert np.max(np.abs(q_norms - 1.0)) <= 1e-9
    assert np.max(np.abs(quat_norms - 1.0)) <= 1e-9


def test_uav_positions(params2: SystemParams) -> None:
    '''
    Tests vertical cables put multirotors above the payload.
    '''
    x = hover_state(np.array([0.0, 0.0, 1.0]), 2)
    assert np.allclose(uav_positions(x, params2), [[0, 0, 1.5], [0, 0, 1.5]])


def test_retract_difference(
    params2: SystemParams, rng: np.random.Generator
) -> None:
    '''
    Tests the tangent difference undoes a small tangent-plane retraction.
    '''
    x = random_full_state(rng, 2)
    delta = rng.normal(0.0, 1e-4, params2.state_dim)
    # Only tangent-plane cable perturbations are recovered
    delta = tangent_identity(x) @ delta
    y = retract(x, delta)
    assert np.allclose(state_difference(y, x), delta, atol=1e-7)
    assert np.allclose(state_difference(x, x), 0.0, atol=1e-12)


def test_interpolate_full(rng: np.random.Generator) -> None:
    '''
    Tests interpolation end points and normalization.
    '''
    a = random_full_state(rng, 2)
    b = random_full_state(rng, 2)
    assert np.allclose(interpolate_full(a, b, 0.0).p0, a.p0)
    assert np.allclose(interpolate_full(a, b, 1.0).q, b.q)
    mid = interpolate_full(a, b, 0.5)
    assert np.allclose(np.linalg.norm(mid.q, axis=1), 1.0)
    assert np.allclose(np.linalg.norm(mid.quat, axis=1), 1.0)


def test_vector_round_trip(rng: np.random.Generator) -> None:
    '''
    Tests the flat state vector holds every component.
    '''
    x = random_full_state(rng, 3)
    y = FullState.from_vector(x.to_vector(), 3)
    assert np.array_equal(y.quat, x.quat)
    assert np.array_equal(y.omega, x.omega)


def _numeric_jacobians(
    x: FullState, u: np.ndarray, dt: float, params: SystemParams,
    eps: float = 1e-6
) -> tuple[np.ndarray, np.ndarray]:
    '''
    Central differences of the step in tangent coordinates.
    '''
    x_next = step(x, u, dt, params)
    dim = params.state_dim
    a_mat = np.zeros((dim, dim))
    for k in range(dim):
        delta = np.zeros(dim)
        delta[k] = eps
        plus = state_difference(step(retract(x, delta), u, dt, params),
                                x_next)
        minus = state_difference(step(retract(x, -delta), u, dt, params),
                                 x_next)
        a_mat[:, k] = (plus - minus) / (2 * eps)

    b_mat = np.zeros((dim, params.control_dim))
    for k in range(params.control_dim):
        delta = np.zeros(params.control_dim)
        delta[k] = eps
        du = delta.reshape(u.shape)
        plus = state_difference(step(x, u + du, dt, params), x_next)
        minus = state_difference(step(x, u - du, dt, params), x_next)
        b_mat[:, k] = (plus - minus) / (2 * eps)
    return a_mat, b_mat


def _relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.linalg.norm(actual - expected, ord=np.inf)
                 / np.linalg.norm(expected, ord=np.inf))


@pytest.mark.parametrize('n', [2, 3])
def test_jacobians_finite_differences(
    n: int, rng: np.random.Generator
) -> None:
    '''
    Tests analytic step derivatives against central finite differences on
    random states and controls.
    '''
    params = SystemParams(n=n)
    for _ in range(100):
        x = random_full_state(rng, n)
        u = rng.uniform(0.02, 0.12, (n, 4))
        a_mat, b_mat = dynamics_jacobians(x, u, 0.01, params)
        a_num, b_num = _numeric_jacobians(x, u, 0.01, params)
        # Cable directions are only perturbed within their tangent planes
        a_num = a_num @ tangent_identity(x)
        a_mat = a_mat @ tangent_identity(x)
        assert _relative_error(a_mat, a_num) <= 1e-4
        assert _relative_error(b_mat, b_num) <= 1e-4


def test_jacobian_zero_dt(
    params2: SystemParams, rng: np.random.Generator
) -> None:
    '''
    Tests the state Jacobian of a zero step is the tangent identity.
    '''
    x = random_full_state(rng, 2)
    a_mat, b_mat = dynamics_jacobians(x, hover_control(params2), 0.0, params2)
    assert np.allclose(a_mat, tangent_identity(x))
    assert np.allclose(b_mat, 0.0)
    # Identity outside the cable direction blocks
    layout = TangentLayout(2)
    cable = np.zeros(layout.dim, dtype=bool)
    for i in range(2):
        cable[layout.q(i)] = True
    rest = a_mat[~cable][:, ~cable]
    assert np.allclose(rest, np.eye(rest.shape[0]), rtol=0.0, atol=1e-12)
    # Identity on every tangent vector
    delta = tangent_identity(x) @ rng.normal(size=layout.dim)
    assert np.allclose(a_mat @ delta, delta)


def test_tangent_layout() -> None:
    '''
    Tests tangent coordinate blocks tile the tangent space.
    '''
    layout = TangentLayout(2)
    covered = np.zeros(layout.dim, dtype=int)
    covered[layout.p0] += 1
    covered[layout.v0] += 1
    for i in range(2):
        for block in (layout.q(i), layout.w(i), layout.theta(i),
                      layout.omega(i)):
            covered[block] += 1
    assert np.all(covered == 1)
