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
Tests for the trajectory optimizer.
'''
from __future__ import annotations
from typing import List, Tuple
import math
import numpy as np
import pytest
from cable_payload_planner.exceptions import OptimizationDivergedError
from cable_payload_planner.geom_planner import ReferenceTrajectory
from cable_payload_planner.model import (
    SystemParams, FullState, hover_control, rollout,
)
from cable_payload_planner.traj_opt import (
    FixedStepModel, OptSettings, OptProblem, build_initial_guess,
    dynamics_defect, solve_ddp, optimize, iterative_refine, trajectory_cost,
)
from cable_payload_planner.world import Environment
from conftest import evenly_spaced

HORIZON = 10
SETTINGS = OptSettings(max_iters=5, golden_evals=4, max_outer=2)


def _problem(
    params: SystemParams, env: Environment,
    settings: OptSettings = SETTINGS
) -> OptProblem:
    start = evenly_spaced(np.array([0.0, 0.0, 1.0]), params.n)
    return OptProblem(
        params=params, env=env, x_start=start.to_full_state(),
        x_goal=start.with_p0(np.array([0.02, 0.0, 1.0])).to_full_state(),
        horizon=HORIZON, settings=settings,
    )


def _static_guess(problem: OptProblem) -> Tuple[List[FullState], np.ndarray]:
    xs = [problem.x_start] * (HORIZON + 1)
    us = np.repeat(hover_control(problem.params)[None], HORIZON, axis=0)
    return xs, us


def test_build_initial_guess(params2: SystemParams) -> None:
    '''
    Tests the guess keeps the reference geometry with zero rates and hover
    controls.
    '''
    count = 5
    q = np.tile(np.array([[0.6, 0.0, -0.8], [-0.6, 0.0, -0.8]]),
                (count, 1, 1))
    p0 = np.stack([np.linspace(0.0, 0.1, count), np.zeros(count),
                   np.ones(count)], axis=1)
    ref = ReferenceTrajectory(dt=0.01, p0=p0, v0=np.ones((count, 3)), q=q)
    xs, us, horizon = build_initial_guess(ref, params2)
    assert horizon == count - 1
    assert len(xs) == count
    assert us.shape == (count - 1, 2, 4)
    assert np.allclose(us, hover_control(params2))
    for k, x in enumerate(xs):
        assert np.allclose(x.p0, p0[k])
        assert np.allclose(x.q, q[k])
        assert np.allclose(x.v0, 0.0)
        assert np.allclose(x.w, 0.0)
        assert np.allclose(x.quat[:, 3], 1.0)


def test_dynamics_defect(
    params2: SystemParams, empty_env: Environment
) -> None:
    '''
    Tests rolled out trajectories are consistent and static guesses of a
    tilted formation are not.
    '''
    problem = _problem(params2, empty_env)
    xs, us = _static_guess(problem)
    assert dynamics_defect(xs, us, 0.01, params2) > 1e-6
    rolled = rollout(problem.x_start, us, 0.01, params2)
    assert dynamics_defect(rolled, us, 0.01, params2) == 0.0


def test_solve_ddp(params2: SystemParams, empty_env: Environment) -> None:
    '''
    Tests a solve from an inconsistent guess: the result follows the
    dynamics and the accepted costs never increase.
    '''
    problem = _problem(params2, empty_env)
    xs, us = _static_guess(problem)
    traj = solve_ddp(problem, xs, us, 0.01)
    assert traj.horizon == HORIZON
    assert traj.defect <= 1e-9
    assert np.allclose(traj.xs[0].p0, problem.x_start.p0)
    history = traj.cost_history
    assert history
    assert all(b <= a for a, b in zip(history[:-1], history[1:]))
    assert traj.cost == pytest.approx(history[-1])
    assert traj.cost == pytest.approx(
        trajectory_cost(traj.xs, traj.us, traj.dt, problem)
    )
    assert traj.log[0][0] == 0
    assert len(traj.log) == traj.iterations + 1


def test_optimize(params2: SystemParams, empty_env: Environment) -> None:
    '''
    Tests time step search stays inside its bracket and never increases the
    cost.
    '''
    problem = _problem(params2, empty_env)
    xs, us = _static_guess(problem)
    first = solve_ddp(problem, xs, us, 0.01)
    traj = optimize(problem, xs, us)
    lower, upper = SETTINGS.dt_bracket
    assert lower * SETTINGS.dt0 <= traj.dt <= upper * SETTINGS.dt0
    assert traj.defect <= 1e-9
    assert traj.cost <= first.cost + 1e-12
    assert traj.metrics['dt0'] == SETTINGS.dt0
    assert traj.metrics['wall_time_s'] >= 0.0
    assert np.isfinite(traj.goal_error)


def test_iterative_refine(
    params2: SystemParams, empty_env: Environment
) -> None:
    '''
    Tests every refinement iteration shrinks the nominal time step and
    records the energy metric.
    '''
    problem = _problem(params2, empty_env)
    xs, us = _static_guess(problem)
    res = iterative_refine(problem, xs, us, n_iters=2, shrink=0.5,
                           energy_fn=lambda traj: traj.duration)
    assert len(res) == 2
    assert [x.metrics['dt0'] for x in res] == pytest.approx([0.01, 0.005])
    for traj in res:
        assert traj.metrics['energy_wh'] == pytest.approx(traj.duration)
        assert traj.defect <= 1e-9


@pytest.mark.parametrize('changes', [
    dict(dt0=0.0),
    dict(dt_bracket=(2.0, 5.0)),
    dict(shrink=1.0),
    dict(n_iters=0),
    dict(w_coll=-1.0),
])
def test_invalid_settings(changes: dict) -> None:  # type: ignore[type-arg]
    '''
    Tests invalid optimizer settings are rejected.
    '''
    with pytest.raises(AssertionError):
        OptSettings(**changes)


def test_invalid_problem(
    params2: SystemParams, params3: SystemParams, empty_env: Environment
) -> None:
    '''
    Tests horizons and state sizes are checked.
    '''
    problem = _problem(params2, empty_env)
    with pytest.raises(AssertionError):
        OptProblem(params2, empty_env, problem.x_start, problem.x_goal, 1)
    with pytest.raises(AssertionError):
        OptProblem(params3, empty_env, problem.x_start, problem.x_goal, 5)


def test_solve_ddp_diverged(
    params2: SystemParams, empty_env: Environment,
    monkeypatch: pytest.MonkeyPatch
) -> None:
    '''
    Tests a non-finite cost is reported together with the last finite
    iterate, the guess followed by the tracking controller.
    '''
    problem = _problem(params2, empty_env)
    xs, us = _static_guess(problem)
    monkeypatch.setattr(FixedStepModel, 'cost',
                        lambda self, xs, us: math.nan)
    with pytest.raises(OptimizationDivergedError) as exc_info:
        solve_ddp(problem, xs, us, 0.01)
    traj = exc_info.value.trajectory
    assert traj is not None
    assert traj.horizon == HORIZON
    assert traj.dt == 0.01
    assert np.all(np.isfinite(traj.us))
    assert all(np.all(np.isfinite(x.to_vector())) for x in traj.xs)
    assert traj.defect <= 1e-9
    assert np.allclose(traj.xs[0].p0, problem.x_start.p0)
