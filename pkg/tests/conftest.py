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
Shared data structures and fixtures.
'''
from __future__ import annotations
from typing import Iterator, Callable
import sys
from unittest.mock import patch
import numpy as np
import pytest
from pytest import FixtureRequest
from scipy.spatial.transform import Rotation
from cable_payload_planner.geom_planner import GeomState, azel_to_unit
from cable_payload_planner.model import (
    SystemParams, FullState, full_state_from_geometry,
)
from cable_payload_planner.world import Environment

RandomStateT = Callable[..., FullState]

PROBLEM_YAML = '''
    general:
      logging_level: error
    environment:
      workspace:
        lo: [-1.5, -1.5, 0.0]
        hi: [1.5, 1.5, 2.5]
    start:
      p0: [-0.5, 0.0, 1.0]
      alpha: [0.0, 3.141592653589793]
      gamma: [0.7853981633974483, 0.7853981633974483]
    goal:
      p0: [0.5, 0.0, 1.0]
    planner:
      timeout: 30.0
      max_samples: 300
      witnesses: 3
      attempts_per_witness: 50
      goal_bias: 0.3
      max_step: 1.0
    optimizer:
      max_iters: 5
      golden_evals: 4
'''


@pytest.fixture
def mock_problem(request: FixtureRequest) -> Iterator[None]:
    '''
    Provides mocked problem file, to be used as context manager.
    '''
    problem_yaml = getattr(
        request.node.get_closest_marker("problem_yaml"),
        'args', [PROBLEM_YAML]
    )[0]

    with patch(
        'cable_payload_planner.config.ProblemConfig._read_config',
        return_value=problem_yaml
    ):
        with patch.object(sys, 'argv', ['dummy']):
            yield


@pytest.fixture
def params2() -> SystemParams:
    '''
    Two multirotors with the default desk-scale parameters.
    '''
    return SystemParams(n=2)


@pytest.fixture
def params3() -> SystemParams:
    '''
    Three multirotors with the default desk-scale parameters.
    '''
    return SystemParams(n=3)


@pytest.fixture
def empty_env() -> Environment:
    '''
    Obstacle-free workspace.
    '''
    return Environment(
        obstacles=(), workspace_lo=np.array([-1.5, -1.5, 0.0]),
        workspace_hi=np.array([1.5, 1.5, 2.5]),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    '''
    Seeded random generator.
    '''
    return np.random.default_rng(1234)


def evenly_spaced(
    p0: np.ndarray, n: int, gamma: float = np.pi / 4
) -> GeomState:
    '''
    Formation with evenly spaced azimuths and equal elevations.
    '''
    return GeomState(
        p0=p0, alpha=np.array([2 * np.pi * i / n for i in range(n)]),
        gamma=np.full(n, gamma),
    )


def hover_state(p0: np.ndarray, n: int) -> FullState:
    '''
    Vertical cables, level multirotors at rest.
    '''
    qs = np.tile(np.array([0.0, 0.0, -1.0]), (n, 1))
    return full_state_from_geometry(np.asarray(p0, dtype=float), qs)


def random_full_state(rng: np.random.Generator, n: int) -> FullState:
    '''
    Random full state with lower-hemisphere cables.
    '''
    alpha = rng.uniform(0.0, 2 * np.pi, n)
    gamma = rng.uniform(0.3, 1.3, n)
    return FullState(
        p0=rng.uniform(-1.0, 1.0, 3),
        v0=rng.normal(0.0, 0.3, 3),
        q=azel_to_unit(alpha, gamma),
        w=rng.normal(0.0, 0.5, (n, 3)),
        quat=Rotation.random(n, random_state=rng.integers(1 << 31)).as_quat(),
        omega=rng.normal(0.0, 0.5, (n, 3)),
    )
