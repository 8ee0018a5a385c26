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
Kinodynamic motion planning for teams of multirotors carrying a
cable-suspended payload: geometric planning, trajectory optimization and
reference export for cable-force tracking controllers.
"""
from .config import ProblemConfig
from .exceptions import (
    PayloadPlannerError, PlannerConfigError, NoSolutionError,
    OptimizationDivergedError, TrajectoryFileError,
)
from .geom_planner import GeomState, ReferenceTrajectory
from .harness import Problem, run_pipeline, validate_trajectory
from .model import SystemParams, FullState
from .planner import PlannerSettings, plan_geometric
from .schema import ProblemSchema, ValidationReport
from .traj_opt import OptSettings, Trajectory, optimize, iterative_refine

__all__ = [
    'ProblemConfig', 'PayloadPlannerError', 'PlannerConfigError',
    'NoSolutionError', 'OptimizationDivergedError', 'TrajectoryFileError',
    'GeomState', 'ReferenceTrajectory', 'Problem', 'run_pipeline',
    'validate_trajectory', 'SystemParams', 'FullState', 'PlannerSettings',
    'plan_geometric', 'ProblemSchema', 'ValidationReport', 'OptSettings',
    'Trajectory', 'optimize', 'iterative_refine',
]
