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
Exceptions for the package.
"""
from __future__ import annotations
from typing import Optional, TYPE_CHECKING
if TYPE_CHECKING:
    from .traj_opt import Trajectory


class PayloadPlannerError(Exception):
    """
    Base exception for the package.
    """


class PlannerConfigError(PayloadPlannerError):
    """
    Exception thrown when problem file or command line processing encounters
    an error.
    """


class InfeasibleHoverError(PayloadPlannerError):
    """
    Exception thrown when the hover motor forces fall outside motor bounds.
    """


class FormationError(PayloadPlannerError):
    """
    Exception thrown when a formation has a cable too close to horizontal.
    """


class NoSolutionError(PayloadPlannerError):
    """
    Exception thrown when the geometric planner found no goal-connected state.
    """


class OptimizationDivergedError(PayloadPlannerError):
    """
    Exception thrown when the trajectory optimizer produced non-finite cost.

    :param message: Error message
    :param trajectory: Last iterate having finite cost, if any
    """
    def __init__(
        self, message: str, trajectory: Optional[Trajectory] = None
    ) -> None:
        super().__init__(message)
        self.trajectory = trajectory


class TrajectoryFileError(PayloadPlannerError):
    """
    Exception thrown when a trajectory cannot be written or read back.
    """


class InsufficientSeedsError(PayloadPlannerError):
    """
    Exception thrown when a benchmark is requested with less than two seeds.
    """
