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
Module to instantiate planning problems from YAML files with defaults and
schema validation.
"""
from __future__ import annotations
from typing import Optional, Tuple, Dict, Any, List, cast
import logging
import os
import numpy as np
import numpy.typing as npt
import yaml
from pydantic import ValidationError
from .const import LOGGING_LEVELS, ENV_WORKERS, ENV_LOGGING_LEVEL
from .exceptions import PlannerConfigError
from .geom_planner import GeomState
from .model import SystemParams
from .planner import PlannerSettings
from .schema import ProblemSchema
from .traj_opt import OptSettings
from .world import Environment, Obstacle, Sphere, Box, Cylinder

DoubleMatrix = npt.NDArray[np.float64]

_LOGGER = logging.getLogger(__name__)


class ProblemConfig:
    """
    Class representing a planning problem: physical parameters, environment,
    start and goal, and the planner/optimizer settings.

    :param config_file: Name of problem file
    :param content: Literal content representing the problem
    """

    @staticmethod
    def _read_config(config_file: str) -> str:
        """
        Reads problem file.

        :param config_file: Name of problem file
        :return: Problem file contents
        """
        with open(config_file, encoding='ascii') as file:
            content = file.read()

        return content

    def __init__(
        self, config_file: Optional[str] = None, content: Optional[str] = None
    ) -> None:
        """
        Initializes the problem either from file or content string.

        :param config_file: Name of problem file
        :param content: Problem contents
        """
        if not config_file and not content:
            raise PlannerConfigError(
                "Either 'config_file' or 'content' should be provided"
            )

        try:
            if not content:
                # Cast the problem file name, since the check above ensures
                # it is defined
                content = self._read_config(cast(str, config_file))

            config = yaml.safe_load(content)
        except (yaml.YAMLError, OSError) as exc:
            raise PlannerConfigError(
                f'Error loading configuration file:\n{str(exc)}'
            ) from None

        try:
            config = ProblemSchema.model_validate(config)
        except ValidationError as exc:
            errors = [
                f"{'.'.join([str(y) for y in x['loc']])}: {x['msg']}"
                for x in exc.errors()
            ]
            raise PlannerConfigError(
                'Error validating configuration file:\n' + '\n'.join(errors)
            ) from None

        self._config: ProblemSchema = config
        self._apply_env_overrides()

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> ProblemConfig:
        """
        Instantiates the problem from its plain representation.

        :param data: Problem as nested dictionaries
        :return: Problem
        """
        return cls(content=yaml.safe_dump(data, sort_keys=False))

    def _apply_env_overrides(self) -> None:
        """
        Overrides the worker count and logging level from the environment.
        """
        workers = os.environ.get(ENV_WORKERS)
        if workers:
            try:
                value = int(workers)
            except ValueError:
                value = 0
            if value < 1:
                raise PlannerConfigError(
                    f"'{ENV_WORKERS}' should be a positive integer,"
                    f" got '{workers}'"
                )
            self._config.general.workers = value

        level = os.environ.get(ENV_LOGGING_LEVEL)
        if level:
            if level not in LOGGING_LEVELS:
                raise PlannerConfigError(
                    f"'{ENV_LOGGING_LEVEL}' should be one of"
                    f" {', '.join(LOGGING_LEVELS)}, got '{level}'"
                )
            self._config.general.logging_level = level

    @property
    def of(self) -> ProblemSchema:
        """
        Returns the problem state

        :return: Problem state
        """
        return self._config

    @property
    def logging_level(self) -> int:
        """
        Returns logging level suitable for :mod:`logging` library

        :return: Logging level
        """

        return LOGGING_LEVELS[self._config.general.logging_level]

    @property
    def n(self) -> int:
        """
        Number of multirotors.
        """
        return self._config.n

    def system_params(self) -> SystemParams:
        """
        Materializes physical parameters.

        :return: System parameters
        """
        params = self._config.params
        return SystemParams(
            n=self.n, payload_mass=params.payload_mass,
            mass=np.asarray(params.uav_mass, dtype=float),
            inertia=np.asarray(params.inertia, dtype=float),
            cable_length=np.asarray(params.cable_length, dtype=float),
            arm=np.asarray(params.arm, dtype=float),
            k_tau=np.asarray(params.k_tau, dtype=float),
            f_min=np.asarray(params.f_min, dtype=float),
            f_max=np.asarray(params.f_max, dtype=float),
            r_robot=np.asarray(params.r_robot, dtype=float),
            r_payload=params.r_payload, r_cable=params.r_cable,
            gravity=params.gravity,
            cable_joint_offset=params.cable_joint_offset,
        )

    def environment(self) -> Environment:
        """
        Materializes the environment.

        :return: Environment
        """
        env = self._config.environment
        obstacles: List[Obstacle] = []
        for item in env.obstacles:
            if item.shape == 'sphere':
                obstacles.append(Sphere(np.array(item.center), item.radius))
            elif item.shape == 'box':
                obstacles.append(
                    Box(np.array(item.center), np.array(item.half_extents))
                )
            else:
                obstacles.append(Cylinder(
                    np.array(item.center), item.radius, item.half_height
                ))
        return Environment(
            obstacles=tuple(obstacles),
            workspace_lo=np.array(env.workspace.lo),
            workspace_hi=np.array(env.workspace.hi),
        )

    def start_state(self) -> GeomState:
        """
        Materializes the start state.

        :return: Geometric start state
        """
        start = self._config.start
        return GeomState(
            p0=np.array(start.p0), alpha=np.array(start.alpha),
            gamma=np.array(start.gamma),
        )

    def goal_position(self) -> DoubleMatrix:
        """
        Desired payload position.
        """
        return np.array(self._config.goal.p0, dtype=float)

    def goal_angles(self) -> Optional[Tuple[DoubleMatrix, DoubleMatrix]]:
        """
        Desired cable azimuths and elevations, if the problem defines them.
        """
        goal = self._config.goal
        if goal.alpha is None or goal.gamma is None:
            return None
        return np.array(goal.alpha), np.array(goal.gamma)

    def planner_settings(
        self, seed: Optional[int] = None, timeout: Optional[float] = None
    ) -> PlannerSettings:
        """
        Materializes geometric planner settings.

        :param seed: Seed overriding the problem one
        :param timeout: Timeout overriding the problem one, s
        :return: Planner settings
        """
        values = self._config.planner.model_dump()
        if seed is not None:
            values['seed'] = seed
        if timeout is not None:
            values['timeout'] = timeout
        return PlannerSettings(**values)

    def opt_settings(self, n_iters: Optional[int] = None) -> OptSettings:
        """
        Materializes trajectory optimizer settings. Cable tilt bound and goal
        tolerance are shared with the geometric planner.

        :param n_iters: Refinement iterations overriding the problem ones
        :return: Optimizer settings
        """
        values = self._config.optimizer.model_dump()
        if n_iters is not None:
            values['n_iters'] = n_iters
        return OptSettings(
            tilt_min=self._config.planner.tilt_min,
            goal_tolerance=self._config.planner.goal_tolerance,
            **values
        )

    def dump(self) -> str:
        """
        Renders the problem back to YAML.

        :return: Problem file contents
        """
        return cast(str, yaml.safe_dump(
            self._config.model_dump(mode='json', exclude_none=True),
            sort_keys=False
        ))

    def __repr__(self) -> str:
        """
        Returns string representation of the problem.

        :return: String representation
        """
        res = ''
        for section in ('general', 'params', 'planner', 'optimizer',
                        'power'):
            res += f' - {section}: ' + ', '.join([
                f'{k}={v}' for k, v
                in getattr(
                    self._config, section
                ).model_dump(exclude_none=True).items()
            ]) + '\n'
        env = self._config.environment
        res += (
            f' - environment: workspace={env.workspace.lo}..'
            f'{env.workspace.hi}, obstacles={len(env.obstacles)}\n'
        )
        res += (
            f' - start: p0={self._config.start.p0}, n={self.n}\n'
            f' - goal: p0={self._config.goal.p0}\n'
        )
        return res
