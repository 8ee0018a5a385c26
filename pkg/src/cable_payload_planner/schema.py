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
Module containing problem file, trajectory metadata and report schemas.
"""
from __future__ import annotations
from typing import (
    Optional, List, Union, Tuple, Dict, Any, Literal, Annotated
)
from pydantic import (
    BaseModel, Field, field_validator, model_validator, PositiveFloat,
    PositiveInt, NonNegativeFloat
)
from .const import (
    DEFAULT_CONFIG_GENERAL_LOGGING_LEVEL, DEFAULT_CONFIG_GENERAL_WORKERS,
    DEFAULT_CONFIG_GENERAL, DEFAULT_CONFIG_PARAMS, DEFAULT_CONFIG_PLANNER,
    DEFAULT_CONFIG_OPTIMIZER, DEFAULT_CONFIG_POWER, LOGGING_LEVELS,
    GRAVITY, DEFAULT_UAV_MASS, DEFAULT_PAYLOAD_MASS, DEFAULT_CABLE_LENGTH,
    DEFAULT_INERTIA, DEFAULT_ARM_LENGTH, DEFAULT_K_TAU, DEFAULT_F_MIN,
    DEFAULT_F_MAX, DEFAULT_R_ROBOT, DEFAULT_R_PAYLOAD, DEFAULT_R_CABLE,
    DEFAULT_CABLE_JOINT_OFFSET, DEFAULT_PLANNER_TIMEOUT,
    DEFAULT_PLANNER_MAX_SAMPLES, DEFAULT_PLANNER_WITNESSES,
    DEFAULT_PLANNER_ATTEMPTS_PER_WITNESS, DEFAULT_PLANNER_SIGMA,
    DEFAULT_PLANNER_GOAL_BIAS, DEFAULT_PLANNER_RESOLUTION,
    DEFAULT_PLANNER_GOAL_TOLERANCE, DEFAULT_PLANNER_MAX_STEP,
    DEFAULT_PLANNER_REWIRE_FACTOR, DEFAULT_PLANNER_SPEED, DEFAULT_TILT_MIN,
    DEFAULT_PLANNER_MARGIN, DEFAULT_PLANNER_SEED, DEFAULT_PLANNER_SAMPLER,
    PLANNER_SAMPLERS, DEFAULT_OPT_DT0, DEFAULT_OPT_BETA1, DEFAULT_OPT_BETA2,
    DEFAULT_OPT_W_GOAL, DEFAULT_OPT_W_BOUND, DEFAULT_OPT_W_COLL,
    DEFAULT_OPT_W_REG, DEFAULT_OPT_MARGIN, DEFAULT_OPT_OMEGA_MAX,
    DEFAULT_OPT_MAX_ITERS, DEFAULT_OPT_TOL, DEFAULT_OPT_N_ITERS,
    DEFAULT_OPT_SHRINK, DEFAULT_OPT_DT_BRACKET, DEFAULT_OPT_GOLDEN_EVALS,
    DEFAULT_POWER_P_IDLE, DEFAULT_POWER_P_SLOPE, SCENARIO_KINDS,
    REPORT_HEADER_NOTE,
)

Vector3 = Tuple[float, float, float]
# Scalar applies to every multirotor
PerUav = Union[float, List[float]]


class ConfigGeneralSchema(BaseModel):
    """
    Class representing problem schema for general settings.
    """
    logging_level: str = DEFAULT_CONFIG_GENERAL_LOGGING_LEVEL
    workers: PositiveInt = DEFAULT_CONFIG_GENERAL_WORKERS

    @field_validator('logging_level', mode='after')
    @classmethod
    def validate_logging_level(cls, value: str) -> str:
        """
        Validates logging level.
        """
        valid_levels = LOGGING_LEVELS.keys()
        if value not in valid_levels:
            valid_levels_str = ', '.join([f"'{x}'" for x in valid_levels])
            raise ValueError(
                f'should be one of {valid_levels_str}'
            )

        return value


class ConfigParamsSchema(BaseModel):
    """
    Class representing problem schema for physical parameters.
    """
    payload_mass: NonNegativeFloat = DEFAULT_PAYLOAD_MASS
    uav_mass: PerUav = DEFAULT_UAV_MASS
    # Diagonal, one triple for all multirotors or one per multirotor
    inertia: Union[List[float], List[List[float]]] = list(DEFAULT_INERTIA)
    cable_length: PerUav = DEFAULT_CABLE_LENGTH
    arm: PerUav = DEFAULT_ARM_LENGTH
    k_tau: PerUav = DEFAULT_K_TAU
    f_min: PerUav = DEFAULT_F_MIN
    f_max: PerUav = DEFAULT_F_MAX
    r_robot: PerUav = DEFAULT_R_ROBOT
    r_payload: PositiveFloat = DEFAULT_R_PAYLOAD
    r_cable: PositiveFloat = DEFAULT_R_CABLE
    cable_joint_offset: NonNegativeFloat = DEFAULT_CABLE_JOINT_OFFSET
    gravity: PositiveFloat = GRAVITY

    def per_uav_lengths(self) -> Dict[str, int]:
        """
        Returns lengths of per-multirotor fields given as lists.
        """
        res = {}
        for name in ('uav_mass', 'cable_length', 'arm', 'k_tau', 'f_min',
                     'f_max', 'r_robot'):
            value = getattr(self, name)
            if isinstance(value, list):
                res[name] = len(value)
        if self.inertia and isinstance(self.inertia[0], list):
            res['inertia'] = len(self.inertia)
        return res

    @model_validator(mode='after')
    def validate_values(self: ConfigParamsSchema) -> ConfigParamsSchema:
        """
        Validates signs and motor bounds.
        """
        for name in ('uav_mass', 'cable_length', 'arm', 'r_robot'):
            value = getattr(self, name)
            values = value if isinstance(value, list) else [value]
            if any(x <= 0 for x in values):
                raise ValueError(f"'{name}' should be positive")

        f_min = self.f_min if isinstance(self.f_min, list) else [self.f_min]
        f_max = self.f_max if isinstance(self.f_max, list) else [self.f_max]
        if any(x < 0 for x in f_min):
            raise ValueError("'f_min' should be non-negative")
        if len(f_min) == 1:
            f_min = f_min * len(f_max)
        if len(f_max) == 1:
            f_max = f_max * len(f_min)
        # Length mismatches are reported against the number of multirotors
        if len(f_min) == len(f_max) \
                and any(lo >= hi for lo, hi in zip(f_min, f_max)):
            raise ValueError("'f_min' should be less than 'f_max'")

        triples: List[Any]
        if self.inertia and isinstance(self.inertia[0], list):
            triples = self.inertia
        else:
            triples = [self.inertia]
        for triple in triples:
            if not isinstance(triple, list) or len(triple) != 3 \
                    or any(x <= 0 for x in triple):
                raise ValueError(
                    "'inertia' should hold three positive entries"
                )

        return self


class ConfigWorkspaceSchema(BaseModel):
    """
    Class representing problem schema for the workspace box.
    """
    lo: Vector3
    hi: Vector3

    @model_validator(mode='after')
    def validate_extents(
        self: ConfigWorkspaceSchema
    ) -> ConfigWorkspaceSchema:
        """
        Validates the workspace is non-degenerate.
        """
        if any(lo >= hi for lo, hi in zip(self.lo, self.hi)):
            raise ValueError("'lo' should be below 'hi' on every axis")
        return self


class ConfigSphereSchema(BaseModel):
    """
    Class representing problem schema for a spherical obstacle.
    """
    shape: Literal['sphere']
    center: Vector3
    radius: PositiveFloat


class ConfigBoxSchema(BaseModel):
    """
    Class representing problem schema for an axis-aligned box obstacle.
    """
    shape: Literal['box']
    center: Vector3
    half_extents: Tuple[PositiveFloat, PositiveFloat, PositiveFloat]


class ConfigCylinderSchema(BaseModel):
    """
    Class representing problem schema for a vertical cylinder obstacle.
    """
    shape: Literal['cylinder']
    center: Vector3
    radius: PositiveFloat
    half_height: PositiveFloat


ConfigObstacleSchema = Annotated[
    Union[ConfigSphereSchema, ConfigBoxSchema, ConfigCylinderSchema],
    Field(discriminator='shape')
]


class ConfigEnvironmentSchema(BaseModel):
    """
    Class representing problem schema for the environment.
    """
    workspace: ConfigWorkspaceSchema
    obstacles: List[ConfigObstacleSchema] = []


class ConfigStartSchema(BaseModel):
    """
    Class representing problem schema for the start state: payload position
    and the cable formation.
    """
    p0: Vector3
    alpha: List[float]
    gamma: List[float]


class ConfigGoalSchema(BaseModel):
    """
    Class representing problem schema for the goal. Cable angles are
    optional, the last planned formation is used when omitted.
    """
    p0: Vector3
    alpha: Optional[List[float]] = None
    gamma: Optional[List[float]] = None

    @model_validator(mode='after')
    def validate_angles(self: ConfigGoalSchema) -> ConfigGoalSchema:
        """
        Validates cable angles are either both given or both omitted.
        """
        if (self.alpha is None) != (self.gamma is None):
            raise ValueError(
                "'alpha' and 'gamma' should be provided together"
            )
        return self


class ConfigPlannerSchema(BaseModel):
    """
    Class representing problem schema for the geometric planner.
    """
    timeout: PositiveFloat = DEFAULT_PLANNER_TIMEOUT
    max_samples: PositiveInt = DEFAULT_PLANNER_MAX_SAMPLES
    witnesses: PositiveInt = DEFAULT_PLANNER_WITNESSES
    attempts_per_witness: PositiveInt = DEFAULT_PLANNER_ATTEMPTS_PER_WITNESS
    sigma: NonNegativeFloat = DEFAULT_PLANNER_SIGMA
    goal_bias: float = Field(DEFAULT_PLANNER_GOAL_BIAS, ge=0, le=1)
    resolution: PositiveFloat = DEFAULT_PLANNER_RESOLUTION
    goal_tolerance: PositiveFloat = DEFAULT_PLANNER_GOAL_TOLERANCE
    max_step: PositiveFloat = DEFAULT_PLANNER_MAX_STEP
    rewire_factor: PositiveFloat = DEFAULT_PLANNER_REWIRE_FACTOR
    speed: PositiveFloat = DEFAULT_PLANNER_SPEED
    tilt_min: float = Field(DEFAULT_TILT_MIN, ge=0, lt=1)
    margin: NonNegativeFloat = DEFAULT_PLANNER_MARGIN
    seed: int = Field(DEFAULT_PLANNER_SEED, ge=0)
    sampler: str = DEFAULT_PLANNER_SAMPLER

    @field_validator('sampler', mode='after')
    @classmethod
    def validate_sampler(cls, value: str) -> str:
        """
        Validates sampler name.
        """
        if value not in PLANNER_SAMPLERS:
            valid_str = ', '.join([f"'{x}'" for x in PLANNER_SAMPLERS])
            raise ValueError(f'should be one of {valid_str}')
        return value


class ConfigOptimizerSchema(BaseModel):
    """
    Class representing problem schema for the trajectory optimizer.
    """
    dt0: PositiveFloat = DEFAULT_OPT_DT0
    beta1: NonNegativeFloat = DEFAULT_OPT_BETA1
    beta2: NonNegativeFloat = DEFAULT_OPT_BETA2
    w_goal: NonNegativeFloat = DEFAULT_OPT_W_GOAL
    w_bound: NonNegativeFloat = DEFAULT_OPT_W_BOUND
    w_coll: NonNegativeFloat = DEFAULT_OPT_W_COLL
    w_reg: NonNegativeFloat = DEFAULT_OPT_W_REG
    margin: NonNegativeFloat = DEFAULT_OPT_MARGIN
    omega_max: PositiveFloat = DEFAULT_OPT_OMEGA_MAX
    max_iters: PositiveInt = DEFAULT_OPT_MAX_ITERS
    tol: NonNegativeFloat = DEFAULT_OPT_TOL
    n_iters: PositiveInt = DEFAULT_OPT_N_ITERS
    shrink: float = Field(DEFAULT_OPT_SHRINK, gt=0, lt=1)
    dt_bracket: Tuple[PositiveFloat, PositiveFloat] = DEFAULT_OPT_DT_BRACKET
    golden_evals: int = Field(DEFAULT_OPT_GOLDEN_EVALS, ge=2)

    @model_validator(mode='after')
    def validate_bracket(
        self: ConfigOptimizerSchema
    ) -> ConfigOptimizerSchema:
        """
        Validates the time step bracket contains the nominal time step.
        """
        lower, upper = self.dt_bracket
        if not lower <= 1 <= upper:
            raise ValueError(
                "'dt_bracket' should be ordered and contain 1"
            )
        return self


class ConfigPowerSchema(BaseModel):
    """
    Class representing problem schema for the per-rotor power model.
    """
    p_idle: NonNegativeFloat = DEFAULT_POWER_P_IDLE
    p_slope: NonNegativeFloat = DEFAULT_POWER_P_SLOPE


class ConfigScenarioSchema(BaseModel):
    """
    Class representing provenance of a generated problem.
    """
    kind: str
    seed: int

    @field_validator('kind', mode='after')
    @classmethod
    def validate_kind(cls, value: str) -> str:
        """
        Validates scenario kind.
        """
        if value not in SCENARIO_KINDS:
            valid_str = ', '.join([f"'{x}'" for x in SCENARIO_KINDS])
            raise ValueError(f'should be one of {valid_str}')
        return value


class ProblemSchema(BaseModel):
    """
    Class representing problem file schema.
    """
    # Sections having defaults could be skipped
    general: ConfigGeneralSchema = (
        ConfigGeneralSchema.model_validate(DEFAULT_CONFIG_GENERAL)
    )
    params: ConfigParamsSchema = (
        ConfigParamsSchema.model_validate(DEFAULT_CONFIG_PARAMS)
    )
    environment: ConfigEnvironmentSchema
    start: ConfigStartSchema
    goal: ConfigGoalSchema
    planner: ConfigPlannerSchema = (
        ConfigPlannerSchema.model_validate(DEFAULT_CONFIG_PLANNER)
    )
    optimizer: ConfigOptimizerSchema = (
        ConfigOptimizerSchema.model_validate(DEFAULT_CONFIG_OPTIMIZER)
    )
    power: ConfigPowerSchema = (
        ConfigPowerSchema.model_validate(DEFAULT_CONFIG_POWER)
    )
    scenario: Optional[ConfigScenarioSchema] = None

    @property
    def n(self) -> int:
        """
        Number of multirotors, given by the start formation.
        """
        return len(self.start.alpha)

    @model_validator(mode='after')
    def validate_problem(self: ProblemSchema) -> ProblemSchema:
        """
        Validates cross-section consistency.
        """
        n = self.n
        if n < 2:
            raise ValueError('at least two multirotors are required')
        if len(self.start.gamma) != n:
            raise ValueError(
                "'start.alpha' and 'start.gamma' should have equal length"
            )
        if self.goal.alpha is not None and (
            len(self.goal.alpha) != n or len(self.goal.gamma or []) != n
        ):
            raise ValueError(f'goal cable angles should have {n} entries')
        for name, length in self.params.per_uav_lengths().items():
            if length != n:
                raise ValueError(
                    f"'params.{name}' should have {n} entries, got {length}"
                )

        workspace = self.environment.workspace
        for section in ('start', 'goal'):
            p0 = getattr(self, section).p0
            if any(not lo <= x <= hi
                   for x, lo, hi in zip(p0, workspace.lo, workspace.hi)):
                raise ValueError(
                    f"'{section}.p0' should be inside the workspace"
                )

        return self


class TrajectoryMetadataSchema(BaseModel):
    """
    Class representing the metadata sidecar of a trajectory file.
    """
    kind: Literal['trajectory', 'reference']
    dt: PositiveFloat
    n: int = Field(ge=2)
    samples: PositiveInt
    params: Dict[str, Any]
    columns: List[str]
    provenance: Dict[str, Any] = {}
    diagnostics: Dict[str, float] = {}
    version: str


class ValidationReport(BaseModel):
    """
    Class representing the outcome of trajectory validation.
    """
    header: str = REPORT_HEADER_NOTE
    success: bool
    defect: float
    min_sdf: float
    bound_violation: float
    goal_error: float
    duration: float
    energy_wh: float
    collision_free: bool
    reference_only: bool = False
    plan_time_geom_s: Optional[float] = None
    plan_time_opt_s: Optional[float] = None
    mode: Optional[str] = None
    environment: Optional[str] = None
    n: Optional[int] = None
    seed: Optional[int] = None
