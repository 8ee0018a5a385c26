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
Module to hold various constants
"""
import logging

LOGGING_LEVELS = dict(
    critical=logging.CRITICAL,
    error=logging.ERROR,
    warning=logging.WARNING,
    info=logging.INFO,
    debug=logging.DEBUG,
)

# Environment variables overriding the problem file
ENV_WORKERS = 'CABLE_PAYLOAD_WORKERS'
ENV_LOGGING_LEVEL = 'CABLE_PAYLOAD_LOGGING_LEVEL'

DEFAULT_CONFIG_GENERAL_LOGGING_LEVEL = 'error'
DEFAULT_CONFIG_GENERAL_WORKERS = 1
DEFAULT_CONFIG_GENERAL = dict(
    logging_level=DEFAULT_CONFIG_GENERAL_LOGGING_LEVEL,
    workers=DEFAULT_CONFIG_GENERAL_WORKERS,
)

# Desk-scale platform, SI units
GRAVITY = 9.81
DEFAULT_UAV_MASS = 0.034
DEFAULT_PAYLOAD_MASS = 0.01
DEFAULT_CABLE_LENGTH = 0.5
DEFAULT_INERTIA = (16.57e-6, 16.66e-6, 29.26e-6)
DEFAULT_ARM_LENGTH = 0.046
DEFAULT_K_TAU = 0.006
DEFAULT_F_MIN = 0.0
DEFAULT_F_MAX = 0.14
DEFAULT_R_ROBOT = 0.1
DEFAULT_R_PAYLOAD = 0.01
DEFAULT_R_CABLE = 0.005
# Cable-vs-cable pairs ignore this much of every cable next to the payload,
# where all cables meet by construction
DEFAULT_CABLE_JOINT_OFFSET = 0.1
DEFAULT_CONFIG_PARAMS = dict(
    payload_mass=DEFAULT_PAYLOAD_MASS,
    uav_mass=DEFAULT_UAV_MASS,
    inertia=list(DEFAULT_INERTIA),
    cable_length=DEFAULT_CABLE_LENGTH,
    arm=DEFAULT_ARM_LENGTH,
    k_tau=DEFAULT_K_TAU,
    f_min=DEFAULT_F_MIN,
    f_max=DEFAULT_F_MAX,
    r_robot=DEFAULT_R_ROBOT,
    r_payload=DEFAULT_R_PAYLOAD,
    r_cable=DEFAULT_R_CABLE,
    cable_joint_offset=DEFAULT_CABLE_JOINT_OFFSET,
    gravity=GRAVITY,
)

# Geometric planner
DEFAULT_TILT_MIN = 0.1
DEFAULT_EDGE_COST_BETA = 0.5
DEFAULT_PLANNER_TIMEOUT = 60.0
DEFAULT_PLANNER_MAX_SAMPLES = 2000
DEFAULT_PLANNER_WITNESSES = 10
DEFAULT_PLANNER_ATTEMPTS_PER_WITNESS = 1000
DEFAULT_PLANNER_SIGMA = 0.2
DEFAULT_PLANNER_GOAL_BIAS = 0.1
DEFAULT_PLANNER_RESOLUTION = 0.02
DEFAULT_PLANNER_GOAL_TOLERANCE = 0.05
DEFAULT_PLANNER_MAX_STEP = 0.5
DEFAULT_PLANNER_REWIRE_FACTOR = 2.0
DEFAULT_PLANNER_SPEED = 0.5
DEFAULT_PLANNER_MARGIN = 0.0
DEFAULT_PLANNER_SEED = 0
DEFAULT_PLANNER_SAMPLER = 'witness'
PLANNER_SAMPLERS = ('witness', 'uniform')
DEFAULT_CONFIG_PLANNER = dict(
    timeout=DEFAULT_PLANNER_TIMEOUT,
    max_samples=DEFAULT_PLANNER_MAX_SAMPLES,
    witnesses=DEFAULT_PLANNER_WITNESSES,
    attempts_per_witness=DEFAULT_PLANNER_ATTEMPTS_PER_WITNESS,
    sigma=DEFAULT_PLANNER_SIGMA,
    goal_bias=DEFAULT_PLANNER_GOAL_BIAS,
    resolution=DEFAULT_PLANNER_RESOLUTION,
    goal_tolerance=DEFAULT_PLANNER_GOAL_TOLERANCE,
    max_step=DEFAULT_PLANNER_MAX_STEP,
    rewire_factor=DEFAULT_PLANNER_REWIRE_FACTOR,
    speed=DEFAULT_PLANNER_SPEED,
    tilt_min=DEFAULT_TILT_MIN,
    margin=DEFAULT_PLANNER_MARGIN,
    seed=DEFAULT_PLANNER_SEED,
    sampler=DEFAULT_PLANNER_SAMPLER,
)

# Trajectory optimizer
DEFAULT_OPT_DT0 = 0.01
DEFAULT_OPT_BETA1 = 1e-4
DEFAULT_OPT_BETA2 = 1e-6
DEFAULT_OPT_W_GOAL = 1e3
DEFAULT_OPT_W_BOUND = 1e2
DEFAULT_OPT_W_COLL = 1e3
DEFAULT_OPT_W_REG = 1.0
DEFAULT_OPT_MARGIN = 0.02
DEFAULT_OPT_OMEGA_MAX = 20.0
DEFAULT_OPT_MAX_ITERS = 500
DEFAULT_OPT_TOL = 1e-6
DEFAULT_OPT_N_ITERS = 1
DEFAULT_OPT_SHRINK = 0.9
DEFAULT_OPT_DT_BRACKET = (0.2, 5.0)
DEFAULT_OPT_GOLDEN_EVALS = 20
DEFAULT_OPT_MAX_OUTER = 10
DEFAULT_OPT_ESCALATION = 10.0
DEFAULT_CONFIG_OPTIMIZER = dict(
    dt0=DEFAULT_OPT_DT0,
    beta1=DEFAULT_OPT_BETA1,
    beta2=DEFAULT_OPT_BETA2,
    w_goal=DEFAULT_OPT_W_GOAL,
    w_bound=DEFAULT_OPT_W_BOUND,
    w_coll=DEFAULT_OPT_W_COLL,
    w_reg=DEFAULT_OPT_W_REG,
    margin=DEFAULT_OPT_MARGIN,
    omega_max=DEFAULT_OPT_OMEGA_MAX,
    max_iters=DEFAULT_OPT_MAX_ITERS,
    tol=DEFAULT_OPT_TOL,
    n_iters=DEFAULT_OPT_N_ITERS,
    shrink=DEFAULT_OPT_SHRINK,
    dt_bracket=list(DEFAULT_OPT_DT_BRACKET),
    golden_evals=DEFAULT_OPT_GOLDEN_EVALS,
)
# Weights of the tracking pass that turns a geometric guess into a
# dynamically consistent first iterate, per tangent block
DEFAULT_GUESS_TRACKING_WEIGHTS = dict(
    p0=100.0, v0=1.0, q=10.0, w=0.1, theta=1.0, omega=0.01, u=1.0,
)

# DDP internals
DDP_REG_INIT = 1e-6
DDP_REG_MIN = 1e-9
DDP_REG_MAX = 1e10
DDP_REG_FACTOR = 10.0
DDP_LINE_SEARCH_STEPS = 11

# Energy model, per rotor
DEFAULT_POWER_P_IDLE = 1.8
DEFAULT_POWER_P_SLOPE = 20.0
DEFAULT_CONFIG_POWER = dict(
    p_idle=DEFAULT_POWER_P_IDLE,
    p_slope=DEFAULT_POWER_P_SLOPE,
)

# Validation thresholds
VALIDATION_MAX_DEFECT = 1e-6
VALIDATION_MAX_BOUND_VIOLATION = 1e-3
# Reference-cable-force tracking weight
DEFAULT_QP_LAMBDA = 100.0

# Scenario generation
SCENARIO_KINDS = ('empty', 'forest', 'window')
SCENARIO_MIN_ROBOTS = 2
SCENARIO_MAX_ROBOTS = 6
SCENARIO_START_ELEVATION = 0.7853981633974483
SCENARIO_HEIGHT = 2.5
SCENARIO_FOREST_CYLINDERS = 8
SCENARIO_FOREST_RADIUS = 0.1
SCENARIO_FOREST_FOOTPRINT = 4.0
SCENARIO_FOREST_CLEARANCE = 0.6
SCENARIO_WINDOW_HALF_WIDTH = (0.4, 0.5)
SCENARIO_WINDOW_THICKNESS = 0.1

# CLI exit codes
EXIT_SUCCESS = 0
EXIT_NO_SOLUTION = 2
EXIT_VALIDATION_FAILURE = 3
EXIT_BAD_INPUT = 4

REPORT_HEADER_NOTE = (
    'success means reference feasibility under the validator thresholds;'
    ' closed-loop tracking is not evaluated'
)
