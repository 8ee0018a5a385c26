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
Reference inputs of a downstream cable-force tracking controller (cable
tensions and reference cable forces) and the trajectory file format.

A trajectory file is a CSV table with one row per time step and a YAML
sidecar holding the time step, the system parameters and provenance.
"""
from __future__ import annotations
from typing import List, Tuple, Union, Optional, Dict, Any, Sequence
from dataclasses import dataclass, fields
from importlib.metadata import version, PackageNotFoundError
from pathlib import Path
import csv
import logging
import numpy as np
import numpy.typing as npt
import yaml
from pydantic import ValidationError
from .const import DEFAULT_QP_LAMBDA
from .exceptions import TrajectoryFileError
from .geom_planner import ReferenceTrajectory
from .model import (
    SystemParams, FullState, E3, continuous_dynamics,
)
from .schema import TrajectoryMetadataSchema
from .traj_opt import Trajectory

DoubleMatrix = npt.NDArray[np.float64]
Source = Union[Trajectory, ReferenceTrajectory]

_LOGGER = logging.getLogger(__name__)

DISTRIBUTION_NAME = 'cable-payload-planner'


@dataclass(frozen=True, eq=False)
class StepReference:
    """
    Reference quantities of one time step: payload acceleration and, per
    cable, direction, angular velocity and acceleration, direction rate,
    collective thrust and multirotor attitude.
    """
    a0: DoubleMatrix
    q: DoubleMatrix
    w: DoubleMatrix
    w_dot: DoubleMatrix
    q_dot: DoubleMatrix
    f_c: DoubleMatrix
    rot: DoubleMatrix


@dataclass(frozen=True, eq=False)
class ControllerReference:
    """
    Per-step, per-cable tensions ``(N, n)`` and reference cable forces
    ``(N, n, 3)``.
    """
    tension: DoubleMatrix
    mu0: DoubleMatrix

    def __post_init__(self) -> None:
        assert np.all(self.tension >= 0), 'Tensions should be non-negative'


def _trajectory_steps(
    traj: Trajectory, params: SystemParams
) -> List[StepReference]:
    res = []
    for k, x in enumerate(traj.xs):
        # Terminal state holds the last control
        u = traj.us[min(k, traj.horizon - 1)]
        deriv, acc = continuous_dynamics(x, u, params)
        res.append(StepReference(
            a0=acc.a0, q=x.q, w=x.w, w_dot=acc.dw, q_dot=deriv.q_dot,
            f_c=np.einsum('ij,ij->i', np.ones_like(u), u),
            rot=x.rotations(),
        ))
    return res


def _reference_steps(
    ref: ReferenceTrajectory, params: SystemParams
) -> List[StepReference]:
    n = ref.n
    if len(ref) > 1:
        accels = np.gradient(ref.v0, ref.dt, axis=0)
    else:
        accels = np.zeros_like(ref.v0)
    masses = params.masses
    lengths = params.lengths
    # Every multirotor hovers with its share of the payload
    f_c = (masses + params.payload_mass / n) * params.gravity
    rot = np.tile(np.eye(3), (n, 1, 1))
    zeros = np.zeros((n, 3))

    res = []
    for k in range(len(ref)):
        q = ref.q[k]
        s = accels[k] + params.gravity * E3
        w_dot = (
            np.cross(q, s) / lengths[:, None]
            - (f_c / (masses * lengths))[:, None] * np.cross(q, E3)
        )
        res.append(StepReference(
            a0=accels[k], q=q, w=zeros, w_dot=w_dot, q_dot=zeros, f_c=f_c,
            rot=rot,
        ))
    return res


def step_references(
    source: Source, params: SystemParams
) -> List[StepReference]:
    """
    Reference quantities of every step. Optimized trajectories use their own
    dynamics and controls; geometric references assume hovering multirotors,
    zero cable rates and level attitudes.

    :param source: Optimized trajectory or geometric reference
    :param params: System parameters
    :return: One entry per state
    """
    if isinstance(source, Trajectory):
        return _trajectory_steps(source, params)
    return _reference_steps(source, params)


def uav_reference_acceleration(
    step: StepReference, i: int, params: SystemParams
) -> DoubleMatrix:
    """
    Reference acceleration of multirotor ``i``, the second derivative of
    ``p0 - l_i q_i``.

    :param step: Step reference
    :param i: Multirotor index
    :param params: System parameters
    :return: Acceleration, m/s^2
    """
    length = float(params.lengths[i])
    return step.a0 - length * (
        np.cross(step.w_dot[i], step.q[i]) + np.cross(step.w[i], step.q_dot[i])
    )


def cable_tension(
    step: StepReference, i: int, params: SystemParams
) -> float:
    """
    Tension of cable ``i`` balancing the multirotor inertia, gravity and
    thrust.

    :param step: Step reference
    :param i: Multirotor index
    :param params: System parameters
    :return: Tension, N
    """
    accel = uav_reference_acceleration(step, i, params)
    force = (
        float(params.masses[i]) * (accel + params.gravity * E3)
        - step.f_c[i] * step.rot[i] @ E3
    )
    return float(np.linalg.norm(force))


def reference_cable_forces(
    source: Source, params: SystemParams
) -> ControllerReference:
    """
    Reference cable forces ``mu0_i = -T_i q_i`` of every step.

    :param source: Optimized trajectory or geometric reference
    :param params: System parameters
    :return: Tensions and reference cable forces
    """
    steps = step_references(source, params)
    n = params.n
    tension = np.array([
        [cable_tension(step, i, params) for i in range(n)] for step in steps
    ])
    q = np.stack([step.q for step in steps])
    return ControllerReference(tension=tension, mu0=-tension[:, :, None] * q)


def qp_tracking_cost(
    mu_d: Sequence[npt.ArrayLike], mu0: Sequence[npt.ArrayLike],
    lam: float = DEFAULT_QP_LAMBDA
) -> float:
    """
    Cost of the cable force allocation of a tracking controller: force norms
    plus deviation from the reference cable forces.

    :param mu_d: Desired cable forces, one 3-vector per cable
    :param mu0: Reference cable forces
    :param lam: Weight of the deviation term
    :return: Cost
    """
    desired = np.asarray(mu_d, dtype=float).reshape(-1, 3)
    reference = np.asarray(mu0, dtype=float).reshape(-1, 3)
    assert desired.shape == reference.shape, 'Force lists should match'
    return float(
        0.5 * np.sum(desired ** 2) + lam * np.sum((reference - desired) ** 2)
    )


def system_params_dict(params: SystemParams) -> Dict[str, Any]:
    """
    Plain representation of system parameters, inverse of
    ``SystemParams(**value)``.
    """
    res: Dict[str, Any] = {}
    for item in fields(params):
        value = getattr(params, item.name)
        res[item.name] = (
            value.tolist() if isinstance(value, (np.ndarray, np.generic))
            else value
        )
    return res


def package_version() -> str:
    """
    Version of the installed package.
    """
    try:
        return version(DISTRIBUTION_NAME)
    except PackageNotFoundError:
        return '0.0.0+unknown'


def trajectory_columns(n: int) -> List[str]:
    """
    Column names of the trajectory file for ``n`` multirotors.
    """
    axes = ('x', 'y', 'z')
    res = ['t']
    res += [f'p0_{a}' for a in axes] + [f'v0_{a}' for a in axes]
    for i in range(n):
        res += [f'q{i}_{a}' for a in axes] + [f'w{i}_{a}' for a in axes]
    for i in range(n):
        res += [f'quat{i}_{a}' for a in ('x', 'y', 'z', 'w')]
        res += [f'omega{i}_{a}' for a in axes]
    for i in range(n):
        res += [f'f{i}_{j}' for j in range(1, 5)]
    for i in range(n):
        res += [f'mu{i}_{a}' for a in axes] + [f'T{i}']
    return res


def _states(source: Source) -> List[FullState]:
    if isinstance(source, Trajectory):
        return source.xs
    return source.full_states()


def export_trajectory(
    source: Source, path: Union[str, Path], params: SystemParams,
    provenance: Optional[Dict[str, Any]] = None
) -> Path:
    """
    Writes a trajectory file and its metadata sidecar (same name, ``.yaml``
    suffix). Floats are written in their shortest exact representation.

    :param source: Optimized trajectory or geometric reference
    :param path: CSV file name
    :param params: System parameters
    :param provenance: Free-form provenance (mode, seed, ...)
    :return: Path of the metadata sidecar
    :raises TrajectoryFileError: Trajectory is empty or cannot be written
    """
    path = Path(path)
    kind = 'trajectory' if isinstance(source, Trajectory) else 'reference'
    if (isinstance(source, Trajectory) and source.horizon == 0) \
            or len(_states(source)) == 0:
        raise TrajectoryFileError(
            f"Refusing to write empty {kind} to '{path}'"
        )

    states = _states(source)
    forces = reference_cable_forces(source, params)
    n = params.n
    columns = trajectory_columns(n)
    dt = source.dt
    diagnostics: Dict[str, float] = {}
    if isinstance(source, Trajectory):
        diagnostics = dict(
            cost=float(source.cost), defect=float(source.defect),
            min_sdf=float(source.min_sdf),
            goal_error=float(source.goal_error),
        )

    rows = []
    for k, x in enumerate(states):
        row: List[Any] = [k * dt]
        row += x.p0.tolist() + x.v0.tolist()
        for i in range(n):
            row += x.q[i].tolist() + x.w[i].tolist()
        for i in range(n):
            row += x.quat[i].tolist() + x.omega[i].tolist()
        if isinstance(source, Trajectory) and k < source.horizon:
            row += source.us[k].ravel().tolist()
        else:
            row += [''] * (4 * n)
        for i in range(n):
            row += forces.mu0[k, i].tolist() + [float(forces.tension[k, i])]
        rows.append([repr(float(v)) if v != '' else v for v in row])

    metadata = TrajectoryMetadataSchema(
        kind=kind, dt=dt, n=n, samples=len(states),
        params=system_params_dict(params), columns=columns,
        provenance=provenance or {}, diagnostics=diagnostics,
        version=package_version(),
    )
    sidecar = path.with_suffix('.yaml')
    try:
        with open(path, 'w', encoding='ascii', newline='') as file:
            writer = csv.writer(file)
            writer.writerow(columns)
            writer.writerows(rows)
        with open(sidecar, 'w', encoding='ascii') as file:
            yaml.safe_dump(metadata.model_dump(), file,
                           sort_keys=False)
    except OSError as exc:
        raise TrajectoryFileError(
            f"Error writing trajectory file '{path}':\n{str(exc)}"
        ) from None
    _LOGGER.debug("Written %s of %s steps to '%s'", kind, len(states), path)
    return sidecar


def _read_metadata(sidecar: Path) -> TrajectoryMetadataSchema:
    try:
        with open(sidecar, encoding='ascii') as file:
            content = yaml.safe_load(file)
    except (yaml.YAMLError, OSError) as exc:
        raise TrajectoryFileError(
            f'Error loading trajectory metadata:\n{str(exc)}'
        ) from None
    try:
        return TrajectoryMetadataSchema.model_validate(content)
    except ValidationError as exc:
        errors = [
            f"{'.'.join([str(y) for y in x['loc']])}: {x['msg']}"
            for x in exc.errors()
        ]
        raise TrajectoryFileError(
            'Error validating trajectory metadata:\n' + '\n'.join(errors)
        ) from None


def load_trajectory(
    path: Union[str, Path]
) -> Tuple[Source, TrajectoryMetadataSchema]:
    """
    Reads a trajectory file written by :func:`export_trajectory`.

    :param path: CSV file name
    :return: Trajectory or reference, and the metadata
    :raises TrajectoryFileError: File is missing or malformed
    """
    # pylint: disable=too-many-locals
    path = Path(path)
    metadata = _read_metadata(path.with_suffix('.yaml'))
    n = metadata.n
    try:
        with open(path, encoding='ascii', newline='') as file:
            reader = csv.reader(file)
            header = next(reader)
            body = list(reader)
    except (OSError, StopIteration) as exc:
        raise TrajectoryFileError(
            f"Error reading trajectory file '{path}': {exc!r}"
        ) from None
    if header != metadata.columns or len(body) != metadata.samples:
        raise TrajectoryFileError(
            f"Trajectory file '{path}' does not match its metadata"
        )

    index = {name: idx for idx, name in enumerate(header)}

    def block(row: List[str], names: List[str]) -> DoubleMatrix:
        return np.array([float(row[index[x]]) for x in names])

    axes = ('x', 'y', 'z')
    try:
        states = []
        motors = []
        for row in body:
            states.append(FullState(
                p0=block(row, [f'p0_{a}' for a in axes]),
                v0=block(row, [f'v0_{a}' for a in axes]),
                q=np.stack([block(row, [f'q{i}_{a}' for a in axes])
                            for i in range(n)]),
                w=np.stack([block(row, [f'w{i}_{a}' for a in axes])
                            for i in range(n)]),
                quat=np.stack([
                    block(row, [f'quat{i}_{a}' for a in ('x', 'y', 'z', 'w')])
                    for i in range(n)
                ]),
                omega=np.stack([block(row, [f'omega{i}_{a}' for a in axes])
                                for i in range(n)]),
            ))
            if row[index['f0_1']] != '':
                motors.append(np.stack([
                    block(row, [f'f{i}_{j}' for j in range(1, 5)])
                    for i in range(n)
                ]))
    except (ValueError, KeyError, IndexError) as exc:
        raise TrajectoryFileError(
            f"Malformed trajectory file '{path}': {exc!r}"
        ) from None

    if metadata.kind == 'reference':
        return ReferenceTrajectory(
            dt=metadata.dt, p0=np.stack([x.p0 for x in states]),
            v0=np.stack([x.v0 for x in states]),
            q=np.stack([x.q for x in states]),
        ), metadata

    if len(motors) != len(states) - 1:
        raise TrajectoryFileError(
            f"Trajectory file '{path}' should have controls on all but the"
            ' last row'
        )
    diagnostics = metadata.diagnostics
    return Trajectory(
        dt=metadata.dt, xs=states, us=np.stack(motors),
        cost=diagnostics.get('cost', float('nan')),
        defect=diagnostics.get('defect', 0.0),
        min_sdf=diagnostics.get('min_sdf', float('inf')),
        goal_error=diagnostics.get('goal_error', float('nan')),
    ), metadata
