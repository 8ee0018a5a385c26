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
Helpers for rotations and unit vectors: skew-symmetric matrices, exponential
and logarithm maps of SO(3), right Jacobians and quaternion arithmetic.

Quaternions are stored scalar-last, ``(x, y, z, w)``, matching
:class:`scipy.spatial.transform.Rotation`.
"""
from __future__ import annotations
import numpy as np
import numpy.typing as npt
from scipy.spatial.transform import Rotation

DoubleMatrix = npt.NDArray[np.float64]

# Below this angle the series expansions are used
_SMALL_ANGLE = 1e-6


def hat(vec: DoubleMatrix) -> DoubleMatrix:
    """
    Returns skew-symmetric matrix of 3-vector, so that ``hat(a) @ b`` equals
    ``cross(a, b)``.

    :param vec: 3-vector
    :return: 3x3 matrix
    """
    return np.array([
        [0.0, -vec[2], vec[1]],
        [vec[2], 0.0, -vec[0]],
        [-vec[1], vec[0], 0.0],
    ])


def so3_exp(phi: DoubleMatrix) -> DoubleMatrix:
    """
    Exponential map of SO(3) (Rodrigues formula).

    :param phi: Rotation vector
    :return: Rotation matrix
    """
    angle = float(np.linalg.norm(phi))
    skew = hat(phi)
    if angle < _SMALL_ANGLE:
        return np.eye(3) + skew + 0.5 * skew @ skew
    one_minus_cos = 2.0 * np.sin(angle / 2) ** 2
    return (
        np.eye(3) + np.sin(angle) / angle * skew
        + one_minus_cos / angle ** 2 * skew @ skew
    )


def so3_log(rot: DoubleMatrix) -> DoubleMatrix:
    """
    Logarithm map of SO(3).

    :param rot: Rotation matrix
    :return: Rotation vector with norm in ``[0, pi]``
    """
    return np.asarray(Rotation.from_matrix(rot).as_rotvec(), dtype=float)


def right_jacobian(phi: DoubleMatrix) -> DoubleMatrix:
    """
    Right Jacobian of SO(3), ``Exp(phi + d) ~ Exp(phi) Exp(Jr(phi) d)``.

    :param phi: Rotation vector
    :return: 3x3 matrix
    """
    angle = float(np.linalg.norm(phi))
    skew = hat(phi)
    if angle < _SMALL_ANGLE:
        return np.eye(3) - 0.5 * skew + skew @ skew / 6.0
    one_minus_cos = 2.0 * np.sin(angle / 2) ** 2
    return (
        np.eye(3) - one_minus_cos / angle ** 2 * skew
        + (angle - np.sin(angle)) / angle ** 3 * skew @ skew
    )


def right_jacobian_inv(phi: DoubleMatrix) -> DoubleMatrix:
    """
    Inverse of :func:`right_jacobian`,
    ``Log(Exp(phi) Exp(d)) ~ phi + Jr_inv(phi) d``.

    :param phi: Rotation vector
    :return: 3x3 matrix
    """
    angle = float(np.linalg.norm(phi))
    skew = hat(phi)
    if angle < _SMALL_ANGLE:
        return np.eye(3) + 0.5 * skew + skew @ skew / 12.0
    coef = (
        1.0 / angle ** 2
        - (1.0 + np.cos(angle)) / (2.0 * angle * np.sin(angle))
    )
    return np.eye(3) + 0.5 * skew + coef * skew @ skew


def quat_exp(phi: DoubleMatrix) -> DoubleMatrix:
    """
    Quaternion of the rotation by vector ``phi``.

    :param phi: Rotation vector
    :return: Unit quaternion, scalar-last
    """
    angle = float(np.linalg.norm(phi))
    if angle < _SMALL_ANGLE:
        # sin(a/2)/a series
        coef = 0.5 - angle ** 2 / 48.0
    else:
        coef = np.sin(angle / 2) / angle
    return np.array([
        coef * phi[0], coef * phi[1], coef * phi[2], np.cos(angle / 2)
    ])


def quat_multiply(lhs: DoubleMatrix, rhs: DoubleMatrix) -> DoubleMatrix:
    """
    Hamilton product of two scalar-last quaternions.

    :param lhs: Left operand
    :param rhs: Right operand
    :return: Product ``lhs * rhs``
    """
    x1, y1, z1, w1 = lhs
    x2, y2, z2, w2 = rhs
    return np.array([
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
    ])


def quat_to_matrix(quat: DoubleMatrix) -> DoubleMatrix:
    """
    Rotation matrices of one or many scalar-last quaternions.

    :param quat: Array of shape ``(4,)`` or ``(k, 4)``
    :return: Array of shape ``(3, 3)`` or ``(k, 3, 3)``
    """
    return np.asarray(Rotation.from_quat(quat).as_matrix(), dtype=float)


def matrix_to_quat(rot: DoubleMatrix) -> DoubleMatrix:
    """
    Scalar-last quaternion of rotation matrix, with non-negative scalar part.

    :param rot: Array of shape ``(3, 3)`` or ``(k, 3, 3)``
    :return: Array of shape ``(4,)`` or ``(k, 4)``
    """
    quat = np.asarray(Rotation.from_matrix(rot).as_quat(), dtype=float)
    sign = np.where(quat[..., 3:] < 0, -1.0, 1.0)
    return quat * sign


def rotate_unit(vec: DoubleMatrix, phi: DoubleMatrix) -> DoubleMatrix:
    """
    Rotates a unit vector by the rotation vector ``phi`` and renormalizes it.

    :param vec: Unit 3-vector
    :param phi: Rotation vector
    :return: Rotated unit vector
    """
    res = so3_exp(phi) @ vec
    return res / np.linalg.norm(res)


def tangent_projector(vec: DoubleMatrix) -> DoubleMatrix:
    """
    Projector onto the tangent plane of the unit sphere at ``vec``.

    :param vec: Unit 3-vector
    :return: ``I - vec vec^T``
    """
    return np.eye(3) - np.outer(vec, vec)
