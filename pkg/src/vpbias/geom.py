"""
Fixed-size 3-D linear algebra used by the attitude loop and the error oracles.

Vectors are ``numpy`` arrays of shape ``(3,)`` and matrices arrays of shape
``(3, 3)``. Every function returns a new array and never modifies its inputs.
Direction cosine matrices map body-frame vectors into the (NED) platform frame,
and Euler angles follow the aerospace Z-Y-X (heading, pitch, roll) sequence.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit
from numpy.typing import NDArray

Vec3 = NDArray[np.float64]
Mat3 = NDArray[np.float64]

I3 = np.eye(3)

# Newton-Schulz polar iteration only contracts for ||C^T C - I|| < 1.
_MAX_ORTHO_DEVIATION = 0.5
_ORTHO_TOL = 1e-14
_GIMBAL_MARGIN = 1e-6


class SingularMatrixError(ValueError):
    """Raised when a linear system is too close to singular to be trusted."""


class AttitudeCorruptedError(ValueError):
    """Raised when a DCM is a reflection or too far from a rotation to repair."""


class GimbalLockError(ValueError):
    """Raised when pitch is within the gimbal-lock margin of +/- pi/2."""


def vec3(x: float, y: float, z: float) -> Vec3:
    return np.array([x, y, z], dtype=float)


def skew(v: Vec3) -> Mat3:
    """
    Skew-symmetric matrix of a vector, so that ``skew(v) @ w == cross(v, w)``.
    """
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def ortho_error(C: Mat3) -> float:
    """Max-abs entry of ``C^T C - I``."""
    return float(np.max(np.abs(C.T @ C - I3)))


@njit(cache=True)
def _polar_iterate(C: Mat3) -> Mat3:
    # Newton-Schulz: C <- C (3I - C^T C) / 2 == C - C (C^T C - I) / 2
    for _ in range(8):
        E = C.T @ C - np.eye(3)
        if np.max(np.abs(E)) <= _ORTHO_TOL:
            break
        C = C - 0.5 * (C @ E)
    return C


@njit(cache=True)
def _det(C: Mat3) -> float:
    return (
        C[0, 0] * (C[1, 1] * C[2, 2] - C[1, 2] * C[2, 1])
        - C[0, 1] * (C[1, 0] * C[2, 2] - C[1, 2] * C[2, 0])
        + C[0, 2] * (C[1, 0] * C[2, 1] - C[1, 1] * C[2, 0])
    )


def orthonormalize(C: Mat3) -> Mat3:
    """
    Project a nearly orthonormal matrix onto the nearest rotation matrix.

    Uses the Newton-Schulz iteration ``C <- C (3I - C^T C) / 2``, which converges
    quadratically to the orthogonal polar factor of ``C`` (the Frobenius-nearest
    orthonormal matrix).

    Parameters
    ----------
    C : array_like, shape (3, 3)
        Matrix within roughly 1e-2 of orthonormal.

    Returns
    -------
    numpy.ndarray, shape (3, 3)
        Rotation matrix with ``||C^T C - I||_max`` below 1e-12.

    Raises
    ------
    AttitudeCorruptedError
        If ``det(C) <= 0`` or ``C`` is too far from orthonormal to repair.
    """
    C = np.array(C, dtype=float)
    if C.shape != (3, 3) or not np.all(np.isfinite(C)):
        raise AttitudeCorruptedError("DCM must be a finite 3x3 matrix")
    if _det(C) <= 0.0:
        raise AttitudeCorruptedError("DCM determinant is not positive")
    dev = ortho_error(C)
    if dev > _MAX_ORTHO_DEVIATION:
        raise AttitudeCorruptedError(f"DCM too far from orthonormal ({dev:.3g})")
    return _polar_iterate(C)


def rot_x(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(a: float) -> Mat3:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def dcm_from_euler(roll: float, pitch: float, heading: float) -> Mat3:
    """Body-to-NED DCM for Z-Y-X Euler angles in radians."""
    return rot_z(heading) @ rot_y(pitch) @ rot_x(roll)


def euler_from_dcm(C: Mat3) -> tuple[float, float, float]:
    """
    Z-Y-X Euler angles ``(roll, pitch, heading)`` of a body-to-NED DCM.

    Raises
    ------
    GimbalLockError
        If ``|pitch|`` is within 1e-6 rad of pi/2.
    """
    s = -float(C[2, 0])
    if abs(s) >= math.sin(0.5 * math.pi - _GIMBAL_MARGIN):
        raise GimbalLockError("pitch too close to +/- pi/2")
    roll = math.atan2(C[2, 1], C[2, 2])
    pitch = math.asin(s)
    heading = math.atan2(C[1, 0], C[0, 0])
    return roll, pitch, heading


def euler_series(C: NDArray[np.float64]) -> NDArray[np.float64]:
    """Vectorized :func:`euler_from_dcm` over a stack of DCMs, shape (N, 3)."""
    s = np.clip(-C[:, 2, 0], -1.0, 1.0)
    if np.any(np.abs(s) >= math.sin(0.5 * math.pi - _GIMBAL_MARGIN)):
        raise GimbalLockError("pitch too close to +/- pi/2")
    roll = np.arctan2(C[:, 2, 1], C[:, 2, 2])
    heading = np.arctan2(C[:, 1, 0], C[:, 0, 0])
    return np.stack([roll, np.arcsin(s), heading], axis=1)


def wrap_angle(a: float) -> float:
    """Wrap an angle to ``[-pi, pi)``."""
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def solve3(A: Mat3, b: Vec3) -> Vec3:
    """
    Solve the 3x3 system ``A x = b`` by Cramer's rule.

    Raises
    ------
    SingularMatrixError
        If ``|det A| <= 1e-12 * ||A||^3`` (Frobenius norm).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c0 = np.cross(A[1], A[2])
    c1 = np.cross(A[2], A[0])
    c2 = np.cross(A[0], A[1])
    det = float(A[0] @ c0)
    scale = float(np.linalg.norm(A))
    if not math.isfinite(det) or abs(det) <= 1e-12 * scale**3 or scale == 0.0:
        raise SingularMatrixError(f"matrix is singular or ill-conditioned (det={det:.3g})")
    # The adjugate's columns are the row cross products.
    x = (c0 * b[0] + c1 * b[1] + c2 * b[2]) / det
    return x
