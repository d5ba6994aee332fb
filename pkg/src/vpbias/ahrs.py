"""
Strapdown AHRS built around a virtual platform.

The DCM ``C`` maps body-frame vectors onto a computed, nominally level NED
platform. It is propagated with the gyro rate and counter-rotated by the
platform torquing rate::

    dC/dt = C [w_b x] - [w_p x] C

The torquing rate comes from the horizontal mismatch between the specific
force projected through ``C`` and the specific force supplied by the external
aid. Its body-frame image ``u = C^T w_p`` is the signal the bias estimator
works from.

The aid arrives at a lower rate than the IMU and is already averaged over its
sample interval (and optionally low-passed). To keep the comparison free of
that latency, the projected specific force is run through the same averaging
and low-pass before it is differenced against the aid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .geom import (
    AttitudeCorruptedError,
    Mat3,
    Vec3,
    _det,
    _polar_iterate,
    dcm_from_euler,
    orthonormalize,
    wrap_angle,
)


class TimestampError(ValueError):
    """Raised when samples are not strictly increasing in time."""


# Sanity bounds for a land vehicle.
MAX_RATE = 20.0  # rad/s
MAX_FORCE_G = 20.0  # multiples of g


@dataclass(frozen=True)
class ImuSample:
    """Body-frame gyro rate (rad/s) and specific force (m/s^2) at time ``t``."""

    t: float
    omega_b: Vec3
    f_b: Vec3


@dataclass(frozen=True)
class AidSample:
    """Navigation-frame specific force from the external aid at time ``t``."""

    t: float
    f_ext: Vec3


@dataclass(frozen=True)
class AhrsConfig:
    """
    Attitude-loop settings.

    Parameters
    ----------
    tau_att : float
        Attitude correction time constant in seconds. The correction gain is
        ``k = 1 / (tau_att * g)``.
    g : float
        Local gravity magnitude in m/s^2.
    heading_gain : float
        Proportional gain (1/s) slaving the heading to the aid course.
    aid_smoothing : float
        Time constant (s) of the low-pass applied to the aid specific force.
        The projected specific force is filtered identically. 0 disables it.
    stale_after : float
        Age (s) beyond which a held aid sample no longer drives the loop.
    """

    tau_att: float = 4.0
    g: float = 9.81
    heading_gain: float = 1.0
    aid_smoothing: float = 0.2
    stale_after: float = 0.5

    def __post_init__(self) -> None:
        if not self.tau_att > 0.0:
            raise ValueError(f"tau_att must be positive, got {self.tau_att}")
        if not self.g > 0.0:
            raise ValueError(f"g must be positive, got {self.g}")
        if not self.heading_gain >= 0.0:
            raise ValueError(f"heading_gain must be non-negative, got {self.heading_gain}")
        if not self.aid_smoothing >= 0.0:
            raise ValueError(f"aid_smoothing must be non-negative, got {self.aid_smoothing}")
        if not self.stale_after > 0.0:
            raise ValueError(f"stale_after must be positive, got {self.stale_after}")

    @classmethod
    def from_gain(cls, k: float, g: float = 9.81, **kwargs) -> AhrsConfig:
        if not k > 0.0:
            raise ValueError(f"k must be positive, got {k}")
        return cls(tau_att=1.0 / (k * g), g=g, **kwargs)

    @property
    def k(self) -> float:
        return 1.0 / (self.tau_att * self.g)

    @property
    def kg(self) -> float:
        return 1.0 / self.tau_att

    @property
    def k_p(self) -> Vec3:
        """Gain vector ``-k g_vec / g``; points up in NED."""
        return np.array([0.0, 0.0, -self.k])


_ZERO = np.zeros(3)


@dataclass(frozen=True)
class AhrsState:
    """
    Attitude-loop state.

    ``C`` is the body-to-platform DCM, ``u`` the latest body-frame torque
    measurement (rad/s) and ``stale`` tells whether ``u`` was refreshed by a
    live aid on the last step. The remaining fields hold the matched
    specific-force filter and the sample-and-hold of the last aid.
    """

    C: Mat3
    t: float
    u: Vec3 = field(default_factory=lambda: _ZERO.copy())
    stale: bool = True
    f_acc: Vec3 = field(default_factory=lambda: _ZERO.copy())
    acc_time: float = 0.0
    f_matched: Vec3 | None = None
    t_aid: float | None = None
    omega_corr: Vec3 = field(default_factory=lambda: _ZERO.copy())
    omega_head: Vec3 = field(default_factory=lambda: _ZERO.copy())

    @property
    def heading(self) -> float:
        return heading_of(self.C)


def heading_of(C: Mat3) -> float:
    return math.atan2(C[1, 0], C[0, 0])


def initial_state(t: float, C: Mat3) -> AhrsState:
    return AhrsState(C=orthonormalize(C), t=t)


def level_dcm(f_b: Vec3, heading: float) -> Mat3:
    """Coarse-leveling DCM from one specific-force sample and a heading."""
    fx, fy, fz = f_b
    roll = math.atan2(-fy, -fz)
    pitch = math.atan2(fx, math.hypot(fy, fz))
    return dcm_from_euler(roll, pitch, heading)


def project_force(C: Mat3, f_b: Vec3) -> Vec3:
    """Project body specific force onto the platform, ``f_p = C f_b``."""
    return C @ f_b


def correction_rate(f_ext: Vec3, f_p: Vec3, cfg: AhrsConfig) -> Vec3:
    """
    Platform torquing rate ``w_p = -k_p x (f_ext - f_p)``.

    With ``k_p`` vertical the result is always horizontal: a vertical
    discrepancy produces no torque.
    """
    k = cfg.k
    dx = f_ext[0] - f_p[0]
    dy = f_ext[1] - f_p[1]
    # -(0, 0, -k) x (dx, dy, dz)
    return np.array([-k * dy, k * dx, 0.0])


def heading_slave_rate(C: Mat3, course_aid: float, cfg: AhrsConfig) -> Vec3:
    """Vertical platform rate that drives ``heading(C)`` toward ``course_aid``."""
    if cfg.heading_gain == 0.0:
        return np.zeros(3)
    err = wrap_angle(heading_of(C) - course_aid)
    return np.array([0.0, 0.0, cfg.heading_gain * err])


@njit(cache=True)
def _rotation_factors(wx, wy, wz, dt):
    """
    Exponential and interval mean of ``[w x]`` held for ``dt``.

    Returns ``exp(B)`` and ``(1/dt) * integral_0^dt exp([w x] s) ds`` with
    ``B = [w x] dt``, both from the closed-form Rodrigues series.
    """
    B = np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]]) * dt
    B2 = B @ B
    phi2 = (wx * wx + wy * wy + wz * wz) * dt * dt
    if phi2 < 1e-8:
        # Truncated series; the first omitted terms are below 1e-17.
        s1 = 1.0 - phi2 / 6.0
        c1 = 0.5 - phi2 / 24.0
        c2 = 1.0 / 6.0 - phi2 / 120.0
    else:
        phi = math.sqrt(phi2)
        s1 = math.sin(phi) / phi
        c1 = (1.0 - math.cos(phi)) / phi2
        c2 = (phi - math.sin(phi)) / (phi2 * phi)
    E = np.eye(3) + s1 * B + c1 * B2
    M = np.eye(3) + c1 * B + c2 * B2
    return E, M


@njit(cache=True)
def _propagate(C, omega_b, omega_p, f_b, dt):
    """Exact DCM update for rates held over the step, then re-orthonormalization.

    ``dC/dt = C [w_b x] - [w_p x] C`` with constant rates is solved by
    ``exp(-[w_p x] dt) C exp([w_b x] dt)``. Returns the new DCM, the mean of
    ``C(t) f_b`` over the step, and the determinant before repair.
    """
    Eb, Mb = _rotation_factors(omega_b[0], omega_b[1], omega_b[2], dt)
    Ep, Mp = _rotation_factors(-omega_p[0], -omega_p[1], -omega_p[2], dt)
    C_new = Ep @ C @ Eb
    det = _det(C_new)
    if det > 0.0:
        C_new = _polar_iterate(C_new)
    f_p = Mp @ (C @ (Mb @ f_b))
    return C_new, f_p, det


def step(
    state: AhrsState,
    imu: ImuSample,
    aid: AidSample | None,
    course: float | None,
    cfg: AhrsConfig,
    dt: float | None = None,
) -> AhrsState:
    """
    Advance the attitude loop by one IMU sample.

    Parameters
    ----------
    state : AhrsState
        State at ``state.t``.
    imu : ImuSample
        Sample at the end of the step, ``imu.t > state.t``.
    aid : AidSample, optional
        Newest available aid sample. A sample whose time is not later than the
        one already held is ignored, so the caller may pass the same sample on
        every step (sample-and-hold).
    course : float, optional
        Course over ground (rad) belonging to ``aid``; ``None`` when the
        vehicle is too slow for the course to be meaningful.
    cfg : AhrsConfig
    dt : float, optional
        Step length; defaults to ``imu.t - state.t``.

    Returns
    -------
    AhrsState
        State at ``imu.t``. When the held aid is older than ``cfg.stale_after``
        the DCM is propagated open loop and ``u`` is left unchanged with
        ``stale=True``.
    """
    if not imu.t > state.t:
        raise TimestampError(f"IMU time {imu.t!r} does not advance past {state.t!r}")
    if dt is None:
        dt = imu.t - state.t
    if not 0.0 < dt <= 0.1 + 1e-9:
        raise ValueError(f"step length must be in (0, 0.1] s, got {dt}")

    omega_b = np.asarray(imu.omega_b, dtype=float)
    f_b = np.asarray(imu.f_b, dtype=float)
    f_max = MAX_FORCE_G * cfg.g
    if not (omega_b @ omega_b < MAX_RATE * MAX_RATE and f_b @ f_b < f_max * f_max):
        raise ValueError(f"IMU sample at t={imu.t!r} is non-finite or outside the sanity bounds")

    live = state.t_aid is not None and imu.t - state.t_aid <= cfg.stale_after
    if live:
        omega_p = state.omega_corr + state.omega_head
    else:
        omega_p = _ZERO

    C, f_p, det = _propagate(state.C, omega_b, omega_p, f_b, dt)
    if not det > 0.0:
        raise AttitudeCorruptedError("DCM determinant collapsed during propagation")
    f_acc = state.f_acc + f_p * dt
    acc_time = state.acc_time + dt

    f_matched = state.f_matched
    t_aid = state.t_aid
    omega_corr = state.omega_corr
    omega_head = state.omega_head
    if aid is not None and (t_aid is None or aid.t > t_aid):
        f_avg = f_acc / acc_time
        if f_matched is None or cfg.aid_smoothing == 0.0:
            f_matched = f_avg
        else:
            alpha = -math.expm1(-acc_time / cfg.aid_smoothing)
            f_matched = f_matched + alpha * (f_avg - f_matched)
        f_acc = np.zeros(3)
        acc_time = 0.0
        t_aid = aid.t
        omega_corr = correction_rate(aid.f_ext, f_matched, cfg)
        if course is None:
            omega_head = np.zeros(3)
        else:
            omega_head = heading_slave_rate(C, course, cfg)
        live = imu.t - t_aid <= cfg.stale_after

    if live:
        u = C.T @ (omega_corr + omega_head)
        stale = False
    else:
        u = state.u
        stale = True

    return AhrsState(
        C=C,
        t=imu.t,
        u=u,
        stale=stale,
        f_acc=f_acc,
        acc_time=acc_time,
        f_matched=f_matched,
        t_aid=t_aid,
        omega_corr=omega_corr,
        omega_head=omega_head,
    )
