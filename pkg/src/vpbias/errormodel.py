"""
Linearized attitude-error model of the corrected AHRS.

Under level motion with the heading held by the aid, the body-frame tilt
``theta`` of the virtual platform obeys::

    dtheta/dt + ([w_b x] + kg I) theta = b_g - k_p x b_a

and the torque applied to the platform is ``u = b_g - dtheta/dt - w_b x theta``.
The functions below integrate that equation and give its steady state in
closed form; they serve as independent references for the nonlinear loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from numpy.typing import NDArray

from .ahrs import AhrsConfig
from .geom import I3, Vec3, skew, solve3

RateInput = Union[Vec3, Callable[[float], Vec3]]

SMALL_ANGLE_LIMIT = 0.5  # rad


class SmallAngleError(ValueError):
    """Raised when the tilt leaves the small-angle regime; ``t`` is the first offending time."""

    def __init__(self, t: float, norm: float) -> None:
        super().__init__(f"|theta|={norm:.3g} rad exceeds the small-angle limit at t={t:.3f} s")
        self.t = t


@dataclass(frozen=True)
class ErrorState:
    theta_b: Vec3
    t: float = 0.0


@dataclass(frozen=True)
class ErrorTrajectory:
    t: NDArray[np.float64]
    theta_b: NDArray[np.float64]

    @property
    def final(self) -> ErrorState:
        return ErrorState(self.theta_b[-1].copy(), float(self.t[-1]))


def _forcing(b_g: Vec3, b_a: Vec3, cfg: AhrsConfig) -> Vec3:
    return np.asarray(b_g, dtype=float) - np.cross(cfg.k_p, b_a)


def integrate_error_ode(
    theta0: ErrorState,
    omega_b: RateInput,
    b_g: Vec3,
    b_a: Vec3,
    cfg: AhrsConfig,
    T: float,
    dt: float = 0.01,
) -> ErrorTrajectory:
    """
    Integrate the linear tilt-error equation with the explicit midpoint rule.

    Parameters
    ----------
    theta0 : ErrorState
        Initial tilt (rad) and start time.
    omega_b : array_like or callable
        Body rate (rad/s), constant or a function of time.
    b_g, b_a : array_like, shape (3,)
        Gyro (rad/s) and accelerometer (m/s^2) biases.
    cfg : AhrsConfig
    T : float
        Duration in seconds.
    dt : float
        Step size in seconds.

    Returns
    -------
    ErrorTrajectory
        Samples at ``theta0.t + n dt`` for ``n = 0 .. round(T/dt)``.

    Raises
    ------
    SmallAngleError
        If ``|theta|`` reaches 0.5 rad.
    """
    rate = omega_b if callable(omega_b) else (lambda t, w=np.asarray(omega_b, float): w)
    kg = cfg.kg
    forcing = _forcing(b_g, b_a, cfg)

    def rhs(t: float, th: Vec3) -> Vec3:
        return forcing - np.cross(rate(t), th) - kg * th

    n = int(round(T / dt))
    ts = theta0.t + dt * np.arange(n + 1)
    out = np.empty((n + 1, 3))
    th = np.array(theta0.theta_b, dtype=float)
    out[0] = th
    for i in range(n):
        t = ts[i]
        th_mid = th + 0.5 * dt * rhs(t, th)
        th = th + dt * rhs(t + 0.5 * dt, th_mid)
        norm = float(np.linalg.norm(th))
        if not norm < SMALL_ANGLE_LIMIT:
            raise SmallAngleError(float(ts[i + 1]), norm)
        out[i + 1] = th
    return ErrorTrajectory(ts, out)


def steady_state_tilt(omega_b: Vec3, b_g: Vec3, b_a: Vec3, cfg: AhrsConfig) -> Vec3:
    """Equilibrium tilt ``([w_b x] + kg I)^-1 (b_g - k_p x b_a)``."""
    A = skew(omega_b) + cfg.kg * I3
    return solve3(A, _forcing(b_g, b_a, cfg))


def steady_state_torque(omega_b: Vec3, b_g: Vec3, b_a: Vec3, cfg: AhrsConfig) -> Vec3:
    """Equilibrium torque ``b_g - w_b x theta_ss``."""
    theta = steady_state_tilt(omega_b, b_g, b_a, cfg)
    return np.asarray(b_g, dtype=float) - np.cross(omega_b, theta)


def torque_from_tilt(
    theta_b: Vec3, omega_b: Vec3, b_g: Vec3, theta_dot: Vec3 | None = None
) -> Vec3:
    """Torque implied by a tilt state, ``b_g - dtheta/dt - w_b x theta``."""
    u = np.asarray(b_g, dtype=float) - np.cross(omega_b, theta_b)
    if theta_dot is not None:
        u = u - theta_dot
    return u


def accel_bias_torque(omega_zb: float, b_a: Vec3, cfg: AhrsConfig) -> Vec3:
    """
    Torque produced by an accelerometer bias alone while turning about the
    body vertical at ``omega_zb``: ``[w x] ([w x] + kg I)^-1 (k_p x b_a)``.
    """
    omega = np.array([0.0, 0.0, omega_zb])
    A = skew(omega) + cfg.kg * I3
    x = solve3(A, np.cross(cfg.k_p, b_a))
    return np.cross(omega, x)
