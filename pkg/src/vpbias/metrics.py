"""Accuracy and convergence summaries of an estimator run."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

Array = NDArray[np.float64]

SETTLE_FRACTION = 0.05


class MetricsError(ValueError):
    pass


def convergence_time(t: Array, x: Array, window: float) -> float | None:
    """
    Time from ``t[0]`` after which ``x`` stays within 5 % of its total move.

    The settled value is the mean of ``x`` over the final ``window`` seconds and
    the total move is its distance from ``x[0]``. Returns ``None`` when the
    last sample is still outside the band, i.e. the series never settles.
    """
    t = np.asarray(t, float)
    x = np.asarray(x, float)
    if t[-1] - t[0] < window:
        raise MetricsError(f"series spans {t[-1] - t[0]:.3f} s, shorter than window {window} s")
    final = x[t >= t[-1] - window].mean()
    band = SETTLE_FRACTION * abs(final - x[0])
    outside = np.abs(x - final) > band
    if band == 0.0:
        outside = np.abs(x - final) > 1e-15
    if outside[-1]:
        return None
    idx = np.flatnonzero(outside)
    if idx.size == 0:
        return 0.0
    return float(t[idx[-1] + 1] - t[0])


def steady_rms(t: Array, x: Array, truth: Array | float, window: float) -> float:
    t = np.asarray(t, float)
    if t[-1] - t[0] < window:
        raise MetricsError(f"series spans {t[-1] - t[0]:.3f} s, shorter than window {window} s")
    sel = t >= t[-1] - window
    err = np.asarray(x, float)[sel] - truth
    return float(np.sqrt(np.mean(err**2)))


@dataclass
class RunMetrics:
    """
    Per-axis steady-window RMS bias errors (rad/s, m/s^2), convergence times
    (s from start, ``None`` if not converged), the accumulated turning time at
    which each accelerometer channel converged, and the largest tilt error.
    """

    window: float
    gyro_rms: list[float]
    accel_rms: list[float]
    gyro_convergence: list[float | None]
    accel_convergence: list[float | None]
    accel_convergence_turn_time: list[float | None]
    max_tilt: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "window_s": self.window,
            "gyro_rms_rad_s": self.gyro_rms,
            "accel_rms_m_s2": self.accel_rms,
            "gyro_convergence_s": self.gyro_convergence,
            "accel_convergence_s": self.accel_convergence,
            "accel_convergence_turn_time_s": self.accel_convergence_turn_time,
            "max_tilt_rad": self.max_tilt,
            **self.extra,
        }


def _tilt_error(euler_est: Array, euler_true: Array) -> Array:
    d = euler_est[:, :2] - euler_true[:, :2]
    return np.hypot(d[:, 0], d[:, 1])


def compute_metrics(
    t: Array,
    b_g_est: Array,
    b_a_est: Array,
    b_g_true: Array,
    b_a_true: Array,
    window: float,
    *,
    turning: NDArray[np.bool_] | None = None,
    euler_est: Array | None = None,
    euler_true: Array | None = None,
) -> RunMetrics:
    """
    Summarize an estimate series against the injected biases.

    ``turning`` marks samples where the vehicle truly turns; it is used to
    express accelerometer convergence in accumulated turning time.
    """
    t = np.asarray(t, float)
    if t[-1] - t[0] < window:
        raise MetricsError(f"series spans {t[-1] - t[0]:.3f} s, shorter than window {window} s")
    gyro_rms = [steady_rms(t, b_g_est[:, k], b_g_true[k], window) for k in range(3)]
    accel_rms = [steady_rms(t, b_a_est[:, k], b_a_true[k], window) for k in range(3)]
    gyro_conv = [convergence_time(t, b_g_est[:, k], window) for k in range(3)]
    accel_conv = [convergence_time(t, b_a_est[:, k], window) for k in range(3)]

    turn_time: list[float | None] = [None, None, None]
    if turning is not None:
        dt = np.diff(t, prepend=t[0])
        cum = np.cumsum(np.where(turning, dt, 0.0))
        for k, c in enumerate(accel_conv):
            if c is not None:
                i = int(np.searchsorted(t, t[0] + c - 1e-9))
                turn_time[k] = float(cum[min(i, len(cum) - 1)])

    max_tilt = float("nan")
    if euler_est is not None and euler_true is not None:
        max_tilt = float(np.max(_tilt_error(euler_est, euler_true)))
    return RunMetrics(window, gyro_rms, accel_rms, gyro_conv, accel_conv, turn_time, max_tilt)
