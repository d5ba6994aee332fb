"""Closed-loop composition of the AHRS and the bias estimator over recorded streams."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from . import ahrs
from .ahrs import AhrsConfig, AidSample, ImuSample
from .estimator import (
    BiasEstimate,
    EstimatorConfig,
    RegimeKind,
    RegimeTracker,
    classify_regime,
    compensate,
    lowpass_step,
    update,
)
from .geom import euler_series
from .sim import AidSeries, ImuSeries, VelocitySeries, course_from_velocity, differentiate_velocity

Array = NDArray[np.float64]

REGIME_CODES = {RegimeKind.STRAIGHT: "straight", RegimeKind.TURNING: "turning", RegimeKind.EXCLUDED: "excluded"}


@dataclass(frozen=True)
class EstimateSeries:
    """Per-IMU-sample record of the estimator run."""

    t: Array
    regime: tuple[str, ...]
    u: Array
    b_g: Array
    b_a: Array
    euler: Array
    omega_smoothed: Array
    stale: NDArray[np.bool_]

    def __len__(self) -> int:
        return len(self.t)


def run_estimator(
    imu: ImuSeries,
    aid: AidSeries,
    course: Array | None,
    ahrs_cfg: AhrsConfig,
    est_cfg: EstimatorConfig,
    *,
    feedback: bool = True,
    initial_heading: float | None = None,
    initial_dcm: Array | None = None,
) -> EstimateSeries:
    """
    Run the attitude loop and the bias estimator over an IMU stream.

    Parameters
    ----------
    imu : ImuSeries
        Raw sensor output.
    aid : AidSeries
        Specific-force aid; each sample is held until the next one arrives.
    course : array, optional
        Course over ground per aid sample (rad, NaN when unavailable).
    ahrs_cfg, est_cfg
        Loop and estimator tuning; both must use the same ``tau_att`` and ``g``.
    feedback : bool
        Compensate the IMU stream with the running estimates (default) or run
        open loop as a black box.
    initial_heading : float, optional
        Heading for the initial leveling; defaults to the first valid course,
        else 0.
    initial_dcm : array, optional
        Overrides leveling altogether.
    """
    if abs(ahrs_cfg.tau_att - est_cfg.tau_att) > 1e-12 or abs(ahrs_cfg.g - est_cfg.g) > 1e-12:
        raise ValueError("AHRS and estimator must share tau_att and g")
    n = len(imu)
    if n < 2:
        raise ValueError("need at least two IMU samples")
    aids = list(aid)
    courses: list[float | None] = [None] * len(aids)
    if course is not None:
        courses = [None if math.isnan(c) else float(c) for c in course]

    if initial_dcm is None:
        h0 = initial_heading
        if h0 is None:
            h0 = next((c for c in courses if c is not None), 0.0)
        initial_dcm = ahrs.level_dcm(imu.f_b[0], h0)
    state = ahrs.initial_state(float(imu.t[0]), initial_dcm)
    est = BiasEstimate(t=float(imu.t[0]))
    tracker: RegimeTracker | None = None
    omega_s = np.array(imu.omega_b[0], dtype=float)

    u_out = np.zeros((n, 3))
    bg_out = np.zeros((n, 3))
    ba_out = np.zeros((n, 3))
    dcm_out = np.zeros((n, 3, 3))
    om_out = np.zeros((n, 3))
    stale_out = np.zeros(n, dtype=bool)
    regimes = ["excluded"] * n
    stale_out[0] = True
    dcm_out[0] = state.C
    om_out[0] = omega_s

    j = -1
    ts = imu.t
    aid_t = aid.t
    n_aid = len(aids)
    for i in range(1, n):
        t = float(ts[i])
        while j + 1 < n_aid and aid_t[j + 1] <= t + 1e-9:
            j += 1
        cur_aid: AidSample | None = aids[j] if j >= 0 else None
        cur_course = courses[j] if j >= 0 else None

        raw = ImuSample(t, imu.omega_b[i], imu.f_b[i])
        sample = compensate(raw, est) if feedback else raw
        dt = t - state.t
        state = ahrs.step(state, sample, cur_aid, cur_course, ahrs_cfg, dt)

        rate = sample.omega_b if feedback else raw.omega_b - est.b_g_hat
        omega_s = lowpass_step(omega_s, rate, est_cfg.smooth_tau, dt)
        regime, tracker = classify_regime(omega_s, est_cfg, tracker, dt)
        est = update(est, state.u, regime, est_cfg, dt, stale=state.stale, feedback=feedback)

        u_out[i] = state.u
        bg_out[i] = est.b_g_hat
        ba_out[i] = est.b_a_hat
        dcm_out[i] = state.C
        om_out[i] = omega_s
        stale_out[i] = state.stale
        regimes[i] = REGIME_CODES[regime.kind]

    eul_out = euler_series(dcm_out)
    return EstimateSeries(ts.copy(), tuple(regimes), u_out, bg_out, ba_out, eul_out, om_out, stale_out)


def estimate_from_velocity(
    imu: ImuSeries,
    vel: VelocitySeries,
    ahrs_cfg: AhrsConfig,
    est_cfg: EstimatorConfig,
    *,
    min_speed: float = 1.0,
    feedback: bool = True,
    initial_heading: float | None = None,
) -> EstimateSeries:
    """Differentiate the velocity fixes into the aid and run the estimator."""
    aid = differentiate_velocity(vel, ahrs_cfg.g, ahrs_cfg.aid_smoothing)
    course = course_from_velocity(VelocitySeries(vel.t[1:], vel.velocity[1:]), min_speed)
    if initial_heading is None:
        c0 = course_from_velocity(VelocitySeries(vel.t[:1], vel.velocity[:1]), min_speed)[0]
        initial_heading = None if math.isnan(c0) else float(c0)
    return run_estimator(
        imu,
        aid,
        course,
        ahrs_cfg,
        est_cfg,
        feedback=feedback,
        initial_heading=initial_heading,
    )
