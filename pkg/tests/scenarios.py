"""Shared closed-loop scenarios for the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from vpbias import ahrs
from vpbias.ahrs import AhrsConfig
from vpbias.estimator import EstimatorConfig
from vpbias.pipeline import EstimateSeries, estimate_from_velocity
from vpbias.sim import (
    MEMS_ACCEL_NOISE,
    MEMS_AID_VEL_NOISE,
    MEMS_GYRO_NOISE,
    Segment,
    SensorErrorSpec,
    TrajectorySpec,
    TruthSeries,
    build_trajectory,
    perfect_aid,
    synth_aid,
    synth_imu,
)

DEG = math.pi / 180.0
NOMINAL_B_G = np.array([0.1 * DEG, -0.1 * DEG, 0.0])
NOMINAL_B_A = np.array([0.2, -0.2, 0.0])
TILT_MISALIGNMENT = (10 * DEG, 10 * DEG, 0.0)

# Straight-dominated path: two short turns (opposite directions) between long straights.
STRAIGHT_DOMINATED = (
    Segment("straight", 200.0, 5.0),
    Segment("turn", 20.0, 5.0, 0.2),
    Segment("straight", 200.0, 5.0),
    Segment("turn", 20.0, 5.0, -0.2),
    Segment("straight", 160.0, 5.0),
)


def turn_heavy(duration: float = 1200.0) -> tuple[Segment, ...]:
    """Alternating 30 s straights and 30 s turns at +/-0.2 rad/s."""
    from vpbias.sim import alternating_segments

    return alternating_segments(duration, straight=30.0, turn=30.0)


def mems_errors(b_g=NOMINAL_B_G, b_a=NOMINAL_B_A, misalignment=(0.0, 0.0, 0.0), seed=0) -> SensorErrorSpec:
    return SensorErrorSpec(
        b_g=np.asarray(b_g, float),
        b_a=np.asarray(b_a, float),
        gyro_noise_density=MEMS_GYRO_NOISE,
        accel_noise_density=MEMS_ACCEL_NOISE,
        misalignment=misalignment,
        aid_vel_noise=MEMS_AID_VEL_NOISE,
        seed=seed,
    )


def clean_errors(b_g=NOMINAL_B_G, b_a=NOMINAL_B_A, misalignment=(0.0, 0.0, 0.0)) -> SensorErrorSpec:
    return SensorErrorSpec(b_g=np.asarray(b_g, float), b_a=np.asarray(b_a, float), misalignment=misalignment)


@dataclass(frozen=True)
class Run:
    truth: TruthSeries
    err: SensorErrorSpec
    series: EstimateSeries

    @property
    def turning(self) -> np.ndarray:
        return np.abs(self.truth.omega_b[:, 2]) > 0.0


def closed_loop(
    segments,
    err: SensorErrorSpec,
    *,
    feedback: bool = True,
    ahrs_cfg: AhrsConfig | None = None,
    est_cfg: EstimatorConfig | None = None,
) -> Run:
    spec = TrajectorySpec(tuple(segments))
    truth = build_trajectory(spec)
    imu = synth_imu(truth, err)
    vel = synth_aid(truth, err, spec.aid_rate)
    ahrs_cfg = ahrs_cfg or AhrsConfig()
    est_cfg = est_cfg or EstimatorConfig()
    series = estimate_from_velocity(imu, vel, ahrs_cfg, est_cfg, feedback=feedback)
    return Run(truth, err, series)


def ahrs_only(segments, err: SensorErrorSpec, cfg: AhrsConfig, *, initial_dcm=None):
    """
    Attitude loop alone with an exact IMU-rate aid and the true course.

    Returns the truth and the stacks of DCMs and torques per IMU sample.
    """
    spec = TrajectorySpec(tuple(segments))
    truth = build_trajectory(spec)
    imu = synth_imu(truth, err)
    aid = list(perfect_aid(truth))
    course = truth.heading[1:]
    C0 = truth.attitude[0] @ err.mount if initial_dcm is None else initial_dcm
    state = ahrs.initial_state(0.0, C0)
    n = len(truth)
    Cs = np.zeros((n, 3, 3))
    us = np.zeros((n, 3))
    Cs[0] = state.C
    for i, sample in enumerate(imu):
        if i == 0:
            continue
        state = ahrs.step(state, sample, aid[i - 1], float(course[i - 1]), cfg)
        Cs[i] = state.C
        us[i] = state.u
    return truth, Cs, us
