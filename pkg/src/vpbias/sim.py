"""
Flat-Earth land-vehicle truth and sensor synthesis.

Trajectories are level sequences of straight segments and constant-rate turn
arcs. Speed changes between segments are blended linearly over one second at
the start of the new segment. IMU samples follow the usual output convention:
the sample stamped ``t_n`` describes the interval ``(t_{n-1}, t_n]`` and is
evaluated at its midpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import NDArray

from .ahrs import AidSample, ImuSample, TimestampError
from .geom import Vec3, dcm_from_euler, euler_series

Array = NDArray[np.float64]

SPEED_BLEND = 1.0  # s

# "MEMS-like" noise profile: white-noise densities and aid velocity noise.
MEMS_GYRO_NOISE = 0.0015  # rad/s/sqrt(Hz)
MEMS_ACCEL_NOISE = 0.02  # m/s^2/sqrt(Hz)
MEMS_AID_VEL_NOISE = 0.02  # m/s


@dataclass(frozen=True)
class Segment:
    kind: str  # "straight" or "turn"
    duration: float
    speed: float
    yaw_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("straight", "turn"):
            raise ValueError(f"segment kind must be 'straight' or 'turn', got {self.kind!r}")
        if not self.duration > 0.0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        if not self.speed >= 0.0:
            raise ValueError(f"segment speed must be non-negative, got {self.speed}")
        if self.kind == "straight" and self.yaw_rate != 0.0:
            raise ValueError("straight segments cannot have a yaw rate")

    @property
    def rate(self) -> float:
        return self.yaw_rate if self.kind == "turn" else 0.0


@dataclass(frozen=True)
class TrajectorySpec:
    segments: tuple[Segment, ...]
    initial_heading: float = 0.0
    imu_rate: float = 100.0
    aid_rate: float = 10.0

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("trajectory needs at least one segment")
        if not self.imu_rate > 0.0 or not self.aid_rate > 0.0:
            raise ValueError("rates must be positive")
        if self.aid_rate > self.imu_rate:
            raise ValueError("aid_rate cannot exceed imu_rate")
        ratio = self.imu_rate / self.aid_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("imu_rate must be an integer multiple of aid_rate")

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))


def alternating_segments(
    duration: float = 600.0,
    straight: float = 60.0,
    turn: float = 30.0,
    speed: float = 5.0,
    yaw_rate: float = 0.2,
    alternate: bool = True,
) -> tuple[Segment, ...]:
    """Straight/turn pattern starting with a straight, truncated to ``duration``."""
    segs: list[Segment] = []
    t = 0.0
    sign = 1.0
    while t < duration - 1e-9:
        d = min(straight, duration - t)
        segs.append(Segment("straight", d, speed))
        t += d
        if t >= duration - 1e-9 or turn <= 0.0:
            continue
        d = min(turn, duration - t)
        segs.append(Segment("turn", d, speed, sign * yaw_rate))
        t += d
        if alternate:
            sign = -sign
    return tuple(segs)


@dataclass(frozen=True)
class SensorErrorSpec:
    """
    Sensor error model.

    Biases are constant and expressed in the sensor frame. Noise densities are
    white-noise spectral densities (rad/s/sqrt(Hz), m/s^2/sqrt(Hz)).
    ``misalignment`` holds the (roll, pitch, heading) installation angles of
    the sensor frame relative to the vehicle body, in radians.
    """

    b_g: Vec3 = field(default_factory=lambda: np.zeros(3))
    b_a: Vec3 = field(default_factory=lambda: np.zeros(3))
    gyro_noise_density: float = 0.0
    accel_noise_density: float = 0.0
    misalignment: tuple[float, float, float] = (0.0, 0.0, 0.0)
    aid_vel_noise: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.gyro_noise_density < 0.0 or self.accel_noise_density < 0.0:
            raise ValueError("noise densities must be non-negative")
        if self.aid_vel_noise < 0.0:
            raise ValueError("aid velocity noise must be non-negative")
        if len(self.misalignment) != 3 or any(abs(a) > 0.35 for a in self.misalignment):
            raise ValueError("misalignment angles must not exceed 0.35 rad")

    @property
    def mount(self) -> Array:
        """Sensor-to-body DCM."""
        return dcm_from_euler(*self.misalignment)


@dataclass(frozen=True)
class TruthSample:
    t: float
    position: Vec3
    velocity: Vec3
    attitude: Array
    omega_b_true: Vec3
    f_b_true: Vec3


@dataclass(frozen=True)
class TruthSeries:
    """Vehicle truth on the IMU time grid (body = vehicle frame)."""

    t: Array
    position: Array
    velocity: Array
    heading: Array
    omega_b: Array
    f_b: Array
    g: float

    def __len__(self) -> int:
        return len(self.t)

    @property
    def attitude(self) -> Array:
        c, s = np.cos(self.heading), np.sin(self.heading)
        C = np.zeros((len(self.t), 3, 3))
        C[:, 0, 0] = c
        C[:, 0, 1] = -s
        C[:, 1, 0] = s
        C[:, 1, 1] = c
        C[:, 2, 2] = 1.0
        return C

    def __getitem__(self, i: int) -> TruthSample:
        return TruthSample(
            float(self.t[i]),
            self.position[i].copy(),
            self.velocity[i].copy(),
            self.attitude[i],
            self.omega_b[i].copy(),
            self.f_b[i].copy(),
        )


@dataclass(frozen=True)
class ImuSeries:
    t: Array
    omega_b: Array
    f_b: Array

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[ImuSample]:
        for i in range(len(self.t)):
            yield ImuSample(float(self.t[i]), self.omega_b[i], self.f_b[i])


@dataclass(frozen=True)
class VelocitySeries:
    t: Array
    velocity: Array

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class AidSeries:
    t: Array
    f_ext: Array

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[AidSample]:
        for i in range(len(self.t)):
            yield AidSample(float(self.t[i]), self.f_ext[i])


class _Profile:
    """Piecewise speed and heading-rate schedule with closed-form integrals."""

    def __init__(self, spec: TrajectorySpec) -> None:
        self.h0 = spec.initial_heading
        starts = np.concatenate([[0.0], np.cumsum([s.duration for s in spec.segments])])
        self.starts = starts
        self.segs = spec.segments
        prev = [spec.segments[0].speed] + [s.speed for s in spec.segments[:-1]]
        self.prev_speed = np.array(prev)
        self.blend = np.array([min(SPEED_BLEND, s.duration) for s in spec.segments])
        # heading at each segment start
        h = [self.h0]
        for s in spec.segments:
            h.append(h[-1] + s.rate * s.duration)
        self.h_start = np.array(h)

    def index(self, t: Array) -> Array:
        i = np.searchsorted(self.starts, t, side="right") - 1
        return np.clip(i, 0, len(self.segs) - 1)

    def evaluate(self, t: Array) -> tuple[Array, Array, Array, Array]:
        """Speed, speed rate, heading and heading rate at times ``t``."""
        idx = self.index(t)
        tau = t - self.starts[idx]
        v1 = np.array([s.speed for s in self.segs])[idx]
        v0 = self.prev_speed[idx]
        blend = self.blend[idx]
        ramp = tau < blend
        frac = np.where(ramp, tau / blend, 1.0)
        speed = v0 + (v1 - v0) * frac
        speed_rate = np.where(ramp, (v1 - v0) / blend, 0.0)
        rate = np.array([s.rate for s in self.segs])[idx]
        heading = self.h_start[idx] + rate * tau
        return speed, speed_rate, heading, rate


def build_trajectory(spec: TrajectorySpec, g: float = 9.81) -> TruthSeries:
    """
    Sample the vehicle truth on the IMU grid ``t_n = n / imu_rate``.

    Position, velocity and heading are exact at ``t_n``. Body rate and
    specific force follow the IMU convention and are evaluated at
    ``t_n - dt/2`` (``t_0`` uses the initial value).
    """
    n = int(round(spec.duration * spec.imu_rate))
    dt = 1.0 / spec.imu_rate
    t = np.arange(n + 1) / spec.imu_rate
    prof = _Profile(spec)

    speed, _, heading, _ = prof.evaluate(t)
    vel = np.stack([speed * np.cos(heading), speed * np.sin(heading), np.zeros_like(t)], axis=1)

    tm = np.maximum(t - 0.5 * dt, 0.0)
    s_m, sd_m, h_m, r_m = prof.evaluate(tm)
    # Acceleration in the heading-aligned (body) frame: along-track and centripetal.
    f_b = np.stack([sd_m, s_m * r_m, np.full_like(tm, -g)], axis=1)
    omega = np.stack([np.zeros_like(tm), np.zeros_like(tm), r_m], axis=1)

    pos = np.zeros_like(vel)
    pos[1:] = np.cumsum(0.5 * (vel[1:] + vel[:-1]) * dt, axis=0)
    return TruthSeries(t, pos, vel, heading, omega, f_b, g)


def acceleration_at(spec: TrajectorySpec, t) -> Array:
    """Exact NED kinematic acceleration at arbitrary times ``t``."""
    speed, speed_rate, heading, rate = _Profile(spec).evaluate(np.atleast_1d(np.asarray(t, float)))
    c, s = np.cos(heading), np.sin(heading)
    cent = speed * rate
    return np.stack([speed_rate * c - cent * s, speed_rate * s + cent * c, np.zeros_like(c)], axis=1)


def velocity_at(spec: TrajectorySpec, t) -> Array:
    """Exact NED velocity at arbitrary times ``t``."""
    speed, _, heading, _ = _Profile(spec).evaluate(np.atleast_1d(np.asarray(t, float)))
    return np.stack([speed * np.cos(heading), speed * np.sin(heading), np.zeros_like(speed)], axis=1)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    imu_ss, aid_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(imu_ss), np.random.default_rng(aid_ss)


def synth_imu(truth: TruthSeries, err: SensorErrorSpec) -> ImuSeries:
    """
    Sensor-frame IMU output: truth rotated into the sensor frame, plus
    constant biases and white noise with std ``density * sqrt(imu_rate)``.
    """
    R = err.mount.T  # body -> sensor
    omega = truth.omega_b @ R.T + np.asarray(err.b_g, float)
    f = truth.f_b @ R.T + np.asarray(err.b_a, float)
    if err.gyro_noise_density > 0.0 or err.accel_noise_density > 0.0:
        rate = 1.0 / (truth.t[1] - truth.t[0])
        rng, _ = _streams(err.seed)
        gyro_noise = rng.standard_normal(omega.shape)
        accel_noise = rng.standard_normal(f.shape)
        omega = omega + err.gyro_noise_density * math.sqrt(rate) * gyro_noise
        f = f + err.accel_noise_density * math.sqrt(rate) * accel_noise
    return ImuSeries(truth.t.copy(), omega, f)


def synth_aid(truth: TruthSeries, err: SensorErrorSpec, aid_rate: float) -> VelocitySeries:
    """Truth velocity decimated to ``aid_rate`` plus white noise per axis."""
    imu_rate = 1.0 / (truth.t[1] - truth.t[0])
    if aid_rate > imu_rate * (1 + 1e-9):
        raise ValueError("aid_rate cannot exceed the IMU rate")
    step = int(round(imu_rate / aid_rate))
    idx = np.arange(0, len(truth), step)
    vel = truth.velocity[idx].copy()
    if err.aid_vel_noise > 0.0:
        _, rng = _streams(err.seed)
        vel = vel + err.aid_vel_noise * rng.standard_normal(vel.shape)
    return VelocitySeries(truth.t[idx].copy(), vel)


def differentiate_velocity(
    vel: VelocitySeries, g: float = 9.81, smoothing: float = 0.2
) -> AidSeries:
    """
    Specific-force aid from successive velocity fixes.

    ``f_ext(t_i) = (v_i - v_{i-1}) / (t_i - t_{i-1}) - (0, 0, g)``, optionally
    passed through a first-order low-pass with time constant ``smoothing``
    (seconds, 0 disables) that starts from the first difference. The first
    fix yields no output.
    """
    t = np.asarray(vel.t, float)
    if len(t) < 2:
        raise ValueError("need at least two velocity samples to differentiate")
    dts = np.diff(t)
    if np.any(dts <= 0.0):
        raise TimestampError("velocity timestamps must be strictly increasing")
    acc = np.diff(vel.velocity, axis=0) / dts[:, None]
    if smoothing > 0.0:
        out = np.empty_like(acc)
        y = acc[0]
        out[0] = y
        alphas = -np.expm1(-dts / smoothing)
        for i in range(1, len(acc)):
            y = y + alphas[i] * (acc[i] - y)
            out[i] = y
        acc = out
    acc[:, 2] -= g
    return AidSeries(t[1:].copy(), acc)


def course_from_velocity(vel: VelocitySeries, min_speed: float = 1.0) -> Array:
    """Course over ground per fix; NaN where horizontal speed < ``min_speed``."""
    vn, ve = vel.velocity[:, 0], vel.velocity[:, 1]
    course = np.arctan2(ve, vn)
    return np.where(np.hypot(vn, ve) >= min_speed, course, np.nan)


def sensor_attitude(truth: TruthSeries, err: SensorErrorSpec) -> Array:
    """Sensor-to-NED DCMs; the attitude an AHRS on the sensor should report."""
    return truth.attitude @ err.mount


def sensor_euler(truth: TruthSeries, err: SensorErrorSpec) -> Array:
    return euler_series(sensor_attitude(truth, err))


def perfect_aid(truth: TruthSeries) -> AidSeries:
    """Noise-free aid at the IMU rate from exact velocity differences."""
    return differentiate_velocity(VelocitySeries(truth.t, truth.velocity), truth.g, 0.0)


def concat_segments(*groups: Sequence[Segment]) -> tuple[Segment, ...]:
    return tuple(s for grp in groups for s in grp)
