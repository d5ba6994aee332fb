"""
Separate-bias estimator driven by the AHRS torque signal ``u``.

The attitude loop settles to a torque that balances the sensor biases. On
straight motion that torque equals the gyro bias; while turning about the
vertical it is a fixed linear image of the horizontal accelerometer bias, which
is inverted in closed form. Each raw observation is smoothed by a first-order
low-pass, and only the quantity observable in the current motion regime is
updated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .ahrs import AhrsConfig, ImuSample
from .errormodel import steady_state_torque
from .geom import Vec3

MAX_GYRO_BIAS = 0.1  # rad/s
MAX_ACCEL_BIAS = 2.0  # m/s^2


class ObservabilityError(ValueError):
    """Raised when a bias is requested from a regime that cannot observe it."""


@dataclass(frozen=True)
class EstimatorConfig:
    """
    Bias-estimator tuning.

    ``tau_g`` and ``tau_a`` are the gyro and accelerometer bias filter time
    constants, ``tau_att`` must equal the attitude loop's time constant.
    Rates below ``straight_threshold`` (rad/s, full norm) count as straight
    motion, vertical rates of at least ``turn_threshold`` as a turn; a regime
    must persist for ``dwell`` seconds before it is reported. Observations are
    used only once the regime is ``settle`` seconds old (default three
    attitude time constants), so the loop has reached its steady state.
    ``smooth_tau`` is the low-pass applied to the gyro rate before
    classification.
    """

    tau_g: float = 40.0
    tau_a: float = 40.0
    tau_att: float = 4.0
    g: float = 9.81
    turn_threshold: float = 0.05
    straight_threshold: float = 0.02
    dwell: float = 2.0
    smooth_tau: float = 1.0
    settle: float | None = None

    def __post_init__(self) -> None:
        for name in ("tau_g", "tau_a", "tau_att", "g", "smooth_tau"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.straight_threshold < self.turn_threshold:
            raise ValueError("thresholds must satisfy 0 < straight_threshold < turn_threshold")
        if not self.dwell >= 0.0:
            raise ValueError(f"dwell must be non-negative, got {self.dwell}")
        if self.settle is not None and not self.settle >= 0.0:
            raise ValueError(f"settle must be non-negative, got {self.settle}")

    @property
    def settle_time(self) -> float:
        return 3.0 * self.tau_att if self.settle is None else self.settle

    @property
    def ahrs(self) -> AhrsConfig:
        return AhrsConfig(tau_att=self.tau_att, g=self.g)


class RegimeKind(Enum):
    STRAIGHT = "straight"
    TURNING = "turning"
    EXCLUDED = "excluded"


@dataclass(frozen=True)
class Regime:
    """Motion regime; ``age`` is how long the underlying motion has persisted (s)."""

    kind: RegimeKind
    omega_zb: float = 0.0
    age: float = math.inf

    @classmethod
    def straight(cls, age: float = math.inf) -> Regime:
        return cls(RegimeKind.STRAIGHT, 0.0, age)

    @classmethod
    def turning(cls, omega_zb: float, age: float = math.inf) -> Regime:
        return cls(RegimeKind.TURNING, float(omega_zb), age)

    @classmethod
    def excluded(cls) -> Regime:
        return cls(RegimeKind.EXCLUDED)

    def __str__(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class RegimeTracker:
    """Candidate regime and how long it has persisted."""

    candidate: RegimeKind = RegimeKind.EXCLUDED
    held: float = 0.0


def _instant_kind(omega: Vec3, cfg: EstimatorConfig) -> RegimeKind:
    wx, wy, wz = float(omega[0]), float(omega[1]), float(omega[2])
    if math.sqrt(wx * wx + wy * wy + wz * wz) < cfg.straight_threshold:
        return RegimeKind.STRAIGHT
    if abs(wz) >= cfg.turn_threshold:
        return RegimeKind.TURNING
    return RegimeKind.EXCLUDED


def classify_regime(
    omega_b_smoothed: Vec3,
    cfg: EstimatorConfig,
    tracker: RegimeTracker | None = None,
    dt: float = 0.0,
) -> tuple[Regime, RegimeTracker]:
    """
    Classify the motion regime from the smoothed, bias-compensated gyro rate.

    The thresholds leave a dead band between straight motion and turning, and
    a regime is reported only after it has persisted for ``cfg.dwell``
    seconds; until then the result is ``Excluded``. Pass the returned tracker
    back in on the next call together with the elapsed ``dt``.
    """
    kind = _instant_kind(omega_b_smoothed, cfg)
    if tracker is not None and tracker.candidate is kind:
        held = tracker.held + dt
    else:
        held = 0.0
    new_tracker = RegimeTracker(kind, held)
    # Guard against dwell/dt accumulation landing a hair short.
    if kind is RegimeKind.EXCLUDED or held < cfg.dwell - 1e-9:
        return Regime.excluded(), new_tracker
    if kind is RegimeKind.STRAIGHT:
        return Regime.straight(held), new_tracker
    return Regime.turning(omega_b_smoothed[2], held), new_tracker


def gyro_bias_observation(u: Vec3) -> Vec3:
    """Straight motion: the steady torque is the gyro bias itself."""
    return np.array(u, dtype=float)


def accel_bias_observation(u: Vec3, omega_zb: float, cfg: EstimatorConfig) -> Vec3:
    """
    Horizontal accelerometer bias from the steady torque during a turn.

    Evaluates ``g [[1/w, -tau, 0], [tau, 1/w, 0], [0, 0, 0]] u`` with ``w`` the
    vertical body rate and ``tau`` the attitude time constant. Assumes the gyro
    bias has already been removed from ``u``.

    Raises
    ------
    ObservabilityError
        If ``|omega_zb|`` is below ``cfg.turn_threshold``.
    """
    if not abs(omega_zb) >= cfg.turn_threshold:
        raise ObservabilityError(
            f"|omega_zb|={abs(omega_zb):.4g} rad/s is below the turn threshold"
        )
    inv_w = 1.0 / omega_zb
    tau = cfg.tau_att
    g = cfg.g
    return np.array(
        [g * (inv_w * u[0] - tau * u[1]), g * (tau * u[0] + inv_w * u[1]), 0.0]
    )


def lowpass_step(y: Vec3, x: Vec3, tau_f: float, dt: float) -> Vec3:
    """
    One step of a first-order low-pass, exact for input held over ``dt``.
    """
    alpha = -math.expm1(-dt / tau_f)
    return y + alpha * (np.asarray(x) - y)


def _clamp(v: Vec3, limit: float) -> Vec3:
    n = math.sqrt(float(v @ v))
    if n > limit:
        return v * (limit / n)
    return v


@dataclass(frozen=True)
class BiasEstimate:
    """
    Current gyro (rad/s) and accelerometer (m/s^2) bias estimates.

    The vertical accelerometer bias is unobservable and pinned to zero. The
    vertical gyro channel is driven only by the correction torque, which has
    no vertical component on a level platform, so it is kept but should be
    treated as low confidence. ``fresh`` is False when the last update was
    skipped because the torque measurement was stale.
    """

    b_g_hat: Vec3 = field(default_factory=lambda: np.zeros(3))
    b_a_hat: Vec3 = field(default_factory=lambda: np.zeros(3))
    t: float = 0.0
    fresh: bool = True

    LOW_CONFIDENCE_GYRO_AXES = (2,)


def update(
    est: BiasEstimate,
    u: Vec3,
    regime: Regime,
    cfg: EstimatorConfig,
    dt: float,
    *,
    stale: bool = False,
    feedback: bool = True,
) -> BiasEstimate:
    """
    Advance the bias estimate by ``dt`` given the torque ``u`` and regime.

    Parameters
    ----------
    est : BiasEstimate
    u : array_like, shape (3,)
        Body-frame torque from the attitude loop.
    regime : Regime
        Straight updates the gyro bias only, Turning the accelerometer bias
        only, Excluded freezes both. Both are also frozen while the regime is
        younger than ``cfg.settle_time``.
    cfg : EstimatorConfig
    dt : float
    stale : bool
        True when ``u`` was not refreshed by a live aid; the estimate is then
        returned unchanged with ``fresh=False``.
    feedback : bool
        True when the AHRS input is already compensated with ``est``. The
        torque then reflects only the residual bias, so observations are
        added to the current estimate. In open-loop ("black box") mode the
        observation is the bias itself, and the torque share explained by the
        current gyro bias estimate is removed before the turning inversion.
        Because the torque never nulls open loop, aid latency then skews the
        accelerometer estimate by roughly the yaw rate times the loop delay
        (a few percent at 0.2 rad/s); feedback mode does not have this bias.
    """
    t = est.t + dt
    if stale:
        return replace(est, t=t, fresh=False)

    b_g = est.b_g_hat
    b_a = est.b_a_hat
    if regime.age < cfg.settle_time - 1e-9:
        return BiasEstimate(b_g_hat=b_g, b_a_hat=b_a, t=t, fresh=True)
    if regime.kind is RegimeKind.STRAIGHT:
        obs = gyro_bias_observation(u)
        target = b_g + obs if feedback else obs
        b_g = _clamp(lowpass_step(b_g, target, cfg.tau_g, dt), MAX_GYRO_BIAS)
    elif regime.kind is RegimeKind.TURNING:
        u_a = np.asarray(u, dtype=float)
        if not feedback:
            omega = np.array([0.0, 0.0, regime.omega_zb])
            u_a = u_a - steady_state_torque(omega, b_g, np.zeros(3), cfg.ahrs)
        obs = accel_bias_observation(u_a, regime.omega_zb, cfg)
        target = b_a + obs if feedback else obs
        b_a = _clamp(lowpass_step(b_a, target, cfg.tau_a, dt), MAX_ACCEL_BIAS)
        b_a = np.array([b_a[0], b_a[1], 0.0])
    return BiasEstimate(b_g_hat=b_g, b_a_hat=b_a, t=t, fresh=True)


def compensate(imu: ImuSample, est: BiasEstimate) -> ImuSample:
    """Subtract the current bias estimates from an IMU sample."""
    return ImuSample(imu.t, imu.omega_b - est.b_g_hat, imu.f_b - est.b_a_hat)
