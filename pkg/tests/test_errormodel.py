import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from scenarios import NOMINAL_B_A, NOMINAL_B_G, ahrs_only, clean_errors
from vpbias.ahrs import AhrsConfig
from vpbias.errormodel import (
    ErrorState,
    SmallAngleError,
    accel_bias_torque,
    integrate_error_ode,
    steady_state_tilt,
    steady_state_torque,
    torque_from_tilt,
)
from vpbias.geom import skew
from vpbias.sim import Segment

CFG = AhrsConfig(tau_att=4.0, g=9.81)  # kg = 0.25 1/s
Z = np.zeros(3)
vec = st.tuples(*[st.floats(-0.01, 0.01)] * 3).map(np.array)


def horizontal_map(w: float, cfg: AhrsConfig) -> np.ndarray:
    """Closed form of the accelerometer-bias torque map on the horizontal plane."""
    k, kg = cfg.k, cfg.kg
    return (w * k / (kg * kg + w * w)) * np.array([[kg, w], [-w, kg]])


def test_scalar_tilt_decay():
    traj = integrate_error_ode(ErrorState(np.array([0.01, 0.0, 0.0])), Z, Z, Z, CFG, T=8.0)
    i = int(round(4.0 / 0.01))
    assert traj.t[i] == pytest.approx(4.0)
    assert traj.theta_b[i, 0] == pytest.approx(0.01 * math.exp(-1.0), rel=1e-5)
    assert traj.theta_b[i, 0] == pytest.approx(0.0036788, abs=1e-7)
    np.testing.assert_allclose(traj.theta_b[:, 0], 0.01 * np.exp(-traj.t / 4.0), rtol=1e-5)
    np.testing.assert_array_equal(traj.theta_b[:, 1:], 0.0)


def test_zero_inputs_give_zero_trajectory():
    traj = integrate_error_ode(ErrorState(Z), np.array([0.0, 0.0, 0.2]), Z, Z, CFG, T=10.0)
    np.testing.assert_array_equal(traj.theta_b, 0.0)


@pytest.mark.parametrize("w", [0.0, 0.2, -0.5])
def test_long_run_reaches_steady_tilt(w):
    omega = np.array([0.0, 0.0, w])
    traj = integrate_error_ode(ErrorState(Z), omega, NOMINAL_B_G, NOMINAL_B_A, CFG, T=10 * CFG.tau_att)
    ss = steady_state_tilt(omega, NOMINAL_B_G, NOMINAL_B_A, CFG)
    # Oracle: exact solution of the constant-coefficient system. After ten time
    # constants the transient left is exp(-10) ~ 4.5e-5 of the initial offset.
    A = skew(omega) + CFG.kg * np.eye(3)
    exact = ss + expm(-A * traj.t[-1]) @ (np.zeros(3) - ss)
    np.testing.assert_allclose(traj.final.theta_b, exact, rtol=1e-6, atol=1e-12)
    assert np.linalg.norm(traj.final.theta_b - ss) <= 1.01 * math.exp(-10.0) * np.linalg.norm(ss)
    th = traj.final.theta_b
    theta_dot = NOMINAL_B_G - np.cross(CFG.k_p, NOMINAL_B_A) - np.cross(omega, th) - CFG.kg * th
    u = torque_from_tilt(th, omega, NOMINAL_B_G, theta_dot)
    np.testing.assert_allclose(u, steady_state_torque(omega, NOMINAL_B_G, NOMINAL_B_A, CFG), atol=1e-6)


def test_small_angle_violation_reports_time():
    with pytest.raises(SmallAngleError) as info:
        integrate_error_ode(ErrorState(Z), Z, np.array([0.5, 0.0, 0.0]), Z, CFG, T=20.0)
    assert 0.0 < info.value.t < 20.0


def test_time_varying_rate_accepted():
    traj = integrate_error_ode(
        ErrorState(Z, t=5.0), lambda t: np.array([0.0, 0.0, 0.2 if t > 10 else 0.0]), NOMINAL_B_G, Z, CFG, T=20.0
    )
    assert traj.t[0] == 5.0 and traj.t[-1] == pytest.approx(25.0)


def test_steady_tilt_examples():
    th = steady_state_tilt(Z, np.array([1.745e-3, 0.0, 0.0]), Z, CFG)
    np.testing.assert_allclose(th, [1.745e-3 / 0.25, 0.0, 0.0], rtol=1e-12)
    assert th[0] == pytest.approx(6.981e-3, abs=2e-6)
    np.testing.assert_array_equal(steady_state_tilt(np.array([0.0, 0.0, 0.2]), Z, Z, CFG), 0.0)
    omega = np.array([0.0, 0.0, 0.2])
    b_a = np.array([0.2, 0.0, 0.0])
    th = steady_state_tilt(omega, Z, b_a, CFG)
    A = skew(omega) + CFG.kg * np.eye(3)
    assert np.linalg.norm(A @ th - (-np.cross(CFG.k_p, b_a))) <= 1e-10


def test_steady_torque_examples():
    omega = np.array([0.0, 0.0, 0.2])
    b_a = np.array([0.2, 0.0, 0.0])
    u = steady_state_torque(omega, Z, b_a, CFG)
    np.testing.assert_allclose(u[:2], horizontal_map(0.2, CFG) @ b_a[:2], rtol=1e-12)
    np.testing.assert_allclose(u, [2.4862e-3, -1.9890e-3, 0.0], atol=5e-7)
    np.testing.assert_array_equal(steady_state_torque(omega, Z, Z, CFG), 0.0)


@given(vec, st.tuples(*[st.floats(-2, 2)] * 3).map(np.array))
def test_no_rotation_torque_is_gyro_bias(b_g, b_a):
    np.testing.assert_array_equal(steady_state_torque(Z, b_g, b_a, CFG), b_g)


def test_forward_map_examples():
    np.testing.assert_array_equal(accel_bias_torque(0.2, Z, CFG), 0.0)
    np.testing.assert_allclose(accel_bias_torque(0.2, np.array([0.2, 0.0, 0.0]), CFG), [2.4862e-3, -1.9890e-3, 0.0], atol=5e-7)
    np.testing.assert_allclose(accel_bias_torque(0.2, np.array([0.0, 0.0, 0.5]), CFG), 0.0, atol=1e-18)


@given(st.floats(0.05, 1.0), st.floats(0.1, 1.0), st.floats(-2, 2), st.floats(-2, 2))
def test_forward_map_closed_form(w, kg, bx, by):
    cfg = AhrsConfig(tau_att=1.0 / kg)
    u = accel_bias_torque(w, np.array([bx, by, 0.0]), cfg)
    np.testing.assert_allclose(u[:2], horizontal_map(w, cfg) @ [bx, by], rtol=1e-9, atol=1e-15)
    assert u[2] == 0.0


def tilt_of(Cs, truth_attitude):
    """Body-frame small-angle tilt of the computed platform against the truth."""
    E = np.einsum("nij,nkj->nik", Cs, truth_attitude)
    th_p = 0.5 * np.stack([E[:, 2, 1] - E[:, 1, 2], E[:, 0, 2] - E[:, 2, 0], E[:, 1, 0] - E[:, 0, 1]], axis=1)
    return np.einsum("nji,nj->ni", truth_attitude, th_p)


def test_nonlinear_loop_follows_linear_model():
    cfg = AhrsConfig(aid_smoothing=0.0)
    segs = [Segment("straight", 100.0, 5.0), Segment("turn", 100.0, 5.0, 0.2), Segment("straight", 100.0, 5.0)]
    truth, Cs, _ = ahrs_only(segs, clean_errors(), cfg)
    tilt = tilt_of(Cs, truth.attitude)

    def rate(t):
        return np.array([0.0, 0.0, 0.2 if 100.0 <= t < 200.0 else 0.0])

    lin = integrate_error_ode(ErrorState(Z), rate, NOMINAL_B_G, NOMINAL_B_A, cfg, T=300.0).theta_b
    assert lin.shape == tilt.shape
    assert np.max(np.abs(tilt - lin)) <= 0.02 * np.max(np.abs(lin))
