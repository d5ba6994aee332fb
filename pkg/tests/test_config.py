import math

import numpy as np
import pytest

from vpbias.config import ConfigError, default_config, parse_config

BASE = "ahrs.tau_att = 4 s\nest.tau_g = 40 s\n"


def test_loop_time_constant():
    cfg = parse_config("ahrs.tau_att = 4 s\nest.tau_g = 40 s")
    assert cfg.ahrs.tau_att == 4.0
    assert cfg.est.tau_att == 4.0


def test_bias_filter_time_constants():
    cfg = parse_config("ahrs.tau_att = 4 s\nest.tau_g = 40 s\nest.tau_a = 40 s")
    assert (cfg.est.tau_g, cfg.est.tau_a) == (40.0, 40.0)


@pytest.mark.parametrize(
    "line, match",
    [
        ("ahrs.g = -1 m/s2", "out of range"),
        ("est.turn_threshold = 0 rad/s", "out of range"),
        ("err.misalignment = 25 0 0 deg", "out of range"),
        ("err.seed = -3", "out of range"),
        ("run.mode = sideways", "out of range"),
        ("est.straight_threshold = 0.1 rad/s", "below"),
        ("run.window = 1000 s", "shorter than the path"),
    ],
)
def test_range_errors(line, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(BASE + line)


def test_negative_time_constant_rejected():
    with pytest.raises(ConfigError, match="out of range"):
        parse_config("ahrs.tau_att = -1 s\nest.tau_g = 40 s")


@pytest.mark.parametrize(
    "text, match",
    [
        (BASE + "est.tau_gyro = 40 s", "unknown key"),
        (BASE + "nav.rate = 1 Hz", "unknown section"),
        (BASE + "tau = 4 s", "lacks a section"),
        (BASE + "ahrs.tau_att 4 s", "expected"),
        (BASE + "ahrs.g = 9.81", "missing unit"),
        (BASE + "ahrs.g = 9.81 m/s", "not valid"),
        (BASE + "err.b_g = 0.1 0.1 deg/s", "3 value"),
        (BASE + "err.b_a = x y z m/s2", "cannot parse"),
        (BASE + "ahrs.tau_att = 5 s", "duplicate"),
        ("ahrs.tau_att = 4 s", "missing required section"),
        ("est.tau_g = 40 s", "missing required section"),
        (BASE + "traj.segment.1 = hover 5 s", "segment must start"),
        (BASE + "traj.segment.1 = turn 5 s 5 m/s", "expected"),
        (BASE + "traj.segment.1 = straight 5 s 5 m/s\ntraj.speed = 3 m/s", "cannot be combined"),
    ],
)
def test_rejections(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_unit_conversion():
    cfg = parse_config(
        BASE
        + "err.b_g = 0.1 -0.1 0 deg/s\n"
        + "err.misalignment = 10 5 -3 deg\n"
        + "est.turn_threshold = 3 deg/s\n"
        + "err.gyro_noise = 0.05 deg/s/rtHz\n"
        + "ahrs.stale_after = 500 ms\n"
        + "traj.speed = 18 km/h\n"
    )
    d = math.pi / 180
    np.testing.assert_allclose(cfg.err.b_g, [0.1 * d, -0.1 * d, 0.0])
    np.testing.assert_allclose(cfg.err.misalignment, [10 * d, 5 * d, -3 * d])
    assert cfg.est.turn_threshold == pytest.approx(3 * d)
    assert cfg.err.gyro_noise_density == pytest.approx(0.05 * d)
    assert cfg.ahrs.stale_after == pytest.approx(0.5)
    assert cfg.traj.segments[0].speed == pytest.approx(5.0)


def test_comments_and_blank_lines():
    cfg = parse_config("# loop\n\nahrs.tau_att = 2 s   # faster\nest.dwell = 1 s\n")
    assert cfg.ahrs.tau_att == 2.0 and cfg.est.dwell == 1.0
    assert cfg.est.settle_time == 6.0  # follows tau_att


def test_explicit_segments():
    cfg = parse_config(BASE + "traj.segment.2 = turn 30 s 5 m/s 11.459 deg/s\ntraj.segment.1 = straight 60 s 5 m/s\nrun.window = 60 s\n")
    kinds = [s.kind for s in cfg.traj.segments]
    assert kinds == ["straight", "turn"]
    assert cfg.traj.segments[1].yaw_rate == pytest.approx(0.2, rel=1e-4)
    assert "traj.segment.1 = straight 60.0 s 5.0 m/s" in cfg.to_text()


def test_defaults_are_echoed_and_roundtrip():
    cfg = default_config()
    text = cfg.to_text()
    for key in ("ahrs.heading_gain", "est.dwell", "est.settle", "aid.rate", "traj.duration", "err.gyro_noise", "run.mode"):
        assert f"{key} = " in text
    again = parse_config(text)
    assert again.to_text() == text
    assert again.traj == cfg.traj
    assert cfg.mode == "feedback" and cfg.traj.duration == 600.0


def test_overrides():
    cfg = default_config().with_overrides(seed=9, mode="blackbox")
    assert cfg.err.seed == 9 and not cfg.feedback
    assert "err.seed = 9" in cfg.to_text() and "run.mode = blackbox" in cfg.to_text()
    with pytest.raises(ConfigError):
        default_config().with_overrides(mode="open")
