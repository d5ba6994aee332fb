"""
Run configuration: a flat ``section.key = value`` text format with units.

Every dimensioned value carries a unit suffix and is converted to SI on
parse, e.g.::

    ahrs.tau_att = 4 s
    est.tau_g = 40 s
    err.b_g = 0.1 -0.1 0 deg/s
    traj.segment.1 = straight 60 s 5 m/s
    traj.segment.2 = turn 30 s 5 m/s 0.2 rad/s

Blank lines and ``#`` comments are ignored. The ``ahrs`` and ``est``
sections are required (they may be present with a single key); every other
value has a default, and :meth:`RunConfig.to_text` echoes the fully resolved
configuration back in the same format.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .ahrs import AhrsConfig
from .estimator import EstimatorConfig
from .sim import (
    MEMS_ACCEL_NOISE,
    MEMS_AID_VEL_NOISE,
    MEMS_GYRO_NOISE,
    Segment,
    SensorErrorSpec,
    TrajectorySpec,
    alternating_segments,
)

MODES = ("feedback", "blackbox")
REQUIRED_SECTIONS = ("ahrs", "est")

_DEG = math.pi / 180.0

# Accepted unit suffixes per physical dimension, with their SI factors.
UNITS: dict[str, dict[str, float]] = {
    "time": {"s": 1.0, "ms": 1e-3, "min": 60.0},
    "rate": {"rad/s": 1.0, "deg/s": _DEG, "deg/h": _DEG / 3600.0},
    "angle": {"rad": 1.0, "deg": _DEG},
    "accel": {"m/s2": 1.0, "mg": 9.80665e-3},
    "speed": {"m/s": 1.0, "km/h": 1.0 / 3.6},
    "freq": {"Hz": 1.0},
    "inv_time": {"1/s": 1.0},
    "gyro_psd": {"rad/s/rtHz": 1.0, "deg/s/rtHz": _DEG},
    "accel_psd": {"m/s2/rtHz": 1.0},
}


class ConfigError(ValueError):
    """Invalid configuration text; the message names the offending key or line."""


@dataclass(frozen=True)
class _Key:
    dim: str | None  # None: unitless (int, choice or bool)
    default: object
    check: Callable[[object], bool] = lambda v: True
    requirement: str = ""
    size: int = 1  # number of components for vector values
    kind: str = "float"  # float | int | bool | choice


def _pos(v) -> bool:
    return v > 0.0


def _nonneg(v) -> bool:
    return v >= 0.0


_SCHEMA: dict[str, dict[str, _Key]] = {
    "ahrs": {
        "tau_att": _Key("time", 4.0, _pos, "> 0"),
        "g": _Key("accel", 9.81, _pos, "> 0"),
        "heading_gain": _Key("inv_time", 1.0, _nonneg, ">= 0"),
        "aid_smoothing": _Key("time", 0.2, _nonneg, ">= 0"),
        "stale_after": _Key("time", 0.5, _pos, "> 0"),
    },
    "est": {
        "tau_g": _Key("time", 40.0, _pos, "> 0"),
        "tau_a": _Key("time", 40.0, _pos, "> 0"),
        "turn_threshold": _Key("rate", 0.05, _pos, "> 0"),
        "straight_threshold": _Key("rate", 0.02, _pos, "> 0"),
        "dwell": _Key("time", 2.0, _nonneg, ">= 0"),
        "smooth_tau": _Key("time", 1.0, _pos, "> 0"),
        "settle": _Key("time", 12.0, _nonneg, ">= 0"),
    },
    "aid": {
        "rate": _Key("freq", 10.0, _pos, "> 0"),
        "min_speed": _Key("speed", 1.0, _nonneg, ">= 0"),
    },
    "traj": {
        "imu_rate": _Key("freq", 100.0, _pos, "> 0"),
        "initial_heading": _Key("angle", 0.0),
        "duration": _Key("time", 600.0, _pos, "> 0"),
        "straight": _Key("time", 60.0, _pos, "> 0"),
        "turn": _Key("time", 30.0, _nonneg, ">= 0"),
        "speed": _Key("speed", 5.0, _nonneg, ">= 0"),
        "yaw_rate": _Key("rate", 0.2),
        "alternate": _Key(None, True, kind="bool"),
    },
    "err": {
        "b_g": _Key("rate", (0.1 * _DEG, -0.1 * _DEG, 0.0), size=3),
        "b_a": _Key("accel", (0.2, -0.2, 0.0), size=3),
        "gyro_noise": _Key("gyro_psd", MEMS_GYRO_NOISE, _nonneg, ">= 0"),
        "accel_noise": _Key("accel_psd", MEMS_ACCEL_NOISE, _nonneg, ">= 0"),
        "aid_vel_noise": _Key("speed", MEMS_AID_VEL_NOISE, _nonneg, ">= 0"),
        "misalignment": _Key(
            "angle",
            (0.0, 0.0, 0.0),
            lambda v: all(abs(a) <= 0.35 for a in v),
            "each |angle| <= 0.35 rad",
            size=3,
        ),
        "seed": _Key(None, 0, lambda v: v >= 0, ">= 0", kind="int"),
    },
    "run": {
        "mode": _Key(None, "feedback", lambda v: v in MODES, "feedback|blackbox", kind="choice"),
        "window": _Key("time", 200.0, _pos, "> 0"),
    },
}

# Pattern keys describe the default alternating path; explicit segments replace it.
_PATTERN_KEYS = ("duration", "straight", "turn", "speed", "yaw_rate", "alternate")
_SEGMENT_RE = re.compile(r"^segment\.(\d+)$")
_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of one simulate/estimate run."""

    ahrs: AhrsConfig
    est: EstimatorConfig
    traj: TrajectorySpec
    err: SensorErrorSpec
    aid_rate: float = 10.0
    min_speed: float = 1.0
    mode: str = "feedback"
    window: float = 200.0
    values: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"run.mode: expected one of {MODES}, got {self.mode!r}")
        if abs(self.ahrs.tau_att - self.est.tau_att) > 1e-12 or abs(self.ahrs.g - self.est.g) > 1e-12:
            raise ConfigError("ahrs and est must share tau_att and g")
        if abs(self.aid_rate - self.traj.aid_rate) > 1e-12:
            raise ConfigError("aid.rate disagrees with the trajectory aid rate")
        if not self.window < self.traj.duration:
            raise ConfigError(
                f"run.window ({self.window} s) must be shorter than the path ({self.traj.duration} s)"
            )

    @property
    def feedback(self) -> bool:
        return self.mode == "feedback"

    def with_overrides(
        self, *, seed: int | None = None, mode: str | None = None
    ) -> RunConfig:
        """Copy with the command-line overrides applied."""
        cfg = self
        vals = dict(self.values)
        if seed is not None:
            if seed < 0:
                raise ConfigError(f"err.seed: must be >= 0, got {seed}")
            cfg = replace(cfg, err=replace(cfg.err, seed=int(seed)))
            vals["err.seed"] = int(seed)
        if mode is not None:
            if mode not in MODES:
                raise ConfigError(f"run.mode: expected one of {MODES}, got {mode!r}")
            cfg = replace(cfg, mode=mode)
            vals["run.mode"] = mode
        return replace(cfg, values=tuple(vals.items()))

    def to_text(self) -> str:
        """Resolved configuration in SI units, parseable by :func:`parse_config`."""
        return "".join(f"{k} = {_format_value(k, v)}\n" for k, v in self.values)


def _si_unit(dim: str) -> str:
    return next(iter(UNITS[dim]))


def _format_value(key: str, value: object) -> str:
    section, name = key.split(".", 1)
    if section == "traj" and _SEGMENT_RE.match(name):
        seg: Segment = value  # type: ignore[assignment]
        text = f"{seg.kind} {seg.duration!r} s {seg.speed!r} m/s"
        if seg.kind == "turn":
            text += f" {seg.yaw_rate!r} rad/s"
        return text
    spec = _SCHEMA[section][name]
    if spec.kind == "bool":
        return "true" if value else "false"
    if spec.kind in ("int", "choice"):
        return str(value)
    nums = value if spec.size > 1 else (value,)
    return " ".join(repr(float(x)) for x in nums) + " " + _si_unit(spec.dim)  # type: ignore[arg-type]


def _parse_quantity(key: str, text: str, dim: str, size: int) -> float | tuple[float, ...]:
    tokens = text.split()
    unit = None
    if tokens and not re.fullmatch(_NUMBER, tokens[-1]):
        unit = tokens.pop()
    if not tokens or not all(re.fullmatch(_NUMBER, x) for x in tokens):
        raise ConfigError(f"{key}: cannot parse {text.strip()!r} as numbers followed by a unit")
    nums = [float(x) for x in tokens]
    if unit is None:
        raise ConfigError(f"{key}: missing unit, expected one of {sorted(UNITS[dim])}")
    if unit not in UNITS[dim]:
        raise ConfigError(f"{key}: unit {unit!r} not valid here, expected one of {sorted(UNITS[dim])}")
    if len(nums) != size:
        raise ConfigError(f"{key}: expected {size} value(s), got {len(nums)}")
    if not all(math.isfinite(x) for x in nums):
        raise ConfigError(f"{key}: values must be finite")
    factor = UNITS[dim][unit]
    vals = tuple(x * factor for x in nums)
    return vals if size > 1 else vals[0]


def _parse_value(key: str, spec: _Key, text: str) -> object:
    if spec.kind == "bool":
        low = text.strip().lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ConfigError(f"{key}: expected true/false, got {text!r}")
        return low in ("true", "yes", "1")
    if spec.kind == "int":
        try:
            value: object = int(text.strip())
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    elif spec.kind == "choice":
        value = text.strip()
    else:
        value = _parse_quantity(key, text, spec.dim, spec.size)  # type: ignore[arg-type]
    if not spec.check(value):
        raise ConfigError(f"{key}: value {text.strip()!r} out of range ({spec.requirement})")
    return value


def _parse_segment(key: str, text: str) -> Segment:
    tokens = text.split()
    if not tokens or tokens[0] not in ("straight", "turn"):
        raise ConfigError(f"{key}: segment must start with 'straight' or 'turn', got {text!r}")
    kind = tokens[0]
    want = [("time", "duration"), ("speed", "speed")] + ([("rate", "yaw rate")] if kind == "turn" else [])
    rest = tokens[1:]
    if len(rest) != 2 * len(want):
        units = " ".join(f"<{label}> <unit>" for _, label in want)
        raise ConfigError(f"{key}: expected '{kind} {units}', got {text!r}")
    vals = [
        _parse_quantity(key, f"{rest[2 * i]} {rest[2 * i + 1]}", dim, 1) for i, (dim, _) in enumerate(want)
    ]
    try:
        return Segment(kind, *vals)  # type: ignore[arg-type]
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def parse_config(text: str) -> RunConfig:
    """
    Parse and validate configuration text.

    Parameters
    ----------
    text : str
        Lines of the form ``section.key = value [unit]``.

    Returns
    -------
    RunConfig
        Validated configuration; ``values`` lists every setting, including
        defaults, in SI units.

    Raises
    ------
    ConfigError
        On unknown or duplicate keys, malformed values or units, out-of-range
        values, inconsistent settings, or a missing ``ahrs``/``est`` section.
    """
    given: dict[str, object] = {}
    segments: dict[int, Segment] = {}
    sections: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} lacks a section")
        section, name = key.split(".", 1)
        if section not in _SCHEMA:
            raise ConfigError(f"{key}: unknown section {section!r}")
        if key in given or (section == "traj" and _SEGMENT_RE.match(name) and int(name.split(".")[1]) in segments):
            raise ConfigError(f"{key}: duplicate key")
        sections.add(section)
        seg = _SEGMENT_RE.match(name) if section == "traj" else None
        if seg:
            segments[int(seg.group(1))] = _parse_segment(key, value)
            continue
        if name not in _SCHEMA[section]:
            raise ConfigError(f"{key}: unknown key")
        given[key] = _parse_value(key, _SCHEMA[section][name], value)

    missing = [s for s in REQUIRED_SECTIONS if s not in sections]
    if missing:
        raise ConfigError(f"missing required section(s): {', '.join(missing)}")
    if segments and any(f"traj.{k}" in given for k in _PATTERN_KEYS):
        raise ConfigError("traj: explicit segments cannot be combined with the alternating-path keys")

    def get(key: str) -> object:
        if key in given:
            return given[key]
        section, name = key.split(".", 1)
        return _SCHEMA[section][name].default

    # The settle default follows tau_att unless given explicitly.
    settle = given.get("est.settle", 3.0 * float(get("ahrs.tau_att")))  # type: ignore[arg-type]

    if float(get("est.straight_threshold")) >= float(get("est.turn_threshold")):  # type: ignore[arg-type]
        raise ConfigError("est.straight_threshold: must be below est.turn_threshold")

    try:
        ahrs = AhrsConfig(
            tau_att=get("ahrs.tau_att"),
            g=get("ahrs.g"),
            heading_gain=get("ahrs.heading_gain"),
            aid_smoothing=get("ahrs.aid_smoothing"),
            stale_after=get("ahrs.stale_after"),
        )
        est = EstimatorConfig(
            tau_g=get("est.tau_g"),
            tau_a=get("est.tau_a"),
            tau_att=ahrs.tau_att,
            g=ahrs.g,
            turn_threshold=get("est.turn_threshold"),
            straight_threshold=get("est.straight_threshold"),
            dwell=get("est.dwell"),
            smooth_tau=get("est.smooth_tau"),
            settle=settle,
        )
        if segments:
            segs = tuple(segments[i] for i in sorted(segments))
        else:
            segs = alternating_segments(
                duration=get("traj.duration"),
                straight=get("traj.straight"),
                turn=get("traj.turn"),
                speed=get("traj.speed"),
                yaw_rate=get("traj.yaw_rate"),
                alternate=get("traj.alternate"),
            )
        traj = TrajectorySpec(
            segs,
            initial_heading=get("traj.initial_heading"),
            imu_rate=get("traj.imu_rate"),
            aid_rate=get("aid.rate"),
        )
        err = SensorErrorSpec(
            b_g=np.array(get("err.b_g"), dtype=float),
            b_a=np.array(get("err.b_a"), dtype=float),
            gyro_noise_density=get("err.gyro_noise"),
            accel_noise_density=get("err.accel_noise"),
            misalignment=tuple(get("err.misalignment")),
            aid_vel_noise=get("err.aid_vel_noise"),
            seed=get("err.seed"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None

    values: list[tuple[str, object]] = []
    for section, keys in _SCHEMA.items():
        for name in keys:
            key = f"{section}.{name}"
            if section == "traj" and segments and name in _PATTERN_KEYS:
                continue
            values.append((key, settle if key == "est.settle" else get(key)))
        if section == "traj":
            values.extend((f"traj.segment.{i}", segments[i]) for i in sorted(segments))

    return RunConfig(
        ahrs=ahrs,
        est=est,
        traj=traj,
        err=err,
        aid_rate=float(get("aid.rate")),  # type: ignore[arg-type]
        min_speed=float(get("aid.min_speed")),  # type: ignore[arg-type]
        mode=str(get("run.mode")),
        window=float(get("run.window")),  # type: ignore[arg-type]
        values=tuple(values),
    )


DEFAULT_CONFIG_TEXT = """\
ahrs.tau_att = 4 s
est.tau_g = 40 s
est.tau_a = 40 s
"""


def default_config() -> RunConfig:
    return parse_config(DEFAULT_CONFIG_TEXT)
