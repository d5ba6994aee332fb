"""
Command-line front end.

Subcommands::

    vpbias simulate --config run.cfg --out-dir out/   # truth.csv, imu.csv, aid.csv
    vpbias estimate --config run.cfg --in-dir out/    # est.csv from imu.csv + aid.csv
    vpbias run      --config run.cfg --out-dir out/   # both, plus metrics.json
    vpbias oracle   --config run.cfg                  # linear-model predictions (JSON)

On failure a single line ``vpbias: error: <Kind>: <message>`` is written to
stderr and the exit code is 2 for usage/configuration errors, 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import csvio
from .config import MODES, ConfigError, RunConfig, default_config, parse_config
from .errormodel import accel_bias_torque, steady_state_tilt, steady_state_torque
from .estimator import accel_bias_observation
from .metrics import RunMetrics, compute_metrics
from .pipeline import EstimateSeries, estimate_from_velocity
from .sim import (
    ImuSeries,
    TruthSeries,
    VelocitySeries,
    build_trajectory,
    sensor_euler,
    synth_aid,
    synth_imu,
)

# Seconds at the end of each settled segment over which the torque is averaged.
ORACLE_WINDOW = 5.0


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class Simulation:
    truth: TruthSeries
    imu: ImuSeries
    vel: VelocitySeries


def simulate(cfg: RunConfig) -> Simulation:
    truth = build_trajectory(cfg.traj, cfg.ahrs.g)
    imu = synth_imu(truth, cfg.err)
    vel = synth_aid(truth, cfg.err, cfg.aid_rate)
    return Simulation(truth, imu, vel)


def estimate(cfg: RunConfig, imu: ImuSeries, vel: VelocitySeries) -> EstimateSeries:
    return estimate_from_velocity(
        imu, vel, cfg.ahrs, cfg.est, min_speed=cfg.min_speed, feedback=cfg.feedback
    )


def oracle_report(cfg: RunConfig) -> dict:
    """
    Steady-state tilt and torque of the linear error model for every distinct
    vertical rate on the path, with the configured biases.
    """
    rates = sorted({0.0} | {s.rate for s in cfg.traj.segments})
    out = []
    for w in rates:
        omega = np.array([0.0, 0.0, w])
        entry = {
            "omega_zb_rad_s": w,
            "tilt_rad": steady_state_tilt(omega, cfg.err.b_g, cfg.err.b_a, cfg.ahrs).tolist(),
            "torque_rad_s": steady_state_torque(omega, cfg.err.b_g, cfg.err.b_a, cfg.ahrs).tolist(),
        }
        if w != 0.0:
            accel_part = accel_bias_torque(w, cfg.err.b_a, cfg.ahrs)
            entry["accel_torque_rad_s"] = accel_part.tolist()
            if abs(w) >= cfg.est.turn_threshold:
                entry["accel_bias_recovered_m_s2"] = accel_bias_observation(accel_part, w, cfg.est).tolist()
        out.append(entry)
    return {"tau_att_s": cfg.ahrs.tau_att, "g_m_s2": cfg.ahrs.g, "regimes": out}


def regime_check(cfg: RunConfig, sim: Simulation, series: EstimateSeries) -> list[dict]:
    """
    Measured steady torque at the end of each long-enough segment against the
    linear-model prediction for the bias left uncompensated at that time.
    """
    mount = cfg.err.mount
    out = []
    t0 = 0.0
    for seg in cfg.traj.segments:
        t1 = t0 + seg.duration
        if seg.duration >= cfg.est.settle_time + ORACLE_WINDOW:
            sel = (series.t > t1 - ORACLE_WINDOW) & (series.t <= t1 + 1e-9)
            u = series.u[sel].mean(axis=0)
            b_g, b_a = cfg.err.b_g, cfg.err.b_a
            if cfg.feedback:
                b_g = b_g - series.b_g[sel].mean(axis=0)
                b_a = b_a - series.b_a[sel].mean(axis=0)
            omega = mount.T @ np.array([0.0, 0.0, seg.rate])
            pred = steady_state_torque(omega, b_g, b_a, cfg.ahrs)
            out.append(
                {
                    "t_start_s": t0,
                    "t_end_s": t1,
                    "kind": seg.kind,
                    "omega_zb_rad_s": seg.rate,
                    "u_measured_rad_s": u.tolist(),
                    "u_predicted_rad_s": pred.tolist(),
                    "abs_error_rad_s": float(np.linalg.norm(u - pred)),
                }
            )
        t0 = t1
    return out


def truth_euler(cfg: RunConfig, truth: TruthSeries) -> np.ndarray:
    return sensor_euler(truth, cfg.err)


def metrics_for(cfg: RunConfig, sim: Simulation, series: EstimateSeries) -> RunMetrics:
    return compute_metrics(
        series.t,
        series.b_g,
        series.b_a,
        cfg.err.b_g,
        cfg.err.b_a,
        cfg.window,
        turning=np.abs(sim.truth.omega_b[:, 2]) > 0.0,
        euler_est=series.euler,
        euler_true=truth_euler(cfg, sim.truth),
    )


def write_simulation(out_dir: Path, cfg: RunConfig, sim: Simulation) -> None:
    csvio.write_truth(
        out_dir / "truth.csv",
        sim.truth.t,
        truth_euler(cfg, sim.truth),
        sim.truth.omega_b[:, 2],
        cfg.err.b_g,
        cfg.err.b_a,
    )
    csvio.write_imu(out_dir / "imu.csv", sim.imu)
    csvio.write_aid(out_dir / "aid.csv", sim.vel)


def run_pipeline(cfg: RunConfig, out_dir: Path | str) -> RunMetrics:
    """
    Simulate, estimate, and write ``truth.csv``, ``imu.csv``, ``aid.csv``,
    ``est.csv``, ``config.txt`` and ``metrics.json`` into ``out_dir``.

    Outputs are byte-identical for equal configurations and seeds.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sim = simulate(cfg)
    series = estimate(cfg, sim.imu, sim.vel)
    metrics = metrics_for(cfg, sim, series)
    metrics.extra["oracle"] = oracle_report(cfg)
    metrics.extra["regime_check"] = regime_check(cfg, sim, series)
    metrics.extra["mode"] = cfg.mode
    metrics.extra["seed"] = cfg.err.seed

    (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
    write_simulation(out, cfg, sim)
    csvio.write_estimates(out / "est.csv", series)
    (out / "metrics.json").write_text(json.dumps(metrics.as_dict(), indent=2, sort_keys=True) + "\n")
    return metrics


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # one-line errors instead of usage dumps
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vpbias", description="AHRS torque-based IMU bias estimation.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--config", type=Path, help="configuration file (defaults if omitted)")

    s = sub.add_parser("simulate", help="write truth.csv, imu.csv and aid.csv")
    common(s)
    s.add_argument("--seed", type=int)
    s.add_argument("--out-dir", type=Path, default=Path("."))

    e = sub.add_parser("estimate", help="read imu.csv and aid.csv, write est.csv")
    common(e)
    e.add_argument("--mode", choices=MODES)
    e.add_argument("--in-dir", type=Path, help="directory holding imu.csv and aid.csv (default: --out-dir)")
    e.add_argument("--out-dir", type=Path, default=Path("."))

    r = sub.add_parser("run", help="simulate, estimate and write metrics.json")
    common(r)
    r.add_argument("--seed", type=int)
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--out-dir", type=Path, default=Path("."))

    o = sub.add_parser("oracle", help="print linear-model steady states as JSON")
    common(o)
    return p


def _load(args: argparse.Namespace) -> RunConfig:
    if args.config is None:
        cfg = default_config()
    else:
        cfg = parse_config(args.config.read_text(encoding="utf-8"))
    return cfg.with_overrides(seed=getattr(args, "seed", None), mode=getattr(args, "mode", None))


def _dispatch(args: argparse.Namespace) -> None:
    cfg = _load(args)
    if args.command == "oracle":
        sys.stdout.write(json.dumps(oracle_report(cfg), indent=2, sort_keys=True) + "\n")
        return
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "simulate":
        (out / "config.txt").write_text(cfg.to_text(), encoding="utf-8")
        write_simulation(out, cfg, simulate(cfg))
    elif args.command == "estimate":
        src = Path(args.in_dir) if args.in_dir is not None else out
        imu = csvio.read_imu(src / "imu.csv")
        vel = csvio.read_aid(src / "aid.csv")
        csvio.write_estimates(out / "est.csv", estimate(cfg, imu, vel))
    elif args.command == "run":
        run_pipeline(cfg, out)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        _dispatch(args)
    except (UsageError, ConfigError) as exc:
        sys.stderr.write(f"vpbias: error: {type(exc).__name__}: {_one_line(exc)}\n")
        return 2
    except (OSError, ValueError) as exc:
        sys.stderr.write(f"vpbias: error: {type(exc).__name__}: {_one_line(exc)}\n")
        return 1
    return 0


def _one_line(exc: BaseException) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
