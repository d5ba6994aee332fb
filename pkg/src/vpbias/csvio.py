"""
CSV files exchanged between the simulator, the estimator and external tools.

All files have a mandatory header row, ``,`` separators and SI units. Floats
are written with the shortest representation that round-trips exactly, so
equal inputs always produce identical bytes.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from .sim import ImuSeries, VelocitySeries

Array = NDArray[np.float64]

IMU_COLUMNS = ("t", "wx", "wy", "wz", "fx", "fy", "fz")
AID_COLUMNS = ("t", "vn", "ve", "vd")
TRUTH_COLUMNS = (
    "t", "roll", "pitch", "heading", "wzb",
    "bg_x", "bg_y", "bg_z", "ba_x", "ba_y", "ba_z",
)  # fmt: skip
EST_COLUMNS = (
    "t", "regime", "ux", "uy", "uz",
    "bg_x", "bg_y", "bg_z", "ba_x", "ba_y", "ba_z",
    "roll", "pitch", "heading",
)  # fmt: skip


class CsvFormatError(ValueError):
    """A CSV file has the wrong header, column count or a non-numeric field."""


def _write(path: Path, columns: Sequence[str], rows: list[list]) -> None:
    lines = [",".join(columns)]
    lines.extend(",".join(x if isinstance(x, str) else repr(x) for x in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_table(path: Path, columns: Sequence[str], data: Array) -> None:
    """Write a numeric 2-D array under ``columns``."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError(f"expected {len(columns)} columns, got shape {data.shape}")
    _write(path, columns, data.tolist())


def read_table(path: Path, columns: Sequence[str]) -> Array:
    """Read a numeric CSV, checking the header against ``columns``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != tuple(columns):
            raise CsvFormatError(f"{path}: expected header {','.join(columns)}")
        rows = []
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(columns):
                raise CsvFormatError(f"{path}:{lineno}: expected {len(columns)} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise CsvFormatError(f"{path}:{lineno}: non-numeric field") from None
    if not rows:
        return np.zeros((0, len(columns)))
    out = np.array(rows)
    if not np.all(np.isfinite(out)):
        raise CsvFormatError(f"{path}: non-finite value")
    return out


def write_imu(path: Path, imu: ImuSeries) -> None:
    write_table(path, IMU_COLUMNS, np.column_stack([imu.t, imu.omega_b, imu.f_b]))


def read_imu(path: Path) -> ImuSeries:
    d = read_table(path, IMU_COLUMNS)
    return ImuSeries(d[:, 0].copy(), d[:, 1:4].copy(), d[:, 4:7].copy())


def write_aid(path: Path, vel: VelocitySeries) -> None:
    write_table(path, AID_COLUMNS, np.column_stack([vel.t, vel.velocity]))


def read_aid(path: Path) -> VelocitySeries:
    d = read_table(path, AID_COLUMNS)
    return VelocitySeries(d[:, 0].copy(), d[:, 1:4].copy())


def write_truth(path: Path, t: Array, euler: Array, wzb: Array, b_g: Array, b_a: Array) -> None:
    n = len(t)
    data = np.column_stack([t, euler, wzb, np.broadcast_to(b_g, (n, 3)), np.broadcast_to(b_a, (n, 3))])
    write_table(path, TRUTH_COLUMNS, data)


def write_estimates(path: Path, series) -> None:
    """Write an :class:`~vpbias.pipeline.EstimateSeries`."""
    num = np.column_stack([series.t, series.u, series.b_g, series.b_a, series.euler]).tolist()
    rows = [[r[0], regime, *r[1:]] for r, regime in zip(num, series.regime)]
    _write(path, EST_COLUMNS, rows)


def read_estimates(path: Path) -> tuple[tuple[str, ...], Array]:
    """Regime labels and the numeric columns (``regime`` removed)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != EST_COLUMNS:
            raise CsvFormatError(f"{path}: expected header {','.join(EST_COLUMNS)}")
        regimes, rows = [], []
        for row in reader:
            if len(row) != len(EST_COLUMNS):
                raise CsvFormatError(f"{path}: bad row length {len(row)}")
            regimes.append(row[1])
            rows.append([float(row[0])] + [float(x) for x in row[2:]])
    return tuple(regimes), np.array(rows)
