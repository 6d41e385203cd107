"""Parsers for the run-directory contract: series.csv, snapshots.csv, meta.json.

Floats are stored with shortest round-trip repr, so parsing with float() and
re-dumping with repr() reproduces the files byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SERIES_COLUMNS = ("t", "W", "M", "c_l", "c_r", "iterations", "mesh_ratio")
SNAPSHOT_COLUMNS = ("t", "j", "x", "y", "mu")


class ContractError(ValueError):
    """A run-directory file is missing or malformed."""


@dataclass
class Series:
    t: np.ndarray
    energy: np.ndarray
    mass: np.ndarray
    c_l: np.ndarray
    c_r: np.ndarray
    iterations: np.ndarray
    mesh_ratio: np.ndarray


@dataclass
class Snapshot:
    t: float
    islands: list[np.ndarray]  # per island: (n_nodes, 3) columns x, y, mu


def _check_header(path: Path, line: str, expected) -> None:
    cols = tuple(line.strip().split(","))
    if cols != expected:
        missing = set(expected) - set(cols)
        raise ContractError(
            f"{path}: expected columns {','.join(expected)}"
            + (f" (missing {sorted(missing)})" if missing else f", got {line.strip()}")
        )


def read_series(run_dir) -> Series:
    path = Path(run_dir) / "series.csv"
    if not path.exists():
        raise ContractError(f"{path} does not exist")
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    if not lines:
        raise ContractError(f"{path} is empty")
    _check_header(path, lines[0], SERIES_COLUMNS)
    if len(lines) == 1:
        raise ContractError(f"{path} has no data rows")
    rows = [line.split(",") for line in lines[1:]]
    cols = list(zip(*rows))
    return Series(
        t=np.array([float(v) for v in cols[0]]),
        energy=np.array([float(v) for v in cols[1]]),
        mass=np.array([float(v) for v in cols[2]]),
        c_l=np.array([float(v) for v in cols[3]]),
        c_r=np.array([float(v) for v in cols[4]]),
        iterations=np.array([int(v) for v in cols[5]]),
        mesh_ratio=np.array([float(v) for v in cols[6]]),
    )


def dump_series(series: Series) -> str:
    """Inverse of read_series; byte-identical to the simulator's writer."""
    lines = [",".join(SERIES_COLUMNS)]
    for i in range(len(series.t)):
        lines.append(
            f"{float(series.t[i])!r},{float(series.energy[i])!r},"
            f"{float(series.mass[i])!r},{float(series.c_l[i])!r},"
            f"{float(series.c_r[i])!r},{int(series.iterations[i])},"
            f"{float(series.mesh_ratio[i])!r}"
        )
    return "\n".join(lines) + "\n"


def read_snapshots(run_dir) -> list[Snapshot]:
    """Snapshots grouped by time; the node index restarting at 0 inside a
    time block separates islands."""
    path = Path(run_dir) / "snapshots.csv"
    if not path.exists():
        raise ContractError(f"{path} does not exist")
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    _check_header(path, lines[0], SNAPSHOT_COLUMNS)
    snapshots: list[Snapshot] = []
    current_t = None
    islands: list[list[list[float]]] = []
    prev_j = -1
    for line in lines[1:]:
        t_s, j_s, x_s, y_s, mu_s = line.split(",")
        t, j = float(t_s), int(j_s)
        if current_t is None or t != current_t:
            if current_t is not None:
                snapshots.append(
                    Snapshot(current_t, [np.array(isl) for isl in islands])
                )
            current_t = t
            islands = [[]]
            prev_j = -1
        elif j <= prev_j:
            islands.append([])
        islands[-1].append([float(x_s), float(y_s), float(mu_s)])
        prev_j = j
    if current_t is not None:
        snapshots.append(Snapshot(current_t, [np.array(isl) for isl in islands]))
    return snapshots


def read_meta(run_dir) -> dict:
    path = Path(run_dir) / "meta.json"
    if not path.exists():
        raise ContractError(f"{path} does not exist")
    return json.loads(path.read_text(encoding="utf-8"))


def read_convergence(path) -> list[dict]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    _check_header(path, lines[0], ("h", "dt", "error", "order"))
    rows = []
    for line in lines[1:]:
        h, dt, err, order = line.split(",")
        rows.append(
            {
                "h": float(h),
                "dt": float(dt),
                "error": float(err),
                "order": None if order == "-" else float(order),
            }
        )
    return rows
