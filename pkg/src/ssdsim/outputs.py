"""Serialized run outputs: snapshots.csv, series.csv, meta.json.

Snapshot rows are ``t, j, x, y, mu`` with the node index j restarting at 0
for each island inside a time block, so multi-island runs stay parseable
under the same schema (consumers split polylines where j drops).  Floats are
written with shortest round-trip repr, so identical runs produce
byte-identical CSV files.
"""

from __future__ import annotations

import json
import os
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import config_to_dict
from .run import RunResult

__all__ = ["write_outputs", "OutputLockError"]


class OutputLockError(RuntimeError):
    """The run directory is locked by another (or a crashed) run."""


def _fmt(v: float) -> str:
    return repr(float(v))


def _snapshot_lines(result: RunResult) -> list[str]:
    lines = ["t,j,x,y,mu"]
    for t, islands in result.snapshots:
        for state in islands:
            nodes = state.curve.nodes
            for j in range(nodes.shape[0]):
                lines.append(
                    f"{_fmt(t)},{j},{_fmt(nodes[j, 0])},{_fmt(nodes[j, 1])},"
                    f"{_fmt(state.mu[j])}"
                )
    return lines


def _series_lines(result: RunResult) -> list[str]:
    lines = ["t,W,M,c_l,c_r,iterations,mesh_ratio"]
    for rec in result.series:
        lines.append(
            f"{_fmt(rec.time)},{_fmt(rec.energy)},{_fmt(rec.mass)},"
            f"{_fmt(rec.c_l)},{_fmt(rec.c_r)},{rec.iterations},"
            f"{_fmt(rec.mesh_ratio)}"
        )
    return lines


def write_outputs(result: RunResult, out_dir) -> dict[str, Path]:
    """Write the CSV/JSON contract files; returns the paths written.

    Concurrent runs must use distinct directories; a lock file guards
    against accidental sharing.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock = out / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise OutputLockError(
            f"run directory {out} is locked ({lock} exists); concurrent runs "
            f"need distinct out dirs"
        ) from None
    os.close(fd)
    try:
        paths = {
            "snapshots": out / "snapshots.csv",
            "series": out / "series.csv",
            "meta": out / "meta.json",
        }
        paths["snapshots"].write_text(
            "\n".join(_snapshot_lines(result)) + "\n", encoding="utf-8"
        )
        paths["series"].write_text(
            "\n".join(_series_lines(result)) + "\n", encoding="utf-8"
        )
        meta = {
            "config": config_to_dict(result.config),
            "seed": result.config.solver.seed,
            "pinch_times": result.pinch_times,
            "n_islands_final": len(result.final_islands),
            "versions": {
                "ssdsim": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "wall_clock_seconds": result.wall_clock,
        }
        paths["meta"].write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return paths
    finally:
        lock.unlink(missing_ok=True)
