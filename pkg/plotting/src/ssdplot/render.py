"""Render figures from parsed run data.  Data pass through unaltered."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import (
    ContractError,
    read_convergence,
    read_meta,
    read_series,
    read_snapshots,
)
from .substrate_outline import substrate_polyline

KINDS = ("snapshots", "energy", "mass", "convergence", "contact_trace")


@dataclass
class PlotJob:
    run_dir: Path
    kind: str
    times: list[float] = field(default_factory=list)
    out_dir: Path | None = None
    fmt: str = "png"
    dpi: int = 150

    def __post_init__(self):
        self.run_dir = Path(self.run_dir)
        if self.kind not in KINDS:
            raise ValueError(f"figure kind must be one of {KINDS}, got {self.kind!r}")


def render(job: PlotJob) -> list[Path]:
    """Render the requested figure kind; returns the written image paths."""
    out_dir = job.out_dir or (job.run_dir / "plots")
    out_dir.mkdir(parents=True, exist_ok=True)
    if job.kind == "snapshots":
        return _render_snapshots(job, out_dir)
    if job.kind == "energy":
        return _render_series(job, out_dir, "energy")
    if job.kind == "mass":
        return _render_series(job, out_dir, "mass")
    if job.kind == "contact_trace":
        return _render_contacts(job, out_dir)
    return _render_convergence(job, out_dir)


def _save(fig, out_dir: Path, name: str, job: PlotJob) -> Path:
    path = out_dir / f"{name}.{job.fmt}"
    fig.savefig(path, dpi=job.dpi, bbox_inches="tight")
    plt.close(fig)
    return path


def _pick_snapshot(snapshots, t: float):
    times = np.array([snap.t for snap in snapshots])
    idx = int(np.argmin(np.abs(times - t)))
    return snapshots[idx]


def _render_snapshots(job: PlotJob, out_dir: Path) -> list[Path]:
    snapshots = read_snapshots(job.run_dir)
    meta = read_meta(job.run_dir)
    series = read_series(job.run_dir)
    sub_spec = meta["config"]["substrate"]
    times = job.times or [snapshots[0].t, snapshots[-1].t]
    margin = 0.1 * max(series.c_r.max() - series.c_l.min(), 1.0)
    outline = substrate_polyline(
        sub_spec, float(series.c_l.min() - margin), float(series.c_r.max() + margin)
    )
    paths = []
    for t in times:
        snap = _pick_snapshot(snapshots, t)
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot(outline[:, 0], outline[:, 1], color="0.4", lw=1.2,
                label="substrate", zorder=1)
        for island in snap.islands:
            ax.plot(island[:, 0], island[:, 1], color="tab:blue", lw=1.6, zorder=2)
            ax.plot(
                [island[0, 0], island[-1, 0]], [island[0, 1], island[-1, 1]],
                linestyle="none", marker="o", color="tab:red", ms=5, zorder=3,
            )
        ax.set_title(f"t = {snap.t:g}")
        ax.set_aspect("equal")
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        paths.append(_save(fig, out_dir, f"snapshot_t{snap.t:g}", job))
    return paths


def _render_series(job: PlotJob, out_dir: Path, which: str) -> list[Path]:
    series = read_series(job.run_dir)
    fig, ax = plt.subplots(figsize=(6, 4))
    if which == "energy":
        w0 = series.energy[0]
        if w0 == 0.0:
            raise ContractError("cannot normalize: W(0) = 0")
        ax.plot(series.t, series.energy / w0, lw=1.4)
        ax.set_ylabel("W(t) / W(0)")
    else:
        ax.plot(series.t, series.mass - series.mass[0], lw=1.4)
        ax.set_ylabel("M(t) - M(0)")
    ax.set_xlabel("t")
    ax.grid(alpha=0.3)
    return [_save(fig, out_dir, which, job)]


def _render_contacts(job: PlotJob, out_dir: Path) -> list[Path]:
    series = read_series(job.run_dir)
    meta = read_meta(job.run_dir)
    sub_spec = meta["config"]["substrate"]
    fig, ax = plt.subplots(figsize=(6, 4))
    for vals, label in ((series.c_l, "left contact"), (series.c_r, "right contact")):
        span = float(vals.max() - vals.min())
        if span == 0.0:
            xs = substrate_polyline(sub_spec, vals[0], vals[0] + 1e-9, n=2)[:1, 0]
            xs = np.full(len(vals), xs[0])
        else:
            outline = substrate_polyline(sub_spec, float(vals.min()), float(vals.max()))
            grid = np.linspace(float(vals.min()), float(vals.max()), len(outline))
            xs = np.interp(vals, grid, outline[:, 0])
        ax.plot(series.t, xs, lw=1.4, label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("contact x-coordinate")
    ax.legend()
    ax.grid(alpha=0.3)
    return [_save(fig, out_dir, "contact_trace", job)]


def _render_convergence(job: PlotJob, out_dir: Path) -> list[Path]:
    path = job.run_dir / "convergence.csv"
    rows = read_convergence(path)
    hs = np.array([row["h"] for row in rows])
    errs = np.array([row["error"] for row in rows])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(hs, errs, "o-", label="manifold distance")
    anchor = errs[np.argmax(hs)]
    ax.loglog(hs, anchor * (hs / hs.max()) ** 2, "--", color="0.5",
              label="slope 2 guide")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.legend()
    ax.grid(alpha=0.3, which="both")
    return [_save(fig, out_dir, "convergence", job)]
