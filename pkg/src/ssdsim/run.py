"""Run orchestration: step the islands, collect diagnostics, handle pinch-off."""

from __future__ import annotations

import logging
import math
import time as _time
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig, build_scenario
from .diagnostics import total_energy, total_mass
from .geometry import mesh_ratio
from .scheme import SchemeState, SchemeVariant, StepParams
from .solver import (
    PicardNonConvergence,
    SolverParams,
    detect_and_split_pinchoff,
    time_step,
)

__all__ = ["DiagnosticsRecord", "RunResult", "run_simulation", "SimulationError"]

log = logging.getLogger("ssdsim")


class SimulationError(RuntimeError):
    def __init__(self, step_index: int, message: str):
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    energy: float
    mass: float
    c_l: float
    c_r: float
    iterations: int
    mesh_ratio: float
    n_islands: int


@dataclass
class RunResult:
    config: ScenarioConfig
    times: np.ndarray
    series: list[DiagnosticsRecord]
    snapshots: list[tuple[float, list[SchemeState]]]
    final_islands: list[SchemeState]
    pinch_times: list[float] = field(default_factory=list)
    trajectory_islands: list[list[SchemeState]] | None = None
    wall_clock: float = 0.0

    @property
    def trajectory(self) -> list[SchemeState] | None:
        """Single-island view of the stored trajectory (for interpolation)."""
        if self.trajectory_islands is None:
            return None
        if any(len(islands) != 1 for islands in self.trajectory_islands):
            raise ValueError("trajectory has multiple islands")
        return [islands[0] for islands in self.trajectory_islands]


def _record(
    t: float, islands, aniso, sub, sigma: float, iterations: int
) -> DiagnosticsRecord:
    energy = sum(total_energy(s, aniso, sigma) for s in islands)
    mass = sum(total_mass(s, sub) for s in islands)
    return DiagnosticsRecord(
        time=t,
        energy=energy,
        mass=mass,
        c_l=min(s.c_l for s in islands),
        c_r=max(s.c_r for s in islands),
        iterations=iterations,
        mesh_ratio=max(mesh_ratio(s.curve) for s in islands),
        n_islands=len(islands),
    )


MAX_SUBDIVISION_DEPTH = 6


def _advance_island(
    state, aniso, sub, params, variant, solver_params, rng, step_index, depth=0
):
    """One island, one step; non-converging steps subdivide recursively.

    Right after a pinch-off event the fresh contact wants to move by many
    elements per nominal step, so the fixed-point iteration may need dt cut
    several times; a stalled-but-tiny displacement is only accepted at the
    deepest level.
    """
    try:
        return time_step(
            state, aniso, sub, params, variant, solver_params, rng,
            allow_stall=depth >= MAX_SUBDIVISION_DEPTH,
        )
    except PicardNonConvergence as exc:
        if depth >= MAX_SUBDIVISION_DEPTH:
            raise SimulationError(
                step_index, f"no convergence even after subdividing dt: {exc}"
            ) from exc
        log.warning(
            "step %d (depth %d): no convergence in %d iterations (last "
            "displacement %.3e); subdividing dt",
            step_index, depth, exc.iterations, exc.last_displacement,
        )
    half = StepParams(params.sigma, params.eta, 0.5 * params.dt)
    mid, rep1 = _advance_island(
        state, aniso, sub, half, variant, solver_params, rng, step_index, depth + 1
    )
    new, rep2 = _advance_island(
        mid, aniso, sub, half, variant, solver_params, rng, step_index, depth + 1
    )
    rep2.iterations += rep1.iterations
    rep2.subdivided = True
    rep2.stalled = rep2.stalled or rep1.stalled
    return new, rep2


def run_simulation(config: ScenarioConfig, store_trajectory: bool = False) -> RunResult:
    """Step the scenario from t=0 to t_end, recording per-step diagnostics.

    Deterministic given the config (the contact perturbations draw from a
    generator seeded by ``config.solver.seed``, islands in left-to-right
    order).  ``t_end`` must be an integer multiple of ``dt``.
    """
    started = _time.perf_counter()
    sub, aniso, islands = build_scenario(config)
    params = StepParams(config.sigma, config.eta, config.dt)
    variant = SchemeVariant(config.scheme)
    solver_params = SolverParams(
        tol=config.solver.tol,
        max_iters=config.solver.max_iters,
        perturb_scale=config.solver.perturb_scale,
        seed=config.solver.seed,
        pinch_threshold_factor=config.pinch.threshold_factor,
        extra_iterations=config.solver.extra_iterations,
    )
    rng = np.random.default_rng(config.solver.seed)

    n_steps_f = config.t_end / config.dt
    n_steps = int(round(n_steps_f))
    if abs(n_steps_f - n_steps) > 1e-9 * max(1.0, n_steps_f):
        raise ValueError("t_end must be an integer multiple of dt")

    cadence = config.snapshot_every or max(1, math.ceil(n_steps / 500))
    series = [_record(0.0, islands, aniso, sub, config.sigma, 0)]
    snapshots = [(0.0, list(islands))]
    trajectory = [list(islands)] if store_trajectory else None
    pinch_times: list[float] = []

    for m in range(n_steps):
        stepped = []
        max_iters_this_step = 0
        for s in islands:
            new_state, report = _advance_island(
                s, aniso, sub, params, variant, solver_params, rng, m
            )
            max_iters_this_step = max(max_iters_this_step, report.iterations)
            stepped.append(new_state)
        if config.pinch.enabled:
            islands = []
            for s in stepped:
                threshold = solver_params.pinch_threshold_factor * float(
                    s.curve.element_lengths.min()
                )
                daughters = detect_and_split_pinchoff(s, sub, threshold)
                if len(daughters) > 1:
                    pinch_times.append(s.time)
                islands.extend(daughters)
            islands.sort(key=lambda s: s.c_l)
        else:
            islands = stepped

        t = islands[0].time
        series.append(_record(t, islands, aniso, sub, config.sigma, max_iters_this_step))
        if store_trajectory:
            trajectory.append(list(islands))
        if (m + 1) % cadence == 0 or m == n_steps - 1:
            snapshots.append((t, list(islands)))

    return RunResult(
        config=config,
        times=np.array([rec.time for rec in series]),
        series=series,
        snapshots=snapshots,
        final_islands=list(islands),
        pinch_times=pinch_times,
        trajectory_islands=trajectory,
        wall_clock=_time.perf_counter() - started,
    )
