"""Energy, enclosed mass, the manifold distance, and the convergence harness."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from shapely.geometry import Polygon

from .anisotropy import Anisotropy
from .geometry import (
    PolygonalCurve,
    curve_weighted_length,
    element_tangent_normal,
    mesh_ratio,
    polygon_flux_integral,
)
from .scheme import SchemeState
from .substrate import Substrate

__all__ = [
    "total_energy",
    "total_mass",
    "film_polygon",
    "manifold_distance",
    "interpolate_state",
    "convergence_study",
    "ConvergenceRow",
]

log = logging.getLogger("ssdsim")


def total_energy(state: SchemeState, aniso: Anisotropy, sigma: float) -> float:
    """Interface energy plus the wetted-substrate term.

    Sum of gamma(n_j) * length_j over elements minus sigma * (c_r - c_l).
    """
    _, normals = element_tangent_normal(state.curve)
    weights = np.asarray(aniso.gamma(normals))
    return curve_weighted_length(state.curve, weights) - sigma * (state.c_r - state.c_l)


def total_mass(state: SchemeState, sub: Substrate, qtol: float = 1e-12) -> float:
    """Signed area enclosed between the film polyline and the substrate arc."""
    return polygon_flux_integral(state.curve) - sub.flux_integral(
        state.c_l, state.c_r, qtol
    )


def film_polygon(state: SchemeState, sub: Substrate, arc_step: float) -> Polygon:
    """Closed film region: the polyline plus the sampled substrate arc.

    The substrate is sampled from c_r back to c_l at arclength resolution
    ``arc_step``.  Raises ValueError when the resulting boundary
    self-intersects.
    """
    span = state.c_r - state.c_l
    n_arc = max(2, int(math.ceil(span / max(arc_step, 1e-12))))
    cs = np.linspace(state.c_r, state.c_l, n_arc + 1)[1:-1]
    boundary = np.vstack([state.curve.nodes, sub.r(cs)])
    poly = Polygon(boundary)
    if not poly.is_valid:
        raise ValueError("film boundary self-intersects")
    return poly


def manifold_distance(
    state_a: SchemeState, state_b: SchemeState, sub: Substrate
) -> float:
    """Area of the symmetric difference of the two film regions."""
    step = 0.25 * min(
        float(state_a.curve.element_lengths.min()),
        float(state_b.curve.element_lengths.min()),
    )
    poly_a = film_polygon(state_a, sub, step)
    poly_b = film_polygon(state_b, sub, step)
    return float(poly_a.symmetric_difference(poly_b).area)


# ---------------------------------------------------------------------------
# time interpolation and the convergence study


def interpolate_state(result, t: float, sub: Substrate) -> SchemeState:
    """State at time t, linear in time between stored steps.

    Interior nodes and the potential interpolate linearly; the endpoints
    interpolate in contact arclength and are then mapped through r, so they
    stay on the substrate.  Requires the run to have stored every step.
    """
    times = result.times
    if not (times[0] - 1e-12 <= t <= times[-1] + 1e-12):
        raise ValueError(f"t={t} outside the stored range [{times[0]}, {times[-1]}]")
    states = result.trajectory
    if states is None:
        raise ValueError("run did not store its full trajectory")
    idx = int(np.searchsorted(times, t, side="right")) - 1
    idx = min(max(idx, 0), len(times) - 2) if len(times) > 1 else 0
    if len(times) == 1 or abs(times[idx] - t) < 1e-14:
        return states[idx]
    a, b = states[idx], states[idx + 1]
    lam = (t - times[idx]) / (times[idx + 1] - times[idx])
    nodes = (1.0 - lam) * a.curve.nodes + lam * b.curve.nodes
    c_l = (1.0 - lam) * a.c_l + lam * b.c_l
    c_r = (1.0 - lam) * a.c_r + lam * b.c_r
    nodes = np.array(nodes, copy=True)
    nodes[0] = sub.r(c_l)
    nodes[-1] = sub.r(c_r)
    mu = (1.0 - lam) * a.mu + lam * b.mu
    return SchemeState(PolygonalCurve(nodes), mu, c_l, c_r, time=t)


@dataclass(frozen=True)
class ConvergenceRow:
    h: float
    dt: float
    error: float
    order: float | None


def _default_cache_dir() -> Path:
    env = os.environ.get("SSDSIM_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "ssdsim"


_CACHE_SCHEMA = "v2"  # bump when run semantics change (invalidates caches)


def _config_key(config) -> str:
    from .config import config_to_dict

    payload = json.dumps(
        {"schema": _CACHE_SCHEMA, "config": config_to_dict(config)}, sort_keys=True
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def _run_cached(config, cache_dir: Path | None):
    """Run a scenario storing every step, with an on-disk trajectory cache."""
    from .config import build_scenario
    from .run import run_simulation

    cache_dir = _default_cache_dir() if cache_dir is None else Path(cache_dir)
    key = _config_key(config)
    path = cache_dir / f"traj_{key}.npz"
    if path.exists():
        data = np.load(path)
        sub, _, _ = build_scenario(config)
        times = data["times"]
        states = []
        for i in range(len(times)):
            states.append(
                SchemeState(
                    PolygonalCurve(data[f"nodes_{i}"]),
                    data[f"mu_{i}"],
                    float(data[f"contacts_{i}"][0]),
                    float(data[f"contacts_{i}"][1]),
                    time=float(times[i]),
                )
            )
        return times, states, sub
    result = run_simulation(config, store_trajectory=True)
    sub, _, _ = build_scenario(config)
    if any(len(islands) != 1 for islands in result.trajectory_islands):
        raise RuntimeError("convergence study requires single-island runs")
    states = [islands[0] for islands in result.trajectory_islands]
    cache_dir.mkdir(parents=True, exist_ok=True)
    payload = {"times": np.asarray(result.times)}
    for i, s in enumerate(states):
        payload[f"nodes_{i}"] = s.curve.nodes
        payload[f"mu_{i}"] = s.mu
        payload[f"contacts_{i}"] = np.array([s.c_l, s.c_r])
    np.savez_compressed(path, **payload)
    times = np.asarray(result.times)
    return times, states, sub


@dataclass
class _Trajectory:
    times: np.ndarray
    trajectory: list


def convergence_study(
    base_config,
    h_list,
    reference: tuple[float, float],
    t_eval: float,
    cache_dir: Path | None = None,
):
    """Manifold-distance errors against a refined reference solution.

    Each mesh size h runs with dt = h^2 up to (at least) ``t_eval``; the
    reference uses the pair ``reference = (h_ref, dt_ref)``.  Rows report
    successive observed orders log2(e_2h / e_h).
    """
    from dataclasses import replace

    h_ref, dt_ref = reference
    # equality is allowed so a self-comparison degenerates to zero error
    if h_ref > min(h_list):
        raise ValueError("reference mesh must be finer than every study mesh")

    def configure(h, dt):
        n = round(1.0 / h)
        steps = int(math.ceil(t_eval / dt - 1e-12))
        return replace(
            base_config,
            n_elements=n,
            dt=dt,
            t_end=steps * dt if steps > 0 else dt,
            snapshot_every=None,
            out_dir=None,
        )

    times_ref, states_ref, sub = _run_cached(configure(h_ref, dt_ref), cache_dir)
    ref_state = interpolate_state(_Trajectory(times_ref, states_ref), t_eval, sub)

    rows: list[ConvergenceRow] = []
    errors = []
    for h in sorted(h_list, reverse=True):
        dt = h * h
        times, states, _ = _run_cached(configure(h, dt), cache_dir)
        state = interpolate_state(_Trajectory(times, states), t_eval, sub)
        err = manifold_distance(state, ref_state, sub)
        errors.append(err)
        order = None
        if len(errors) >= 2 and errors[-1] > 0.0:
            order = math.log2(errors[-2] / errors[-1])
        rows.append(ConvergenceRow(h=h, dt=dt, error=err, order=order))
        log.info("convergence: h=%g dt=%g error=%.6e order=%s", h, dt, err, order)
    return rows
