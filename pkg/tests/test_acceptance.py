"""Acceptance suite: every criterion runs at its stated tolerance and prints
one PASS/FAIL line (run with ``pytest -s tests/test_acceptance.py -v`` to see
them as they complete).  The convergence references are cached on disk
(SSDSIM_CACHE, default ~/.cache/ssdsim), so the first run is the slow one."""

import math

import numpy as np
import pytest

from ssdsim.anisotropy import (
    certify_stability_grid,
    gamma_eval,
    get_anisotropy,
    grad_gamma_eval,
    stabilization_matrix,
)
from ssdsim.config import ScenarioConfig, SolverConfig, build_scenario
from ssdsim.diagnostics import convergence_study
from ssdsim.films import InitialFilmSpec
from ssdsim.presets import get_preset
from ssdsim.run import run_simulation

EX1_PRESETS = ("ex1_i", "ex1_ii", "ex1_iii", "ex1_iv")
ENERGY_DTS = (2.0**-6, 2.0**-8, 2.0**-10, 2.0**-12)
T_EVAL = 0.046875  # 3/64: inside the corner-relaxation transient


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[ACCEPTANCE] {name}: {'PASS' if ok else 'FAIL'} - {detail}")


def energy_violation(series) -> float:
    w = np.array([rec.energy for rec in series])
    return float(np.max(np.diff(w) - 1e-12 * np.abs(w[:-1]), initial=-np.inf))


# -- shared heavy runs -------------------------------------------------------


@pytest.fixture(scope="module")
def mass_runs():
    cfg = get_preset("ex1_i").replace(t_end=1.0, dt=2.0**-10)
    corrected = run_simulation(cfg)
    uncorrected = run_simulation(cfg.replace(scheme="uncorrected"))
    return corrected, uncorrected


@pytest.fixture(scope="module")
def ex3_runs():
    convex = run_simulation(get_preset("ex3_convex"))
    concave = run_simulation(get_preset("ex3_concave"))
    return convex, concave


@pytest.fixture(scope="module")
def ex5_run():
    return run_simulation(get_preset("ex5_corner"))


# -- criteria ----------------------------------------------------------------


def test_energy_stability_all_presets_and_steps():
    """Discrete energy decays at every step for every preset, step size and
    scheme variant."""
    worst = -np.inf
    label = ""
    for pid in EX1_PRESETS:
        for dt in ENERGY_DTS:
            for scheme in ("corrected", "uncorrected"):
                cfg = get_preset(pid).replace(dt=dt, t_end=0.125, scheme=scheme)
                run = run_simulation(cfg)
                viol = energy_violation(run.series)
                if viol > worst:
                    worst, label = viol, f"{pid}/dt={dt:g}/{scheme}"
    ok = worst <= 0.0
    report(
        "energy stability (4 presets x 4 steps x 2 variants)", ok,
        f"worst step increase beyond 1e-12|W| is {worst:.3e} at {label}",
    )
    assert ok


def test_exact_mass_conservation_corrected(mass_runs):
    corrected, _ = mass_runs
    m = np.array([rec.mass for rec in corrected.series])
    drift = float(np.max(np.abs(m - m[0])))
    ok = drift <= 1e-10
    report(
        "exact mass conservation (corrected, circle R=20, T=1)", ok,
        f"cumulative |M(t)-M(0)| = {drift:.3e} (gate 1e-10)",
    )
    assert ok


def test_uncorrected_mass_error_structure(mass_runs):
    corrected, uncorrected = mass_runs
    mc = np.array([rec.mass for rec in corrected.series])
    mu = np.array([rec.mass for rec in uncorrected.series])
    drift_c = float(np.max(np.abs(mc - mc[0])))
    drift_u = float(np.max(np.abs(mu - mu[0])))
    sub, _, _ = build_scenario(uncorrected.config)
    cl = np.array([rec.c_l for rec in uncorrected.series])
    cr = np.array([rec.c_r for rec in uncorrected.series])
    worst_eq = 0.0
    for m in range(len(mu) - 1):
        predicted = -sub.segment_area(cl[m], cl[m + 1]) + sub.segment_area(
            cr[m], cr[m + 1]
        )
        worst_eq = max(worst_eq, abs((mu[m + 1] - mu[m]) - predicted))
    tol = 10.0 * uncorrected.config.solver.tol
    ok = drift_u > drift_c and worst_eq <= tol
    report(
        "mass-error structure (uncorrected)", ok,
        f"drift {drift_u:.3e} > corrected {drift_c:.3e}; "
        f"per-step identity residual {worst_eq:.3e} (gate {tol:g})",
    )
    assert ok


def test_flat_substrate_degeneracy():
    base = ScenarioConfig(
        substrate={"kind": "line"},
        anisotropy="isotropic",
        films=(InitialFilmSpec(kind="offset_band", c_l=-2.5, c_r=2.5, thickness=1.0),),
        n_elements=32,
        dt=2.0**-10,
        t_end=0.25,
        solver=SolverConfig(seed=3),
    )
    runs = {
        scheme: run_simulation(base.replace(scheme=scheme), store_trajectory=True)
        for scheme in ("corrected", "uncorrected")
    }
    tol = 10.0 * base.solver.tol
    worst_dm = max(
        float(np.max(np.abs(np.diff([rec.mass for rec in run.series]))))
        for run in runs.values()
    )
    worst_node = max(
        float(np.max(np.abs(a.curve.nodes - b.curve.nodes)))
        for a, b in zip(runs["corrected"].trajectory, runs["uncorrected"].trajectory)
    )
    ok = worst_dm <= tol and worst_node <= tol
    report(
        "flat-substrate degeneracy", ok,
        f"per-step |dM| <= {worst_dm:.3e}, variant node gap <= {worst_node:.3e} "
        f"(gate {tol:g})",
    )
    assert ok


@pytest.mark.parametrize("preset", ["ex1_i", "ex1_iii"])
def test_convergence_order(preset):
    rows = convergence_study(
        get_preset(preset),
        h_list=[2.0**-3, 2.0**-4, 2.0**-5],
        reference=(2.0**-7, 2.0**-14),
        t_eval=T_EVAL,
    )
    orders = [row.order for row in rows if row.order is not None]
    ok = len(orders) == 2 and all(1.7 <= o <= 2.3 for o in orders)
    report(
        f"convergence order ({preset}, manifold distance at t={T_EVAL})", ok,
        "orders " + ", ".join(f"{o:.3f}" for o in orders) + " (gate [1.7, 2.3])",
    )
    assert ok


def test_iteration_economy():
    cfg = get_preset("ex2")
    run = run_simulation(cfg)
    iters = np.array([rec.iterations for rec in run.series[1:]])
    med = float(np.median(iters))
    mx = int(iters.max())
    ok = med <= 15.0 and mx <= 30
    report(
        "iteration economy (ex2, tol 1e-9)", ok,
        f"median {med:g} (gate 15), max {mx} (gate 30)",
    )
    assert ok


def test_stability_inequality_certificate():
    worst_iso = certify_stability_grid(get_anisotropy("isotropic"), n_angles=360)
    worst_l4 = certify_stability_grid(get_anisotropy("l4"), n_angles=360)
    identity_exact = np.array_equal(
        stabilization_matrix(get_anisotropy("isotropic"), [0.6, 0.8]), np.eye(2)
    )
    ok = worst_iso >= -1e-12 and worst_l4 >= -1e-12 and identity_exact
    report(
        "stability-inequality certificate (360x360x8 grid)", ok,
        f"min gap isotropic {worst_iso:.2e}, l4 {worst_l4:.2e}; "
        f"isotropic matrix identically I2: {identity_exact}",
    )
    assert ok


def test_anisotropy_calculus():
    rng = np.random.default_rng(2024)
    worst_fd = 0.0
    worst_euler = 0.0
    for name in ("isotropic", "l4"):
        aniso = get_anisotropy(name)
        pts = rng.normal(size=(1200, 2))
        pts = pts[np.linalg.norm(pts, axis=1) > 0.1][:1000]
        for p in pts:
            grad = grad_gamma_eval(aniso, p)
            h = 1e-6 * np.linalg.norm(p)
            fd = np.array([
                (gamma_eval(aniso, p + [h, 0]) - gamma_eval(aniso, p - [h, 0])) / (2 * h),
                (gamma_eval(aniso, p + [0, h]) - gamma_eval(aniso, p - [0, h])) / (2 * h),
            ])
            worst_fd = max(worst_fd, float(np.max(np.abs(grad - fd))))
            worst_euler = max(
                worst_euler,
                abs(float(grad @ p) - gamma_eval(aniso, p)) / gamma_eval(aniso, p),
            )
    ok = worst_fd <= 1e-8 and worst_euler <= 1e-12
    report(
        "anisotropy calculus (1000 random points per density)", ok,
        f"max |grad - FD| = {worst_fd:.2e} (gate 1e-8), "
        f"max Euler residual {worst_euler:.2e} (gate 1e-12)",
    )
    assert ok


def test_example3_island_counts(ex3_runs):
    convex, concave = ex3_runs
    n_convex = convex.series[-1].n_islands
    n_concave = concave.series[-1].n_islands
    ok = n_convex == 2 and n_concave == 1
    report(
        "example 3 breakup (circle R=30, 42x0.5 film)", ok,
        f"convex -> {n_convex} islands (want 2, pinch at t="
        f"{[round(t, 2) for t in convex.pinch_times]}), concave -> {n_concave} (want 1)",
    )
    assert ok


def test_example5_corner_retraction(ex5_run):
    run = ex5_run
    ratio, crossed = corner_slope_ratio(run)
    ok = crossed and ratio > 1.0
    report(
        "example 5 corner retraction", ok,
        f"edge crossed the corner: {crossed}; "
        f"post/pre slope ratio {ratio:.3f} (gate > 1)",
    )
    assert ok


def corner_slope_ratio(run):
    """Mean edge speed on the corner-adjacent windows x in [-2.5, -1] and
    [1, 2.5] (the trace's tangents just before and just after the corner)."""
    sub, _, _ = build_scenario(run.config)
    ts = np.array([rec.time for rec in run.series])
    xs = sub.r(np.array([rec.c_l for rec in run.series]))[:, 0]
    crossed = bool(np.any(xs >= -1.0)) and bool(np.any(xs >= 2.5))
    if not crossed:
        return float("nan"), False
    before = (xs >= -2.5) & (xs <= -1.0)
    after = (xs >= 1.0) & (xs <= 2.5)
    slope_before = np.polyfit(ts[before], xs[before], 1)[0]
    slope_after = np.polyfit(ts[after], xs[after], 1)[0]
    return float(slope_after / slope_before), True
