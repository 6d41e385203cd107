"""Fixed-point time stepping, the sparse solve, and run orchestration.

Each step initializes the iterate from the old state (contacts randomly
perturbed at scale ``perturb_scale`` to keep the contact chords nondegenerate),
then alternates assembly and direct sparse solves until the maximum nodal
displacement between consecutive iterates drops below ``tol``.  The endpoint
positions are only snapped onto the substrate after convergence; snapping
inside the loop is known to destroy the iteration's structure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import onenormest, splu

from .anisotropy import Anisotropy
from .geometry import PolygonalCurve, mesh_ratio
from .scheme import (
    AssembledSystem,
    Iterate,
    SchemeState,
    SchemeVariant,
    StepParams,
    assemble_system,
)
from .substrate import Substrate

__all__ = [
    "SolverParams",
    "StepReport",
    "PicardNonConvergence",
    "SingularSystemError",
    "ContactCollapseError",
    "perturb_contacts",
    "linear_solve",
    "time_step",
    "detect_and_split_pinchoff",
]

log = logging.getLogger("ssdsim")


class PicardNonConvergence(RuntimeError):
    def __init__(self, iterations: int, last_displacement: float):
        super().__init__(
            f"no convergence in {iterations} iterations "
            f"(last displacement {last_displacement:.3e})"
        )
        self.iterations = iterations
        self.last_displacement = last_displacement


class SingularSystemError(RuntimeError):
    """The assembled linear system is singular or hopelessly ill-conditioned."""


class ContactCollapseError(RuntimeError):
    """The two contact points crossed; the island has collapsed."""


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-9
    max_iters: int = 100
    perturb_scale: float = 1e-8
    seed: int = 0
    pinch_threshold_factor: float = 0.2
    extra_iterations: int = 2
    stall_factor: float = 10.0
    condition_warn: float = 1e12

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class StepReport:
    iterations: int
    converged: bool
    max_node_displacement_last_iter: float
    pinch_events: list = field(default_factory=list)
    subdivided: bool = False
    stalled: bool = False


def perturb_contacts(state: SchemeState, params: SolverParams, rng) -> tuple[float, float]:
    """Initial contact guesses: old values plus a small Gaussian perturbation.

    Deterministic given the generator state; the left contact draws first.
    """
    c_l = state.c_l + params.perturb_scale * rng.standard_normal()
    c_r = state.c_r + params.perturb_scale * rng.standard_normal()
    return float(c_l), float(c_r)


def linear_solve(system: AssembledSystem) -> np.ndarray:
    """Direct sparse LU solve with a residual check and one refinement pass."""
    a = system.matrix.tocsc()
    b = system.rhs
    try:
        lu = splu(a)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse LU failed: {exc}") from exc
    u = lu.solve(b)
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("sparse LU produced non-finite values")
    norm_a = float(np.max(np.abs(a).sum(axis=1)))
    bound = 1e-12 * (norm_a * float(np.max(np.abs(u))) + float(np.max(np.abs(b))))
    residual = b - a @ u
    if float(np.max(np.abs(residual))) > bound:
        u = u + lu.solve(residual)
        residual = b - a @ u
        if float(np.max(np.abs(residual))) > 10.0 * bound:
            cond = _condition_estimate(a, lu)
            raise SingularSystemError(
                f"residual {np.max(np.abs(residual)):.3e} exceeds bound {bound:.3e} "
                f"(condition estimate {cond:.3e})"
            )
    return u


def _condition_estimate(a, lu) -> float:
    from scipy.sparse.linalg import LinearOperator

    n = a.shape[0]
    inv = LinearOperator((n, n), matvec=lu.solve)
    try:
        return float(onenormest(a) * onenormest(inv))
    except Exception:  # pragma: no cover - estimation is best-effort
        return math.nan


def time_step(
    state: SchemeState,
    aniso: Anisotropy,
    sub: Substrate,
    params: StepParams,
    variant: SchemeVariant,
    solver_params: SolverParams,
    rng,
    allow_stall: bool = False,
) -> tuple[SchemeState, StepReport]:
    """Advance one island by one implicit step of size ``params.dt``.

    Raises :class:`PicardNonConvergence` when the iteration budget runs out;
    the caller decides whether to subdivide the step.  With ``allow_stall``
    an exhausted budget whose final displacement still sits within
    ``stall_factor * tol`` is accepted (and flagged); this is the safety net
    for the violent geometry right after a pinch-off event.
    """
    c_l0, c_r0 = perturb_contacts(state, solver_params, rng)
    x0 = np.array(state.curve.nodes, copy=True)
    x0[0] = sub.r(c_l0)
    x0[-1] = sub.r(c_r0)
    it = Iterate(x=x0, mu=np.array(state.mu, copy=True), c_l=c_l0, c_r=c_r0)

    converged = False
    disp = math.inf
    extra_done = 0
    iterations = 0
    for _ in range(solver_params.max_iters):
        system = assemble_system(state, it, aniso, sub, params, variant)
        x_new, mu_new, cl_new, cr_new = system.dof_map.unpack(linear_solve(system))
        iterations += 1
        disp = max(
            float(np.max(np.linalg.norm(x_new[1:-1] - it.x[1:-1], axis=1)))
            if x_new.shape[0] > 2 else 0.0,
            float(np.linalg.norm(sub.r(cl_new) - sub.r(it.c_l))),
            float(np.linalg.norm(sub.r(cr_new) - sub.r(it.c_r))),
        )
        it = Iterate(x=x_new, mu=mu_new, c_l=cl_new, c_r=cr_new)
        if disp <= solver_params.tol:
            if extra_done >= solver_params.extra_iterations:
                converged = True
                break
            extra_done += 1
    stalled = False
    if not converged:
        if allow_stall and disp <= solver_params.stall_factor * solver_params.tol:
            stalled = True
            log.warning(
                "accepting stalled iteration at t=%.6g (displacement %.3e, "
                "tol %.1e)", state.time + params.dt, disp, solver_params.tol,
            )
        else:
            raise PicardNonConvergence(iterations, disp)

    if not it.c_l < it.c_r:
        raise ContactCollapseError(
            f"contacts crossed at t={state.time + params.dt:.6g} "
            f"(c_l={it.c_l:.6g}, c_r={it.c_r:.6g})"
        )
    x_final = np.array(it.x, copy=True)
    x_final[0] = sub.r(it.c_l)
    x_final[-1] = sub.r(it.c_r)
    new_state = SchemeState(
        curve=PolygonalCurve(x_final),
        mu=it.mu,
        c_l=it.c_l,
        c_r=it.c_r,
        time=state.time + params.dt,
    )
    report = StepReport(
        iterations=iterations,
        converged=True,
        max_node_displacement_last_iter=disp,
        stalled=stalled,
    )
    return new_state, report


def detect_and_split_pinchoff(
    state: SchemeState, sub: Substrate, threshold: float
) -> list[SchemeState]:
    """Split the island where an interior node touches the substrate.

    A node closer to the substrate than ``threshold`` becomes a new contact
    pair: the curve is cut there, the touching node is projected onto the
    substrate, and both daughter islands keep their node subsets.  Returns
    the unchanged state when nothing touches (or threshold is zero).
    Daughters are re-examined recursively.
    """
    if threshold <= 0.0:
        return [state]
    nodes = state.curve.nodes
    n = state.curve.n_elements
    if n < 4:
        return [state]
    margin = 2.0 * threshold
    bracket = (state.c_l - margin, state.c_r + margin)
    lo, hi = sub.domain
    bracket = (max(bracket[0], lo), min(bracket[1], hi))

    best = None
    for j in range(2, n - 1):
        c_star, dist = sub.project(nodes[j], bracket)
        if dist < threshold and (best is None or dist < best[1]):
            best = (j, dist, c_star)
    if best is None:
        return [state]

    j, dist, c_star = best
    log.info(
        "pinch-off at t=%.6g: node %d at distance %.3e -> contact c=%.6g",
        state.time, j, dist, c_star,
    )
    touch = np.asarray(sub.r(c_star), dtype=float)

    left_nodes = np.vstack([nodes[:j], touch])
    right_nodes = np.vstack([touch, nodes[j + 1:]])
    left = SchemeState(
        curve=PolygonalCurve(left_nodes),
        mu=state.mu[: j + 1],
        c_l=state.c_l,
        c_r=c_star,
        time=state.time,
    )
    right = SchemeState(
        curve=PolygonalCurve(right_nodes),
        mu=state.mu[j:],
        c_l=c_star,
        c_r=state.c_r,
        time=state.time,
    )
    return (
        detect_and_split_pinchoff(left, sub, threshold)
        + detect_and_split_pinchoff(right, sub, threshold)
    )
