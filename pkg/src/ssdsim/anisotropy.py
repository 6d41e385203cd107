"""Surface-energy densities, their gradients, and the stabilized energy matrix.

An anisotropy is the triple (gamma, grad_gamma, k): a positively 1-homogeneous
density gamma on R^2 \\ {0}, its gradient, and a scalar stabilizing weight k on
unit vectors.  The stabilized matrix

    Z(n) = gamma(n) I - n grad^T - grad n^T + k(n) n n^T

acts on element chord vectors; its tangential action is independent of k and
equals the quarter-turned gradient, which is what makes the implicit length
term in the evolution scheme both linear and dissipative.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import perp

__all__ = [
    "Anisotropy",
    "make_anisotropy",
    "isotropic",
    "l4_norm",
    "get_anisotropy",
    "builtin_names",
    "gamma_eval",
    "grad_gamma_eval",
    "stabilization_matrix",
    "stabilization_matrices",
    "stability_gap",
    "certify_stability_grid",
    "min_stabilizer_search",
    "StabilizerNotFoundError",
]

UNIT_TOL = 1e-12


class StabilizerNotFoundError(ValueError):
    """No finite stabilizing weight can satisfy the elementwise inequality."""


@dataclass(frozen=True)
class Anisotropy:
    """Immutable (gamma, grad_gamma, k) triple; all callables are vectorized."""

    name: str
    gamma: Callable[[np.ndarray], np.ndarray]
    grad_gamma: Callable[[np.ndarray], np.ndarray]
    k: Callable[[np.ndarray], np.ndarray]


def _check_nonzero(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    norms = np.linalg.norm(p, axis=-1)
    if np.any(norms == 0.0):
        raise ValueError("anisotropy evaluated at the zero vector")
    return p


def gamma_eval(a: Anisotropy, p) -> np.ndarray | float:
    """Evaluate gamma at nonzero vectors (last axis of size 2)."""
    p = _check_nonzero(p)
    out = a.gamma(p)
    return float(out) if np.ndim(out) == 0 else out


def grad_gamma_eval(a: Anisotropy, p) -> np.ndarray:
    """Evaluate grad gamma at nonzero vectors."""
    p = _check_nonzero(p)
    return a.grad_gamma(p)


def _finite_difference_grad(gamma, rel_step: float = 1e-6):
    def grad(p):
        p = np.asarray(p, dtype=float)
        h = rel_step * np.linalg.norm(p, axis=-1)
        e0 = np.zeros_like(p)
        e0[..., 0] = 1.0
        e1 = np.zeros_like(p)
        e1[..., 1] = 1.0
        hv = h[..., None]
        g0 = (gamma(p + hv * e0) - gamma(p - hv * e0)) / (2.0 * h)
        g1 = (gamma(p + hv * e1) - gamma(p - hv * e1)) / (2.0 * h)
        return np.stack([g0, g1], axis=-1)

    return grad


def make_anisotropy(name, gamma, grad_gamma=None, k=2.0, check=True) -> Anisotropy:
    """Build an anisotropy from callables, validating the homogeneity contract.

    ``grad_gamma`` defaults to a central finite difference of ``gamma`` with
    relative step 1e-6.  ``k`` may be a constant or a callable of the unit
    normal.  When ``check`` is set, positive 1-homogeneity and the Euler
    identity grad(p).p = gamma(p) are verified on a fixed sample of
    directions; failures raise ValueError.
    """
    if grad_gamma is None:
        grad_gamma = _finite_difference_grad(gamma)
    if not callable(k):
        k_value = float(k)

        def k_fn(n, _v=k_value):
            n = np.asarray(n, dtype=float)
            return np.full(n.shape[:-1], _v)

    else:
        k_fn = k
    a = Anisotropy(name=name, gamma=gamma, grad_gamma=grad_gamma, k=k_fn)
    if check:
        _validate(a)
    return a


def _validate(a: Anisotropy) -> None:
    theta = np.linspace(0.0, 2.0 * np.pi, 37)[:-1]
    p = np.stack([np.cos(theta), np.sin(theta)], axis=-1) * 0.7
    g = np.asarray(a.gamma(p))
    if np.any(g <= 0.0):
        raise ValueError(f"anisotropy {a.name!r}: gamma must be positive")
    grad = np.asarray(a.grad_gamma(p))
    euler = np.sum(grad * p, axis=-1) - g
    if np.max(np.abs(euler)) > 1e-5 * np.max(g):
        raise ValueError(
            f"anisotropy {a.name!r}: grad gamma violates the Euler identity"
        )
    for lam in (0.5, 2.0, 10.0):
        if np.max(np.abs(a.gamma(lam * p) - lam * g)) > 1e-9 * lam * np.max(g):
            raise ValueError(
                f"anisotropy {a.name!r}: gamma is not positively 1-homogeneous"
            )


def isotropic() -> Anisotropy:
    """gamma(p) = |p| with the constant stabilizer k = 2."""

    def gamma(p):
        p = np.asarray(p, dtype=float)
        return np.linalg.norm(p, axis=-1)

    def grad(p):
        p = np.asarray(p, dtype=float)
        return p / np.linalg.norm(p, axis=-1)[..., None]

    def k(n):
        n = np.asarray(n, dtype=float)
        return np.full(n.shape[:-1], 2.0)

    return Anisotropy("isotropic", gamma, grad, k)


def l4_norm() -> Anisotropy:
    """gamma(p) = (p1^4 + p2^4)^(1/4) with k(n) = 2 gamma(n)^-3."""

    def gamma(p):
        p = np.asarray(p, dtype=float)
        return (p[..., 0] ** 4 + p[..., 1] ** 4) ** 0.25

    def grad(p):
        p = np.asarray(p, dtype=float)
        g3 = gamma(p) ** 3
        return np.stack([p[..., 0] ** 3, p[..., 1] ** 3], axis=-1) / g3[..., None]

    def k(n):
        return 2.0 * gamma(n) ** -3

    return Anisotropy("l4", gamma, grad, k)


_BUILTINS = {"isotropic": isotropic, "l4": l4_norm}


def builtin_names():
    return tuple(sorted(_BUILTINS))


def get_anisotropy(name: str) -> Anisotropy:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(
            f"unknown anisotropy {name!r}; built-ins: {', '.join(builtin_names())}"
        ) from None


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1)[..., None]


def stabilization_matrices(a: Anisotropy, n: np.ndarray) -> np.ndarray:
    """Stabilized energy matrices for an array of unit normals (..., 2).

    The outer-product construction makes the result exactly symmetric.
    """
    n = np.asarray(n, dtype=float)
    norms = np.linalg.norm(n, axis=-1)
    if np.any(np.abs(norms - 1.0) > UNIT_TOL):
        raise ValueError("stabilization matrix requires unit normals")
    g = np.asarray(a.gamma(n))
    grad = np.asarray(a.grad_gamma(n))
    kk = np.asarray(a.k(n))
    eye = np.eye(2)
    cross = n[..., :, None] * grad[..., None, :] + grad[..., :, None] * n[..., None, :]
    nn = n[..., :, None] * n[..., None, :]
    return g[..., None, None] * eye - cross + kk[..., None, None] * nn


def stabilization_matrix(a: Anisotropy, n) -> np.ndarray:
    """Stabilized energy matrix for a single unit normal, shape (2, 2)."""
    return stabilization_matrices(a, np.asarray(n, dtype=float))


def stability_gap(a: Anisotropy, h_old, h_new) -> np.ndarray | float:
    """Residual of the elementwise dissipation inequality (>= 0 means stable).

    With n the unit normal of h_old, returns
    {Z(n) h_new / |h_old|} . (h_new - h_old) - [gamma(-perp(h_new)) -
    gamma(-perp(h_old))].  Broadcasts over leading axes.
    """
    h_old = _check_nonzero(h_old)
    h_new = _check_nonzero(h_new)
    ell = np.linalg.norm(h_old, axis=-1)
    n = -perp(h_old) / ell[..., None]
    z = stabilization_matrices(a, n)
    zh = np.einsum("...ij,...j->...i", z, h_new)
    lhs = np.sum(zh * (h_new - h_old), axis=-1) / ell
    rhs = np.asarray(a.gamma(-perp(h_new))) - np.asarray(a.gamma(-perp(h_old)))
    out = lhs - rhs
    return float(out) if out.ndim == 0 else out


def certify_stability_grid(
    a: Anisotropy,
    n_angles: int = 360,
    ratios=(0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0),
) -> float:
    """Minimum stability gap over a dense (angle, angle, ratio) grid.

    A nonnegative return value (up to roundoff) certifies the dissipation
    inequality for the anisotropy's own stabilizer on the sampled set.
    """
    phi = 2.0 * np.pi * np.arange(n_angles) / n_angles
    units = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    worst = np.inf
    for rho in ratios:
        h_old = units[:, None, :]
        h_new = rho * units[None, :, :]
        gap = stability_gap(a, np.broadcast_to(h_old, (n_angles, n_angles, 2)),
                            np.broadcast_to(h_new, (n_angles, n_angles, 2)))
        worst = min(worst, float(gap.min()))
    return worst


def _search_margin(a: Anisotropy, n: np.ndarray, n_hat: np.ndarray, alpha: float):
    """Margin of the proof's auxiliary inequality at stabilizer value alpha."""
    g = float(a.gamma(n))
    grad = np.asarray(a.grad_gamma(n))
    dot_nn = n_hat @ n
    dot_gn = n_hat @ grad
    a_term = -g + 2.0 * dot_nn * dot_gn
    b_term = (n_hat @ perp(n)) ** 2
    radicand = (a_term + alpha * b_term) * g
    q = np.asarray(a.gamma(n_hat)) + dot_gn
    p = 2.0 * np.sqrt(np.maximum(radicand, 0.0))
    margin = np.where(radicand >= 0.0, p - q, -np.inf)
    # where the radicand is negative the left side is undefined -> infeasible
    return margin


def min_stabilizer_search(
    a: Anisotropy, n, grid: int = 360, alpha_max: float = 1e9
) -> float:
    """Smallest grid-certified stabilizer value at the unit normal n.

    Samples ``grid`` directions and bisects for the least alpha >= 0 making
    the auxiliary margin nonnegative at all of them.  Raises
    :class:`StabilizerNotFoundError` when no finite alpha works (the
    admissibility condition gamma(-n) < 3 gamma(n) fails).
    """
    n = _unit(np.asarray(n, dtype=float))
    psi = 2.0 * np.pi * np.arange(grid) / grid
    n_hat = np.stack([np.cos(psi), np.sin(psi)], axis=-1)
    g = float(a.gamma(n))
    tol_feas = -1e-12 * max(g, 1.0)

    def feasible(alpha: float) -> bool:
        return bool(np.min(_search_margin(a, n, n_hat, alpha)) >= tol_feas)

    if not feasible(alpha_max):
        raise StabilizerNotFoundError(
            f"stabilizer does not exist at n={n.tolist()} "
            f"(admissibility gamma(-n) < 3 gamma(n) violated)"
        )
    if feasible(0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while not feasible(hi):
        lo, hi = hi, 2.0 * hi
    while hi - lo > 1e-10 * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return hi
