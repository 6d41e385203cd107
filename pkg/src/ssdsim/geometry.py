"""Polygonal curves over a uniform reference partition, and their quadratures.

A curve is stored by its nodes only; element tangents, normals and lengths
are derived quantities.  The quarter-turn operator is fixed once globally as
``perp((a, b)) = (b, -a)`` (clockwise rotation) and every normal in the
package derives from it, so all orientation-sensitive area bookkeeping shares
one sign convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "DegenerateElementError",
    "PolygonalCurve",
    "perp",
    "element_tangent_normal",
    "time_weighted_normal",
    "mass_lumped_inner",
    "curve_weighted_length",
    "polygon_flux_integral",
    "mesh_ratio",
]

# Elements shorter than this fraction of the curve diameter are degenerate.
DEGENERACY_REL_TOL = 1e-14


class DegenerateElementError(ValueError):
    """An element of a polygonal curve has (numerically) zero length."""


def perp(v):
    """Rotate vectors clockwise by a quarter turn: (a, b) -> (b, -a).

    Acts along the last axis of ``v``.
    """
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    out[..., 0] = v[..., 1]
    out[..., 1] = -v[..., 0]
    return out


@dataclass(frozen=True, eq=False)
class PolygonalCurve:
    """Open polygonal curve with nodes at the uniform reference points j/N.

    ``nodes`` has shape (N+1, 2).  Every element must have strictly positive
    length; construction fails with :class:`DegenerateElementError` otherwise.
    The node array is frozen (not writeable) after construction.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float, copy=True, order="C")
        if nodes.ndim != 2 or nodes.shape[1] != 2 or nodes.shape[0] < 2:
            raise ValueError("curve nodes must be an (N+1, 2) array with N >= 1")
        if not np.all(np.isfinite(nodes)):
            raise ValueError("curve nodes must be finite")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        lengths = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
        span = nodes.max(axis=0) - nodes.min(axis=0)
        diameter = float(np.hypot(span[0], span[1]))
        bad = np.nonzero(lengths <= DEGENERACY_REL_TOL * diameter)[0]
        if bad.size:
            raise DegenerateElementError(f"degenerate element {int(bad[0])}")

    @property
    def n_elements(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def reference_h(self) -> float:
        return 1.0 / self.n_elements

    @cached_property
    def element_vectors(self) -> np.ndarray:
        """Per-element chord vectors X_j - X_{j-1}, shape (N, 2)."""
        d = np.diff(self.nodes, axis=0)
        d.setflags(write=False)
        return d

    @cached_property
    def element_lengths(self) -> np.ndarray:
        ell = np.linalg.norm(self.element_vectors, axis=1)
        ell.setflags(write=False)
        return ell

    def with_nodes(self, nodes: np.ndarray) -> "PolygonalCurve":
        return PolygonalCurve(nodes)


def _check_same_partition(a: PolygonalCurve, b: PolygonalCurve) -> None:
    if a.n_elements != b.n_elements:
        raise ValueError(
            f"mismatched element counts: {a.n_elements} vs {b.n_elements}"
        )


def element_tangent_normal(curve: PolygonalCurve):
    """Unit tangents and normals per element, with n = -perp(tau)."""
    d = curve.element_vectors
    ell = curve.element_lengths
    tau = d / ell[:, None]
    return tau, -perp(tau)


def time_weighted_normal(
    curve_old: PolygonalCurve, curve_new: PolygonalCurve
) -> np.ndarray:
    """Elementwise average-derivative normal between two curves.

    Returns -perp(d_old + d_new) / (2 |d_old|) per element, which is not of
    unit length in general; the denominator uses only the old curve.
    """
    _check_same_partition(curve_old, curve_new)
    return _time_weighted_from_vectors(
        curve_old.element_vectors,
        curve_old.element_lengths,
        curve_new.element_vectors,
    )


def _time_weighted_from_vectors(d_old, ell_old, d_new) -> np.ndarray:
    return -perp(d_old + d_new) / (2.0 * ell_old[:, None])


def _one_sided_values(n_elements: int, v):
    """Right/left one-sided nodal values of a piecewise field, per element.

    Nodal arrays of length N+1 are continuous piecewise-linear fields;
    element arrays of length N carry one value per element (a jump field).
    Scalars broadcast as constants.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim == 0:
        v = np.full(n_elements + 1, float(v))
    if v.shape[0] == n_elements + 1:
        return v[1:], v[:-1]
    if v.shape[0] == n_elements:
        return v, v
    raise ValueError(
        f"field of leading size {v.shape[0]} does not match N={n_elements}"
    )


def mass_lumped_inner(curve: PolygonalCurve, f, g) -> float:
    """Nodal (trapezoid-type) quadrature of f*g over the reference interval.

    Evaluates (h/2) * sum_j [(f.g)(q_j^-) + (f.g)(q_{j-1}^+)], taking
    one-sided limits at the nodes.  Scalar fields multiply pointwise; vector
    fields are contracted along their last axis.
    """
    n = curve.n_elements
    f_r, f_l = _one_sided_values(n, f)
    g_r, g_l = _one_sided_values(n, g)
    prod_r = f_r * g_r
    prod_l = f_l * g_l
    if prod_r.ndim > 1:
        prod_r = prod_r.sum(axis=-1)
        prod_l = prod_l.sum(axis=-1)
    return 0.5 * curve.reference_h * float(np.sum(prod_r) + np.sum(prod_l))


def curve_weighted_length(curve: PolygonalCurve, weight) -> float:
    """Sum of element lengths scaled by a per-element weight."""
    w = np.asarray(weight, dtype=float)
    if w.ndim == 0:
        w = np.full(curve.n_elements, float(w))
    if w.shape[0] != curve.n_elements:
        raise ValueError(
            f"weight of size {w.shape[0]} does not match N={curve.n_elements}"
        )
    return float(np.sum(w * curve.element_lengths))


def polygon_flux_integral(curve: PolygonalCurve) -> float:
    """Half the flux of the position field through the polyline.

    Computes (1/2) sum_j midpoint_j . n_j * length_j with the piecewise
    constant normals n = -perp(tau).  For a closed polygon this is the
    enclosed area, positive when the polygon is traversed clockwise (the
    orientation a film curve has when run from its left to its right
    contact).
    """
    nodes = curve.nodes
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    n_times_len = -perp(curve.element_vectors)
    return 0.5 * float(np.sum(mids * n_times_len))


def mesh_ratio(curve: PolygonalCurve) -> float:
    """Max element length over min element length (>= 1)."""
    ell = curve.element_lengths
    return float(ell.max() / ell.min())
