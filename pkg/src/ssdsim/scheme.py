"""Assembly of the linear system solved in each fixed-point iteration.

One implicit time step couples the new curve positions, the new chemical
potential and the two contact arclengths.  Each iteration of the nonlinear
solve freezes the geometric data (time-weighted normals, contact chords, the
stabilized energy matrices and the old element lengths) at the current
iterate, which leaves a sparse linear system of dimension 3N+5:

* N+1 rows: the motion law tested with every nodal hat function,
* 2(N-1) rows: the potential law tested with interior vector hats,
* 2 rows: the potential law tested with one chord-direction scalar test
  per endpoint (a basis of the constrained endpoint test space),
* 4 rows: the linearized attachment constraints tying the endpoint
  positions to the contact increments.

The corrected variant adds an endpoint normal correction, supported only at
the two boundary nodes, sized so that the area swept by the curve exactly
cancels the area slivers the contacts sweep along a curved substrate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.sparse import csr_matrix

from .anisotropy import Anisotropy, stabilization_matrices
from .geometry import PolygonalCurve, element_tangent_normal, perp
from .substrate import DegenerateChordError, Substrate

__all__ = [
    "SchemeVariant",
    "SchemeState",
    "Iterate",
    "StepParams",
    "DofMap",
    "AssembledSystem",
    "delta_normal_correction",
    "assemble_system",
    "attachment_defect",
]

CHORD_FALLBACK_TOL = 1e-12
# Contact chords below this (relative) length carry no usable direction
# information: the substrate tangent is their limit and, unlike them, is
# noise-free.  Feeding near-tolerance chords back into the iteration
# produces a limit cycle at exactly the tolerance scale.
CHORD_DIRECTION_FLOOR = 1e-7


class SchemeVariant(Enum):
    UNCORRECTED = "uncorrected"
    CORRECTED = "corrected"


@dataclass(frozen=True)
class SchemeState:
    """Film state at one time level: curve, potential, contacts, time."""

    curve: PolygonalCurve
    mu: np.ndarray
    c_l: float
    c_r: float
    time: float = 0.0

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float, copy=True)
        if mu.shape != (self.curve.n_elements + 1,):
            raise ValueError("mu must carry one value per curve node")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        if not self.c_l < self.c_r:
            raise ValueError(f"contacts must satisfy c_l < c_r, got {self.c_l}, {self.c_r}")


def attachment_defect(state: SchemeState, sub: Substrate) -> float:
    """Largest distance between an endpoint node and its substrate point."""
    d0 = np.linalg.norm(state.curve.nodes[0] - sub.r(state.c_l))
    d1 = np.linalg.norm(state.curve.nodes[-1] - sub.r(state.c_r))
    return float(max(d0, d1))


@dataclass(frozen=True)
class Iterate:
    """Current fixed-point iterate (positions, potential, contacts)."""

    x: np.ndarray
    mu: np.ndarray
    c_l: float
    c_r: float


@dataclass(frozen=True)
class StepParams:
    sigma: float
    eta: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not self.eta > 0.0:
            raise ValueError("eta must be positive")


@dataclass(frozen=True)
class DofMap:
    """Unknown layout: x/y pairs per node, then mu per node, then contacts."""

    n_elements: int

    @property
    def size(self) -> int:
        return 3 * self.n_elements + 5

    def x_index(self, node: int, comp: int) -> int:
        return 2 * node + comp

    def mu_index(self, node: int) -> int:
        return 2 * (self.n_elements + 1) + node

    @property
    def cl_index(self) -> int:
        return 3 * self.n_elements + 3

    @property
    def cr_index(self) -> int:
        return 3 * self.n_elements + 4

    def unpack(self, u: np.ndarray):
        n = self.n_elements
        x = u[: 2 * (n + 1)].reshape(n + 1, 2).copy()
        mu = u[2 * (n + 1): 3 * (n + 1)].copy()
        return x, mu, float(u[self.cl_index]), float(u[self.cr_index])


@dataclass(frozen=True)
class AssembledSystem:
    matrix: csr_matrix
    rhs: np.ndarray
    dof_map: DofMap


def _chord_and_direction(sub: Substrate, c_old: float, c_new: float):
    """Contact chord, its unit direction, and the chord tangent vector.

    Falls back to the substrate tangent at the old contact when the chord is
    too short to carry direction information (the limit both quantities
    approach as the contacts coincide).
    """
    r_old = np.asarray(sub.r(c_old), dtype=float)
    r_new = np.asarray(sub.r(c_new), dtype=float)
    chord = r_new - r_old
    norm = float(np.linalg.norm(chord))
    scale = max(1.0, float(np.abs(r_old).max()))
    if norm < CHORD_DIRECTION_FLOOR * scale:
        t = np.asarray(sub.r_c(c_old), dtype=float)
        return chord, t, t
    direction = chord / norm
    g_vec = (c_new - c_old) * chord / (norm * norm)
    return chord, direction, g_vec


def _end_correction(sub, c_old, c_new, elem_len, sign, qtol):
    """Correction vector at one endpoint, or None when the chord degenerates.

    The correction vanishes in the coincident-contact limit (the enclosed
    sliver area shrinks cubically in the contact increment), so None stands
    for an exact zero.
    """
    r_old = np.asarray(sub.r(c_old), dtype=float)
    r_new = np.asarray(sub.r(c_new), dtype=float)
    chord = r_new - r_old
    norm2 = float(chord @ chord)
    scale = max(1.0, float(np.abs(r_old).max()))
    if math.sqrt(norm2) < CHORD_FALLBACK_TOL * scale:
        return None
    area = sub.segment_area(c_old, c_new, qtol)
    return sign * 2.0 * area / norm2 * chord / elem_len


def delta_normal_correction(
    state: SchemeState,
    c_l_new: float,
    c_r_new: float,
    sub: Substrate,
    qtol: float = 1e-12,
):
    """Endpoint normal corrections enforcing exact area bookkeeping.

    Returns the pair (delta_n at node 0, delta_n at node N); interior nodes
    carry no correction.  Each vector points along the contact chord and is
    sized by the area between the substrate arc and that chord, divided by
    the adjacent old element length.  Raises on a degenerate chord; the
    assembler substitutes the zero limit instead.
    """
    ell = state.curve.element_lengths
    d0 = _end_correction(sub, state.c_l, c_l_new, float(ell[0]), -1.0, qtol)
    dn = _end_correction(sub, state.c_r, c_r_new, float(ell[-1]), +1.0, qtol)
    if d0 is None or dn is None:
        raise DegenerateChordError("degenerate chord")
    return d0, dn


def assemble_system(
    state: SchemeState,
    iterate: Iterate,
    aniso: Anisotropy,
    sub: Substrate,
    params: StepParams,
    variant: SchemeVariant,
) -> AssembledSystem:
    """Build the sparse linear system for one fixed-point iteration."""
    curve = state.curve
    n = curve.n_elements
    dof = DofMap(n)
    ell = curve.element_lengths
    d_old = curve.element_vectors
    x_old = curve.nodes

    x_it = np.asarray(iterate.x, dtype=float)
    if x_it.shape != x_old.shape:
        raise ValueError("iterate positions must match the curve layout")
    d_it = np.diff(x_it, axis=0)

    # frozen geometric data
    nh = -perp(d_old + d_it) / (2.0 * ell[:, None])  # time-weighted normals
    _, n_old = element_tangent_normal(curve)
    z_mats = stabilization_matrices(aniso, n_old)  # (N, 2, 2)

    if variant is SchemeVariant.CORRECTED:
        dn0 = _end_correction(sub, state.c_l, iterate.c_l, float(ell[0]), -1.0, 1e-12)
        dnn = _end_correction(sub, state.c_r, iterate.c_r, float(ell[-1]), +1.0, 1e-12)
        dn0 = np.zeros(2) if dn0 is None else dn0
        dnn = np.zeros(2) if dnn is None else dnn
    else:
        dn0 = np.zeros(2)
        dnn = np.zeros(2)

    # lumped nodal weights omega_i (the same vector couples both equations)
    w = 0.5 * nh * ell[:, None]
    omega = np.zeros((n + 1, 2))
    omega[:-1] += w
    omega[1:] += w
    omega[0] += 0.5 * ell[0] * dn0
    omega[n] += 0.5 * ell[-1] * dnn

    # contact chords at the current iterate
    _, dir_l, g_l = _chord_and_direction(sub, state.c_l, iterate.c_l)
    _, dir_r, g_r = _chord_and_direction(sub, state.c_r, iterate.c_r)
    rc_l = np.asarray(sub.r_c(iterate.c_l), dtype=float)
    rc_r = np.asarray(sub.r_c(iterate.c_r), dtype=float)
    r_l = np.asarray(sub.r(iterate.c_l), dtype=float)
    r_r = np.asarray(sub.r(iterate.c_r), dtype=float)

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    data: list[np.ndarray] = []
    rhs = np.zeros(dof.size)

    def add(r, c, v):
        rows.append(np.asarray(r, dtype=np.int64).ravel())
        cols.append(np.asarray(c, dtype=np.int64).ravel())
        data.append(np.asarray(v, dtype=float).ravel())

    inv_dt = 1.0 / params.dt
    nodes_idx = np.arange(n + 1)

    # motion rows 0..N: (omega_i . dX_i)/dt + (graph-Laplacian mu)_i = 0
    add(np.repeat(nodes_idx, 2),
        np.stack([2 * nodes_idx, 2 * nodes_idx + 1], axis=1),
        inv_dt * omega)
    rhs[: n + 1] += inv_dt * np.sum(omega * x_old, axis=1)

    inv_len = 1.0 / ell
    elem = np.arange(n)
    mu0 = dof.mu_index(0)
    add(elem, mu0 + elem, inv_len)          # (j-1, j-1)
    add(elem, mu0 + elem + 1, -inv_len)     # (j-1, j)
    add(elem + 1, mu0 + elem + 1, inv_len)  # (j, j)
    add(elem + 1, mu0 + elem, -inv_len)     # (j, j-1)

    # potential rows, interior nodes: mu_i omega_i - jump of Z d / L = 0
    if n >= 2:
        i = np.arange(1, n)
        base = n + 1 + 2 * (i - 1)
        a_blk = z_mats[:-1][i - 1] * inv_len[i - 1][:, None, None]   # Z_i / L_i
        b_blk = z_mats[1:][i - 1] * inv_len[i][:, None, None]        # Z_{i+1} / L_{i+1}
        for k in (0, 1):
            row = base + k
            add(row, mu0 + i, omega[i, k])
            for comp in (0, 1):
                add(row, 2 * (i - 1) + comp, a_blk[:, k, comp])
                add(row, 2 * i + comp, -a_blk[:, k, comp] - b_blk[:, k, comp])
                add(row, 2 * (i + 1) + comp, b_blk[:, k, comp])

    # potential rows, endpoints (scalar chord-direction tests)
    row_l = 3 * n - 1
    row_r = 3 * n
    z_dl = z_mats[0] @ dir_l / ell[0]
    z_dr = z_mats[-1] @ dir_r / ell[-1]
    gl_dl = float(g_l @ dir_l)
    gr_dr = float(g_r @ dir_r)
    coef = 1.0 / (params.eta * params.dt)

    add([row_l], [mu0], [float(omega[0] @ dir_l)])
    add([row_l, row_l], [0, 1], -z_dl)
    add([row_l, row_l], [2, 3], z_dl)
    add([row_l], [dof.cl_index], [-coef * gl_dl])
    rhs[row_l] = params.sigma * gl_dl - coef * gl_dl * state.c_l

    add([row_r], [mu0 + n], [float(omega[n] @ dir_r)])
    add([row_r, row_r], [2 * n, 2 * n + 1], -z_dr)
    add([row_r, row_r], [2 * n - 2, 2 * n - 1], z_dr)
    add([row_r], [dof.cr_index], [-coef * gr_dr])
    rhs[row_r] = -params.sigma * gr_dr - coef * gr_dr * state.c_r

    # linearized attachment constraints
    for comp in (0, 1):
        row = 3 * n + 1 + comp
        add([row], [comp], [1.0])
        add([row], [dof.cl_index], [-rc_l[comp]])
        rhs[row] = r_l[comp] - rc_l[comp] * iterate.c_l
    for comp in (0, 1):
        row = 3 * n + 3 + comp
        add([row], [2 * n + comp], [1.0])
        add([row], [dof.cr_index], [-rc_r[comp]])
        rhs[row] = r_r[comp] - rc_r[comp] * iterate.c_r

    matrix = _to_csr(
        n, dof.size, np.concatenate(rows), np.concatenate(cols), np.concatenate(data)
    )
    return AssembledSystem(matrix=matrix, rhs=rhs, dof_map=dof)


# The sparsity pattern is a function of the element count alone, so the
# duplicate-summing COO -> CSR conversion is precomputed once per layout.
_PATTERN_CACHE: dict[int, tuple] = {}


def _to_csr(n: int, size: int, rows, cols, data) -> csr_matrix:
    entry = _PATTERN_CACHE.get(n)
    if entry is None or entry[0] != len(data):
        keys = rows.astype(np.int64) * size + cols.astype(np.int64)
        unique_keys, inverse = np.unique(keys, return_inverse=True)
        indices = (unique_keys % size).astype(np.int32)
        counts = np.zeros(size + 1, dtype=np.int64)
        np.add.at(counts, (unique_keys // size) + 1, 1)
        indptr = np.cumsum(counts).astype(np.int32)
        entry = (len(data), inverse, indices, indptr, len(unique_keys))
        _PATTERN_CACHE[n] = entry
    _, inverse, indices, indptr, nnz = entry
    data_csr = np.bincount(inverse, weights=data, minlength=nnz)
    return csr_matrix((data_csr, indices, indptr), shape=(size, size))
