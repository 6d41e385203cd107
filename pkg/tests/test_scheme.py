import math

import numpy as np
import pytest

from ssdsim.anisotropy import get_anisotropy, isotropic
from ssdsim.films import InitialFilmSpec, build_initial_film
from ssdsim.geometry import PolygonalCurve, perp
from ssdsim.scheme import (
    Iterate,
    SchemeState,
    SchemeVariant,
    StepParams,
    assemble_system,
    attachment_defect,
    delta_normal_correction,
)
from ssdsim.substrate import CircleSubstrate, DegenerateChordError, LineSubstrate

ISO = isotropic()
L4 = get_anisotropy("l4")


def semicircle_state(n=8, radius=1.0, flat=None):
    flat = flat or LineSubstrate()
    theta = np.linspace(np.pi, 0.0, n + 1)
    nodes = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    nodes[0] = flat.r(-radius)
    nodes[-1] = flat.r(radius)
    return SchemeState(PolygonalCurve(nodes), np.zeros(n + 1), -radius, radius)


def trivial_iterate(state, d_cl=0.0, d_cr=0.0, sub=None, jiggle=0.0, seed=0):
    x = np.array(state.curve.nodes, copy=True)
    if jiggle:
        rng = np.random.default_rng(seed)
        x[1:-1] += jiggle * rng.standard_normal(x[1:-1].shape)
    c_l = state.c_l + d_cl
    c_r = state.c_r + d_cr
    if sub is not None:
        x[0] = sub.r(c_l)
        x[-1] = sub.r(c_r)
    return Iterate(x=x, mu=np.array(state.mu), c_l=c_l, c_r=c_r)


class TestStateInvariants:
    def test_contacts_ordered(self):
        with pytest.raises(ValueError, match="c_l < c_r"):
            SchemeState(
                PolygonalCurve([[0, 0], [1, 1], [2, 0]]), np.zeros(3), 1.0, -1.0
            )

    def test_mu_shape(self):
        with pytest.raises(ValueError, match="one value per curve node"):
            SchemeState(
                PolygonalCurve([[0, 0], [1, 1], [2, 0]]), np.zeros(5), -1.0, 1.0
            )

    def test_attachment_defect(self):
        sub = LineSubstrate()
        state = semicircle_state(flat=sub)
        assert attachment_defect(state, sub) <= 1e-12


class TestDeltaNormalCorrection:
    def test_flat_substrate_gives_zero(self):
        sub = LineSubstrate()
        state = semicircle_state(flat=sub)
        d0, dn = delta_normal_correction(state, state.c_l + 0.05, state.c_r - 0.03, sub)
        assert np.allclose(d0, 0.0, atol=1e-15)
        assert np.allclose(dn, 0.0, atol=1e-15)

    def test_coincident_contacts_rejected(self):
        sub = CircleSubstrate(20.0)
        state = semicircle_state(flat=LineSubstrate())
        # rebuild attached to the circle
        nodes = np.array(state.curve.nodes, copy=True)
        nodes[0] = sub.r(-1.0)
        nodes[-1] = sub.r(1.0)
        state = SchemeState(PolygonalCurve(nodes), state.mu, -1.0, 1.0)
        with pytest.raises(DegenerateChordError, match="degenerate chord"):
            delta_normal_correction(state, state.c_l, state.c_r + 0.1, sub)

    def test_termwise_formula_oracle(self):
        sub = CircleSubstrate(20.0)
        n = 12
        cs = np.linspace(0.0, 0.05 * n, n + 1)
        nodes = sub.r(cs) + 0.4 * sub.n_sub(cs)
        nodes[0] = sub.r(cs[0])
        nodes[-1] = sub.r(cs[-1])
        state = SchemeState(PolygonalCurve(nodes), np.zeros(n + 1), cs[0], cs[-1])
        c_l_new, c_r_new = 0.1, cs[-1] + 0.07
        d0, dn = delta_normal_correction(state, c_l_new, c_r_new, sub)

        def oracle(c_old, c_new, elem_len, sign):
            chord = sub.r(c_new) - sub.r(c_old)
            area = sub.segment_area(c_old, c_new)
            return sign * 2.0 * area / float(chord @ chord) * chord / elem_len

        ell = state.curve.element_lengths
        assert np.allclose(d0, oracle(cs[0], c_l_new, ell[0], -1.0), atol=1e-14)
        assert np.allclose(dn, oracle(cs[-1], c_r_new, ell[-1], +1.0), atol=1e-14)
        # magnitude consistent with the dt/h scaling of the correction
        kappa = 1.0 / 20.0
        dc = c_l_new - cs[0]
        assert np.linalg.norm(d0) <= 2.0 * kappa * abs(dc) / float(ell[0])


def flat_isotropic_oracle(state, iterate, params):
    """Independent assembler for the flat-substrate isotropic scheme.

    Written from scratch against the weak form specialized to r(c) = (c, 0),
    unit tangent (1, 0), stiffness matrix identity; returns (dense matrix,
    rhs) in the same unknown layout as the production assembler.
    """
    curve = state.curve
    n = curve.n_elements
    size = 3 * n + 5
    a = np.zeros((size, size))
    b = np.zeros(size)
    x_old = curve.nodes
    d_old = np.diff(x_old, axis=0)
    ell = np.linalg.norm(d_old, axis=1)
    d_it = np.diff(iterate.x, axis=0)
    nh = -perp(d_old + d_it) / (2.0 * ell[:, None])

    omega = np.zeros((n + 1, 2))
    omega[:-1] += 0.5 * nh * ell[:, None]
    omega[1:] += 0.5 * nh * ell[:, None]
    mu0 = 2 * (n + 1)

    for i in range(n + 1):
        a[i, 2 * i: 2 * i + 2] = omega[i] / params.dt
        b[i] = float(omega[i] @ x_old[i]) / params.dt
        if i > 0:
            a[i, mu0 + i] += 1.0 / ell[i - 1]
            a[i, mu0 + i - 1] -= 1.0 / ell[i - 1]
        if i < n:
            a[i, mu0 + i] += 1.0 / ell[i]
            a[i, mu0 + i + 1] -= 1.0 / ell[i]

    row = n + 1
    for i in range(1, n):
        for k in range(2):
            a[row, mu0 + i] = omega[i, k]
            a[row, 2 * (i - 1) + k] += 1.0 / ell[i - 1]
            a[row, 2 * i + k] -= 1.0 / ell[i - 1] + 1.0 / ell[i]
            a[row, 2 * (i + 1) + k] += 1.0 / ell[i]
            row += 1

    # on the flat substrate the chord direction is +-(1, 0) while the chord
    # tangent vector is always (1, 0): the two sign factors in it cancel
    dl = np.array([math.copysign(1.0, iterate.c_l - state.c_l), 0.0])
    dr = np.array([math.copysign(1.0, iterate.c_r - state.c_r), 0.0])
    gl = np.array([1.0, 0.0])
    gr = np.array([1.0, 0.0])
    coef = 1.0 / (params.eta * params.dt)
    a[row, mu0] = float(omega[0] @ dl)
    a[row, 0:2] -= dl / ell[0]
    a[row, 2:4] += dl / ell[0]
    a[row, 3 * n + 3] = -coef * float(gl @ dl)
    b[row] = params.sigma * float(gl @ dl) - coef * float(gl @ dl) * state.c_l
    row += 1
    a[row, mu0 + n] = float(omega[n] @ dr)
    a[row, 2 * n: 2 * n + 2] -= dr / ell[-1]
    a[row, 2 * n - 2: 2 * n] += dr / ell[-1]
    a[row, 3 * n + 4] = -coef * float(gr @ dr)
    b[row] = -params.sigma * float(gr @ dr) - coef * float(gr @ dr) * state.c_r
    row += 1

    for comp in range(2):
        a[row, comp] = 1.0
        a[row, 3 * n + 3] = -(1.0 if comp == 0 else 0.0)
        b[row] = (iterate.c_l if comp == 0 else 0.0) - (
            iterate.c_l if comp == 0 else 0.0
        )
        b[row] = (
            np.array([iterate.c_l, 0.0])[comp]
            - np.array([1.0, 0.0])[comp] * iterate.c_l
        )
        row += 1
    for comp in range(2):
        a[row, 2 * n + comp] = 1.0
        a[row, 3 * n + 4] = -(1.0 if comp == 0 else 0.0)
        b[row] = (
            np.array([iterate.c_r, 0.0])[comp]
            - np.array([1.0, 0.0])[comp] * iterate.c_r
        )
        row += 1
    return a, b


class TestAssembly:
    def setup_method(self):
        self.sub = CircleSubstrate(20.0, center=(0.0, 20.0), theta0=-math.pi / 2.0)
        spec = InitialFilmSpec(kind="offset_band", c_l=-2.5, c_r=2.5, thickness=1.0)
        self.state = build_initial_film(spec, self.sub, 8)
        self.params = StepParams(sigma=-math.sqrt(3) / 2, eta=100.0, dt=1e-3)

    def test_dimension_is_3n_plus_5(self):
        for n in (4, 8):
            spec = InitialFilmSpec(kind="offset_band", c_l=-2.5, c_r=2.5, thickness=1.0)
            state = build_initial_film(spec, self.sub, n)
            it = trivial_iterate(state, 1e-8, -1e-8, self.sub)
            sys = assemble_system(
                state, it, ISO, self.sub, self.params, SchemeVariant.CORRECTED
            )
            assert sys.matrix.shape == (3 * n + 5, 3 * n + 5)
            assert sys.rhs.shape == (3 * n + 5,)

    def test_residual_is_affine_in_unknowns(self):
        it = trivial_iterate(self.state, 1e-8, -1e-8, self.sub, jiggle=1e-3)
        sys = assemble_system(
            self.state, it, L4, self.sub, self.params, SchemeVariant.CORRECTED
        )
        rng = np.random.default_rng(0)
        u = rng.normal(size=sys.rhs.size)
        v = rng.normal(size=sys.rhs.size)
        alpha, beta = 0.731, -1.625
        lhs = sys.matrix @ (alpha * u + beta * v)
        rhs = alpha * (sys.matrix @ u) + beta * (sys.matrix @ v)
        scale = float(np.max(np.abs(lhs)) + 1.0)
        assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale

    def test_variants_differ_only_in_endpoint_rows(self):
        n = self.state.curve.n_elements
        it = trivial_iterate(self.state, 2e-3, -1e-3, self.sub)
        sys_u = assemble_system(
            self.state, it, ISO, self.sub, self.params, SchemeVariant.UNCORRECTED
        )
        sys_c = assemble_system(
            self.state, it, ISO, self.sub, self.params, SchemeVariant.CORRECTED
        )
        diff = (sys_c.matrix - sys_u.matrix).tocoo()
        rows_touched = set(int(r) for r in diff.row[np.abs(diff.data) > 0])
        rhs_rows = set(np.nonzero(np.abs(sys_c.rhs - sys_u.rhs) > 0)[0].tolist())
        # motion rows at the boundary nodes and the two endpoint potential rows
        allowed = {0, n, 3 * n - 1, 3 * n}
        assert rows_touched <= allowed
        assert rhs_rows <= allowed
        assert rows_touched  # the correction must actually do something

    def test_endpoint_test_direction_annihilates_chord_perp(self):
        it = trivial_iterate(self.state, 2e-3, -1e-3, self.sub)
        chord = self.sub.r(it.c_l) - self.sub.r(self.state.c_l)
        d_l = chord / np.linalg.norm(chord)
        assert abs(float(d_l @ perp(chord))) <= 1e-15 * np.linalg.norm(chord)

    def test_flat_case_against_independent_assembler(self):
        sub = LineSubstrate()
        state = semicircle_state(n=6, flat=sub)
        params = StepParams(sigma=0.3, eta=50.0, dt=2e-3)
        it = trivial_iterate(state, 3e-4, -2e-4, sub, jiggle=1e-4, seed=4)
        sys = assemble_system(state, it, ISO, sub, params, SchemeVariant.CORRECTED)
        a_oracle, b_oracle = flat_isotropic_oracle(state, it, params)
        assert np.max(np.abs(sys.matrix.toarray() - a_oracle)) <= 1e-11
        assert np.max(np.abs(sys.rhs - b_oracle)) <= 1e-11

    def test_flat_variants_identical(self):
        sub = LineSubstrate()
        state = semicircle_state(n=6, flat=sub)
        params = StepParams(sigma=0.0, eta=100.0, dt=1e-3)
        it = trivial_iterate(state, 1e-4, -1e-4, sub)
        sys_u = assemble_system(state, it, ISO, sub, params, SchemeVariant.UNCORRECTED)
        sys_c = assemble_system(state, it, ISO, sub, params, SchemeVariant.CORRECTED)
        assert (sys_c.matrix - sys_u.matrix).nnz == 0
        assert np.array_equal(sys_c.rhs, sys_u.rhs)

    def test_dt_validation(self):
        with pytest.raises(ValueError, match="dt must be positive"):
            StepParams(sigma=0.0, eta=1.0, dt=0.0)
