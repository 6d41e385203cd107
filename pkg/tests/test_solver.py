import math

import numpy as np
import pytest
from scipy.sparse import csr_matrix, random as sparse_random

from ssdsim import run as run_mod
from ssdsim.anisotropy import isotropic
from ssdsim.config import PinchConfig, ScenarioConfig, SolverConfig
from ssdsim.films import InitialFilmSpec
from ssdsim.geometry import PolygonalCurve
from ssdsim.run import SimulationError, run_simulation
from ssdsim.scheme import (
    AssembledSystem,
    DofMap,
    SchemeState,
    SchemeVariant,
    StepParams,
    assemble_system,
    Iterate,
)
from ssdsim.solver import (
    PicardNonConvergence,
    SingularSystemError,
    SolverParams,
    detect_and_split_pinchoff,
    linear_solve,
    perturb_contacts,
    time_step,
)
from ssdsim.substrate import CircleSubstrate, LineSubstrate
from ssdsim.diagnostics import total_mass

ISO = isotropic()


def semicircle_state(n, radius=1.0):
    theta = np.linspace(np.pi, 0.0, n + 1)
    nodes = radius * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    nodes[0] = [-radius, 0.0]
    nodes[-1] = [radius, 0.0]
    return SchemeState(PolygonalCurve(nodes), np.zeros(n + 1), -radius, radius)


class TestPerturbContacts:
    def test_zero_scale_is_identity(self):
        state = semicircle_state(8)
        params = SolverParams(perturb_scale=0.0)
        rng = np.random.default_rng(0)
        assert perturb_contacts(state, params, rng) == (state.c_l, state.c_r)

    def test_deterministic_given_seed(self):
        state = semicircle_state(8)
        params = SolverParams()
        a = perturb_contacts(state, params, np.random.default_rng(123))
        b = perturb_contacts(state, params, np.random.default_rng(123))
        assert a == b

    def test_default_scale_stays_small(self):
        state = semicircle_state(8)
        params = SolverParams()
        rng = np.random.default_rng(5)
        draws = np.array(
            [perturb_contacts(state, params, rng) for _ in range(100_000)]
        )
        dev = np.abs(draws - np.array([state.c_l, state.c_r]))
        assert float(dev.max()) < 1e-6  # a 6-sigma excursion is 6e-8


class TestLinearSolve:
    @staticmethod
    def wrap(matrix, rhs):
        n = (matrix.shape[0] - 5) // 3
        return AssembledSystem(csr_matrix(matrix), np.asarray(rhs, float), DofMap(n))

    def test_identity(self):
        b = np.arange(17.0)
        sys = self.wrap(np.eye(17), b)
        assert np.allclose(linear_solve(sys), b)

    def test_random_sparse_system_matches_dense_oracle(self):
        rng = np.random.default_rng(42)
        a = sparse_random(17, 17, density=0.4, random_state=rng).toarray()
        a += 17.0 * np.eye(17)
        b = rng.normal(size=17)
        got = linear_solve(self.wrap(a, b))
        expect = np.linalg.solve(a, b)
        assert np.max(np.abs(got - expect)) <= 1e-12 * np.max(np.abs(expect))

    def test_singular_system_raises(self):
        a = np.eye(17)
        a[3, 3] = 0.0
        with pytest.raises(SingularSystemError):
            linear_solve(self.wrap(a, np.ones(17)))

    def test_assembled_first_step_residual(self):
        from ssdsim.presets import get_preset
        from ssdsim.config import build_scenario

        cfg = get_preset("ex1_i")
        sub, aniso, (state,) = build_scenario(cfg)
        it = Iterate(
            x=np.array(state.curve.nodes), mu=np.array(state.mu),
            c_l=state.c_l + 1e-8, c_r=state.c_r - 1e-8,
        )
        params = StepParams(cfg.sigma, cfg.eta, cfg.dt)
        sys = assemble_system(state, it, aniso, sub, params, SchemeVariant.CORRECTED)
        u = linear_solve(sys)
        resid = np.max(np.abs(sys.matrix @ u - sys.rhs))
        scale = float(np.max(np.abs(sys.rhs)))
        assert resid <= 1e-12 * max(scale, 1.0)


class TestTimeStep:
    def test_semicircle_near_equilibrium(self):
        # Young angle 90 degrees: the unit semicircular cap is stationary
        sub = LineSubstrate()
        state = semicircle_state(64)
        params = StepParams(sigma=0.0, eta=100.0, dt=2.0**-10)
        new, rep = time_step(
            state, ISO, sub, params, SchemeVariant.CORRECTED,
            SolverParams(seed=0), np.random.default_rng(0),
        )
        radii = np.linalg.norm(new.curve.nodes, axis=1)
        assert np.max(np.abs(radii - 1.0)) <= 1e-6
        assert rep.converged

    def test_fixed_point_residual_of_converged_solution(self):
        # plugging the converged iterate back into its own system must
        # reproduce itself (the defining fixed-point property)
        from ssdsim.presets import get_preset
        from ssdsim.config import build_scenario

        cfg = get_preset("ex1_i")
        sub, aniso, (state,) = build_scenario(cfg)
        params = StepParams(cfg.sigma, cfg.eta, cfg.dt)
        new, rep = time_step(
            state, aniso, sub, params, SchemeVariant.CORRECTED,
            SolverParams(seed=1), np.random.default_rng(1),
        )
        it = Iterate(
            x=np.array(new.curve.nodes), mu=np.array(new.mu),
            c_l=new.c_l, c_r=new.c_r,
        )
        sys = assemble_system(state, it, aniso, sub, params, SchemeVariant.CORRECTED)
        u = linear_solve(sys)
        x2, mu2, cl2, cr2 = sys.dof_map.unpack(u)
        assert np.max(np.abs(x2[1:-1] - it.x[1:-1])) <= 10.0 * 1e-9
        assert abs(cl2 - it.c_l) <= 10.0 * 1e-9
        assert abs(cr2 - it.c_r) <= 10.0 * 1e-9

    def test_iteration_budget_smoke(self):
        from ssdsim.presets import get_preset

        cfg = get_preset("ex1_i").replace(t_end=20 * 2.0**-10)
        res = run_simulation(cfg)
        its = [r.iterations for r in res.series[1:]]
        assert max(its) <= 30

    def test_zero_dt_rejected(self):
        with pytest.raises(ValueError, match="dt must be positive"):
            StepParams(sigma=0.0, eta=1.0, dt=0.0)

    def test_nonconvergence_raises(self):
        sub = LineSubstrate()
        state = semicircle_state(16)
        params = StepParams(sigma=-0.5, eta=100.0, dt=2.0**-6)
        with pytest.raises(PicardNonConvergence):
            time_step(
                state, ISO, sub, params, SchemeVariant.CORRECTED,
                SolverParams(seed=0, max_iters=1), np.random.default_rng(0),
            )


class TestPinchOff:
    @staticmethod
    def dumbbell_state(n=32, touch=0.0):
        # two bumps above a flat substrate with the waist at height `touch`
        xs = np.linspace(-2.0, 2.0, n + 1)
        ys = (np.sin(np.pi * (xs + 2.0) / 2.0) ** 2) + touch * 0.0
        ys[1:-1] = np.maximum(ys[1:-1], 1e-3)
        mid = n // 2
        ys[mid] = touch
        ys[0] = ys[-1] = 0.0
        return SchemeState(
            PolygonalCurve(np.stack([xs, ys], axis=1)), np.zeros(n + 1), -2.0, 2.0
        )

    def test_no_split_above_threshold(self):
        sub = LineSubstrate()
        state = self.dumbbell_state(touch=0.5)
        out = detect_and_split_pinchoff(state, sub, threshold=0.01)
        assert len(out) == 1 and out[0] is state

    def test_zero_threshold_never_splits(self):
        sub = LineSubstrate()
        state = self.dumbbell_state(touch=0.0)
        out = detect_and_split_pinchoff(state, sub, threshold=0.0)
        assert len(out) == 1

    def test_symmetric_dumbbell_mass_budget(self):
        sub = LineSubstrate()
        state = self.dumbbell_state(n=64, touch=0.0)
        mass_before = total_mass(state, sub)
        parts = detect_and_split_pinchoff(state, sub, threshold=1e-3)
        assert len(parts) == 2
        left, right = parts
        m_l = total_mass(left, sub)
        m_r = total_mass(right, sub)
        assert m_l + m_r == pytest.approx(mass_before, rel=1e-8)
        assert m_l == pytest.approx(m_r, rel=1e-6)
        assert left.c_r == pytest.approx(0.0, abs=1e-9)
        assert right.c_l == left.c_r


class TestRunOrchestration:
    @staticmethod
    def flat_config(**kw):
        defaults = dict(
            substrate={"kind": "line"},
            anisotropy="isotropic",
            films=(InitialFilmSpec(kind="offset_band", c_l=-2.5, c_r=2.5, thickness=1.0),),
            n_elements=16,
            dt=2.0**-8,
            t_end=2.0**-4,
            solver=SolverConfig(seed=2),
        )
        defaults.update(kw)
        return ScenarioConfig(**defaults)

    def test_t_end_zero_returns_initial_state_only(self):
        res = run_simulation(self.flat_config(t_end=0.0))
        assert len(res.series) == 1
        assert len(res.snapshots) == 1

    def test_deterministic_trajectories(self):
        a = run_simulation(self.flat_config(), store_trajectory=True)
        b = run_simulation(self.flat_config(), store_trajectory=True)
        for sa, sb in zip(a.trajectory, b.trajectory):
            assert np.array_equal(sa.curve.nodes, sb.curve.nodes)
            assert sa.c_l == sb.c_l and sa.c_r == sb.c_r

    def test_flat_variants_agree_nodewise(self):
        a = run_simulation(self.flat_config(scheme="corrected"), store_trajectory=True)
        b = run_simulation(self.flat_config(scheme="uncorrected"), store_trajectory=True)
        worst = max(
            float(np.max(np.abs(sa.curve.nodes - sb.curve.nodes)))
            for sa, sb in zip(a.trajectory, b.trajectory)
        )
        assert worst <= 10.0 * a.config.solver.tol

    def test_step_subdivision_on_nonconvergence(self, monkeypatch):
        calls = {"n": 0}
        original = run_mod.time_step

        def flaky(state, aniso, sub, params, variant, solver_params, rng, **kw):
            calls["n"] += 1
            if calls["n"] == 1:
                raise PicardNonConvergence(iterations=99, last_displacement=1.0)
            return original(state, aniso, sub, params, variant, solver_params, rng, **kw)

        monkeypatch.setattr(run_mod, "time_step", flaky)
        cfg = self.flat_config(t_end=2.0**-8)
        res = run_simulation(cfg)
        assert calls["n"] == 3  # failed full step, then two half steps
        assert res.series[-1].time == pytest.approx(cfg.t_end)

    def test_simulation_error_carries_step_index(self, monkeypatch):
        def always_fail(*args, **kwargs):
            raise PicardNonConvergence(iterations=99, last_displacement=1.0)

        monkeypatch.setattr(run_mod, "time_step", always_fail)
        with pytest.raises(SimulationError, match="step 0"):
            run_simulation(self.flat_config(t_end=2.0**-8))

    def test_non_multiple_t_end_rejected(self):
        with pytest.raises(ValueError, match="integer multiple"):
            run_simulation(self.flat_config(t_end=2.0**-8 * 2.5))
