"""Integrator correctness: analytic oracles, scipy cross-checks, backends."""
import importlib
import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from ionreg.angular import HalfInt
from ionreg.dynamics import (
    DensityOperator,
    backend_name,
    evolve,
    lindblad_rhs,
    max_step_for,
    steady_state_distance,
)
from ionreg.species import (
    Coupling,
    available_species,
    beam_couplings,
    collapse_operators,
    load_species,
    repump_hamiltonian,
)

GAMMA = 1.5e8


def two_level_decay(dim=2, rate=GAMMA):
    """One collapse channel |0><1| at the given rate, no Hamiltonian."""
    from ionreg.species import CollapseChannel, DecayPath

    path = DecayPath(upper="P1/2", lower="S1/2", einstein_A=rate, wavelength=400e-9)
    ch = CollapseChannel(
        path=path, g_index=0, e_index=1, amplitude=math.sqrt(rate), q=0,
        collectable=True, dim=dim,
    )
    return [ch]


class TestDensityOperator:
    def test_pure(self):
        rho = DensityOperator.pure(4, 2)
        assert rho.population(2) == 1.0
        rho.validate()

    def test_maximally_mixed_subset(self):
        rho = DensityOperator.maximally_mixed(6, [0, 1, 2])
        assert rho.population(0) == pytest.approx(1 / 3)
        assert rho.population(5) == 0.0
        rho.validate()

    def test_validate_rejects_non_hermitian(self):
        m = np.zeros((2, 2), dtype=complex)
        m[0, 0] = 1.0
        m[0, 1] = 0.1
        with pytest.raises(ValueError, match="Hermitian"):
            DensityOperator(m).validate()

    def test_validate_rejects_wrong_trace(self):
        with pytest.raises(ValueError, match="trace"):
            DensityOperator(np.eye(2, dtype=complex)).validate()

    def test_validate_rejects_negative_eigenvalue(self):
        m = np.diag([1.5, -0.5]).astype(complex)
        with pytest.raises(ValueError, match="eigenvalue"):
            DensityOperator(m).validate()


class TestExponentialDecay:
    def test_populations_match_analytic(self):
        channels = two_level_decay()
        rho0 = DensityOperator.pure(2, 1)
        for t in (1e-9, 5e-9, 20e-9):
            res = evolve(rho0, t, [], channels)
            expected = math.exp(-GAMMA * t)
            assert res.final_state.population(1) == pytest.approx(expected, rel=1e-7)
            assert res.final_state.population(0) == pytest.approx(1 - expected, rel=1e-7)

    def test_flux_equals_transferred_population(self):
        channels = two_level_decay()
        rho0 = DensityOperator.pure(2, 1)
        res = evolve(rho0, 7e-9, [], channels)
        assert res.fluxes.values[0] == pytest.approx(
            1 - math.exp(-GAMMA * 7e-9), rel=1e-7
        )

    def test_coherence_decays_at_half_rate(self):
        channels = two_level_decay()
        m = np.array([[0.5, 0.5], [0.5, 0.5]], dtype=complex)
        res = evolve(DensityOperator(m), 4e-9, [], channels)
        expected = 0.5 * math.exp(-0.5 * GAMMA * 4e-9)
        assert abs(res.final_state.matrix[0, 1]) == pytest.approx(expected, rel=1e-7)

    def test_zero_duration_is_identity(self):
        channels = two_level_decay()
        rho0 = DensityOperator.pure(2, 1)
        res = evolve(rho0, 0.0, [], channels)
        assert np.array_equal(res.final_state.matrix, rho0.matrix)
        assert res.steps_taken == 0


class TestRabiOscillation:
    def test_resonant_rabi_period(self):
        """H = Omega(|g><e| + |e><g|) flops at angular frequency 2 Omega."""
        omega = 2 * math.pi * 20e6
        coup = [Coupling(g_index=0, e_index=1, amplitude=omega, frequency=0.0)]
        rho0 = DensityOperator.pure(2, 0)
        t = 11e-9
        res = evolve(rho0, t, coup, [])
        expected = math.sin(omega * t) ** 2
        assert res.final_state.population(1) == pytest.approx(expected, abs=1e-7)


class TestAgainstDenseReference:
    """The sparse kernel against lindblad_rhs fed to scipy's solve_ivp."""

    @pytest.mark.parametrize("key", ["ca", "yb"])
    def test_species_window_evolution(self, key):
        model = load_species(available_species()[key])
        couplings = beam_couplings(model)
        channels = collapse_operators(model)
        idx = model.manifold_indices("D3/2") + model.manifold_indices("S1/2")
        rho0 = DensityOperator.maximally_mixed(model.dim, idx)
        duration = 40e-9

        res = evolve(rho0, duration, couplings, channels)

        n = model.dim

        def rhs(t, y):
            rho = y.reshape(n, n)
            H = repump_hamiltonian(model, t)
            return lindblad_rhs(rho, H, channels).ravel()

        sol = solve_ivp(
            rhs, (0.0, duration), rho0.matrix.ravel().astype(complex),
            method="DOP853", rtol=1e-10, atol=1e-12,
        )
        ref = sol.y[:, -1].reshape(n, n)
        assert np.abs(res.final_state.matrix - ref).max() < 1e-6

    def test_t0_continuity(self):
        """Splitting an interval at t0 reproduces the unsplit evolution."""
        model = load_species(available_species()["ca"])
        couplings = beam_couplings(model)
        channels = collapse_operators(model)
        rho0 = DensityOperator.maximally_mixed(
            model.dim, model.manifold_indices("D3/2")
        )
        whole = evolve(rho0, 60e-9, couplings, channels)
        first = evolve(rho0, 25e-9, couplings, channels)
        second = evolve(first.final_state, 35e-9, couplings, channels, t0=25e-9)
        assert np.abs(
            whole.final_state.matrix - second.final_state.matrix
        ).max() < 1e-7
        # Restarting phases at t=0 instead gives a visibly different state.
        wrong = evolve(first.final_state, 35e-9, couplings, channels, t0=0.0)
        assert np.abs(
            whole.final_state.matrix - wrong.final_state.matrix
        ).max() > 1e-4


class TestNumerics:
    def test_tolerance_halving_converges(self):
        model = load_species(available_species()["ca"])
        couplings = beam_couplings(model)
        channels = collapse_operators(model)
        rho0 = DensityOperator.maximally_mixed(
            model.dim, model.manifold_indices("D5/2")
        )
        coarse = evolve(rho0, 50e-9, couplings, channels, rtol=1e-6, atol=1e-8)
        fine = evolve(rho0, 50e-9, couplings, channels, rtol=1e-9, atol=1e-11)
        diff = np.abs(coarse.final_state.matrix - fine.final_state.matrix).max()
        assert diff < 1e-6

    def test_final_state_stays_physical(self):
        model = load_species(available_species()["ba"])
        rho0 = DensityOperator.maximally_mixed(model.dim)
        res = evolve(rho0, 100e-9, beam_couplings(model), collapse_operators(model))
        res.final_state.validate()
        assert res.max_trace_drift < 1e-9

    def test_trace_preserved(self):
        channels = two_level_decay()
        res = evolve(DensityOperator.pure(2, 1), 30e-9, [], channels)
        assert res.final_state.matrix.trace().real == pytest.approx(1.0, abs=1e-10)

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            evolve(DensityOperator.pure(2, 0), -1e-9, [], two_level_decay())


class TestMaxStep:
    def test_no_couplings_is_unbounded(self):
        assert max_step_for([]) == math.inf

    def test_resolves_fastest_beat(self):
        w1, w2 = 2 * math.pi * 15e6, 2 * math.pi * 45e6
        coups = [
            Coupling(0, 1, 1.0, w1),
            Coupling(0, 1, 1.0, -w2),
        ]
        # frequencies are {w1, -w2}; the largest of |f| and pairwise
        # |fi - fj| is w1 + w2.
        expected = 2 * math.pi / (4 * (w1 + w2))
        assert max_step_for(coups) == pytest.approx(expected)


class TestSteadyStateDistance:
    def test_zero_for_identical(self):
        rho = DensityOperator.maximally_mixed(4)
        assert steady_state_distance(rho, rho) == 0.0

    def test_orthogonal_pure_states(self):
        a = DensityOperator.pure(2, 0)
        b = DensityOperator.pure(2, 1)
        assert steady_state_distance(a, b) == pytest.approx(1.0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            steady_state_distance(
                DensityOperator.pure(2, 0), DensityOperator.pure(3, 0)
            )


class TestBackends:
    def test_backend_name_reported(self):
        assert backend_name() in ("cython", "python")

    def test_backends_agree(self):
        """The compiled kernel and the pure-python fallback give the same
        state, fluxes, and step counts on a full species problem."""
        from ionreg import _kernel_py

        try:
            from ionreg import _kernel
        except ImportError:
            pytest.skip("compiled kernel not built")
        model = load_species(available_species()["ca"])
        couplings = beam_couplings(model)
        channels = collapse_operators(model)
        from ionreg.dynamics import _pack

        rho0 = DensityOperator.maximally_mixed(model.dim).matrix
        packed = _pack(couplings, channels, model.dim)
        args = (rho0, *packed, 30e-9, 1e-8, 1e-10, max_step_for(couplings), 4e-9)
        rho_c, flux_c, steps_c, drift_c = _kernel.integrate(*args)
        rho_p, flux_p, steps_p, drift_p = _kernel_py.integrate(*args)
        assert steps_c == steps_p
        assert np.abs(rho_c - rho_p).max() < 1e-12
        assert np.abs(flux_c - flux_p).max() < 1e-12

    def test_env_var_forces_python_backend(self, monkeypatch):
        monkeypatch.setenv("IONREG_PURE_PYTHON", "1")
        import ionreg.dynamics as dyn

        backend = dyn._select_backend()
        assert backend.BACKEND == "python"
