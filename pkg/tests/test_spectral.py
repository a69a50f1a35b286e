"""Spectra, steady states, propagation, and generating-function numerics."""

import math

import numpy as np
import pytest

from qfcs import (
    BathSpec,
    CountingField,
    CouplingSpec,
    DegenerateSteadyStateError,
    OpenSystem,
    SpectralError,
    SystemModel,
    cgf_point,
    cgf_sweep,
    cluster_frequencies,
    bohr_frequencies,
    log_mgf,
    maximally_mixed,
    mgf,
    multiset_distance,
    propagate,
    spectral_gap,
    spectrum,
    steady_state,
    vmodel,
)


def chi_field(x, r=0.0):
    return CountingField.of({"L": x, "R": r})


class TestSpectrum:
    def test_diagonal_matrix(self):
        spec = spectrum(np.diag([-1.0, -2.0 + 3.0j]))
        assert sorted(spec.eigenvalues, key=lambda z: z.real) == [
            pytest.approx(-2.0 + 3.0j),
            pytest.approx(-1.0),
        ]
        assert spec.residual_bound <= 1e-15

    def test_zero_generator_eigenstructure(self, fig2_system):
        gen = fig2_system.build("unified", CountingField.zero())
        spec = spectrum(gen.matrix)
        eigs = sorted(spec.eigenvalues, key=lambda z: -z.real)
        assert abs(eigs[0]) <= 1e-14
        assert all(z.real < 0.0 for z in eigs[1:])

    def test_residual_certificate_holds_per_eigenpair(self, fig2_system):
        gen = fig2_system.build("unified", chi_field(0.8))
        M = gen.matrix
        eigvals, eigvecs = np.linalg.eig(M)
        spec = spectrum(M)
        for k, lam in enumerate(eigvals):
            v = eigvecs[:, k] / np.linalg.norm(eigvecs[:, k])
            assert np.linalg.norm(M @ v - lam * v) <= spec.residual_bound + 1e-16

    def test_non_finite_rejected(self):
        with pytest.raises(SpectralError):
            spectrum(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    def test_shifted_transpose_has_equal_multiset(self, fig2_system):
        chi = chi_field(0.5)
        direct = fig2_system.build("unified", chi).matrix
        shifted = fig2_system.build("unified", chi.shifted(fig2_system.baths)).matrix
        dist = multiset_distance(
            spectrum(direct).eigenvalues, spectrum(shifted.T).eigenvalues
        )
        assert dist <= 1e-9


class TestCgf:
    def test_zero_field_vanishes(self, fig2_system):
        for method in ("unified", "secular", "redfield"):
            sample = cgf_point(fig2_system, method, CountingField.zero())
            assert abs(sample.G) <= 1e-10

    def test_balanced_counting_carries_no_statistics(self, fig2_system):
        for x in (0.5, 1.7, 3.0):
            sample = cgf_point(fig2_system, "unified", chi_field(x, x))
            assert abs(sample.G) <= 1e-13

    def test_sweep_tracks_continuously(self, fig2_system):
        grid = np.linspace(0.0, 2.0 * math.pi, 100)
        samples = cgf_sweep(fig2_system, "unified", [chi_field(x) for x in grid])
        values = np.array([s.G for s in samples])
        assert abs(values[0]) <= 1e-12
        steps = np.abs(np.diff(values))
        assert np.max(steps) < 0.05  # no branch jumps on a fine grid
        assert not any(s.ambiguous for s in samples)

    def test_sweep_matches_pointwise_dominant_near_zero(self, fig2_system):
        grid = np.linspace(0.0, 0.5, 12)
        samples = cgf_sweep(fig2_system, "unified", [chi_field(x) for x in grid])
        for s, x in zip(samples, grid):
            dom = cgf_point(fig2_system, "unified", chi_field(x)).G
            assert s.G == pytest.approx(dom, abs=1e-12)
            assert not s.crossed


class TestSteadyState:
    def test_equilibrium_gibbs_populations(self):
        p = vmodel.VParams(T_L=4.0, T_R=4.0, delta=0.03)
        system = vmodel.v_system(p)
        rho = steady_state(system, "secular")
        # independent oracle: Boltzmann weights of the level energies
        beta = 1.0 / 4.0
        assert rho.vector[1].real / rho.vector[0].real == pytest.approx(
            math.exp(-beta * (p.nu - p.delta)), rel=1e-10
        )
        assert rho.vector[2].real / rho.vector[0].real == pytest.approx(
            math.exp(-beta * p.nu), rel=1e-10
        )

    def test_secular_state_has_no_coherence_entries(self, fig2_system):
        rho = steady_state(fig2_system, "secular")
        assert rho.vector.shape == (3,)
        assert np.sum(rho.vector.real) == pytest.approx(1.0, abs=1e-12)

    def test_unified_coherences_scale_with_thermal_imbalance(self):
        # Re rho23 tracks (e^{-nu/T_R} - e^{-nu/T_L}) across small splittings
        ratios = []
        for dT in (0.005, 0.01, 0.02):
            p = vmodel.VParams(T_L=4.0 + dT / 2, T_R=4.0 - dT / 2, delta=0.005, alpha=0.5)
            system = vmodel.v_system(p)
            rho = steady_state(system, "unified")
            coh = rho.vector[3]
            drive = math.exp(-p.nu / p.T_R) - math.exp(-p.nu / p.T_L)
            assert coh.real != 0.0 and coh.imag != 0.0
            ratios.append(coh.real / drive)
        assert max(ratios) / min(ratios) == pytest.approx(1.0, abs=1e-2)

    def test_trace_and_positivity(self, fig2_system):
        for method in ("unified", "secular"):
            rho = steady_state(fig2_system, method)
            n = fig2_system.ordering(method).population_count
            assert np.sum(rho.vector[:n].real) == pytest.approx(1.0, abs=1e-12)
            assert np.min(rho.vector[:n].real) >= -1e-12

    def test_residual_quality(self, fig2_system):
        gen = fig2_system.build("unified", CountingField.zero())
        rho = steady_state(fig2_system, "unified")
        assert np.linalg.norm(gen.matrix @ rho.vector) <= 1e-12 * np.linalg.norm(gen.matrix, 2)

    def test_disconnected_level_raises_degenerate_error(self):
        # a level with no coupling keeps its own conserved population
        sx = np.zeros((3, 3))
        sx[0, 1] = sx[1, 0] = 1.0
        model = SystemModel(energies=[0.0, 1.0, 2.5], couplings=(CouplingSpec("L", sx),))
        baths = (BathSpec("L", 2.0, 0.01),)
        partition = cluster_frequencies(bohr_frequencies(model), 0.0)
        system = OpenSystem(model=model, baths=baths, partition=partition)
        with pytest.raises(DegenerateSteadyStateError):
            steady_state(system, "secular")


class TestPropagate:
    def test_zero_time_is_identity(self, fig2_system):
        gen = fig2_system.build("unified", chi_field(0.4))
        rho0 = maximally_mixed(gen.ordering)
        assert np.array_equal(propagate(gen, rho0, 0.0), rho0)

    def test_negative_time_rejected(self, fig2_system):
        gen = fig2_system.build("unified", CountingField.zero())
        with pytest.raises(ValueError):
            propagate(gen, maximally_mixed(gen.ordering), -1.0)

    def test_long_time_relaxes_to_steady_state(self, fig2_system):
        gen = fig2_system.build("unified", CountingField.zero())
        gap = spectral_gap(gen.matrix)
        rho0 = maximally_mixed(gen.ordering)
        out = propagate(gen, rho0, 50.0 / gap)
        rho_ss = steady_state(fig2_system, "unified").vector
        assert np.max(np.abs(out - rho_ss)) <= 1e-8

    def test_mgf_at_zero_field_is_unity(self, fig2_system):
        gen = fig2_system.build("unified", CountingField.zero())
        rho0 = maximally_mixed(gen.ordering)
        for t in (1.0, 10.0, 250.0):
            assert mgf(gen, rho0, t) == pytest.approx(1.0, abs=1e-12)


class TestMgfSymmetry:
    def test_all_times_symmetry_with_mixed_start(self, fig2_system):
        rho0 = maximally_mixed(fig2_system.ordering("unified"))
        for x in (0.4, 1.9, 4.8):
            chi = chi_field(x)
            gen_d = fig2_system.build("unified", chi)
            gen_s = fig2_system.build("unified", chi.shifted(fig2_system.baths))
            for t in (1.0, 10.0, 100.0, 1000.0):
                assert abs(mgf(gen_d, rho0, t) - mgf(gen_s, rho0, t)) <= 1e-9

    def test_redfield_breaks_all_times_symmetry(self):
        system = vmodel.v_system(vmodel.VParams(delta=0.3))
        rho_u = maximally_mixed(system.ordering("unified"))
        rho_r = maximally_mixed(system.ordering("redfield"))
        chi = chi_field(math.pi)
        t = 10.0
        uni_gap = abs(
            mgf(system.build("unified", chi), rho_u, t)
            - mgf(system.build("unified", chi.shifted(system.baths)), rho_u, t)
        )
        red_gap = abs(
            mgf(system.build("redfield", chi), rho_r, t)
            - mgf(system.build("redfield", chi.shifted(system.baths)), rho_r, t)
        )
        assert red_gap >= 1e3 * max(uni_gap, 1e-16)


class TestLogMgf:
    def test_matches_principal_log_at_short_times(self, fig2_system):
        gen = fig2_system.build("unified", chi_field(0.9))
        rho0 = maximally_mixed(gen.ordering)
        t = 3.0
        direct = complex(np.log(mgf(gen, rho0, t)))
        stepped = log_mgf(gen, rho0, t)
        assert stepped == pytest.approx(direct, abs=1e-11)

    def test_long_time_estimate_converges_as_one_over_t(self, fig2_system):
        gen0 = fig2_system.build("unified", CountingField.zero())
        gap = spectral_gap(gen0.matrix)
        chi = chi_field(1.3)
        gen = fig2_system.build("unified", chi)
        rho0 = maximally_mixed(gen.ordering)
        g_inf = cgf_point(fig2_system, "unified", chi).G
        t1 = 50.0 / gap
        err1 = abs(log_mgf(gen, rho0, t1) / t1 - g_inf)
        err2 = abs(log_mgf(gen, rho0, 2.0 * t1) / (2.0 * t1) - g_inf)
        # the residual constant ln(c1) is t independent: err ~ C/t exactly
        assert err2 == pytest.approx(0.5 * err1, rel=1e-6)
        assert err1 * t1 == pytest.approx(err2 * 2.0 * t1, rel=1e-6)


def test_spectral_gap_positive(fig2_system):
    gen = fig2_system.build("unified", CountingField.zero())
    gap = spectral_gap(gen.matrix)
    assert 0.005 < gap < 0.1
