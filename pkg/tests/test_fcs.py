"""Cumulants, transport symmetries, uncertainty ratio, and parameter sweeps."""

import math

import numpy as np
import pytest

from qfcs import (
    coherence_map,
    crossover_scan,
    cumulants,
    entropy_production,
    fluctuation_symmetry_scan,
    green_kubo_check,
    grid_map,
    mean_current,
    second_order_check,
    tur_scan,
    tur_zero_limit,
    vmodel,
)


class TestCumulants:
    def test_equilibrium_mean_vanishes(self):
        p = vmodel.VParams(T_L=4.0, T_R=4.0)
        system = vmodel.v_system(p)
        for method in ("unified", "secular", "redfield"):
            cums = cumulants(system, method, "L")
            scale = max(abs(cums.variance), 1.0)
            assert abs(cums.mean) <= 1e-10 * scale
            assert cums.variance >= 0.0

    def test_heat_flows_from_hot_bath(self, fig2_system):
        for method in ("unified", "secular"):
            cums = cumulants(fig2_system, method, "L")
            assert cums.mean > 0.0

    def test_bath_currents_balance(self, fig2_system):
        for method in ("unified", "secular"):
            j_left = cumulants(fig2_system, method, "L").mean
            j_right = cumulants(fig2_system, method, "R").mean
            assert abs(j_left + j_right) <= 1e-9

    def test_fd_mean_matches_analytic_route(self, fig2_system):
        for method in ("unified", "secular", "redfield"):
            cums = cumulants(fig2_system, method, "L")
            assert cums.mean_cross_check_gap <= 1e-6

    def test_third_cumulant_available_on_request(self, fig2_system):
        cums = cumulants(fig2_system, "unified", "L", order=3)
        assert cums.third is not None and math.isfinite(cums.third)
        assert cumulants(fig2_system, "unified", "L").third is None

    def test_step_validation(self, fig2_system):
        with pytest.raises(ValueError):
            cumulants(fig2_system, "unified", "L", h=0.0)
        with pytest.raises(ValueError):
            cumulants(fig2_system, "unified", "L", order=4)


class TestSymmetryScan:
    def test_unified_residuals_at_machine_level(self, fig2_system):
        grid = np.linspace(0.0, 2.0 * math.pi, 64)
        report = fluctuation_symmetry_scan(fig2_system, "unified", grid)
        assert report.residual.max() <= 1e-9
        assert report.multiset_dist.max() <= 1e-9
        assert not report.ambiguous.any()

    def test_redfield_imaginary_residual_dominates(self):
        system = vmodel.v_system(vmodel.VParams(delta=0.3))
        grid = np.linspace(0.0, 2.0 * math.pi, 64)
        uni = fluctuation_symmetry_scan(system, "unified", grid)
        red = fluctuation_symmetry_scan(system, "redfield", grid)
        assert red.residual_imag.max() >= 1e3 * uni.residual.max()
        # the real part stays well below the imaginary violation
        assert red.residual_real.max() <= 0.1 * red.residual_imag.max()

    def test_grid_must_contain_zero(self, fig2_system):
        with pytest.raises(ValueError, match="chi = 0"):
            fluctuation_symmetry_scan(fig2_system, "unified", np.linspace(0.1, 1.0, 5))

    def test_threaded_scan_matches_serial(self, fig2_system):
        grid = np.linspace(0.0, math.pi, 16)
        serial = fluctuation_symmetry_scan(fig2_system, "unified", grid, jobs=1)
        threaded = fluctuation_symmetry_scan(fig2_system, "unified", grid, jobs=4)
        assert np.array_equal(serial.g_direct, threaded.g_direct)
        assert np.array_equal(serial.multiset_dist, threaded.multiset_dist)


class TestGreenKubo:
    @pytest.mark.parametrize("method", ["unified", "secular", "redfield"])
    def test_relation_holds_in_linear_response(self, method):
        p = vmodel.VParams(T_L=4.0, T_R=4.0, delta=0.03, alpha=-0.4)
        lhs, rhs, gap = green_kubo_check(p, method)
        assert gap <= 1e-4
        assert lhs > 0.0 and rhs > 0.0

    def test_requires_equilibrium_base(self, fig2_params):
        with pytest.raises(ValueError, match="T_L == T_R"):
            green_kubo_check(fig2_params, "unified")


class TestSecondOrder:
    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 0.5])
    def test_relation_holds_away_from_symmetric_couplings(self, alpha):
        p = vmodel.VParams(T_L=4.0, T_R=4.0, delta=0.03, alpha=alpha)
        lhs, rhs, gap = second_order_check(p, "unified")
        assert gap <= 1e-3
        assert math.isfinite(lhs) and math.isfinite(rhs)
        assert math.copysign(1.0, lhs) == math.copysign(1.0, rhs)

    def test_mirror_symmetric_point_has_vanishing_sides(self):
        # at alpha = 1 the couplings are bath symmetric and the current is
        # odd in delta beta, so both sides vanish within FD noise
        p = vmodel.VParams(T_L=4.0, T_R=4.0, delta=0.03, alpha=1.0)
        lhs, rhs, _ = second_order_check(p, "unified")
        reference = abs(second_order_check(
            vmodel.VParams(T_L=4.0, T_R=4.0, delta=0.03, alpha=0.5), "unified"
        )[1])
        assert abs(lhs) <= 1e-3 * reference
        assert abs(rhs) <= 1e-3 * reference


class TestTur:
    def test_ratio_bounded_below_and_limits_to_two(self):
        p = vmodel.preset("fig7b")
        points = tur_scan(p, "unified", [1e-3, 2e-3, 0.5, 1.5, 3.0, 3.9])
        assert all(pt.ratio >= 2.0 - 1e-6 for pt in points)
        assert points[0].ratio == pytest.approx(2.0, abs=1e-3)
        assert tur_zero_limit(points) == pytest.approx(2.0, abs=1e-3)

    def test_nonpositive_grid_points_excluded(self):
        p = vmodel.preset("fig7a")
        points = tur_scan(p, "secular", [0.0, 1.0])
        assert [pt.delta_T for pt in points] == [1.0]

    def test_method_ratios_close_despite_current_gaps(self):
        p = vmodel.preset("fig7a")  # alpha = -0.5: coherences matter
        grid = [1.0, 2.0, 3.0, 3.9]
        uni = tur_scan(p, "unified", grid)
        sec = tur_scan(p, "secular", grid)
        for u, s in zip(uni, sec):
            current_gap = abs(u.mean - s.mean) / abs(u.mean)
            ratio_gap = abs(u.ratio - s.ratio) / u.ratio
            assert current_gap > 0.10
            assert ratio_gap <= 0.02


class TestCrossover:
    def test_classification_thresholds(self):
        p = vmodel.preset("fig5")
        rows = crossover_scan(p, [0.003, 0.1, 0.5])
        by_delta = {round(r.delta, 4): r for r in rows}
        assert by_delta[0.003].closest == "unified"
        assert by_delta[0.1].closest == "crossover"
        assert by_delta[0.5].closest == "secular"

    def test_currents_ordered_against_redfield(self):
        p = vmodel.preset("fig5")
        rows = crossover_scan(p, [0.003, 0.5])
        small, large = rows[0].current, rows[1].current
        assert abs(small["unified"] - small["redfield"]) < abs(small["secular"] - small["redfield"])
        assert abs(large["secular"] - large["redfield"]) < abs(large["unified"] - large["redfield"])


class TestCoherenceMap:
    def test_secular_is_rejected(self):
        p = vmodel.preset("fig6")
        with pytest.raises(ValueError, match="identically zero"):
            coherence_map(p, [0.0], [0.01], methods=("secular",))

    def test_methods_agree_at_small_splitting(self):
        p = vmodel.preset("fig6")
        gamma = p.relaxation_rate("L")
        alphas = [-1.0, -0.5, 0.0, 0.5]
        points = coherence_map(p, alphas, [0.1 * gamma])
        uni = {pt.alpha: complex(pt.re, pt.im) for pt in points if pt.method == "unified"}
        red = {pt.alpha: complex(pt.re, pt.im) for pt in points if pt.method == "redfield"}
        for al in alphas:
            assert abs(uni[al] - red[al]) / abs(red[al]) <= 0.05

    def test_imaginary_real_ratio_linear_in_splitting(self):
        p = vmodel.preset("fig2")
        deltas = [0.001, 0.002, 0.004, 0.008]
        points = coherence_map(p, [0.5], deltas, methods=("unified",))
        ratios = np.array([pt.im / pt.re for pt in points])
        slopes = ratios / np.array(deltas)
        assert np.max(slopes) / np.min(slopes) == pytest.approx(1.0, abs=1e-3)


class TestEntropyProduction:
    def test_equilibrium_vanishes(self):
        p = vmodel.VParams(T_L=4.0, T_R=4.0)
        system = vmodel.v_system(p)
        cums = cumulants(system, "unified", "L")
        assert entropy_production(p, cums) == pytest.approx(0.0, abs=1e-12)

    def test_positive_with_thermal_bias(self, fig2_params, fig2_system):
        for method in ("unified", "redfield"):
            cums = cumulants(fig2_system, method, "L")
            assert entropy_production(fig2_params, cums) > 0.0


class TestGridMap:
    def test_threaded_results_in_grid_order(self):
        items = list(range(40))
        assert grid_map(lambda x: x * x, items, jobs=8) == [x * x for x in items]

    def test_mean_current_consistent_across_methods_at_degeneracy(self):
        p = vmodel.VParams(delta=0.0)
        system = vmodel.v_system(p)
        j_uni = mean_current(system, "unified", "L")
        j_red = mean_current(system, "redfield", "L")
        assert j_uni == pytest.approx(j_red, rel=1e-12)
