"""Golden-rule rate evaluation, detailed balance, and counting-phase dressing."""

import math

import numpy as np
import pytest

from qfcs import (
    BathSpec,
    RateTable,
    bose_occupation,
    build_rate_table,
    dress_rate,
    golden_rule_rate,
    ohmic_spectral_density,
    vmodel,
)


def direct_bose(omega, T):
    # independent oracle: literal evaluation of 1/(e^{w/T} - 1)
    return 1.0 / (math.exp(omega / T) - 1.0)


def direct_rate(omega, a, T):
    # independent oracle for the signed-frequency golden-rule rate
    if omega > 0:
        return a * omega * (direct_bose(omega, T) + 1.0)
    if omega < 0:
        return a * (-omega) * direct_bose(-omega, T)
    return a * T


class TestBoseOccupation:
    def test_reference_point(self):
        # oracle: 1/(e^{1/4} - 1) = 3.5208117 (7 d.p.), consistent with the
        # downward rate 0.01 * (n+1) = 0.0452081
        expected = direct_bose(1.0, 4.0)
        assert bose_occupation(1.0, 4.0) == pytest.approx(expected, rel=1e-14)
        assert round(bose_occupation(1.0, 4.0), 7) == 3.5208117

    def test_slightly_colder_bath(self):
        value = bose_occupation(1.0, 3.99)
        assert value == pytest.approx(direct_bose(1.0, 3.99), rel=1e-14)
        assert value == pytest.approx(3.5108637, abs=5e-8)

    def test_zero_temperature_limit(self):
        assert bose_occupation(1.0, 1e-3) == 0.0
        assert bose_occupation(1.0, 0.01) < 1e-40

    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ValueError):
            bose_occupation(0.0, 1.0)
        with pytest.raises(ValueError):
            bose_occupation(-1.0, 1.0)
        with pytest.raises(ValueError):
            bose_occupation(1.0, 0.0)


class TestOhmicSpectralDensity:
    def test_reference_coefficient(self):
        assert ohmic_spectral_density(1.0, 0.01) == 0.01

    def test_zero_frequency(self):
        assert ohmic_spectral_density(0.0, 0.01) == 0.0

    def test_linearity(self):
        assert ohmic_spectral_density(0.5, 0.01) == pytest.approx(0.005, rel=1e-15)

    def test_rejects_negative_frequency(self):
        with pytest.raises(ValueError):
            ohmic_spectral_density(-0.5, 0.01)


class TestGoldenRuleRate:
    BATH = BathSpec("L", temperature=4.0, ohmic_coefficient=0.01)

    def test_emission_value(self):
        assert golden_rule_rate(1.0, self.BATH) == pytest.approx(
            direct_rate(1.0, 0.01, 4.0), rel=1e-14
        )
        assert round(golden_rule_rate(1.0, self.BATH), 7) == 0.0452081

    def test_absorption_value_and_balance(self):
        down = golden_rule_rate(1.0, self.BATH)
        up = golden_rule_rate(-1.0, self.BATH)
        assert round(up, 7) == 0.0352081
        assert up == pytest.approx(down * math.exp(-0.25), rel=1e-13)

    def test_zero_frequency_analytic_limit(self):
        assert golden_rule_rate(0.0, self.BATH) == pytest.approx(0.04, rel=1e-15)

    def test_continuity_at_zero(self):
        limit = self.BATH.ohmic_coefficient * self.BATH.temperature
        for omega in (1e-8, -1e-8):
            assert abs(golden_rule_rate(omega, self.BATH) - limit) <= 1e-6 * limit

    def test_detailed_balance_random_draws(self, rng):
        for _ in range(200):
            a = rng.uniform(1e-3, 0.1)
            T = rng.uniform(0.2, 10.0)
            omega = rng.uniform(1e-3, 5.0)
            bath = BathSpec("x", T, a)
            down = golden_rule_rate(omega, bath)
            up = golden_rule_rate(-omega, bath)
            assert up * math.exp(omega / T) == pytest.approx(down, rel=1e-12)


class TestDressRate:
    def test_no_counting_is_identity(self):
        assert dress_rate(0.37, 1.0, 0.0) == 0.37

    def test_relaxation_phase(self):
        nu, chi = 1.0, 0.7
        k = direct_rate(nu, 0.01, 4.0)
        assert dress_rate(k, nu, chi) == pytest.approx(k * np.exp(-1j * chi * nu), rel=1e-15)

    def test_excitation_phase(self):
        nu, chi = 1.0, 0.7
        kt = direct_rate(-nu, 0.01, 4.0)
        assert dress_rate(kt, -nu, chi) == pytest.approx(kt * np.exp(1j * chi * nu), rel=1e-15)

    def test_imaginary_shift_swaps_detailed_balance_partner(self, rng):
        # dressing at chi = -i*beta turns a rate into its reversed-direction
        # partner magnitude, the mechanism behind the transpose symmetry
        for _ in range(50):
            a = rng.uniform(1e-3, 0.1)
            T = rng.uniform(0.2, 10.0)
            omega = rng.uniform(-4.0, 4.0)
            bath = BathSpec("x", T, a)
            rate = golden_rule_rate(omega, bath)
            partner = golden_rule_rate(-omega, bath)
            dressed = dress_rate(rate, omega, -1j / T)
            assert dressed.imag == pytest.approx(0.0, abs=1e-300)
            assert dressed.real == pytest.approx(partner, rel=1e-12)


class TestRateTable:
    def test_build_for_v_system(self, fig2_params, fig2_system):
        table = build_rate_table(fig2_system.partition, fig2_system.baths)
        assert table.rate("L", 1.0) == pytest.approx(direct_rate(1.0, 0.01, 4.0), rel=1e-14)
        assert table.rate("R", -1.0) == pytest.approx(direct_rate(-1.0, 0.01, 3.99), rel=1e-14)
        assert table.rate("L", 0.0) == pytest.approx(0.04, rel=1e-15)
        assert all(r >= 0.0 for r in table.entries.values())

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            RateTable({("L", 1.0): -0.1})

    def test_dressed_record(self, fig2_system):
        table = build_rate_table(fig2_system.partition, fig2_system.baths)
        rec = table.dressed("L", 1.0, 0.5)
        assert abs(abs(rec.phase) - 1.0) < 1e-15
        assert rec.value == pytest.approx(rec.magnitude * np.exp(-0.5j), rel=1e-15)

    def test_lazy_reuse_matches_direct_evaluation(self, fig2_params, fig2_system):
        table = fig2_system.rate_table("unified")
        for (bath_id, center), rate in table.entries.items():
            bath = fig2_system.bath(bath_id)
            assert rate == golden_rule_rate(center, bath)


def test_v_preset_rate_constants():
    # frozen reference constants for the standard preset
    p = vmodel.preset("fig2")
    assert round(p.relaxation_rate("L"), 7) == 0.0452081
    assert round(p.excitation_rate("L"), 7) == 0.0352081
    assert p.excitation_rate("L") / p.relaxation_rate("L") == pytest.approx(
        math.exp(-p.nu / p.T_L), rel=1e-14
    )
