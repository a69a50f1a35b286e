"""Golden-rule rates for Ohmic bosonic baths and their counting-field dressing.

Units: hbar = k_B = 1 throughout, so frequencies carry energy units and the
rates carry inverse-time units. The spectral density is strictly Ohmic,
J(w) = a*w, with the dimensionless system operators carrying no coupling
strength of their own. Imaginary (principal-value) parts of the half-Fourier
transforms of the bath correlation functions are dropped everywhere, i.e. no
Lamb shift enters any generator built from these rates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .model import BathSpec, ClusterPartition

# x = w/T beyond which the Bose factor underflows double precision anyway
_BOSE_X_MAX = 700.0

DETAILED_BALANCE_RTOL = 1e-12


def bose_occupation(omega: float, temperature: float) -> float:
    """Thermal occupation n(w) = 1/(exp(w/T) - 1) of a bosonic mode, w > 0."""
    if omega <= 0.0:
        raise ValueError(f"bose_occupation requires omega > 0, got {omega}")
    if temperature <= 0.0:
        raise ValueError(f"bose_occupation requires T > 0, got {temperature}")
    x = omega / temperature
    if x > _BOSE_X_MAX:
        return 0.0
    return 1.0 / math.expm1(x)


def ohmic_spectral_density(omega: float, coefficient: float) -> float:
    """Ohmic spectral density J(w) = a*w for w >= 0."""
    if omega < 0.0:
        raise ValueError(f"ohmic_spectral_density requires omega >= 0, got {omega}")
    if coefficient <= 0.0:
        raise ValueError(f"ohmic coefficient must be positive, got {coefficient}")
    return coefficient * omega


def golden_rule_rate(omega: float, bath: BathSpec) -> float:
    """Transition rate induced by a thermal Ohmic bath at signed frequency.

    For w > 0 (emission into the bath): J(w) [n(w) + 1].
    For w < 0 (absorption from the bath): J(|w|) n(|w|).
    At w = 0 the analytic limit of both branches is a*T.

    The two branches satisfy local detailed balance,
    rate(-w) = rate(w) * exp(-w/T).
    """
    a, T = bath.ohmic_coefficient, bath.temperature
    if omega > 0.0:
        return ohmic_spectral_density(omega, a) * (bose_occupation(omega, T) + 1.0)
    if omega < 0.0:
        return ohmic_spectral_density(-omega, a) * bose_occupation(-omega, T)
    return a * T


def dress_rate(rate: float, omega: float, chi: complex) -> complex:
    """Attach the counting-field phase exp(-i*w*chi) to a golden-rule rate.

    Only the "gain" (sandwich) part of a dissipator is dressed; the
    anticommutator part never is, since it moves no energy into the bath.
    chi may be complex: evaluating the generator at the shifted argument
    -chi - i/T turns the phase into the detailed-balance factor exp(-w/T),
    which is what swaps emission and absorption rates in the transpose
    symmetry of the tilted generator.
    """
    return rate * cmath.exp(-1j * omega * chi)


@dataclass(frozen=True)
class DressedRate:
    """A golden-rule rate together with its counting phase at one cluster."""

    magnitude: float
    phase: complex
    bath_id: str
    center: float

    @property
    def value(self) -> complex:
        return self.magnitude * self.phase


@dataclass(frozen=True)
class RateTable:
    """Cache of golden-rule rates per (bath, cluster center).

    Built once per (partition, baths) pair so that counting-field sweeps do
    not re-evaluate Bose factors at every grid point. Entries are validated
    on construction: every rate is nonnegative and every (+w, -w) pair obeys
    local detailed balance to ``DETAILED_BALANCE_RTOL``.
    """

    entries: dict[tuple[str, float], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for (bath_id, center), rate in self.entries.items():
            if rate < 0.0:
                raise ValueError(f"negative rate {rate} for bath {bath_id!r} at {center}")

    def rate(self, bath_id: str, center: float) -> float:
        return self.entries[(bath_id, center)]

    def dressed(self, bath_id: str, center: float, chi: complex) -> DressedRate:
        rate = self.rate(bath_id, center)
        return DressedRate(rate, cmath.exp(-1j * center * chi), bath_id, center)


def build_rate_table(partition: ClusterPartition, baths: tuple[BathSpec, ...] | list[BathSpec]) -> RateTable:
    """Evaluate golden-rule rates at every cluster center for every bath."""
    entries: dict[tuple[str, float], float] = {}
    for bath in baths:
        for cluster in partition.clusters:
            entries[(bath.bath_id, cluster.center)] = golden_rule_rate(cluster.center, bath)
    table = RateTable(entries)
    _check_detailed_balance(table, baths)
    return table


def _check_detailed_balance(table: RateTable, baths) -> None:
    beta = {b.bath_id: b.beta for b in baths}
    for (bath_id, center), rate in table.entries.items():
        partner = table.entries.get((bath_id, -center))
        if partner is None or center <= 0.0:
            continue
        expected = rate * math.exp(-beta[bath_id] * center)
        if abs(partner - expected) > DETAILED_BALANCE_RTOL * max(abs(expected), 1e-300):
            raise ValueError(
                f"detailed balance violated for bath {bath_id!r} at |w|={center}: "
                f"{partner} vs {expected}"
            )
