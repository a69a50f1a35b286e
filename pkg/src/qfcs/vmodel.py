"""Three-level V configuration: presets and a closed-form generator oracle.

One ground level couples to two nearly degenerate excited levels through two
Ohmic baths; the right bath's upper transition is scaled by a real asymmetry
factor. The explicit 5x5 tilted generator below is transcribed by hand,
entry by entry, on the state vector (p1, p2, p3, c23, c32). It shares no
code with the generic builders precisely so the two constructions can be
diffed against each other as independent implementations.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .generators import BasisOrdering, CountingField, OpenSystem
from .model import BathSpec, BohrFrequency, Cluster, ClusterPartition, CouplingSpec, SystemModel
from .rates import golden_rule_rate

V_ORDERING = BasisOrdering(((0, 0), (1, 1), (2, 2), (1, 2), (2, 1)))


@dataclass(frozen=True)
class VParams:
    """Parameter bundle: level gap, excited splitting, asymmetry, bath setup."""

    nu: float = 1.0
    delta: float = 0.03
    alpha: float = 0.5
    a: float = 0.01
    T_L: float = 4.0
    T_R: float = 3.99

    def __post_init__(self) -> None:
        if self.nu <= 0.0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not (0.0 <= self.delta < self.nu):
            raise ValueError(f"delta must satisfy 0 <= delta < nu, got {self.delta}")
        if self.a <= 0.0:
            raise ValueError(f"ohmic coefficient must be positive, got {self.a}")
        if self.T_L <= 0.0 or self.T_R <= 0.0:
            raise ValueError("temperatures must be positive")

    def with_temperatures(self, T_L: float, T_R: float) -> "VParams":
        return replace(self, T_L=T_L, T_R=T_R)

    @cached_property
    def baths(self) -> tuple[BathSpec, BathSpec]:
        return (
            BathSpec("L", self.T_L, self.a),
            BathSpec("R", self.T_R, self.a),
        )

    def relaxation_rate(self, bath_id: str) -> float:
        """Downward rate at the common excited-level center."""
        return golden_rule_rate(self.nu, self._bath(bath_id))

    def excitation_rate(self, bath_id: str) -> float:
        """Upward rate, the detailed-balance partner of the relaxation rate."""
        return golden_rule_rate(-self.nu, self._bath(bath_id))

    def _bath(self, bath_id: str) -> BathSpec:
        for b in self.baths:
            if b.bath_id == bath_id:
                return b
        raise ValueError(f"unknown bath id {bath_id!r}")


def _v_partition(params: VParams) -> ClusterPartition:
    """Clusters at {-nu, 0, +nu} with the excited levels grouped for any delta.

    Centers are pinned to +/-nu rather than member means, matching the
    closed-form generator digit for digit, and levels 2 and 3 stay clustered
    even when the splitting exceeds the dissipative rates (the regime scans
    deliberately probe that misuse).
    """
    nu, delta = params.nu, params.delta
    up = [BohrFrequency(nu - delta, 1, 0), BohrFrequency(nu, 2, 0)]
    if delta == 0.0:
        up = [BohrFrequency(nu, 1, 0), BohrFrequency(nu, 2, 0)]
    down = [BohrFrequency(-f.value, f.from_level, f.to_level) for f in up]
    zeros = [BohrFrequency(0.0, a, a) for a in range(3)]
    if delta > 0.0:
        zeros += [BohrFrequency(-delta, 1, 2), BohrFrequency(delta, 2, 1)]
    else:
        zeros += [BohrFrequency(0.0, 1, 2), BohrFrequency(0.0, 2, 1)]
    return ClusterPartition(
        (
            Cluster(-nu, tuple(sorted(down))),
            Cluster(0.0, tuple(sorted(zeros))),
            Cluster(nu, tuple(sorted(up))),
        )
    )


def v_system(params: VParams) -> OpenSystem:
    """Assemble the validated three-level system with its pinned partition."""
    nu, delta, alpha = params.nu, params.delta, params.alpha
    s_left = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]])
    s_right = np.array([[0.0, 1.0, alpha], [1.0, 0.0, 0.0], [alpha, 0.0, 0.0]])
    model = SystemModel(
        energies=np.array([0.0, nu - delta, nu]),
        couplings=(CouplingSpec("L", s_left), CouplingSpec("R", s_right)),
    )
    return OpenSystem(
        model=model,
        baths=params.baths,
        partition=_v_partition(params),
        retained_coherences=((1, 2), (2, 1)),
    )


def explicit_generator(params: VParams, chi: complex) -> np.ndarray:
    """Hand-transcribed 5x5 tilted generator, counting on the left bath only.

    Rates: k_j downward and kt_j upward, evaluated at the common center nu.
    The lower-right 4x4 block is chi independent and symmetric; the first row
    and column carry the counting phases exp(-/+ i*chi*nu) on the left-bath
    rates.
    """
    return _explicit_two_field(params, chi, 0.0)


def _explicit_two_field(params: VParams, chi_L: complex, chi_R: complex) -> np.ndarray:
    al, nu, delta = params.alpha, params.nu, params.delta
    kL = params.relaxation_rate("L")
    kR = params.relaxation_rate("R")
    ktL = params.excitation_rate("L")
    ktR = params.excitation_rate("R")
    eL = np.exp(-1j * chi_L * nu)
    eR = np.exp(-1j * chi_R * nu)
    fL = np.exp(1j * chi_L * nu)
    fR = np.exp(1j * chi_R * nu)
    half = -0.5 * (kL + al * kR)
    return np.array(
        [
            [
                -2.0 * ktL - (al**2 + 1.0) * ktR,
                kL * eL + kR * eR,
                kL * eL + al**2 * kR * eR,
                kL * eL + al * kR * eR,
                kL * eL + al * kR * eR,
            ],
            [ktL * fL + ktR * fR, -kL - kR, 0.0, half, half],
            [ktL * fL + al**2 * ktR * fR, 0.0, -kL - al**2 * kR, half, half],
            [
                ktL * fL + al * ktR * fR,
                half,
                half,
                1j * delta - kL - 0.5 * (al**2 + 1.0) * kR,
                0.0,
            ],
            [
                ktL * fL + al * ktR * fR,
                half,
                half,
                0.0,
                -1j * delta - kL - 0.5 * (al**2 + 1.0) * kR,
            ],
        ],
        dtype=complex,
    )


def symmetry_witness(params: VParams, chi: complex) -> tuple[bool, float]:
    """Check transpose(L(-chi - i*beta)) == L(chi) on the closed-form matrix.

    The shift applies per bath: the left field goes to -chi - i/T_L and the
    right (implicitly zero) field to -i/T_R. Returns the pass flag at 1e-14
    relative tolerance together with the measured elementwise gap.
    """
    direct = _explicit_two_field(params, chi, 0.0)
    shifted = _explicit_two_field(
        params, -chi - 1j / params.T_L, -1j / params.T_R
    )
    scale = float(np.max(np.abs(direct)))
    gap = float(np.max(np.abs(shifted.T - direct))) / scale
    return gap <= 1e-14, gap


def counting_field(chi_L: complex = 0.0, chi_R: complex = 0.0) -> CountingField:
    """Counting field on the two named baths of the V configuration."""
    return CountingField.of({"L": chi_L, "R": chi_R})


PRESETS: dict[str, VParams] = {
    "fig2": VParams(nu=1.0, delta=0.03, alpha=0.5, a=0.01, T_L=4.0, T_R=3.99),
    "fig4a": VParams(nu=1.0, delta=0.03, alpha=0.5, a=0.01, T_L=4.0, T_R=3.99),
    "fig4b": VParams(nu=1.0, delta=0.3, alpha=0.5, a=0.01, T_L=4.0, T_R=3.99),
    "fig5": VParams(nu=1.0, delta=0.03, alpha=-0.5, a=0.01, T_L=4.0, T_R=3.99),
    "fig6": VParams(nu=1.0, delta=0.03, alpha=-0.5, a=0.01, T_L=4.0, T_R=3.99),
    "fig7a": VParams(nu=1.0, delta=0.03, alpha=-0.5, a=0.01, T_L=4.0, T_R=4.0),
    "fig7b": VParams(nu=1.0, delta=0.03, alpha=0.5, a=0.01, T_L=4.0, T_R=4.0),
}


def preset(name: str) -> VParams:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None
