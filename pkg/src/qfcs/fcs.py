"""Heat-current statistics: cumulants, symmetry residuals, transport checks.

Cumulants come from the scaled CGF evaluated along the imaginary axis of the
counting field, where the tilted generator is real and its dominant
eigenvalue is a real analytic function of the tilt; central differences with
one Richardson step then give the derivatives. The mean is independently
available by contracting the analytic generator derivative with the steady
state, and the two routes cross-check each other.

Sweep drivers iterate over parameter grids, optionally across a thread pool
(LAPACK releases the GIL), and always assemble results in grid order.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .generators import CountingField, OpenSystem
from .rates import RateTable
from .spectral import CgfSample, SpectralError, spectrum, multiset_distance, steady_state
from .vmodel import VParams, v_system

T = TypeVar("T")
U = TypeVar("U")

CHI_STEP_FRACTION = 1e-3
BETA_STEP_FRACTION = 1e-4
# nested derivatives of FD cumulants need larger steps to stay above roundoff
SECOND_ORDER_BETA_FRACTION = 1e-3
SECOND_ORDER_CHI_FRACTION = 4e-3


def grid_map(fn: Callable[[T], U], items: Sequence[T], jobs: int | None = None) -> list[U]:
    """Map over independent grid points, results in input order."""
    if jobs is None:
        jobs = default_jobs()
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def default_jobs() -> int:
    env = os.environ.get("QFCS_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class CumulantSet:
    """Steady-state current cumulants for one bath, with their FD pedigree."""

    mean: float
    variance: float
    third: float | None
    h: float
    extrapolation_order: int
    mean_analytic: float
    flagged: bool = False

    @property
    def mean_cross_check_gap(self) -> float:
        scale = max(abs(self.mean), abs(self.mean_analytic), 1e-300)
        return abs(self.mean - self.mean_analytic) / scale


@dataclass(frozen=True, eq=False)
class SymmetryReport:
    """CGF evaluated at chi and at its shifted partner along a real grid."""

    method: str
    chi_grid: np.ndarray
    g_direct: np.ndarray
    g_shifted: np.ndarray
    multiset_dist: np.ndarray
    ambiguous: np.ndarray
    crossed: np.ndarray

    def __post_init__(self) -> None:
        if not np.any(self.chi_grid == 0.0):
            raise ValueError("symmetry scan grid must include chi = 0")

    @property
    def residual_real(self) -> np.ndarray:
        return np.abs((self.g_direct - self.g_shifted).real)

    @property
    def residual_imag(self) -> np.ndarray:
        return np.abs((self.g_direct - self.g_shifted).imag)

    @property
    def residual(self) -> np.ndarray:
        return np.abs(self.g_direct - self.g_shifted)


@dataclass(frozen=True)
class TurPoint:
    """One temperature-difference point of the uncertainty-ratio scan."""

    delta_T: float
    ratio: float
    method: str
    mean: float
    variance: float
    delta_beta: float


@dataclass(frozen=True)
class CrossoverPoint:
    delta: float
    current: dict[str, float]
    closest: str


@dataclass(frozen=True)
class CoherencePoint:
    alpha: float
    delta: float
    method: str
    re: float
    im: float


def _chi_scale(system: OpenSystem) -> float:
    centers = [abs(c.center) for c in system.partition.clusters if c.center != 0.0]
    return max(centers) if centers else 1.0


def _tilted_value(
    system: OpenSystem,
    method: str,
    bath_id: str,
    u: float,
    rate_table: RateTable,
) -> float:
    """Dominant eigenvalue at the imaginary tilt chi_j = -i u (a real matrix)."""
    gen = system.build(method, CountingField.of({bath_id: -1j * u}), rate_table=rate_table)
    spec = spectrum(gen.matrix)
    lam = spec.dominant()
    scale = float(np.max(np.abs(spec.eigenvalues))) or 1.0
    if abs(lam.imag) > 1e-9 * scale:
        raise SpectralError(
            f"dominant eigenvalue not real on the imaginary tilt axis: {lam}", partial=spec
        )
    return float(lam.real)


def _richardson(coarse: float, fine: float) -> float:
    # one step for an O(h^2) central formula evaluated at h and h/2
    return (4.0 * fine - coarse) / 3.0


def cumulants(
    system: OpenSystem,
    method: str,
    bath_id: str,
    *,
    order: int = 2,
    h: float | None = None,
    rate_table: RateTable | None = None,
) -> CumulantSet:
    """Current cumulants from CGF derivatives at zero counting field.

    The n-th cumulant is the n-th derivative along i*chi_j, taken by central
    differences at steps h and h/2 with one Richardson extrapolation. The
    mean is cross-checked against the analytic generator-derivative route;
    the result records both values.
    """
    if order < 1 or order > 3:
        raise ValueError(f"order must be 1, 2, or 3, got {order}")
    if h is None:
        h = CHI_STEP_FRACTION / _chi_scale(system)
    if h <= 0.0:
        raise ValueError(f"step must be positive, got {h}")
    if rate_table is None:
        rate_table = system.rate_table(method)

    def g(u: float) -> float:
        return _tilted_value(system, method, bath_id, u, rate_table)

    g0 = g(0.0)
    gp1, gm1 = g(h), g(-h)
    gp2, gm2 = g(h / 2.0), g(-h / 2.0)

    mean = _richardson((gp1 - gm1) / (2.0 * h), (gp2 - gm2) / h)
    variance = _richardson(
        (gp1 - 2.0 * g0 + gm1) / h**2, (gp2 - 2.0 * g0 + gm2) / (h / 2.0) ** 2
    )
    third = None
    if order >= 3:
        gP1, gM1 = g(2.0 * h), g(-2.0 * h)
        d3 = (gP1 - 2.0 * gp1 + 2.0 * gm1 - gM1) / (2.0 * h**3)
        d3f = (gp1 - 2.0 * gp2 + 2.0 * gm2 - gm1) / (2.0 * (h / 2.0) ** 3)
        third = _richardson(d3, d3f)

    mean_exact = mean_current(system, method, bath_id, rate_table=rate_table)
    return CumulantSet(
        mean=mean,
        variance=variance,
        third=third,
        h=h,
        extrapolation_order=1,
        mean_analytic=mean_exact,
    )


def mean_current(
    system: OpenSystem,
    method: str,
    bath_id: str,
    *,
    rate_table: RateTable | None = None,
) -> float:
    """Mean current without finite differences: w . dL/d(i chi_j) . rho_ss."""
    rho = steady_state(system, method, rate_table=rate_table).vector
    deriv = system.derivative(method, bath_id, rate_table=rate_table)
    w = system.ordering(method).trace_vector()
    value = complex(w @ (deriv @ rho))
    return float(value.real)


def _tracked_pair_sweep(
    system: OpenSystem,
    method: str,
    chi_grid: np.ndarray,
    count_bath: str,
    rate_table: RateTable,
    jobs: int | None,
):
    """Spectra along the direct and shifted paths, with branch tracking."""
    baths = system.baths

    def spectra_at(x: float):
        direct = CountingField.of({count_bath: x})
        shifted = direct.shifted(baths)
        sd = spectrum(system.build(method, direct, rate_table=rate_table).matrix)
        ss = spectrum(system.build(method, shifted, rate_table=rate_table).matrix)
        return sd, ss

    pairs = grid_map(spectra_at, list(chi_grid), jobs)

    def track(specs):
        target = 0.0 + 0.0j
        out = []
        for spec in specs:
            eigs = spec.eigenvalues
            scale = float(np.max(np.abs(eigs))) or 1.0
            dist = np.abs(eigs - target)
            order = np.argsort(dist, kind="stable")
            lam = complex(eigs[order[0]])
            ambiguous = eigs.size > 1 and float(dist[order[1]] - dist[order[0]]) < 1e-9 * scale
            crossed = float(np.max(eigs.real) - lam.real) > 1e-12 * scale
            out.append((lam, ambiguous, crossed))
            target = lam
        return out

    direct = track([p[0] for p in pairs])
    shifted = track([p[1] for p in pairs])
    dists = np.array(
        [multiset_distance(p[0].eigenvalues, p[1].eigenvalues) for p in pairs]
    )
    return direct, shifted, dists


def fluctuation_symmetry_scan(
    system: OpenSystem,
    method: str,
    chi_grid: Sequence[float] | np.ndarray,
    *,
    count_bath: str = "L",
    rate_table: RateTable | None = None,
    jobs: int | None = None,
) -> SymmetryReport:
    """Evaluate G(chi) against G(-chi - i*beta) over a real counting grid.

    Counting applies to ``count_bath`` only; the shift applies to every bath
    (the uncounted ones acquire purely imaginary fields -i/T). Both paths are
    branch tracked from their common zero at chi = 0. Also reports the
    optimal-matching distance between the two full spectra per point.
    """
    grid = np.asarray(chi_grid, dtype=float)
    if rate_table is None:
        rate_table = system.rate_table(method)
    direct, shifted, dists = _tracked_pair_sweep(
        system, method, grid, count_bath, rate_table, jobs
    )
    return SymmetryReport(
        method=method,
        chi_grid=grid,
        g_direct=np.array([d[0] for d in direct]),
        g_shifted=np.array([s[0] for s in shifted]),
        multiset_dist=dists,
        ambiguous=np.array([d[1] or s[1] for d, s in zip(direct, shifted)]),
        crossed=np.array([d[2] or s[2] for d, s in zip(direct, shifted)]),
    )


def _equilibrium_base(params: VParams) -> float:
    if abs(params.T_L - params.T_R) > 1e-12 * params.T_L:
        raise ValueError("transport symmetry checks expand around T_L == T_R")
    return params.T_L


def _at_delta_beta(params: VParams, beta_bar: float, delta_beta: float) -> VParams:
    beta_l = beta_bar - 0.5 * delta_beta
    beta_r = beta_bar + 0.5 * delta_beta
    return params.with_temperatures(1.0 / beta_l, 1.0 / beta_r)


def _mean_at(params: VParams, method: str, bath_id: str) -> float:
    return mean_current(v_system(params), method, bath_id)


def _variance_at(params: VParams, method: str, bath_id: str, h_chi: float) -> float:
    system = v_system(params)
    return cumulants(system, method, bath_id, order=2, h=h_chi).variance


def green_kubo_check(
    params: VParams,
    method: str,
    *,
    bath_id: str = "L",
    h_beta: float | None = None,
    h_chi: float | None = None,
) -> tuple[float, float, float]:
    """First transport symmetry: d<J>/d(delta beta) at equilibrium vs half the
    equilibrium variance. Returns (lhs, rhs, relative gap)."""
    t_bar = _equilibrium_base(params)
    beta_bar = 1.0 / t_bar
    if h_beta is None:
        h_beta = BETA_STEP_FRACTION * beta_bar
    if h_chi is None:
        h_chi = CHI_STEP_FRACTION / params.nu
    j_plus = _mean_at(_at_delta_beta(params, beta_bar, h_beta), method, bath_id)
    j_minus = _mean_at(_at_delta_beta(params, beta_bar, -h_beta), method, bath_id)
    lhs = (j_plus - j_minus) / (2.0 * h_beta)
    rhs = 0.5 * _variance_at(params, method, bath_id, h_chi)
    gap = abs(lhs - rhs) / abs(rhs) if rhs != 0.0 else math.inf
    return lhs, rhs, gap


def second_order_check(
    params: VParams,
    method: str,
    *,
    bath_id: str = "L",
    h_beta: float | None = None,
    h_chi: float | None = None,
) -> tuple[float, float, float]:
    """Second transport symmetry: d^2<J>/d(delta beta)^2 against
    d<<J^2>>/d(delta beta), both at equilibrium. Returns (lhs, rhs, gap).

    Default steps are larger than for the first-order check: both sides are
    derivatives of quantities that themselves carry FD noise, so the steps
    sit where that noise stays below the 1e-3 target floor.
    """
    t_bar = _equilibrium_base(params)
    beta_bar = 1.0 / t_bar
    if h_beta is None:
        h_beta = SECOND_ORDER_BETA_FRACTION * beta_bar
    if h_chi is None:
        h_chi = SECOND_ORDER_CHI_FRACTION / params.nu
    j_plus = _mean_at(_at_delta_beta(params, beta_bar, h_beta), method, bath_id)
    j_zero = _mean_at(params, method, bath_id)
    j_minus = _mean_at(_at_delta_beta(params, beta_bar, -h_beta), method, bath_id)
    lhs = (j_plus - 2.0 * j_zero + j_minus) / h_beta**2
    v_plus = _variance_at(_at_delta_beta(params, beta_bar, h_beta), method, bath_id, h_chi)
    v_minus = _variance_at(_at_delta_beta(params, beta_bar, -h_beta), method, bath_id, h_chi)
    rhs = (v_plus - v_minus) / (2.0 * h_beta)
    gap = abs(lhs - rhs) / abs(rhs) if rhs != 0.0 else math.inf
    return lhs, rhs, gap


def tur_scan(
    params: VParams,
    method: str,
    delta_T_grid: Sequence[float],
    *,
    bath_id: str = "L",
    h_chi: float | None = None,
    jobs: int | None = None,
) -> list[TurPoint]:
    """Uncertainty ratio delta_beta * <<J^2>> / <J> over temperature splittings.

    Temperatures are T_bar +/- delta_T/2 around the equilibrium base point.
    Nonpositive grid entries are excluded (the ratio is 0/0 at delta_T = 0;
    use :func:`tur_zero_limit` for the extrapolated limit).
    """
    t_bar = _equilibrium_base(params)
    if h_chi is None:
        h_chi = CHI_STEP_FRACTION / params.nu
    points = [dt for dt in delta_T_grid if dt > 0.0]

    def at(dt: float) -> TurPoint:
        p = params.with_temperatures(t_bar + 0.5 * dt, t_bar - 0.5 * dt)
        system = v_system(p)
        cums = cumulants(system, method, bath_id, order=2, h=h_chi)
        delta_beta = dt / (p.T_L * p.T_R)
        ratio = delta_beta * cums.variance / cums.mean
        return TurPoint(
            delta_T=dt,
            ratio=ratio,
            method=method,
            mean=cums.mean,
            variance=cums.variance,
            delta_beta=delta_beta,
        )

    return grid_map(at, points, jobs)


def tur_zero_limit(points: Sequence[TurPoint]) -> float:
    """Equilibrium limit of the uncertainty ratio by quadratic extrapolation.

    The leading correction to the ratio is quadratic in delta_T (the linear
    terms cancel by the second transport symmetry), so two small grid points
    pin the limit.
    """
    pts = sorted(points, key=lambda p: p.delta_T)
    if len(pts) < 2:
        raise ValueError("need at least two points to extrapolate")
    d1, d2 = pts[0].delta_T, pts[1].delta_T
    r1, r2 = pts[0].ratio, pts[1].ratio
    return r1 - (r2 - r1) * d1**2 / (d2**2 - d1**2)


def crossover_scan(
    params: VParams,
    delta_grid: Sequence[float],
    *,
    bath_id: str = "L",
    jobs: int | None = None,
) -> list[CrossoverPoint]:
    """Mean current per method over the excited-level splitting.

    Classifies each point by which positivity-preserving method tracks the
    redfield current: method A matches when |J_A - J_red| does not exceed a
    tenth of the unified-secular spread; neither matching marks a crossover.
    """

    def at(delta: float) -> CrossoverPoint:
        p = VParams(
            nu=params.nu, delta=delta, alpha=params.alpha,
            a=params.a, T_L=params.T_L, T_R=params.T_R,
        )
        system = v_system(p)
        current = {
            m: mean_current(system, m, bath_id) for m in ("redfield", "unified", "secular")
        }
        spread = abs(current["secular"] - current["unified"])
        d_uni = abs(current["unified"] - current["redfield"])
        d_sec = abs(current["secular"] - current["redfield"])
        threshold = 0.1 * spread
        if d_uni <= threshold and d_uni <= d_sec:
            closest = "unified"
        elif d_sec <= threshold:
            closest = "secular"
        else:
            closest = "crossover"
        return CrossoverPoint(delta=delta, current=current, closest=closest)

    return grid_map(at, list(delta_grid), jobs)


def coherence_map(
    params: VParams,
    alpha_grid: Sequence[float],
    delta_grid: Sequence[float],
    *,
    methods: Sequence[str] = ("unified", "redfield"),
    jobs: int | None = None,
) -> list[CoherencePoint]:
    """Steady-state excited-level coherence over an (alpha, delta) grid.

    The fully secular method is rejected: its steady-state coherences vanish
    identically, so mapping them is a contradiction in terms.
    """
    for m in methods:
        if m == "secular":
            raise ValueError(
                "secular steady-state coherences are identically zero; "
                "map unified and/or redfield instead"
            )
    grid = [(al, d, m) for al in alpha_grid for d in delta_grid for m in methods]

    def at(point: tuple[float, float, str]) -> CoherencePoint:
        al, d, m = point
        p = VParams(nu=params.nu, delta=d, alpha=al, a=params.a, T_L=params.T_L, T_R=params.T_R)
        system = v_system(p)
        rho = steady_state(system, m)
        idx = system.ordering(m).index((1, 2))
        val = rho.vector[idx]
        return CoherencePoint(alpha=al, delta=d, method=m, re=float(val.real), im=float(val.imag))

    return grid_map(at, grid, jobs)


def entropy_production(params: VParams, cums: CumulantSet) -> float:
    """Mean entropy production rate delta_beta * <J> for two-bath steady flow."""
    delta_beta = 1.0 / params.T_R - 1.0 / params.T_L
    return delta_beta * cums.mean
