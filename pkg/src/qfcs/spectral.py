"""Dense complex linear algebra: spectra, dominant branches, kernels, propagation.

Everything works on the modest matrices the generator builders produce
(tens of rows at desk scale), so dense LAPACK routines are used throughout:
Hessenberg + QR iteration for full spectra, an LU-based inverse iteration
for the stationary kernel, and Pade scaling-and-squaring for the matrix
exponential. Each result carries or is checked against an explicit residual
certificate rather than trusting backend tolerances blindly.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence
import warnings

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .generators import CountingField, OpenSystem, TiltedGenerator, maximally_mixed
from .rates import RateTable

SPECTRUM_RESIDUAL_RTOL = 1e-10
STEADY_RESIDUAL_RTOL = 1e-10
KERNEL_COUNT_RTOL = 1e-8


class SpectralError(RuntimeError):
    """Linear-algebra failure; carries whatever partial results exist."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class DegenerateSteadyStateError(SpectralError):
    """The zero-frequency generator has a kernel of dimension != 1."""


@dataclass(frozen=True, eq=False)
class Spectrum:
    """All eigenvalues of a generator with a backward-error certificate.

    For every reported eigenvalue there is a unit vector v with
    ||M v - lambda v|| <= residual_bound.
    """

    eigenvalues: np.ndarray
    residual_bound: float

    def dominant(self) -> complex:
        return complex(self.eigenvalues[np.argmax(self.eigenvalues.real)])

    def nearest(self, target: complex) -> tuple[int, complex]:
        k = int(np.argmin(np.abs(self.eigenvalues - target)))
        return k, complex(self.eigenvalues[k])


@dataclass(frozen=True, eq=False)
class SteadyState:
    """Trace-normalized kernel vector of the zero-counting generator."""

    vector: np.ndarray
    method: str

    def population(self, k: int) -> float:
        return float(self.vector[k].real)

    def populations(self, n: int) -> np.ndarray:
        return self.vector[:n].real.copy()


@dataclass(frozen=True)
class CgfSample:
    """One point of the scaled cumulant generating function.

    ``branch_id`` indexes the eigenvalue in the descending-real-part order of
    its own spectrum; ``ambiguous`` flags a nearest-neighbour match with two
    candidates inside the matching tolerance; ``crossed`` flags a tracked
    branch that is no longer the dominant eigenvalue.
    """

    chi: CountingField
    G: complex
    branch_id: int
    ambiguous: bool = False
    crossed: bool = False

    @property
    def branch_flag(self) -> str:
        flags = []
        if self.ambiguous:
            flags.append("ambiguous")
        if self.crossed:
            flags.append("crossing")
        return "+".join(flags)


def spectrum(matrix: np.ndarray, *, residual_rtol: float = SPECTRUM_RESIDUAL_RTOL) -> Spectrum:
    """Full eigenvalue set with an a-posteriori residual check.

    Raises SpectralError if the QR iteration fails to converge (no partial
    results are available from the backend in that case) or if any residual
    exceeds ``residual_rtol`` times the matrix norm.
    """
    M = np.asarray(matrix, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise SpectralError("matrix has non-finite entries")
    try:
        eigvals, eigvecs = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigenvalue iteration failed: {exc}", partial=()) from exc
    norms = np.linalg.norm(eigvecs, axis=0)
    norms[norms == 0.0] = 1.0
    residuals = np.linalg.norm(M @ eigvecs - eigvecs * eigvals, axis=0) / norms
    bound = float(np.max(residuals)) if residuals.size else 0.0
    scale = float(np.linalg.norm(M, 2))
    spec = Spectrum(eigenvalues=eigvals, residual_bound=bound)
    if scale > 0.0 and bound > residual_rtol * scale:
        raise SpectralError(
            f"eigenpair residual {bound:.3e} exceeds {residual_rtol:.1e} * ||M|| = "
            f"{residual_rtol * scale:.3e}",
            partial=spec,
        )
    return spec


def multiset_distance(eigs_a: np.ndarray, eigs_b: np.ndarray) -> float:
    """Optimal-matching distance between two eigenvalue multisets."""
    a = np.asarray(eigs_a, dtype=complex).ravel()
    b = np.asarray(eigs_b, dtype=complex).ravel()
    if a.size != b.size:
        raise ValueError("multisets must have equal cardinality")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if a.size else 0.0


def _branch_index(eigs: np.ndarray, value: complex) -> int:
    order = np.argsort(-eigs.real, kind="stable")
    return int(np.argmin(np.abs(eigs[order] - value)))


def cgf_point(
    system: OpenSystem,
    method: str,
    chi: CountingField,
    *,
    rate_table: RateTable | None = None,
) -> CgfSample:
    """Scaled CGF at a single counting field: the maximal-real-part eigenvalue."""
    gen = system.build(method, chi, rate_table=rate_table)
    spec = spectrum(gen.matrix)
    return CgfSample(chi=chi, G=spec.dominant(), branch_id=0)


def cgf_sweep(
    system: OpenSystem,
    method: str,
    chis: Sequence[CountingField],
    *,
    rate_table: RateTable | None = None,
    match_atol: float | None = None,
) -> list[CgfSample]:
    """Scaled CGF along a path, following the branch through lambda = 0.

    The path must start where the dominant branch vanishes (the zero field,
    or its fluctuation-symmetry shift). Consecutive grid points are matched
    by nearest neighbour; a second candidate within the matching tolerance
    raises the ``ambiguous`` flag, and losing dominance raises ``crossed``.
    """
    if rate_table is None:
        rate_table = system.rate_table(method)
    samples: list[CgfSample] = []
    target = 0.0 + 0.0j
    for chi in chis:
        gen = system.build(method, chi, rate_table=rate_table)
        spec = spectrum(gen.matrix)
        eigs = spec.eigenvalues
        scale = float(np.max(np.abs(eigs))) or 1.0
        atol = match_atol if match_atol is not None else 1e-9 * scale
        dist = np.abs(eigs - target)
        order = np.argsort(dist, kind="stable")
        lam = complex(eigs[order[0]])
        ambiguous = eigs.size > 1 and float(dist[order[1]] - dist[order[0]]) < atol
        crossed = float(np.max(eigs.real) - lam.real) > 1e-12 * scale
        samples.append(
            CgfSample(
                chi=chi,
                G=lam,
                branch_id=_branch_index(eigs, lam),
                ambiguous=ambiguous,
                crossed=crossed,
            )
        )
        target = lam
    return samples


def _lu_kernel_solve(M: np.ndarray, seed: np.ndarray, sweeps: int) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        try:
            lu = scipy.linalg.lu_factor(M)
        except np.linalg.LinAlgError:
            return np.full_like(seed, np.nan)
        x = seed.astype(complex)
        for _ in range(sweeps):
            y = scipy.linalg.lu_solve(lu, x)
            if not np.all(np.isfinite(y)):
                return np.full_like(seed, np.nan)
            x = y / np.linalg.norm(y)
        # one refinement pass: remove the residual along non-kernel directions
        r = M @ x
        d = scipy.linalg.lu_solve(lu, r)
        if np.all(np.isfinite(d)):
            x = x - d
            x = x / np.linalg.norm(x)
        return x


def steady_state(
    system: OpenSystem,
    method: str,
    *,
    rate_table: RateTable | None = None,
    residual_rtol: float = STEADY_RESIDUAL_RTOL,
) -> SteadyState:
    """Stationary state of the zero-counting generator.

    Kernel dimension is certified from the spectrum first; the vector itself
    comes from inverse iteration (one LU factorization at shift zero, a
    deterministic uniform-population seed, plus one refinement sweep) and is
    trace normalized. Populations must come out real and, for the positivity
    preserving methods, nonnegative to within roundoff.
    """
    gen = system.build(method, CountingField.zero(), rate_table=rate_table)
    M = gen.matrix
    norm = float(np.linalg.norm(M, 2))
    spec = spectrum(M)
    kernel_dim = int(np.sum(np.abs(spec.eigenvalues) <= KERNEL_COUNT_RTOL * norm))
    if kernel_dim != 1:
        raise DegenerateSteadyStateError(
            f"kernel dimension {kernel_dim} != 1 for method {method!r}", partial=spec
        )
    seed = maximally_mixed(gen.ordering)
    x = _lu_kernel_solve(M, seed, sweeps=2)
    if not np.all(np.isfinite(x)):
        # exactly zero pivot: retry at a roundoff-sized shift
        shift = 100.0 * np.finfo(float).eps * norm
        x = _lu_kernel_solve(M - shift * np.eye(M.shape[0]), seed, sweeps=3)
    if not np.all(np.isfinite(x)):
        raise SpectralError("inverse iteration failed to produce a kernel vector")
    w = gen.trace_vector()
    tr = complex(w @ x)
    if abs(tr) < 1e-12:
        raise SpectralError("kernel vector is traceless; cannot normalize")
    rho = x / tr
    _validate_steady(rho, M, gen, norm, residual_rtol)
    rho.flags.writeable = False
    return SteadyState(vector=rho, method=method)


def _validate_steady(
    rho: np.ndarray, M: np.ndarray, gen: TiltedGenerator, norm: float, residual_rtol: float
) -> None:
    residual = float(np.linalg.norm(M @ rho))
    if residual > residual_rtol * max(norm, 1e-300):
        raise SpectralError(
            f"steady-state residual {residual:.3e} exceeds {residual_rtol:.1e} * ||L||",
            partial=rho,
        )
    entries = gen.ordering.entries
    npop = gen.ordering.population_count
    pops = rho[:npop]
    if float(np.max(np.abs(pops.imag))) > 1e-10:
        raise SpectralError("steady-state populations have imaginary parts beyond tolerance")
    if gen.method in ("unified", "secular") and float(np.min(pops.real)) < -1e-12:
        raise SpectralError("steady-state populations negative beyond roundoff")
    lookup = {e: i for i, e in enumerate(entries)}
    for (a, b), i in lookup.items():
        if a == b:
            continue
        j = lookup[(b, a)]
        if abs(rho[i] - np.conj(rho[j])) > 1e-10:
            raise SpectralError(f"coherence pair ({a},{b}) is not conjugate symmetric")


def propagate(generator: TiltedGenerator | np.ndarray, rho0: np.ndarray, t: float) -> np.ndarray:
    """exp(L t) rho0 by Pade scaling-and-squaring."""
    if t < 0.0:
        raise ValueError(f"propagation time must be nonnegative, got {t}")
    M = generator.matrix if isinstance(generator, TiltedGenerator) else np.asarray(generator, complex)
    out = scipy.linalg.expm(M * t) @ np.asarray(rho0, dtype=complex)
    if not np.all(np.isfinite(out)):
        raise SpectralError(f"matrix exponential overflowed at t={t}")
    return out


def mgf(
    generator: TiltedGenerator, rho0: np.ndarray, t: float
) -> complex:
    """Moment generating function w . exp(L(chi) t) rho0."""
    w = generator.trace_vector()
    return complex(w @ propagate(generator, rho0, t))


def log_mgf(
    generator: TiltedGenerator,
    rho0: np.ndarray,
    t: float,
    *,
    n_steps: int | None = None,
) -> complex:
    """Continuous-branch log of the moment generating function.

    The propagation interval is subdivided so the phase of Z advances by a
    small fraction of pi per step; summing per-step principal logs then
    tracks the winding that a single principal log at large t would lose.
    """
    M = generator.matrix
    w = generator.trace_vector()
    if t < 0.0:
        raise ValueError(f"time must be nonnegative, got {t}")
    z = np.asarray(rho0, dtype=complex)
    val = complex(w @ z)
    if val == 0:
        raise SpectralError("initial state has zero trace functional")
    total = cmath.log(val)
    if t == 0.0:
        return total
    if n_steps is None:
        n_steps = max(8, int(math.ceil(t * max(1.0, float(np.linalg.norm(M, 2))) / 0.25)))
    step = scipy.linalg.expm(M * (t / n_steps))
    prev = val
    for _ in range(n_steps):
        z = step @ z
        peak = float(np.max(np.abs(z)))
        if peak > 0.0 and not (1e-100 < peak < 1e100):
            z = z / peak
            prev = prev / peak
        cur = complex(w @ z)
        if cur == 0:
            raise SpectralError("moment generating function passed through zero")
        total += cmath.log(cur / prev)
        prev = cur
    return total


def spectral_gap(matrix: np.ndarray, *, atol_scale: float = 1e-12) -> float:
    """Smallest nonzero |Re(lambda)|: the inverse relaxation timescale."""
    M = np.asarray(matrix, dtype=complex)
    spec = spectrum(M)
    norm = float(np.linalg.norm(M, 2))
    re = np.abs(spec.eigenvalues.real)
    nonzero = re[re > atol_scale * max(norm, 1e-300)]
    if nonzero.size == 0:
        raise SpectralError("no decaying eigenvalues found", partial=spec)
    return float(np.min(nonzero))
