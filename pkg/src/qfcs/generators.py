"""Counting-field-dressed generators of the reduced density-matrix dynamics.

Three construction rules share one assembly template, differing only in how
transition frequencies are grouped and paired:

- unified:  rates evaluated at cluster centers, jump operators clustered,
            only same-cluster pairs kept (partial secular approximation).
- secular:  the unified rule with every distinct frequency its own cluster;
            all cross-frequency terms drop, populations obey a Pauli rate
            equation and retained degenerate coherences decay independently.
- redfield: rates at exact frequencies with all frequency pairs kept. The
            gain term of a pair (w, w') carries the half-split dressing
            (exp(-i*w*chi)*g(w) + exp(-i*w'*chi)*g(w'))/2, and the
            no-counting terms weight the left product with g(w) and the
            right product with g(w'), which is what breaks the transpose
            symmetry once w != w'.

The state vector keeps all populations and only the coherences between
levels within the zero-frequency cluster; everything else decouples from
this block under the rules above.

All builders are pure: immutable inputs, freshly allocated outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import (
    BathSpec,
    ClusterPartition,
    ModelError,
    SystemModel,
    UnsupportedConfigurationError,
    bohr_frequencies,
    cluster_frequencies,
    jump_operators,
    validate_model,
)
from .rates import RateTable, build_rate_table

METHODS = ("unified", "secular", "redfield")

__all__ = [
    "METHODS",
    "BasisOrdering",
    "CountingField",
    "OpenSystem",
    "TiltedGenerator",
    "UnsupportedConfigurationError",
    "build_redfield",
    "build_secular",
    "build_unified",
    "coherence_basis",
    "generator_derivative",
    "maximally_mixed",
    "reduced_basis",
    "singleton_partition",
]


@dataclass(frozen=True)
class BasisOrdering:
    """Which density-matrix elements the state vector retains, and in what order.

    Populations (a, a) come first in level order, then retained coherences
    (a, b) with a != b in lexicographic order; coherences always appear in
    conjugate pairs.
    """

    entries: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        pops = [e for e in self.entries if e[0] == e[1]]
        cohs = [e for e in self.entries if e[0] != e[1]]
        if list(self.entries) != pops + cohs:
            raise ModelError("populations must precede coherences in the basis ordering")
        if pops != sorted(pops):
            raise ModelError("population entries must be in level order")
        if cohs != sorted(cohs):
            raise ModelError("coherence entries must be in lexicographic order")
        coh_set = set(cohs)
        for a, b in cohs:
            if (b, a) not in coh_set:
                raise ModelError(f"coherence ({a},{b}) retained without its conjugate")
        if len(set(self.entries)) != len(self.entries):
            raise ModelError("duplicate basis entries")

    @property
    def size(self) -> int:
        return len(self.entries)

    @property
    def population_count(self) -> int:
        return sum(1 for a, b in self.entries if a == b)

    def index(self, pair: tuple[int, int]) -> int:
        return self.entries.index(pair)

    def trace_vector(self) -> np.ndarray:
        """Left functional w with 1 on populations, 0 on coherences."""
        return np.array([1.0 if a == b else 0.0 for a, b in self.entries])

    def conjugate_permutation(self) -> np.ndarray:
        """Index permutation mapping each entry (a, b) to (b, a)."""
        lookup = {e: i for i, e in enumerate(self.entries)}
        return np.array([lookup[(b, a)] for a, b in self.entries])


@dataclass(frozen=True)
class CountingField:
    """Per-bath counting-field components; complex values are first class."""

    components: tuple[tuple[str, complex], ...]

    def __post_init__(self) -> None:
        for bath_id, value in self.components:
            z = complex(value)
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ValueError(f"non-finite counting field for bath {bath_id!r}")

    @classmethod
    def zero(cls) -> "CountingField":
        return cls(())

    @classmethod
    def of(cls, mapping: Mapping[str, complex]) -> "CountingField":
        return cls(tuple((str(k), complex(v)) for k, v in mapping.items()))

    @cached_property
    def _map(self) -> dict[str, complex]:
        return dict(self.components)

    def value(self, bath_id: str) -> complex:
        return self._map.get(bath_id, 0.0 + 0.0j)

    def shifted(self, baths: Sequence[BathSpec]) -> "CountingField":
        """The fluctuation-symmetry partner field, chi_j -> -chi_j - i/T_j."""
        return CountingField.of(
            {b.bath_id: -self.value(b.bath_id) - 1j * b.beta for b in baths}
        )


@dataclass(frozen=True, eq=False)
class TiltedGenerator:
    """Dense matrix generating the counting-field-dressed dynamics."""

    matrix: np.ndarray
    ordering: BasisOrdering
    method: str
    chi: CountingField

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=complex)
        if m.shape != (self.ordering.size, self.ordering.size):
            raise ModelError(
                f"generator shape {m.shape} does not match basis size {self.ordering.size}"
            )
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    def trace_vector(self) -> np.ndarray:
        return self.ordering.trace_vector()


def reduced_basis(model: SystemModel, partition: ClusterPartition) -> BasisOrdering:
    """Populations plus the coherences whose frequency sits in the zero cluster.

    Cross-cluster coherences decouple from this block and are dropped from
    the state vector. With singleton clusters only exactly degenerate
    coherences survive.
    """
    zero_pairs = {
        (f.to_level, f.from_level)
        for f in partition.zero_cluster().members
        if f.to_level != f.from_level
    }
    pops = [(a, a) for a in range(model.levels)]
    cohs = sorted(zero_pairs)
    return BasisOrdering(tuple(pops) + tuple(cohs))


def coherence_basis(model: SystemModel, retained: Iterable[tuple[int, int]]) -> BasisOrdering:
    """Basis from an explicit retention set of coherence index pairs."""
    pops = [(a, a) for a in range(model.levels)]
    cohs = sorted(set((int(a), int(b)) for a, b in retained))
    for a, b in cohs:
        if a == b:
            raise ModelError(f"({a},{b}) is a population, not a coherence")
        if not (0 <= a < model.levels and 0 <= b < model.levels):
            raise ModelError(f"coherence index ({a},{b}) out of range")
    return BasisOrdering(tuple(pops) + tuple(cohs))


def _bath_operators(
    model: SystemModel,
    baths: Sequence[BathSpec],
    partition: ClusterPartition,
    rate_table: RateTable,
) -> dict[str, list[tuple[np.ndarray, float, float]]]:
    """Per bath: the nonzero clustered jump operators with center and rate."""
    jumps = jump_operators(model, partition)
    ops: dict[str, list[tuple[np.ndarray, float, float]]] = {}
    for coupling in model.couplings:
        entries = []
        for cluster in partition.clusters:
            op = jumps[(coupling.bath_id, cluster.center)]
            if np.any(op != 0.0):
                entries.append((op, cluster.center, rate_table.rate(coupling.bath_id, cluster.center)))
        ops[coupling.bath_id] = entries
    return ops


def _assemble(
    model: SystemModel,
    baths: Sequence[BathSpec],
    partition: ClusterPartition,
    chi: CountingField,
    ordering: BasisOrdering,
    all_pairs: bool,
    rate_table: RateTable | None,
    derivative_bath: str | None = None,
) -> np.ndarray:
    """Shared assembly for all three methods.

    With ``derivative_bath`` set, returns d(matrix)/d(i*chi_j) at chi = 0 for
    that bath instead of the generator itself: only the gain terms survive,
    each weighted by -w times its undressed rate.
    """
    validate_model(model, baths)
    if rate_table is None:
        rate_table = build_rate_table(partition, baths)
    bath_ops = _bath_operators(model, baths, partition, rate_table)

    entries = ordering.entries
    A = np.array([a for a, _ in entries])
    B = np.array([b for _, b in entries])
    M = np.zeros((ordering.size, ordering.size), dtype=complex)

    for bath in baths:
        ops = bath_ops.get(bath.bath_id, [])
        if not ops:
            continue
        chi_j = chi.value(bath.bath_id)
        for i1, (S1, w1, g1) in enumerate(ops):
            for i2, (S2, w2, g2) in enumerate(ops):
                if not all_pairs and i1 != i2:
                    continue
                if derivative_bath is None:
                    zeta = 0.5 * (
                        g1 * np.exp(-1j * w1 * chi_j) + g2 * np.exp(-1j * w2 * chi_j)
                    )
                elif bath.bath_id == derivative_bath:
                    zeta = -0.5 * (w1 * g1 + w2 * g2)
                else:
                    continue
                # gain term: (S1 rho S2^T)[a,b] picks S1[a,c] * S2[b,d]
                M += zeta * S1[A[:, None], A[None, :]] * S2[B[:, None], B[None, :]]
                if derivative_bath is None:
                    X = S2.T @ S1
                    M += -0.5 * g1 * X[A[:, None], A[None, :]] * (B[:, None] == B[None, :])
                    M += -0.5 * g2 * (A[:, None] == A[None, :]) * X[B[None, :], B[:, None]]

    if derivative_bath is None:
        e = model.energies
        M[np.arange(ordering.size), np.arange(ordering.size)] += -1j * (e[A] - e[B])
    return M

def build_unified(
    model: SystemModel,
    baths: Sequence[BathSpec],
    partition: ClusterPartition,
    chi: CountingField,
    *,
    ordering: BasisOrdering | None = None,
    rate_table: RateTable | None = None,
) -> TiltedGenerator:
    """Generator with clustered jump operators and rates at cluster centers.

    The unitary part contributes -i*(E_a - E_b) on the diagonal of coherence
    rows (exact frequencies, no Lamb shift); the dissipator keeps only
    same-cluster pairs, gain terms dressed with exp(-i*center*chi_j).
    """
    if ordering is None:
        ordering = reduced_basis(model, partition)
    matrix = _assemble(model, baths, partition, chi, ordering, all_pairs=False, rate_table=rate_table)
    return TiltedGenerator(matrix, ordering, "unified", chi)


def singleton_partition(model: SystemModel) -> ClusterPartition:
    """Every distinct Bohr frequency in its own cluster (exact ties merged)."""
    return cluster_frequencies(bohr_frequencies(model), 0.0)


def build_secular(
    model: SystemModel,
    baths: Sequence[BathSpec],
    chi: CountingField,
    *,
    ordering: BasisOrdering | None = None,
    rate_table: RateTable | None = None,
) -> TiltedGenerator:
    """Fully secular generator: the unified rule with singleton clusters.

    Populations follow a dressed Pauli rate equation; only exactly degenerate
    coherences stay in the state vector and they decay without coupling back
    to the populations.
    """
    partition = singleton_partition(model)
    if ordering is None:
        ordering = reduced_basis(model, partition)
    matrix = _assemble(model, baths, partition, chi, ordering, all_pairs=False, rate_table=rate_table)
    return TiltedGenerator(matrix, ordering, "secular", chi)


def build_redfield(
    model: SystemModel,
    baths: Sequence[BathSpec],
    retained_coherences: Iterable[tuple[int, int]],
    chi: CountingField,
    *,
    ordering: BasisOrdering | None = None,
    rate_table: RateTable | None = None,
) -> TiltedGenerator:
    """Generator with every rate at the exact frequency of its own jump.

    Keeps all frequency pairs (w, w'); the restriction to the retained basis
    is exact whenever the dropped coherences decouple, which the caller
    asserts by supplying the retention set.
    """
    partition = singleton_partition(model)
    if ordering is None:
        ordering = coherence_basis(model, retained_coherences)
    matrix = _assemble(model, baths, partition, chi, ordering, all_pairs=True, rate_table=rate_table)
    return TiltedGenerator(matrix, ordering, "redfield", chi)


def generator_derivative(
    method: str,
    model: SystemModel,
    baths: Sequence[BathSpec],
    bath_id: str,
    *,
    partition: ClusterPartition | None = None,
    retained_coherences: Iterable[tuple[int, int]] | None = None,
    ordering: BasisOrdering | None = None,
    rate_table: RateTable | None = None,
) -> np.ndarray:
    """Analytic d(generator)/d(i*chi_j) at chi = 0 for one bath.

    Nonzero only on the gain entries, each weighted by -w times its rate:
    with the exp(-i*w*chi_j) phase convention, +w counts energy entering
    bath j. Contracting with the trace functional and the steady state gives
    the mean current without finite differences.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if method == "unified":
        if partition is None:
            raise ValueError("unified derivative needs a partition")
        part = partition
        if ordering is None:
            ordering = reduced_basis(model, part)
        all_pairs = False
    elif method == "secular":
        part = singleton_partition(model)
        if ordering is None:
            ordering = reduced_basis(model, part)
        all_pairs = False
    else:
        part = singleton_partition(model)
        if ordering is None:
            if retained_coherences is None:
                raise ValueError("redfield derivative needs a retention set or ordering")
            ordering = coherence_basis(model, retained_coherences)
        all_pairs = True
    return _assemble(
        model, baths, part, CountingField.zero(), ordering, all_pairs,
        rate_table, derivative_bath=bath_id,
    )


@dataclass(frozen=True, eq=False)
class OpenSystem:
    """Bundle of everything the builders need, with per-method defaults.

    ``retained_coherences`` feeds the redfield basis; when omitted it
    defaults to the zero-cluster coherences of the partition, so all three
    methods act on comparable state vectors for systems (like the three-level
    V configuration) where the remaining coherences decouple anyway.
    """

    model: SystemModel
    baths: tuple[BathSpec, ...]
    partition: ClusterPartition
    retained_coherences: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        validate_model(self.model, self.baths)
        object.__setattr__(self, "baths", tuple(self.baths))
        if self.retained_coherences is not None:
            object.__setattr__(
                self, "retained_coherences", tuple(tuple(p) for p in self.retained_coherences)
            )

    @cached_property
    def bath_ids(self) -> tuple[str, ...]:
        return tuple(b.bath_id for b in self.baths)

    def bath(self, bath_id: str) -> BathSpec:
        for b in self.baths:
            if b.bath_id == bath_id:
                return b
        raise ModelError(f"unknown bath id {bath_id!r}")

    @cached_property
    def _redfield_retained(self) -> tuple[tuple[int, int], ...]:
        if self.retained_coherences is not None:
            return self.retained_coherences
        return tuple(
            (f.to_level, f.from_level)
            for f in self.partition.zero_cluster().members
            if f.to_level != f.from_level
        )

    def ordering(self, method: str) -> BasisOrdering:
        if method == "unified":
            return reduced_basis(self.model, self.partition)
        if method == "secular":
            return reduced_basis(self.model, singleton_partition(self.model))
        if method == "redfield":
            return coherence_basis(self.model, self._redfield_retained)
        raise ValueError(f"unknown method {method!r}")

    def rate_table(self, method: str) -> RateTable:
        part = self.partition if method == "unified" else singleton_partition(self.model)
        return build_rate_table(part, self.baths)

    def build(self, method: str, chi: CountingField, *, rate_table: RateTable | None = None) -> TiltedGenerator:
        if method == "unified":
            return build_unified(self.model, self.baths, self.partition, chi, rate_table=rate_table)
        if method == "secular":
            return build_secular(self.model, self.baths, chi, rate_table=rate_table)
        if method == "redfield":
            return build_redfield(
                self.model, self.baths, self._redfield_retained, chi, rate_table=rate_table
            )
        raise ValueError(f"unknown method {method!r}")

    def derivative(self, method: str, bath_id: str, *, rate_table: RateTable | None = None) -> np.ndarray:
        return generator_derivative(
            method, self.model, self.baths, bath_id,
            partition=self.partition,
            retained_coherences=self._redfield_retained,
            rate_table=rate_table,
        )


def maximally_mixed(ordering: BasisOrdering) -> np.ndarray:
    """Uniform populations, zero coherences, on the given basis."""
    rho = np.zeros(ordering.size, dtype=complex)
    n = ordering.population_count
    for i, (a, b) in enumerate(ordering.entries):
        if a == b:
            rho[i] = 1.0 / n
    return rho
