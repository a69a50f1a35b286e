"""Open-system description: spectrum, couplings, baths, and frequency clustering.

A system is a discrete set of eigenenergies plus one real symmetric coupling
operator per bath. Transition frequencies w_ab = E_a - E_b are grouped into
clusters of nearly degenerate values; each cluster gets a common center at
which golden-rule rates are later evaluated, and a clustered jump operator
collecting the matrix elements of all member transitions.

Everything here is immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class ModelError(ValueError):
    """A system description violates one of its structural invariants."""


class UnsupportedConfigurationError(ModelError):
    """A structurally valid request falls outside the supported layouts."""


@dataclass(frozen=True)
class BathSpec:
    """Thermal Ohmic bath: identifier, temperature, and J(w) = a*w coefficient."""

    bath_id: str
    temperature: float
    ohmic_coefficient: float

    def __post_init__(self) -> None:
        if self.temperature <= 0.0:
            raise ModelError(f"non-positive temperature {self.temperature} for bath {self.bath_id!r}")
        if self.ohmic_coefficient <= 0.0:
            raise ModelError(f"non-positive ohmic coefficient for bath {self.bath_id!r}")

    @property
    def beta(self) -> float:
        """Inverse temperature, derived on demand and never stored."""
        return 1.0 / self.temperature


def _as_real_matrix(matrix, bath_id: str) -> np.ndarray:
    arr = np.asarray(matrix)
    if np.iscomplexobj(arr):
        if np.any(arr.imag != 0.0):
            raise ModelError(f"coupling matrix for bath {bath_id!r} must be real-valued")
        arr = arr.real
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    """One system coupling operator bound to one bath.

    The matrix is dimensionless; all coupling strength lives in the bath's
    spectral density.
    """

    bath_id: str
    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _as_real_matrix(self.matrix, self.bath_id))
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ModelError(f"coupling matrix for bath {self.bath_id!r} must be square")
        if not np.array_equal(m, m.T):
            raise ModelError(f"non-symmetric coupling matrix for bath {self.bath_id!r}")


@dataclass(frozen=True, eq=False)
class SystemModel:
    """Eigenenergies plus bath couplings of an N-level open system."""

    energies: np.ndarray
    couplings: tuple[CouplingSpec, ...]

    def __post_init__(self) -> None:
        e = np.array(np.asarray(self.energies, dtype=float), dtype=float)
        e.flags.writeable = False
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "couplings", tuple(self.couplings))

    @property
    def levels(self) -> int:
        return int(self.energies.shape[0])

    def coupling_for(self, bath_id: str) -> CouplingSpec:
        for c in self.couplings:
            if c.bath_id == bath_id:
                return c
        raise ModelError(f"no coupling bound to bath {bath_id!r}")


def validate_model(model: SystemModel, baths: Sequence[BathSpec]) -> SystemModel:
    """Check every structural invariant; return the model unchanged if sound.

    Raises ModelError on: fewer than two levels, unsorted energies,
    wrong-shaped or non-symmetric coupling matrices, couplings bound to
    unknown baths, more than one coupling per bath, or duplicate bath ids.
    """
    n = model.levels
    if n < 2:
        raise ModelError(f"need at least 2 levels, got {n}")
    if np.any(np.diff(model.energies) < 0.0):
        raise ModelError("energies must be sorted ascending")
    bath_ids = [b.bath_id for b in baths]
    if len(set(bath_ids)) != len(bath_ids):
        raise ModelError("duplicate bath ids")
    seen: set[str] = set()
    for c in model.couplings:
        if c.matrix.shape != (n, n):
            raise ModelError(
                f"coupling matrix for bath {c.bath_id!r} has shape {c.matrix.shape}, expected {(n, n)}"
            )
        if c.bath_id not in bath_ids:
            raise ModelError(f"unknown bath id {c.bath_id!r}")
        if c.bath_id in seen:
            raise UnsupportedConfigurationError(
                f"duplicate coupling for bath {c.bath_id!r}: one operator per bath is supported"
            )
        seen.add(c.bath_id)
    return model


@dataclass(frozen=True, order=True)
class BohrFrequency:
    """One ordered transition: value = E_to - E_from."""

    value: float
    to_level: int
    from_level: int


@dataclass(frozen=True)
class Cluster:
    """A group of Bohr frequencies treated at a common center."""

    center: float
    members: tuple[BohrFrequency, ...]

    def member_pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple((f.to_level, f.from_level) for f in self.members)


@dataclass(frozen=True)
class ClusterPartition:
    """Partition of the full Bohr-frequency set into mirror-symmetric clusters."""

    clusters: tuple[Cluster, ...]

    def __post_init__(self) -> None:
        centers = [c.center for c in self.clusters]
        if len(set(centers)) != len(centers):
            raise ModelError("cluster centers must be distinct")

    def zero_cluster(self) -> Cluster:
        """The cluster containing the zero frequency (always present)."""
        for c in self.clusters:
            if any(f.value == 0.0 for f in c.members):
                return c
        raise ModelError("partition has no cluster containing the zero frequency")

    def all_members(self) -> tuple[BohrFrequency, ...]:
        out: list[BohrFrequency] = []
        for c in self.clusters:
            out.extend(c.members)
        return tuple(sorted(out))


def bohr_frequencies(model: SystemModel) -> tuple[BohrFrequency, ...]:
    """All N^2 ordered transition frequencies w_ab = E_a - E_b, zeros included."""
    e = model.energies
    n = model.levels
    freqs = [
        BohrFrequency(float(e[a] - e[b]), to_level=a, from_level=b)
        for a in range(n)
        for b in range(n)
    ]
    return tuple(sorted(freqs))


def default_epsilon(baths: Sequence[BathSpec]) -> float:
    """Default cluster width: 10x the largest zero-frequency rate scale a*T.

    Clustering is justified while level splittings stay below the dissipative
    rates, so the width tracks the rate scale rather than any level spacing.
    """
    return 10.0 * max(b.ohmic_coefficient * b.temperature for b in baths)


def _group_values(values: list[float], epsilon: float) -> list[list[float]]:
    # single-linkage on a sorted list: split where the gap exceeds epsilon
    groups: list[list[float]] = [[values[0]]]
    for prev, cur in zip(values, values[1:]):
        if cur - prev <= epsilon:
            groups[-1].append(cur)
        else:
            groups.append([cur])
    return groups


def cluster_frequencies(freqs: Iterable[BohrFrequency], epsilon: float) -> ClusterPartition:
    """Group frequencies into clusters by single-linkage with gap threshold.

    Grouping runs on the distinct absolute values and is then reflected, so
    the partition is mirror symmetric by construction: the cluster at -c
    contains exactly the negated members of the cluster at +c. Exact ties
    (degenerate frequencies) land in the same cluster as one merged value
    carrying all contributing transitions. Cluster centers are arithmetic
    means of the distinct member values; epsilon = 0 gives singletons.
    """
    if epsilon < 0.0:
        raise ModelError(f"epsilon must be nonnegative, got {epsilon}")
    freqs = tuple(freqs)
    by_value: dict[float, list[BohrFrequency]] = {}
    for f in freqs:
        by_value.setdefault(f.value, []).append(f)
    abs_values = sorted({abs(v) for v in by_value})
    clusters: list[Cluster] = []
    for group in _group_values(abs_values, epsilon):
        if group[0] == 0.0 or 2.0 * group[0] <= epsilon:
            # the group straddles zero once reflected: one self-mirror cluster
            values = sorted({v for av in group for v in (av, -av) if v in by_value})
            members = tuple(sorted(m for v in values for m in by_value[v]))
            center = float(np.mean(values))
            if abs(center) < 1e-15 * max(abs_values[-1], 1.0):
                center = 0.0
            clusters.append(Cluster(center, members))
        else:
            pos = [v for v in group if v in by_value]
            neg = [-v for v in group if -v in by_value]
            center = float(np.mean(pos))
            clusters.append(
                Cluster(center, tuple(sorted(m for v in pos for m in by_value[v])))
            )
            clusters.append(
                Cluster(-center, tuple(sorted(m for v in neg for m in by_value[v])))
            )
    clusters.sort(key=lambda c: c.center)
    return ClusterPartition(tuple(clusters))


def cluster_with_centers(
    freqs: Iterable[BohrFrequency], centers: Sequence[float]
) -> ClusterPartition:
    """Assign each frequency to the nearest of the given centers.

    Centers must form a mirror-symmetric set. Useful to pin cluster centers
    to physically motivated values instead of member means.
    """
    centers = sorted(float(c) for c in centers)
    scale = max(abs(c) for c in centers) or 1.0
    for c in centers:
        if min(abs(c + c2) for c2 in centers) > 1e-12 * scale:
            raise ModelError(f"center set is not closed under negation: missing {-c}")
    freqs = tuple(freqs)
    assigned: dict[float, list[BohrFrequency]] = {c: [] for c in centers}
    for f in freqs:
        nearest = min(centers, key=lambda c: (abs(f.value - c), c))
        assigned[nearest].append(f)
    clusters = tuple(
        Cluster(c, tuple(sorted(members)))
        for c, members in assigned.items()
        if members
    )
    return ClusterPartition(tuple(sorted(clusters, key=lambda c: c.center)))


def jump_operators(
    model: SystemModel, partition: ClusterPartition
) -> dict[tuple[str, float], np.ndarray]:
    """Clustered jump operators: one N x N real matrix per (bath, center).

    The operator for a cluster collects the coupling matrix elements of all
    member transitions: the member with value w_ab = E_a - E_b contributes
    the element at (row b, column a), i.e. the operator maps level a to
    level b. Summing the operators of all clusters reassembles the bare
    coupling matrix exactly.
    """
    n = model.levels
    out: dict[tuple[str, float], np.ndarray] = {}
    for coupling in model.couplings:
        for cluster in partition.clusters:
            op = np.zeros((n, n))
            for f in cluster.members:
                op[f.from_level, f.to_level] = coupling.matrix[f.from_level, f.to_level]
            op.flags.writeable = False
            out[(coupling.bath_id, cluster.center)] = op
    return out


def load_config(source: str | Path | Mapping) -> dict:
    """Parse a model configuration into validated pieces.

    Accepts a JSON file path or an already-parsed mapping with keys
    ``levels.energies``, ``couplings[]`` (each with ``bath`` and row-major
    ``matrix``), ``baths[]`` (each with ``id``, ``temperature``, ``ohmic_a``),
    and optional ``clustering.epsilon`` / ``clustering.centers``.

    Returns a dict with keys ``model``, ``baths``, ``epsilon``, ``centers``;
    epsilon falls back to :func:`default_epsilon` when not given, centers
    stay None unless explicitly configured.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = dict(source)
    try:
        energies = data["levels"]["energies"]
        couplings = tuple(
            CouplingSpec(bath_id=str(c["bath"]), matrix=c["matrix"]) for c in data["couplings"]
        )
        baths = tuple(
            BathSpec(
                bath_id=str(b["id"]),
                temperature=float(b["temperature"]),
                ohmic_coefficient=float(b["ohmic_a"]),
            )
            for b in data["baths"]
        )
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model configuration: {exc}") from exc
    model = validate_model(SystemModel(energies=energies, couplings=couplings), baths)
    clustering = data.get("clustering", {})
    epsilon = clustering.get("epsilon")
    if epsilon is None:
        epsilon = default_epsilon(baths)
    centers = clustering.get("centers")
    return {
        "model": model,
        "baths": baths,
        "epsilon": float(epsilon),
        "centers": None if centers is None else tuple(float(c) for c in centers),
    }
