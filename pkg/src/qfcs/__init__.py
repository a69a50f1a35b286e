"""Counting-field-dressed quantum master equations and heat-current statistics.

Builds tilted generators for the unified (partial-secular), fully secular,
and redfield descriptions of few-level systems coupled to Ohmic baths, and
extracts steady states, scaled cumulant generating functions, current
cumulants, and transport/uncertainty diagnostics from them.
"""

from .model import (
    BathSpec,
    BohrFrequency,
    Cluster,
    ClusterPartition,
    CouplingSpec,
    ModelError,
    SystemModel,
    UnsupportedConfigurationError,
    bohr_frequencies,
    cluster_frequencies,
    cluster_with_centers,
    default_epsilon,
    jump_operators,
    load_config,
    validate_model,
)
from .rates import (
    DressedRate,
    RateTable,
    bose_occupation,
    build_rate_table,
    dress_rate,
    golden_rule_rate,
    ohmic_spectral_density,
)
from .generators import (
    METHODS,
    BasisOrdering,
    CountingField,
    OpenSystem,
    TiltedGenerator,
    build_redfield,
    build_secular,
    build_unified,
    coherence_basis,
    generator_derivative,
    maximally_mixed,
    reduced_basis,
    singleton_partition,
)
from .spectral import (
    CgfSample,
    DegenerateSteadyStateError,
    SpectralError,
    Spectrum,
    SteadyState,
    cgf_point,
    cgf_sweep,
    log_mgf,
    mgf,
    multiset_distance,
    propagate,
    spectral_gap,
    spectrum,
    steady_state,
)
from .fcs import (
    CoherencePoint,
    CrossoverPoint,
    CumulantSet,
    SymmetryReport,
    TurPoint,
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
)
from .vmodel import (
    PRESETS,
    VParams,
    counting_field,
    explicit_generator,
    preset,
    symmetry_witness,
    v_system,
)

__version__ = "0.1.0"
