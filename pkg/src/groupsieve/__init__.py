"""Spectral gaps, random walks, approximate subgroups, and sieving in SL_d(F_p)."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    CapExceeded,
    ConfigError,
    DenominatorDivisibleByP,
    DimensionMismatch,
    EmptyBattery,
    GroupSieveError,
    InsufficientSignal,
    MissingIdentity,
    NotASubgroup,
    NotConverged,
    NotDeterminantOne,
    NotRegularSemisimple,
    NotSymmetric,
    PredicateMissingPrime,
    SearchBoundExceeded,
    TableMismatch,
    TooLargeForDense,
    UnsupportedDimension,
    VerificationFailure,
)
from .modp import (
    GenSet,
    HeightPair,
    IntMat,
    MatFp,
    PrimeModulus,
    char_poly,
    cycle_type,
    heights,
    is_power_unipotent,
    is_regular_semisimple,
    load_generator_file,
    log_height,
    naive_height,
    reduce_mod,
    sanov_generators,
)
from .table import (
    GroupTable,
    enumerate_group,
    full_special_linear,
    special_linear_order,
    standard_subgroup,
    verify_subgroup,
)
from .spectral import (
    FlatteningPoint,
    QuasirandomBound,
    ReturnGapBound,
    SpectralReport,
    alpha1_bound_from_return,
    apply_markov,
    dense_markov_matrix,
    flattening_trajectory,
    full_spectrum,
    lambda1,
    product_group_gap,
    quasirandom_bound,
    trace_identity_residual,
)
from .walks import (
    EquidistributionResult,
    FitResult,
    ScanReport,
    ScanRow,
    Target,
    WalkSampler,
    WalkStats,
    convolve_step,
    equidistribution_test,
    fit_log_decay,
    free_group_return_oracle,
    kesten_radius,
    monte_carlo_walk,
    nonconcentration_fit,
    return_probability,
    strong_approx_scan,
    subgroup_mass,
    subgroup_mass_sequence,
    walk_distribution,
    wilson_interval,
)
from .approx import (
    ApproxReport,
    FiniteSubset,
    GrowthScan,
    approx_report,
    energy,
    greedy_cover,
    growth_scan,
    larsen_pink_ratio,
    power_set,
    product_set,
    random_symmetric_subset,
    tripling,
    variety_predicate,
)
from .sieve import (
    MomentCheck,
    PrimeBattery,
    SieveReport,
    TargetPredicate,
    cycle_type_density,
    m_power_density,
    moment_check,
    non_regular_semisimple_density,
    pairwise_bound,
    select_primes,
    sieve_run,
    target_predicate,
)
