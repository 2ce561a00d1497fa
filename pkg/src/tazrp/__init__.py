__version__ = "1.0.0"

from .configspace import (
    Configuration,
    EllRule,
    StateSpace,
    WellPartition,
    critical_density,
    default_ell,
    enlarged_wells,
    enumerate_space,
    gamma_alpha,
    gamma_series,
    grand_canonical_partition,
    partition_wells,
    well_mass_report,
    well_states,
    z_limit,
)
from .generator import (
    CycleGenerator,
    RateOperator,
    build,
    build_all,
    cycle_form,
    cycle_generators,
    dirichlet_form,
    dump_coo_csv,
    inner_product,
    jump_rate,
    sector_condition_scan,
)
from .potential import (
    CapacityReport,
    PotentialSolution,
    capacity,
    dense_capacity_oracle,
    equilibrium_potential,
    mean_rate_functional,
    mean_rate_scan,
    monotonicity_check,
    sup_functional,
    walk_capacity,
)
from .metastability import (
    LimitConstants,
    LimitWalk,
    TraceRateTable,
    convergence_table,
    discrete_ialpha,
    h_conditions_report,
    limit_constants,
    limit_walk,
    mean_rate_limit,
    reversible_limit,
    theorem1_prediction,
    test_function_bound,
    trace_mean_rates,
)
from .simulate import (
    SimConfig,
    Trajectory,
    TraceStatistics,
    m1_check,
    run,
    run_replicas,
    trace_statistics,
)
from .manifest import RunManifest
from .exceptions import (
    ZRPError,
    ZRPDomainError,
    ZRPDimensionError,
    ZRPOverlapError,
    ZRPDivergenceError,
    ZRPSizeError,
    ZRPSolverError,
    ZRPSimulationError,
    ZRPFileError,
)

__all__ = [
    "__version__",
    # Espace des configurations
    "Configuration",
    "EllRule",
    "StateSpace",
    "WellPartition",
    "critical_density",
    "default_ell",
    "enlarged_wells",
    "enumerate_space",
    "gamma_alpha",
    "gamma_series",
    "grand_canonical_partition",
    "partition_wells",
    "well_mass_report",
    "well_states",
    "z_limit",
    # Générateurs
    "CycleGenerator",
    "RateOperator",
    "build",
    "build_all",
    "cycle_form",
    "cycle_generators",
    "dirichlet_form",
    "dump_coo_csv",
    "inner_product",
    "jump_rate",
    "sector_condition_scan",
    # Potentiels et capacités
    "CapacityReport",
    "PotentialSolution",
    "capacity",
    "dense_capacity_oracle",
    "equilibrium_potential",
    "mean_rate_functional",
    "mean_rate_scan",
    "monotonicity_check",
    "sup_functional",
    "walk_capacity",
    # Métastabilité
    "LimitConstants",
    "LimitWalk",
    "TraceRateTable",
    "convergence_table",
    "discrete_ialpha",
    "h_conditions_report",
    "limit_constants",
    "limit_walk",
    "mean_rate_limit",
    "reversible_limit",
    "theorem1_prediction",
    "test_function_bound",
    "trace_mean_rates",
    # Simulation
    "SimConfig",
    "Trajectory",
    "TraceStatistics",
    "m1_check",
    "run",
    "run_replicas",
    "trace_statistics",
    # Manifestes
    "RunManifest",
    # Exceptions
    "ZRPError",
    "ZRPDomainError",
    "ZRPDimensionError",
    "ZRPOverlapError",
    "ZRPDivergenceError",
    "ZRPSizeError",
    "ZRPSolverError",
    "ZRPSimulationError",
    "ZRPFileError",
]
