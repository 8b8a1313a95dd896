"""vacqnet: prioritized uplink IoT networks as spatially interacting vacation queues.

Analytical pipeline: per-class vacation phase-type chains -> QBD steady
states -> stochastic-geometry coverage -> fixed-point coupling -> KPI metrics,
validated against a built-in spatiotemporal Monte Carlo simulator.
"""

from .config import (
    ConfigError,
    Strategy,
    SystemConfig,
    TrafficClass,
    db_to_linear,
    dbm_to_watts,
    make_config,
)
from .coverage import (
    LoadParams,
    RadioParams,
    channel_split,
    coverage_probability,
    gauss_2f1_interference,
)
from .fixed_point import NetworkSolution, solve_network, solve_network_with_init
from .mc_sim import (
    NetworkRealization,
    SimStats,
    generate_realization,
    run_campaign,
    simulate,
)
from .metrics import (
    ClassMetrics,
    availability,
    class_metrics,
    mean_queue_length,
    mean_service,
    mean_wait,
    network_metrics,
    paoi,
    service_ph,
    waiting_time_pmf,
)
from .priority_chain import (
    PhDistribution,
    QbdBlocks,
    assemble_transition_matrix,
    batch_arrival_distribution,
    build_class_chain,
    build_joint_oracle_chain,
    build_qbd_blocks,
    build_vacation_ph,
)
from .steady_state import (
    SolverError,
    SteadyState,
    check_overflow,
    class_marginals,
    classical_rate_matrix,
    solve_class,
    solve_direct,
    solve_mam,
)

__version__ = "0.1.0"

__all__ = [
    "ClassMetrics",
    "ConfigError",
    "LoadParams",
    "NetworkRealization",
    "NetworkSolution",
    "PhDistribution",
    "QbdBlocks",
    "RadioParams",
    "SimStats",
    "SolverError",
    "SteadyState",
    "Strategy",
    "SystemConfig",
    "TrafficClass",
    "assemble_transition_matrix",
    "availability",
    "batch_arrival_distribution",
    "build_class_chain",
    "build_joint_oracle_chain",
    "build_qbd_blocks",
    "build_vacation_ph",
    "channel_split",
    "check_overflow",
    "class_marginals",
    "class_metrics",
    "classical_rate_matrix",
    "coverage_probability",
    "db_to_linear",
    "dbm_to_watts",
    "gauss_2f1_interference",
    "generate_realization",
    "make_config",
    "mean_queue_length",
    "mean_service",
    "mean_wait",
    "network_metrics",
    "paoi",
    "run_campaign",
    "service_ph",
    "simulate",
    "solve_class",
    "solve_direct",
    "solve_mam",
    "solve_network",
    "solve_network_with_init",
    "waiting_time_pmf",
]
