"""Simulation library for UAV-relayed cooperative cognitive NOMA networks."""

from .assign import AssignmentResult, cluster_and_assign, exhaustive_assignment_oracle, lba_solve
from .coverage import CoverageResult, coverage_probability, monte_carlo_coverage, sidnr_thresholds
from .deploy import DeploymentResult, SearchSpace, fitness, simulated_annealing
from .link import link_budget
from .ra import AllocationResult, PowerCaps, allocate_cluster, grid_oracle_allocate
from .scenario import Position, ScenarioConfig, ScenarioError, load_scenario, reference_scenario, rng_stream

__version__ = "0.1.0"

__all__ = [
    "AllocationResult", "AssignmentResult", "CoverageResult", "DeploymentResult",
    "Position", "PowerCaps", "ScenarioConfig", "ScenarioError", "SearchSpace",
    "allocate_cluster", "cluster_and_assign", "coverage_probability",
    "exhaustive_assignment_oracle", "fitness", "grid_oracle_allocate", "lba_solve",
    "link_budget", "load_scenario", "monte_carlo_coverage", "reference_scenario",
    "rng_stream", "sidnr_thresholds", "simulated_annealing",
]
