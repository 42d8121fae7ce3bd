"""Decentralized multi-agent exploration driven by discrete optimal transport."""

from .agent import AgentState, MotionParams, UBState, deposit_and_update, step_motion
from .comms import CommConfig, MergeEvent, comm_graph, merge_ledgers
from .distribution import (
    GaussianComponent,
    GaussianMixture,
    WeightedPointSet,
    density_at,
    sample_reference,
)
from .estimator import OTExplorer
from .metrics import exact_wasserstein_check, upper_bound
from .planner import CandidateSet, PlannerParams, find_candidates, select_goal, sequence_cost
from .scenario import ScenarioConfig, load_config
from .sim import SimTrace, replay_check, run, simulate
from .transport import (
    TransportPlan,
    TransportProblem,
    solve_exact,
    solve_greedy_step,
    solve_step_exact,
    wasserstein1,
)

__version__ = "0.1.0"

__all__ = [
    "AgentState", "CandidateSet", "CommConfig", "GaussianComponent", "GaussianMixture",
    "MergeEvent", "MotionParams", "OTExplorer", "PlannerParams", "ScenarioConfig",
    "SimTrace", "TransportPlan", "TransportProblem", "UBState", "WeightedPointSet",
    "comm_graph", "density_at", "deposit_and_update", "exact_wasserstein_check",
    "find_candidates", "load_config", "merge_ledgers", "replay_check", "run",
    "sample_reference", "select_goal", "sequence_cost", "simulate", "solve_exact",
    "solve_greedy_step", "solve_step_exact", "step_motion", "upper_bound", "wasserstein1",
]
