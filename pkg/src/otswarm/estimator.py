"""scikit-learn style wrapper: fit an exploration to a reference point cloud."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .agent import MotionParams
from .comms import CommConfig
from .distribution import WeightedPointSet
from .metrics import assumption_sources
from .planner import PlannerParams
from .scenario import ScenarioConfig
from .sim import simulate
from .transport import wasserstein1


def check_points(X, name="X") -> np.ndarray:
    """Validate a 2-D point array of shape (n, 2)."""
    X = check_array(X, dtype=np.float64, ensure_min_samples=1, input_name=name)
    if X.shape[1] != 2:
        raise ValueError(f"{name} must have exactly 2 columns, got {X.shape[1]}")
    return X


def check_sample_weight(sample_weight, n: int) -> np.ndarray:
    if sample_weight is None:
        return np.full(n, 1.0 / n)
    w = check_array(sample_weight, ensure_2d=False, dtype=np.float64, input_name="sample_weight")
    if w.shape != (n,):
        raise ValueError(f"sample_weight has shape {w.shape}, expected ({n},)")
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("sample_weight must be nonnegative with a positive sum")
    return w / w.sum()


class OTExplorer(BaseEstimator):
    """Decentralized multi-agent exploration of a weighted reference point set.

    Parameters
    ----------
    initial_positions : array-like of shape (n_agents, 2), default=None
        Agent start positions. ``None`` starts a single agent at the
        weighted centroid of the reference points.
    n_steps : int, default=100
        Step budget ``M`` per agent; each step deposits ``1/M`` mass.
    horizon : int, default=3
        Number of candidate points ordered by the planner (``h``).
    r0, delta : float, default=1.0
        Initial search radius and its increment.
    u_max, dt : float, default=1.0
        Speed limit and timestep of the first-order motion model.
    r_comm : float, default=0.0
        Communication range (inclusive).
    multi_hop : bool, default=True
        Merge whole connected components instead of single edges.
    merge_timing : {"timestep", "per_agent"}, default="timestep"
        When ledgers are exchanged within a timestep.

    Attributes
    ----------
    reference_ : WeightedPointSet
    trace_ : SimTrace
    duration_ : int
    trajectories_ : list of ndarray of shape (steps + 1, 2)
    upper_bound_ : float
        Global Wasserstein upper bound at termination.
    """

    def __init__(self, initial_positions=None, n_steps=100, horizon=3, r0=1.0, delta=1.0,
                 u_max=1.0, dt=1.0, r_comm=0.0, multi_hop=True, merge_timing="timestep"):
        self.initial_positions = initial_positions
        self.n_steps = n_steps
        self.horizon = horizon
        self.r0 = r0
        self.delta = delta
        self.u_max = u_max
        self.dt = dt
        self.r_comm = r_comm
        self.multi_hop = multi_hop
        self.merge_timing = merge_timing

    def _config(self, X, w) -> ScenarioConfig:
        if self.initial_positions is None:
            starts = [tuple(w @ X)]
        else:
            starts = [tuple(p) for p in check_points(self.initial_positions, "initial_positions")]
        return ScenarioConfig(
            domain=None,
            mixture=[],
            initial_positions=starts,
            M=int(self.n_steps),
            N=len(X),
            planner=PlannerParams(h=int(self.horizon), r0=self.r0, delta=self.delta),
            motion=MotionParams(u_max=self.u_max, dt=self.dt),
            comm=CommConfig(r_comm=self.r_comm, multi_hop=self.multi_hop,
                            merge_timing=self.merge_timing),
        )

    def fit(self, X, y=None, sample_weight=None):
        X = check_points(X)
        w = check_sample_weight(sample_weight, len(X))
        self.n_features_in_ = 2
        self.reference_ = WeightedPointSet(X, w)
        config = self._config(X, w)
        self.trace_ = simulate(self.reference_, config)
        self.duration_ = self.trace_.duration
        hist, cur, steps = self.trace_.histories(config.n_agents, self.duration_)
        starts = np.asarray(config.initial_positions)
        self.trajectories_ = [np.vstack([starts[k], *hist[k]]) if hist[k] else starts[k][None]
                              for k in range(config.n_agents)]
        self._robot_points = assumption_sources(hist, cur, steps, config.M)
        self.upper_bound_ = self.trace_.summary["final_ub_global"]
        return self

    def robot_points(self) -> WeightedPointSet:
        """Visited positions with mass ``1/M`` plus unspent mass at the final positions."""
        check_is_fitted(self, "trace_")
        return self._robot_points.copy()

    def score(self, X, y=None, sample_weight=None) -> float:
        """Negative exact Wasserstein-1 distance from the robot points to ``X``."""
        check_is_fitted(self, "trace_")
        X = check_points(X)
        w = check_sample_weight(sample_weight, len(X))
        return -wasserstein1(self._robot_points, WeightedPointSet(X, w))
