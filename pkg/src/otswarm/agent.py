"""Agent state, first-order motion, and the deposit/weight-update step."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distribution import WeightedPointSet
from .transport import DEPLETION_EPS, TransportPlan, solve_greedy_step


@dataclass(frozen=True)
class MotionParams:
    u_max: float = 1.0
    dt: float = 1.0

    def __post_init__(self):
        if not (self.u_max > 0 and self.dt > 0):
            raise ValueError("u_max and dt must be positive")

    @property
    def reach(self) -> float:
        return self.u_max * self.dt


@dataclass
class UBState:
    """Running sum of this agent's step costs plus what it last heard from others."""

    accumulated: float = 0.0
    neighbor_accumulated: dict[int, float] = field(default_factory=dict)
    neighbor_positions: dict[int, np.ndarray] = field(default_factory=dict)
    neighbor_seen_at: dict[int, int] = field(default_factory=dict)


@dataclass
class AgentState:
    id: int
    pos: np.ndarray
    M: int
    ledger: WeightedPointSet
    start: np.ndarray = None
    history: list[np.ndarray] = field(default_factory=list)
    steps_taken: int = 0
    stepcost_history: list[float] = field(default_factory=list)
    finished: bool = False
    ub: UBState = field(default_factory=UBState)

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float).reshape(2).copy()
        if self.start is None:
            self.start = self.pos.copy()
        if int(self.M) < 1:
            raise ValueError(f"M must be positive, got {self.M}")
        self.M = int(self.M)
        self.finished = self.depleted

    @classmethod
    def spawn(cls, id: int, pos, M: int, reference: WeightedPointSet) -> AgentState:
        return cls(id=id, pos=pos, M=M, ledger=reference.copy())

    @property
    def deposit_mass(self) -> float:
        return 1.0 / self.M

    @property
    def remaining_mass(self) -> float:
        """Mass still riding with the agent: ``(M - t) / M``, never negative."""
        return max(self.M - self.steps_taken, 0) / self.M

    @property
    def depleted(self) -> bool:
        return bool(np.all(self.ledger.weights <= DEPLETION_EPS))

    @property
    def ledger_total(self) -> float:
        return self.ledger.total


def step_motion(pos, goal, params: MotionParams) -> np.ndarray:
    """One move toward ``goal`` at speed ``u_max``; lands on the goal if it is within reach."""
    pos = np.asarray(pos, dtype=float)
    goal = np.asarray(goal, dtype=float)
    dx, dy = goal[0] - pos[0], goal[1] - pos[1]
    dist = math.hypot(dx, dy)
    if dist <= params.reach:
        return goal.copy()
    s = params.reach / dist
    new = np.array([pos[0] + s * dx, pos[1] + s * dy])
    # far from the origin one ulp can exceed the tolerance; back off toward pos
    while math.hypot(new[0] - pos[0], new[1] - pos[1]) > params.reach:
        new = np.nextafter(new, pos)
    return new


def deposit_and_update(agent: AgentState) -> TransportPlan:
    """Deposit ``1/M`` from the agent's current position into its own ledger.

    The plan's column masses are subtracted from the ledger, the plan cost is
    appended to the step-cost history and the running bound sum, and the
    agent is marked finished once its ledger is depleted. At the final step
    the deposit is clamped to whatever mass the ledger still holds.
    """
    if agent.finished:
        raise RuntimeError(f"agent {agent.id} is finished and cannot deposit")
    plan = solve_greedy_step(agent.pos, agent.deposit_mass, agent.ledger, clamp=True)
    w = agent.ledger.weights
    for _, j, mass in plan.entries:
        left = w[j] - mass
        w[j] = 0.0 if left <= DEPLETION_EPS else left
    agent.history.append(agent.pos.copy())
    agent.steps_taken += 1
    agent.stepcost_history.append(plan.cost)
    agent.ub.accumulated += plan.cost
    agent.finished = agent.depleted
    return plan
