"""Exploration efficiency: the recursive Wasserstein upper bound and the exact check."""

from __future__ import annotations

import numpy as np

from .distribution import WeightedPointSet
from .transport import DEFAULT_CELL_CAP, CapExceededError, TransportProblem, solve_exact

SCOPES = ("self", "neighborhood", "global")


def residual_cost(pos, ledger: WeightedPointSet) -> float:
    """Cost of shipping everything left in ``ledger`` from a single position."""
    p = np.asarray(pos, dtype=float)
    d = np.hypot(ledger.points[:, 0] - p[0], ledger.points[:, 1] - p[1])
    return float(ledger.weights @ d)


def upper_bound(agent, scope: str = "self", agents=None, t: int | None = None):
    """Upper bound on the agent's Wasserstein distance at its current state.

    The bound is the sum of already-paid step costs (kept incrementally) plus
    the cost of sending the remaining ledger mass from the current position.

    ``self`` uses this agent only. ``neighborhood`` adds the accumulated costs
    and positions other agents reported at their last contact, paired with
    this agent's ledger; when ``t`` is given the result is returned as
    ``(value, stale)`` with ``stale`` true if any contact predates ``t``.
    ``global`` sums the exact per-agent terms over ``agents`` and is the
    omniscient harness metric.
    """
    if scope == "self":
        return agent.ub.accumulated + residual_cost(agent.pos, agent.ledger)
    if scope == "global":
        if agents is None:
            raise ValueError("global scope needs the full agent list")
        return float(sum(a.ub.accumulated + residual_cost(a.pos, a.ledger) for a in agents))
    if scope == "neighborhood":
        ub = agent.ub
        value = ub.accumulated + residual_cost(agent.pos, agent.ledger)
        for q, acc in sorted(ub.neighbor_accumulated.items()):
            value += acc + residual_cost(ub.neighbor_positions[q], agent.ledger)
        if t is None:
            return value
        stale = any(seen < t for seen in ub.neighbor_seen_at.values())
        return value, stale
    raise ValueError(f"unknown scope {scope!r}; expected one of {SCOPES}")


def record_contacts(agents, t: int) -> None:
    """Share accumulated step costs and positions among agents that just merged."""
    for a in agents:
        for b in agents:
            if a is b:
                continue
            a.ub.neighbor_accumulated[b.id] = b.ub.accumulated
            a.ub.neighbor_positions[b.id] = b.pos.copy()
            a.ub.neighbor_seen_at[b.id] = t


def assumption_sources(histories, currents, steps, M: int) -> WeightedPointSet:
    """Robot-point masses under the remaining-weight assumption.

    Every visited position holds ``1/M``; the current position holds the
    unspent ``(M - t)/M``. With several agents each agent's masses are scaled
    by ``1/n_a`` so the total is one.
    """
    n_a = len(currents)
    pts, wts = [], []
    for hist, cur, t in zip(histories, currents, steps):
        for x in hist:
            pts.append(x)
            wts.append(1.0 / M / n_a)
        rest = max(M - t, 0) / M / n_a
        if rest > 0:
            pts.append(cur)
            wts.append(rest)
    return WeightedPointSet(np.asarray(pts, dtype=float).reshape(-1, 2), np.asarray(wts))


def exact_wasserstein_check(agents, reference: WeightedPointSet,
                            cap: int = DEFAULT_CELL_CAP) -> float:
    """Exact transport cost between the agents' robot points and the reference.

    Desk-scale only; raises ``CapExceededError`` past ``cap`` cells.
    """
    agents = list(agents)
    M = agents[0].M
    sources = assumption_sources(
        [a.history for a in agents], [a.pos for a in agents],
        [a.steps_taken for a in agents], M,
    )
    if len(sources) * len(reference) > cap:
        raise CapExceededError(
            f"{len(sources)}x{len(reference)} cells exceeds cap {cap}; "
            "rely on upper_bound at this size"
        )
    targets = WeightedPointSet(reference.points, reference.weights / reference.total)
    return solve_exact(TransportProblem(sources, targets), cap=cap).cost
