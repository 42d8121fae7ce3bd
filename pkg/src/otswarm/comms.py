"""Range-limited contact detection and min-merge of agent ledgers.

Ledger weights only ever go down, so the elementwise minimum is a
semilattice meet: merging is idempotent, commutative and associative, and
merging a whole connected component at once equals repeating the pairwise
rule until nothing changes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MERGE_TIMINGS = ("timestep", "per_agent")


@dataclass(frozen=True)
class CommConfig:
    """``merge_timing`` is ``"timestep"`` (one exchange round before anyone
    moves) or ``"per_agent"`` (each agent exchanges right before its own
    planning turn, so it sees deposits made earlier in the same timestep)."""

    r_comm: float = 0.0
    multi_hop: bool = True
    merge_timing: str = "timestep"

    def __post_init__(self):
        if self.r_comm < 0:
            raise ValueError(f"r_comm must be nonnegative, got {self.r_comm}")
        if self.merge_timing not in MERGE_TIMINGS:
            raise ValueError(f"merge_timing must be one of {MERGE_TIMINGS}, got {self.merge_timing!r}")


@dataclass(frozen=True)
class MergeEvent:
    t: int
    participants: tuple[int, ...]
    entries_changed: int

    def __post_init__(self):
        if len(self.participants) < 2:
            raise ValueError("a merge needs at least two participants")

    def to_dict(self) -> dict:
        return {"t": self.t, "participants": list(self.participants),
                "changed": self.entries_changed}


def comm_graph(positions, cfg: CommConfig) -> list[tuple[int, int]]:
    """Edges ``(k, q)``, ``k < q``, for every pair within ``r_comm`` (boundary inclusive)."""
    pts = np.asarray(positions, dtype=float).reshape(-1, 2)
    edges = []
    for k in range(len(pts)):
        for q in range(k + 1, len(pts)):
            if np.hypot(*(pts[k] - pts[q])) <= cfg.r_comm:
                edges.append((k, q))
    return edges


def components(n: int, edges) -> list[list[int]]:
    """Connected components with two or more members, each sorted, ordered by smallest member."""
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    groups: dict[int, list[int]] = {}
    for a in range(n):
        groups.setdefault(find(a), []).append(a)
    return [g for _, g in sorted(groups.items()) if len(g) > 1]


def merge_ledgers(agents, t: int = 0) -> MergeEvent:
    """Set every participant's ledger to the elementwise minimum over all of them.

    ``entries_changed`` counts ledger indices where at least one participant's
    value went down.
    """
    agents = list(agents)
    if len(agents) < 2:
        raise ValueError("a merge needs at least two agents")
    sizes = {len(a.ledger) for a in agents}
    if len(sizes) != 1:
        raise ValueError(f"ledgers differ in size: {sorted(sizes)}")
    stack = np.vstack([a.ledger.weights for a in agents])
    low = stack.min(axis=0)
    changed = int(np.count_nonzero((stack != low[None, :]).any(axis=0)))
    for a in agents:
        a.ledger.weights[:] = low
    return MergeEvent(t, tuple(sorted(a.id for a in agents)), changed)


def exchange(agents, cfg: CommConfig, t: int = 0) -> list[MergeEvent]:
    """Run one communication round over ``agents`` (a list indexed by position).

    With ``multi_hop`` each connected component merges as a unit; otherwise
    each edge is merged once, in ascending id order.
    """
    edges = comm_graph([a.pos for a in agents], cfg)
    if cfg.multi_hop:
        groups = components(len(agents), edges)
    else:
        groups = [list(e) for e in edges]
    return [merge_ledgers([agents[i] for i in g], t) for g in groups]


def exchange_with(agents, k: int, cfg: CommConfig, t: int = 0) -> list[MergeEvent]:
    """Exchange round seen from ``agents[k]`` only: its component (or, without
    multi-hop, each direct neighbour in id order)."""
    edges = comm_graph([a.pos for a in agents], cfg)
    if cfg.multi_hop:
        groups = [g for g in components(len(agents), edges) if k in g]
    else:
        groups = [list(e) for e in edges if k in e]
    return [merge_ledgers([agents[i] for i in g], t) for g in groups]
