"""Discrete optimal transport with Euclidean ground cost (order 1).

Two solvers live here:

* ``solve_transportation`` / ``solve_exact`` -- a transportation simplex
  (MODI potentials over a spanning-tree basis) for balanced problems. It is
  the validation oracle and certifies optimality through reduced costs.
* ``solve_greedy_step`` -- the closed-form plan for a single source with
  per-target capacities ``min(n_j, deposit)``: fill the nearest positive
  target, then the next, until the deposit is spent.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .distribution import WeightedPointSet

# Ledger weights at or below this are depleted.
DEPLETION_EPS = 1e-12

BALANCE_TOL = 1e-9
DEFAULT_CELL_CAP = 10**6


class CapExceededError(ValueError):
    """Problem too large for the exact oracle; use the upper-bound metric instead."""


@dataclass
class TransportProblem:
    sources: WeightedPointSet
    targets: WeightedPointSet

    def cost_matrix(self) -> np.ndarray:
        return pairwise_distances(self.sources.points, self.targets.points)


@dataclass
class TransportPlan:
    """Sparse plan: ``(source index, target index, mass)`` triples plus total cost.

    ``min_reduced_cost`` is filled by the exact solver as its optimality
    certificate and is ``None`` for greedy plans.
    """

    entries: list[tuple[int, int, float]]
    cost: float
    min_reduced_cost: float | None = field(default=None, compare=False)

    def row_sums(self, n_rows: int) -> np.ndarray:
        out = np.zeros(n_rows)
        for i, _, m in self.entries:
            out[i] += m
        return out

    def col_sums(self, n_cols: int) -> np.ndarray:
        out = np.zeros(n_cols)
        for _, j, m in self.entries:
            out[j] += m
        return out

    @property
    def mass(self) -> float:
        return float(sum(m for _, _, m in self.entries))

    def to_json(self) -> str:
        return json.dumps(
            {"entries": [[int(i), int(j), float(m)] for i, j, m in self.entries],
             "cost": float(self.cost)}
        )

    @classmethod
    def from_json(cls, text: str) -> TransportPlan:
        data = json.loads(text)
        return cls([(int(i), int(j), float(m)) for i, j, m in data["entries"]],
                   float(data["cost"]))


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    return np.hypot(a[:, None, 0] - b[None, :, 0], a[:, None, 1] - b[None, :, 1])


# ---------------------------------------------------------------------------
# Transportation simplex
# ---------------------------------------------------------------------------

def _initial_basis(supply, demand, cost):
    """Least-cost rule. Retires exactly one line per allocation so the
    m+n-1 basic cells always form a spanning tree (degenerate zeros included)."""
    m, n = cost.shape
    s = supply.astype(float).copy()
    d = demand.astype(float).copy()
    row_on = np.ones(m, dtype=bool)
    col_on = np.ones(n, dtype=bool)
    rows_left, cols_left = m, n
    basis = {}
    for flat in np.argsort(cost, axis=None, kind="stable"):
        if rows_left + cols_left <= 1:
            break
        i, j = divmod(int(flat), n)
        if not (row_on[i] and col_on[j]):
            continue
        x = s[i] if rows_left + cols_left == 2 else min(s[i], d[j])
        basis[(i, j)] = max(x, 0.0)
        if (s[i] <= d[j] and rows_left > 1) or cols_left == 1:
            d[j] -= s[i]
            s[i] = 0.0
            row_on[i] = False
            rows_left -= 1
        else:
            s[i] -= d[j]
            d[j] = 0.0
            col_on[j] = False
            cols_left -= 1
    return basis


def _potentials(adj, cost, m, n):
    """Dual potentials (u, v) with u_i + v_j = c_ij on every basic cell, rooted
    at row 0, plus the BFS parent and depth of every node."""
    u = np.zeros(m)
    v = np.zeros(n)
    parent = [-1] * (m + n)
    depth = [0] * (m + n)
    seen = [False] * (m + n)
    seen[0] = True
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for nb in adj[node]:
            if seen[nb]:
                continue
            seen[nb] = True
            parent[nb] = node
            depth[nb] = depth[node] + 1
            if node < m:
                v[nb - m] = cost[node, nb - m] - u[node]
            else:
                u[nb] = cost[nb, node - m] - v[node - m]
            queue.append(nb)
    if not all(seen):
        raise RuntimeError("basis is not a spanning tree")
    return u, v, parent, depth


def _cycle_path(parent, depth, start, goal):
    """Tree path from ``start`` to ``goal`` through their lowest common ancestor."""
    a, b = start, goal
    up_a, up_b = [a], [b]
    while depth[a] > depth[b]:
        a = parent[a]
        up_a.append(a)
    while depth[b] > depth[a]:
        b = parent[b]
        up_b.append(b)
    while a != b:
        a, b = parent[a], parent[b]
        up_a.append(a)
        up_b.append(b)
    return up_a + up_b[-2::-1]


def _subtree(adj, parent, top):
    nodes = [top]
    k = 0
    while k < len(nodes):
        x = nodes[k]
        nodes.extend(y for y in adj[x] if y != parent[x])
        k += 1
    return nodes


def solve_transportation(supply, demand, cost, max_iter: int | None = None) -> TransportPlan:
    """Exact balanced transportation problem for an arbitrary cost matrix.

    ``supply`` and ``demand`` must have equal totals within 1e-9; the demand
    vector is rescaled to match the supply total exactly before solving.
    """
    supply = np.asarray(supply, dtype=float).reshape(-1)
    demand = np.asarray(demand, dtype=float).reshape(-1)
    cost = np.asarray(cost, dtype=float)
    m, n = len(supply), len(demand)
    if cost.shape != (m, n):
        raise ValueError(f"cost shape {cost.shape} does not match ({m}, {n})")
    if m == 0 or n == 0:
        raise ValueError("empty transport problem")
    if np.any(supply < 0) or np.any(demand < 0):
        raise ValueError("masses must be nonnegative")
    s_tot, d_tot = supply.sum(), demand.sum()
    if abs(s_tot - d_tot) > BALANCE_TOL:
        raise ValueError(f"unbalanced problem: supply {s_tot!r} vs demand {d_tot!r}")
    if d_tot > 0:
        demand = demand * (s_tot / d_tot)

    basis = _initial_basis(supply, demand, cost)
    adj = [[] for _ in range(m + n)]
    for (i, j) in basis:
        adj[i].append(m + j)
        adj[m + j].append(i)
    u, v, parent, depth = _potentials(adj, cost, m, n)
    tol = 1e-12 * max(1.0, float(np.abs(cost).max()))
    if max_iter is None:
        max_iter = 50 * (m + n) * max(m, n) + 1000
    degenerate_run = 0

    for it in range(max_iter):
        if it and it % 500 == 0:
            # keep incremental potentials from drifting
            u, v, parent, depth = _potentials(adj, cost, m, n)
        reduced = cost - u[:, None] - v[None, :]
        if degenerate_run > m + n:
            # Bland-style fallback against cycling on degenerate pivots
            neg = np.flatnonzero(reduced.ravel() < -tol)
            if neg.size == 0:
                break
            flat = int(neg[0])
        else:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol:
                break
        p, q = divmod(flat, n)
        r = float(reduced.flat[flat])

        # cycle: entering cell (p, q), then the tree path q -> ... -> p
        path = _cycle_path(parent, depth, m + q, p)
        cells = [(b, a - m) if a >= m else (a, b - m) for a, b in zip(path[:-1], path[1:])]
        minus = cells[0::2]
        theta = min(basis[c] for c in minus)
        leaving = next(c for c in minus if basis[c] == theta)
        for k, c in enumerate(cells):
            basis[c] += -theta if k % 2 == 0 else theta
        del basis[leaving]
        basis[(p, q)] = theta
        for c in minus:
            if c in basis and basis[c] < 0:
                basis[c] = 0.0

        li, lj = leaving[0], m + leaving[1]
        child = li if parent[li] == lj else lj
        sub = _subtree(adj, parent, child)
        adj[li].remove(lj)
        adj[lj].remove(li)
        adj[p].append(m + q)
        adj[m + q].append(p)
        in_sub = set(sub)
        inner, outer = (p, m + q) if p in in_sub else (m + q, p)
        rows = [x for x in sub if x < m]
        cols = [x - m for x in sub if x >= m]
        sign = 1.0 if inner < m else -1.0
        u[rows] += sign * r
        v[cols] -= sign * r
        # re-hang the detached subtree below the entering edge
        parent[inner] = outer
        depth[inner] = depth[outer] + 1
        stack = [inner]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y != parent[x] and y in in_sub:
                    parent[y] = x
                    depth[y] = depth[x] + 1
                    stack.append(y)
        degenerate_run = degenerate_run + 1 if theta <= 0 else 0
    else:
        raise RuntimeError(f"transportation simplex did not converge in {max_iter} pivots")

    u, v, _, _ = _potentials(adj, cost, m, n)
    certificate = float((cost - u[:, None] - v[None, :]).min())
    entries = sorted((i, j, x) for (i, j), x in basis.items() if x > 0)
    total = float(sum(x * cost[i, j] for i, j, x in entries))
    return TransportPlan(entries, total, certificate)


def solve_exact(problem: TransportProblem, cap: int = DEFAULT_CELL_CAP) -> TransportPlan:
    """Optimal plan for a balanced Euclidean transport problem."""
    m, n = len(problem.sources), len(problem.targets)
    if m * n > cap:
        raise CapExceededError(
            f"{m}x{n} = {m * n} cells exceeds the exact-solver cap of {cap}; "
            "use the Wasserstein upper bound instead"
        )
    return solve_transportation(
        problem.sources.weights, problem.targets.weights, problem.cost_matrix()
    )


def wasserstein1(a: WeightedPointSet, b: WeightedPointSet, cap: int = DEFAULT_CELL_CAP) -> float:
    return solve_exact(TransportProblem(a, b), cap=cap).cost


# ---------------------------------------------------------------------------
# Single-source capacitated step
# ---------------------------------------------------------------------------

def solve_greedy_step(agent_pos, deposit_mass: float, ledger: WeightedPointSet,
                      clamp: bool = True) -> TransportPlan:
    """Spend ``deposit_mass`` from ``agent_pos`` on the nearest positive ledger points.

    Each target receives ``min(remaining deposit, its weight)``, so no entry
    exceeds ``min(n_j, deposit_mass)``. Equidistant targets are taken in
    index order. If the ledger holds less than ``deposit_mass`` and ``clamp``
    is set, everything available is deposited; otherwise that is an error.
    The source index of every entry is 0.
    """
    if deposit_mass <= 0:
        raise ValueError(f"deposit mass must be positive, got {deposit_mass}")
    w = ledger.weights
    live = np.flatnonzero(w > DEPLETION_EPS)
    if live.size == 0:
        raise ValueError("ledger is fully depleted")
    available = float(w[live].sum())
    if deposit_mass > available + DEPLETION_EPS and not clamp:
        raise ValueError(
            f"deposit {deposit_mass!r} exceeds remaining ledger mass {available!r}"
        )
    pos = np.asarray(agent_pos, dtype=float).reshape(2)
    pts = ledger.points[live]
    dist = np.hypot(pts[:, 0] - pos[0], pts[:, 1] - pos[1])
    order = np.lexsort((live, dist))

    remaining = min(float(deposit_mass), available)
    entries = []
    cost = 0.0
    for k in order:
        if remaining <= DEPLETION_EPS:
            break
        j = int(live[k])
        sent = min(remaining, float(w[j]))
        entries.append((0, j, sent))
        cost += sent * float(dist[k])
        remaining -= sent
    return TransportPlan(entries, cost)


def step_lp_problem(agent_pos, deposit_mass: float, ledger: WeightedPointSet):
    """Balanced reformulation of the capacitated single-source problem.

    Returns ``(supply, demand, cost, live)``: row 0 is the agent, row 1 a
    zero-cost slack source that absorbs unused capacity; columns are the
    positive ledger points with capacity ``min(n_j, deposit_mass)``.
    """
    w = ledger.weights
    live = np.flatnonzero(w > DEPLETION_EPS)
    caps = np.minimum(w[live], deposit_mass)
    if deposit_mass > caps.sum() + BALANCE_TOL:
        raise ValueError("deposit exceeds total capacity; problem infeasible")
    slack = max(float(caps.sum()) - deposit_mass, 0.0)
    dist = pairwise_distances(np.asarray(agent_pos, dtype=float), ledger.points[live])[0]
    cost = np.vstack([dist, np.zeros_like(dist)])
    return np.array([deposit_mass, slack]), caps, cost, live


def solve_step_exact(agent_pos, deposit_mass: float, ledger: WeightedPointSet) -> TransportPlan:
    """Exact-LP solution of the single-source step, via the transportation simplex."""
    supply, demand, cost, live = step_lp_problem(agent_pos, deposit_mass, ledger)
    full = solve_transportation(supply, demand, cost)
    entries = [(0, int(live[j]), x) for i, j, x in full.entries if i == 0]
    total = float(sum(x * cost[0, j] for i, j, x in full.entries if i == 0))
    return TransportPlan(entries, total, full.min_reduced_cost)
