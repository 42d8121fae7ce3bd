"""Receding-horizon goal selection over the weighted sample-point ledger."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np

from .distribution import WeightedPointSet
from .transport import DEPLETION_EPS


@dataclass(frozen=True)
class PlannerParams:
    h: int = 3
    r0: float = 1.0
    delta: float = 1.0
    h_cap: int = 6

    def __post_init__(self):
        if not (self.r0 > 0 and self.delta > 0):
            raise ValueError("r0 and delta must be positive")
        if self.h < 1:
            raise ValueError(f"horizon must be at least 1, got {self.h}")
        if self.h > self.h_cap:
            raise ValueError(f"horizon {self.h} exceeds cap {self.h_cap}")
        if self.h_cap > 6:
            warnings.warn(
                f"h_cap={self.h_cap}: enumeration grows as h!, expect slow planning",
                RuntimeWarning, stacklevel=2,
            )


@dataclass(frozen=True)
class CandidateSet:
    indices: tuple[int, ...]
    radius: float


def find_candidates(pos, ledger: WeightedPointSet, params: PlannerParams) -> CandidateSet:
    """Grow a search circle from ``r0`` in steps of ``delta`` until it holds
    ``h`` positive-weight points (or all of them, if fewer remain).

    The radius is the smallest ``r0 + k*delta`` that suffices; when the last
    step overshoots and more than ``h`` points qualify, the ``h`` nearest are
    kept with ties going to the lower index.
    """
    live = np.flatnonzero(ledger.weights > DEPLETION_EPS)
    if live.size == 0:
        raise ValueError("ledger is fully depleted")
    p = np.asarray(pos, dtype=float)
    pts = ledger.points[live]
    dist = np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1])
    order = np.lexsort((live, dist))
    want = min(params.h, live.size)
    reach = float(dist[order[want - 1]])

    k = max(0, math.ceil((reach - params.r0) / params.delta))
    while params.r0 + k * params.delta < reach:
        k += 1
    while k > 0 and params.r0 + (k - 1) * params.delta >= reach:
        k -= 1
    radius = params.r0 + k * params.delta
    return CandidateSet(tuple(int(live[i]) for i in order[:want]), radius)


def sequence_cost(pos, sequence, ledger: WeightedPointSet) -> float:
    """Path length from ``pos`` through ``sequence``, each leg divided by the
    current weight of the point it arrives at."""
    if len(sequence) == 0:
        raise ValueError("empty sequence")
    if len(set(sequence)) != len(sequence):
        raise ValueError(f"sequence repeats an index: {list(sequence)}")
    w = ledger.weights[list(sequence)]
    if np.any(w <= 0):
        raise ValueError("sequence visits a point with nonpositive weight")
    prev = np.asarray(pos, dtype=float)
    total = 0.0
    for j, wj in zip(sequence, w):
        y = ledger.points[j]
        total += math.hypot(y[0] - prev[0], y[1] - prev[1]) / float(wj)
        prev = y
    return total


@lru_cache(maxsize=None)
def _permutation_table(c: int) -> np.ndarray:
    # itertools yields permutations of range(c) in lexicographic order
    return np.array(list(permutations(range(c))), dtype=np.intp).reshape(-1, c)


def sequence_costs(pos, candidates: CandidateSet, ledger: WeightedPointSet):
    """Costs of every ordering of the candidates, in lexicographic order of
    the (sorted) index sequences. Returns ``(orderings, costs)``."""
    idx = np.array(sorted(candidates.indices), dtype=np.intp)
    pts = ledger.points[idx]
    w = ledger.weights[idx]
    if np.any(w <= 0):
        raise ValueError("candidate with nonpositive weight")
    p = np.asarray(pos, dtype=float)
    first = np.hypot(pts[:, 0] - p[0], pts[:, 1] - p[1]) / w
    legs = np.hypot(pts[:, None, 0] - pts[None, :, 0],
                    pts[:, None, 1] - pts[None, :, 1]) / w[None, :]
    perms = _permutation_table(len(idx))
    costs = first[perms[:, 0]]
    for s in range(1, perms.shape[1]):
        costs = costs + legs[perms[:, s - 1], perms[:, s]]
    return idx[perms], costs


def select_goal(pos, candidates: CandidateSet, ledger: WeightedPointSet):
    """Return ``(goal, best_sequence, best_cost)`` over all candidate orderings.

    The goal is the first point of the cheapest ordering; among equal costs
    the lexicographically smallest index sequence wins.
    """
    if not candidates.indices:
        raise ValueError("empty candidate set")
    orderings, costs = sequence_costs(pos, candidates, ledger)
    best = int(np.argmin(costs))
    seq = [int(j) for j in orderings[best]]
    return ledger.points[seq[0]].copy(), seq, float(costs[best])
