import itertools
import math

import numpy as np

from otswarm import MotionParams, PlannerParams, ScenarioConfig, WeightedPointSet
from otswarm.comms import CommConfig


def pointset(points, weights=None):
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if weights is None:
        weights = np.full(len(points), 1.0 / len(points))
    return WeightedPointSet(points, np.asarray(weights, dtype=float))


def line(xs):
    return pointset([(x, 0.0) for x in xs])


def config(starts, M, N, h=3, r0=1.0, delta=1.0, u_max=1.0, dt=1.0, r_comm=0.0,
           multi_hop=True, merge_timing="timestep", exact_cadence=0, finished_relay=True):
    return ScenarioConfig(
        domain=None, mixture=[], initial_positions=starts, M=M, N=N,
        planner=PlannerParams(h=h, r0=r0, delta=delta),
        motion=MotionParams(u_max=u_max, dt=dt),
        comm=CommConfig(r_comm=r_comm, multi_hop=multi_hop, merge_timing=merge_timing),
        exact_cadence=exact_cadence, finished_relay=finished_relay,
    )


def random_case(rng, n_agents=None, max_M=30, max_N=30, side=20.0, **overrides):
    """A small random scenario: (reference, config)."""
    n_a = n_agents or int(rng.integers(1, 4))
    N = int(rng.integers(2, max_N + 1))
    M = int(rng.integers(2, max_M + 1))
    ref = pointset(rng.random((N, 2)) * side)
    starts = [tuple(p) for p in rng.random((n_a, 2)) * side]
    kw = dict(h=int(rng.integers(1, 4)), u_max=float(rng.uniform(0.5, 6.0)),
              r_comm=float(rng.uniform(0.0, side / 2)))
    kw.update(overrides)
    return ref, config(starts, M, N, **kw)


def naive_best_sequence(pos, indices, points, weights):
    """Plain enumeration of every ordering; ties go to the lexicographically first.

    Returns ``(best ordering, best cost, runner-up cost)``.
    """
    scored = []
    for perm in itertools.permutations(sorted(indices)):
        cost, prev = 0.0, tuple(pos)
        for j in perm:
            cost += math.dist(prev, points[j]) / weights[j]
            prev = tuple(points[j])
        scored.append((cost, perm))
    scored.sort()
    runner_up = scored[1][0] if len(scored) > 1 else math.inf
    return scored[0][1], scored[0][0], runner_up


def linprog_w1(src, sm, dst, dm):
    """Balanced Euclidean transport cost through scipy's HiGHS, as a separate route."""
    from scipy.optimize import linprog

    src, dst = np.asarray(src, float).reshape(-1, 2), np.asarray(dst, float).reshape(-1, 2)
    m, n = len(src), len(dst)
    C = np.linalg.norm(src[:, None] - dst[None], axis=2)
    A = np.zeros((m + n, m * n))
    for i in range(m):
        A[i, i * n:(i + 1) * n] = 1
    for j in range(n):
        A[m + j, j::n] = 1
    return linprog(C.ravel(), A_eq=A, b_eq=np.r_[sm, dm], method="highs").fun


def linprog_step(pos, deposit, points, weights):
    """min sum_j pi_j |x - y_j|  s.t. sum_j pi_j = deposit, 0 <= pi_j <= min(n_j, deposit)."""
    from scipy.optimize import linprog

    d = np.linalg.norm(np.asarray(points, float) - np.asarray(pos, float), axis=1)
    bounds = [(0.0, min(w, deposit)) for w in weights]
    return linprog(d, A_eq=[np.ones(len(d))], b_eq=[deposit], bounds=bounds,
                   method="highs").fun


def random_step_instance(rng, max_n=20):
    n = int(rng.integers(1, max_n + 1))
    pts = rng.random((n, 2)) * 10
    if rng.random() < 0.3:
        # duplicated distances exercise tie-breaking
        pts[rng.integers(n)] = pts[0]
    w = rng.random(n) * (rng.random(n) < 0.8)
    if w.sum() == 0:
        w[0] = 0.5
    w = w / w.sum()
    M = int(rng.integers(1, 40))
    deposit = min(1.0 / M, float(w.sum()))
    pos = rng.random(2) * 10
    return pos, deposit, pointset(pts, w)
