"""Timestep loop: merge, plan, move, deposit; plus trace assembly and replay."""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agent import AgentState, deposit_and_update, step_motion
from .comms import MergeEvent, exchange, exchange_with
from .distribution import RNG_IDENTITY, WeightedPointSet, sample_reference
from .metrics import exact_wasserstein_check, record_contacts, upper_bound
from .planner import find_candidates, select_goal
from .scenario import ScenarioConfig
from .transport import CapExceededError

log = logging.getLogger(__name__)

TRAJECTORY_HEADER = ("t", "agent_id", "x", "y", "goal_x", "goal_y", "step_cost", "ledger_total")
PLANNER_HEADER = ("t", "agent_id", "radius", "candidates", "best_cost")
METRICS_HEADER = ("t", "agent_id", "ub_self", "ub_global", "exact_w")


class SimulationError(RuntimeError):
    """An internal invariant broke during a run."""


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


@dataclass
class StepRecord:
    t: int
    agent_id: int
    x: float
    y: float
    goal_x: float | None
    goal_y: float | None
    step_cost: float | None
    ledger_total: float
    radius: float | None = None
    n_candidates: int | None = None
    best_cost: float | None = None


@dataclass
class MetricRecord:
    t: int
    agent_id: int
    ub_self: float
    ub_global: float
    exact_w: float | None = None


@dataclass
class SimTrace:
    steps: list[StepRecord] = field(default_factory=list)
    metrics: list[MetricRecord] = field(default_factory=list)
    events: list[MergeEvent] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def duration(self) -> int:
        return self.summary["duration"]

    def tables(self) -> dict[str, list[tuple[str, ...]]]:
        """Every emitted row as text, keyed by output file name."""
        traj = [TRAJECTORY_HEADER] + [
            tuple(fmt(v) for v in (r.t, r.agent_id, r.x, r.y, r.goal_x, r.goal_y,
                                   r.step_cost, r.ledger_total))
            for r in self.steps
        ]
        plan = [PLANNER_HEADER] + [
            tuple(fmt(v) for v in (r.t, r.agent_id, r.radius, r.n_candidates, r.best_cost))
            for r in self.steps if r.radius is not None
        ]
        met = [METRICS_HEADER] + [
            tuple(fmt(v) for v in (r.t, r.agent_id, r.ub_self, r.ub_global, r.exact_w))
            for r in self.metrics
        ]
        ev = [(json.dumps(e.to_dict(), separators=(",", ":")),) for e in self.events]
        return {"trajectories.csv": traj, "planner.csv": plan,
                "metrics.csv": met, "events.jsonl": ev}

    def digest(self) -> str:
        h = hashlib.sha256()
        for name, rows in sorted(self.tables().items()):
            h.update(name.encode())
            for row in rows:
                h.update(",".join(row).encode())
                h.update(b"\n")
        return h.hexdigest()

    def histories(self, n_agents: int, until: int):
        """Per-agent visited positions, current position and step count at time ``until``."""
        hist = [[] for _ in range(n_agents)]
        cur = [None] * n_agents
        for r in self.steps:
            if r.t > until:
                continue
            if r.t == 0:
                cur[r.agent_id] = np.array([r.x, r.y])
            else:
                hist[r.agent_id].append(np.array([r.x, r.y]))
                cur[r.agent_id] = np.array([r.x, r.y])
        return hist, cur, [len(h) for h in hist]


def _check_ledgers(agents, previous, t):
    for a, before in zip(agents, previous):
        total = a.ledger_total
        if not (-1e-9 <= total <= 1.0 + 1e-9):
            raise SimulationError(f"agent {a.id} ledger total {total!r} left [0, 1] at t={t}")
        if np.any(a.ledger.weights > before + 1e-15):
            raise SimulationError(f"agent {a.id} ledger weight increased at t={t}")


def _pool(agents, config):
    return agents if config.finished_relay else [a for a in agents if not a.finished]


def _merge(events, agents, trace):
    for ev in events:
        record_contacts([agents[i] for i in ev.participants], ev.t)
        trace.events.append(ev)
        for i in ev.participants:
            agents[i].finished = agents[i].depleted


def simulate(reference: WeightedPointSet, config: ScenarioConfig, observer=None) -> SimTrace:
    """Run the exploration against an already-sampled reference point set.

    ``observer(t, agents)``, when given, is called after every exchange round
    and every agent step with the live agent list (read-only use).
    """
    agents = [AgentState.spawn(k, x0, config.M, reference)
              for k, x0 in enumerate(config.initial_positions)]
    n_a = len(agents)
    trace = SimTrace()
    reach = config.motion.reach
    per_agent = config.comm.merge_timing == "per_agent"
    guard = config.M * n_a
    state = {"exact_off": False}
    initial_ub = [upper_bound(a) for a in agents]
    notify = observer or (lambda t, agents: None)

    for a in agents:
        trace.steps.append(StepRecord(0, a.id, a.pos[0], a.pos[1], None, None, None,
                                      a.ledger_total))
    _record_metrics(trace, agents, reference, config, 0, state, final=False)

    t = 0
    while True:
        if not per_agent:
            _merge(exchange(_pool(agents, config), config.comm, t), agents, trace)
            notify(t, agents)
        previous = [a.ledger.weights.copy() for a in agents]
        stepped = False
        for a in agents:
            if per_agent:
                pool = _pool(agents, config)
                if a in pool:
                    _merge(exchange_with(pool, pool.index(a), config.comm, t), agents, trace)
                    notify(t, agents)
            if a.finished:
                continue
            if t >= guard:
                raise SimulationError(f"no termination after {guard} timesteps")
            cands = find_candidates(a.pos, a.ledger, config.planner)
            goal, _, best = select_goal(a.pos, cands, a.ledger)
            new_pos = step_motion(a.pos, goal, config.motion)
            if math.hypot(*(new_pos - a.pos)) > reach + 1e-12:
                raise SimulationError(f"agent {a.id} moved farther than u_max*dt at t={t}")
            a.pos = new_pos
            plan = deposit_and_update(a)
            stepped = True
            trace.steps.append(StepRecord(
                t + 1, a.id, a.pos[0], a.pos[1], goal[0], goal[1], plan.cost,
                a.ledger_total, cands.radius, len(cands.indices), best,
            ))
            notify(t + 1, agents)
        _check_ledgers(agents, previous, t + 1)
        if not stepped:
            # last round only merged: it replaces the metrics rows at the final time
            _record_metrics(trace, agents, reference, config, t, state, final=True)
            break
        t += 1
        _record_metrics(trace, agents, reference, config, t, state, final=False)

    trace.summary = {
        "duration": t,
        "duration_bounds": [math.ceil(config.M / n_a), config.M],
        "steps_per_agent": [a.steps_taken for a in agents],
        "initial_ub_self": initial_ub,
        "final_ub_self": [upper_bound(a) for a in agents],
        "final_ub_global": upper_bound(agents[0], "global", agents),
        "step_cost_totals": [float(sum(a.stepcost_history)) for a in agents],
        "merge_events": len(trace.events),
        "rng": RNG_IDENTITY,
        "config": config.to_dict(),
    }
    trace.summary["trace_digest"] = trace.digest()
    return trace


def _record_metrics(trace, agents, reference, config, t, state, final):
    if final:
        while trace.metrics and trace.metrics[-1].t == t:
            trace.metrics.pop()
    exact = None
    cadence = config.exact_cadence
    if cadence and not state["exact_off"] and (t % cadence == 0 or final):
        try:
            exact = exact_wasserstein_check(agents, reference, cap=config.exact_cap)
        except CapExceededError as exc:
            log.warning("exact Wasserstein checks disabled: %s", exc)
            state["exact_off"] = True
    ub_global = upper_bound(agents[0], "global", agents)
    for a in agents:
        trace.metrics.append(MetricRecord(t, a.id, upper_bound(a), ub_global, exact))


def run(config: ScenarioConfig) -> SimTrace:
    """Sample the reference from the config's mixture and run the exploration."""
    reference = sample_reference(config.build_mixture(), config.N, config.seed)
    return simulate(reference, config)


def first_divergence(expected: dict, actual: dict):
    """First differing row between two ``SimTrace.tables()`` dicts.

    Returns ``(file, row_number, expected_row, actual_row)`` or ``None``.
    """
    for name in sorted(set(expected) | set(actual)):
        a, b = expected.get(name, []), actual.get(name, [])
        for i in range(max(len(a), len(b))):
            ra = a[i] if i < len(a) else None
            rb = b[i] if i < len(b) else None
            if ra != rb:
                return name, i, ra, rb
    return None


def replay_check(trace: SimTrace, config: ScenarioConfig) -> bool:
    """Re-run ``config`` and compare every emitted row with ``trace``."""
    fresh = run(config)
    diff = first_divergence(fresh.tables(), trace.tables())
    if diff is not None:
        name, row, want, got = diff
        log.warning("replay diverges in %s row %d: expected %s, found %s", name, row, want, got)
        return False
    return True


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------

def write_trace(trace: SimTrace, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, rows in trace.tables().items():
        p = out / name
        with open(p, "w", encoding="utf-8", newline="") as fh:
            for row in rows:
                fh.write(",".join(row) + "\n")
        paths.append(p)
    p = out / "summary.json"
    p.write_text(json.dumps(trace.summary, indent=2, sort_keys=True), encoding="utf-8")
    paths.append(p)
    return paths


def _num(s, cast=float):
    return None if s == "" else cast(s)


def _read_rows(path, header):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or tuple(lines[0].split(",")) != header:
        raise ValueError(f"{path}: unexpected header, wanted {','.join(header)}")
    return [line.split(",") for line in lines[1:]]


def load_trace(trace_dir) -> SimTrace:
    """Parse a directory written by ``write_trace`` back into a ``SimTrace``."""
    d = Path(trace_dir)
    trace = SimTrace()
    trace.summary = json.loads((d / "summary.json").read_text(encoding="utf-8"))
    planner_rows = {}
    if (d / "planner.csv").exists():
        for r in _read_rows(d / "planner.csv", PLANNER_HEADER):
            planner_rows[(int(r[0]), int(r[1]))] = (_num(r[2]), _num(r[3], int), _num(r[4]))
    for r in _read_rows(d / "trajectories.csv", TRAJECTORY_HEADER):
        t, k = int(r[0]), int(r[1])
        extra = planner_rows.get((t, k), (None, None, None))
        trace.steps.append(StepRecord(t, k, float(r[2]), float(r[3]), _num(r[4]), _num(r[5]),
                                      _num(r[6]), float(r[7]), *extra))
    for r in _read_rows(d / "metrics.csv", METRICS_HEADER):
        trace.metrics.append(MetricRecord(int(r[0]), int(r[1]), float(r[2]), float(r[3]),
                                          _num(r[4])))
    for line in (d / "events.jsonl").read_text(encoding="utf-8").splitlines():
        if line.strip():
            e = json.loads(line)
            trace.events.append(MergeEvent(e["t"], tuple(e["participants"]), e["changed"]))
    return trace
