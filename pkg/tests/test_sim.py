import dataclasses
import math

import numpy as np
import pytest
from helpers import config, line, random_case
from hypothesis import given, settings, strategies as st

from otswarm import sim
from otswarm.comms import exchange
from otswarm.scenario import load_config
from otswarm.sim import first_divergence, load_trace, replay_check, run, simulate, write_trace


@pytest.mark.parametrize("timing", ["timestep", "per_agent"])
def test_two_agents_on_a_line_finish_in_half_the_budget(timing):
    ref = line([0, 1, 2, 3])
    cfg = config([(0.0, 0.0), (3.0, 0.0)], M=4, N=4, h=1, u_max=1.0, r_comm=10.0,
                 merge_timing=timing)
    trace = simulate(ref, cfg)
    assert trace.duration == 2
    assert trace.summary["steps_per_agent"] == [2, 2]
    assert trace.summary["duration_bounds"] == [2, 4]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_single_agent_duration_is_budget(seed):
    ref, cfg = random_case(np.random.default_rng(seed), n_agents=1)
    assert simulate(ref, cfg).duration == cfg.M


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), timing=st.sampled_from(["timestep", "per_agent"]),
       multi_hop=st.booleans(), relay=st.booleans())
def test_duration_bracketed(seed, timing, multi_hop, relay):
    rng = np.random.default_rng(seed)
    ref, cfg = random_case(rng, n_agents=int(rng.integers(2, 4)), merge_timing=timing,
                           multi_hop=multi_hop, finished_relay=relay)
    trace = simulate(ref, cfg)
    assert math.ceil(cfg.M / cfg.n_agents) <= trace.duration <= cfg.M


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ledgers_stay_in_unit_interval_and_shrink(seed):
    ref, cfg = random_case(np.random.default_rng(seed), r_comm=8.0)
    last = {}

    def observe(t, agents):
        for a in agents:
            assert -1e-12 <= a.ledger_total <= 1.0 + 1e-12
            if a.id in last:
                assert np.all(a.ledger.weights <= last[a.id])
            last[a.id] = a.ledger.weights.copy()

    simulate(ref, cfg, observer=observe)


@pytest.mark.parametrize("seed", range(15))
def test_full_comm_ledgers_agree_after_each_exchange(seed, monkeypatch):
    rounds = []

    def checked_exchange(agents, cfg, t=0):
        events = exchange(agents, cfg, t)
        for a in agents[1:]:
            assert a.ledger.weights.tobytes() == agents[0].ledger.weights.tobytes()
        rounds.append(t)
        return events

    monkeypatch.setattr(sim, "exchange", checked_exchange)
    ref, cfg = random_case(np.random.default_rng(seed), n_agents=3, r_comm=100.0)
    trace = sim.simulate(ref, cfg)
    assert len(rounds) == trace.duration + 1


def test_rerun_is_byte_identical():
    cfg = load_config("desk")
    cfg.M, cfg.N = 40, 30
    a, b = run(cfg), run(cfg)
    assert a.tables() == b.tables()
    assert a.summary == b.summary
    assert replay_check(a, cfg)


def test_tampered_position_is_detected():
    cfg = load_config("desk")
    cfg.M, cfg.N = 20, 20
    trace = run(cfg)
    k = 7
    trace.steps[k] = dataclasses.replace(trace.steps[k], x=trace.steps[k].x + 1e-9)
    assert not replay_check(trace, cfg)
    diff = first_divergence(run(cfg).tables(), trace.tables())
    assert diff[0] == "trajectories.csv" and diff[1] == k + 1


def test_trace_files_roundtrip(tmp_path):
    cfg = load_config("desk")
    cfg.M, cfg.N, cfg.exact_cadence = 25, 20, 5
    trace = run(cfg)
    write_trace(trace, tmp_path)
    back = load_trace(tmp_path)
    assert back.tables() == trace.tables()
    assert back.digest() == trace.summary["trace_digest"]
    assert any(m.exact_w is not None for m in back.metrics)


def test_summary_contents():
    ref = line([0, 1, 2])
    trace = simulate(ref, config([(0.0, 0.0)], M=3, N=3))
    s = trace.summary
    assert s["duration"] == 3 and s["steps_per_agent"] == [3]
    assert s["rng"].startswith("numpy.PCG64")
    assert s["final_ub_self"][0] == pytest.approx(s["step_cost_totals"][0])
    assert s["initial_ub_self"][0] == pytest.approx(1.0)
    first = [r for r in trace.steps if r.t == 0]
    assert first[0].goal_x is None and first[0].step_cost is None
