"""``otswarm sample|run|validate`` command-line front end.

Exit codes: 0 success, 1 config error, 2 I/O error, 3 simulation invariant
violation, 4 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import metadata
from pathlib import Path

from .distribution import RNG_IDENTITY, sample_reference
from .metrics import assumption_sources
from .scenario import ConfigError, ScenarioConfig, config_hash, load_config
from .sim import SimulationError, first_divergence, load_trace, run, simulate, write_trace
from .transport import TransportProblem, solve_exact

log = logging.getLogger("otswarm")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SIM, EXIT_VALIDATION = 0, 1, 2, 3, 4
DOMINANCE_TOL = 1e-9
# Evenly spaced exact checks when the trace recorded none.
DEFAULT_CHECKPOINTS = 12


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("OTSWARM_THREADS", "1")))
    except ValueError:
        return 1


def _version() -> str:
    try:
        return metadata.version("otswarm")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _load(args) -> ScenarioConfig:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "exact_cadence", None) is not None:
        config.exact_cadence = args.exact_cadence
    return config


def cmd_sample(args) -> int:
    try:
        config = _load(args)
        points = sample_reference(config.build_mixture(), config.N, config.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        points.to_csv(args.out)
    except OSError as exc:
        print(f"cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {len(points)} points to {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        config = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    started = time.perf_counter()
    try:
        reference = sample_reference(config.build_mixture(), config.N, config.seed)
        trace = simulate(reference, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"simulation invariant violated: {exc}", file=sys.stderr)
        return EXIT_SIM
    elapsed = time.perf_counter() - started
    out = Path(args.out)
    try:
        paths = write_trace(trace, out)
        reference.to_csv(out / "samples.csv")
        paths.append(out / "samples.csv")
        manifest = {
            "config_hash": config_hash(config.to_dict()),
            "version": _version(),
            "rng": RNG_IDENTITY,
            "outputs": [p.name for p in paths],
            "wall_clock_s": elapsed,
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    except OSError as exc:
        print(f"cannot write outputs to {out}: {exc}", file=sys.stderr)
        return EXIT_IO
    s = trace.summary
    print(f"duration {s['duration']} (bounds {s['duration_bounds']}), "
          f"{s['merge_events']} merge events, final UB {s['final_ub_global']:.6g}")
    return EXIT_OK


def _exact_at(trace, config, reference, t):
    hist, cur, steps = trace.histories(config.n_agents, t)
    sources = assumption_sources(hist, cur, steps, config.M)
    targets = reference.copy()
    targets.weights = targets.weights / targets.total
    return solve_exact(TransportProblem(sources, targets), cap=config.exact_cap).cost


def validate_trace(trace_dir) -> list[tuple[str, bool, str]]:
    """Run every trace check; returns ``(check, passed, detail)`` rows.

    Raises ``OSError`` for missing files and ``ConfigError`` for a bad
    embedded config.
    """
    d = Path(trace_dir)
    if not (d / "summary.json").is_file():
        raise FileNotFoundError(f"{d / 'summary.json'} not found")
    results = []
    try:
        trace = load_trace(d)
    except (ValueError, KeyError, IndexError) as exc:
        return [("schema", False, f"trace files do not parse: {exc}")]
    results.append(("schema", True, "all trace files parsed"))
    config = ScenarioConfig.from_dict(trace.summary["config"])

    digest_ok = trace.digest() == trace.summary.get("trace_digest")
    results.append(("digest", digest_ok,
                    "tables match summary digest" if digest_ok else "tables differ from summary digest"))

    T = trace.summary["duration"]
    lo, hi = math.ceil(config.M / config.n_agents), config.M
    results.append(("duration", lo <= T <= hi, f"T={T}, bracket [{lo}, {hi}]"))

    reach = config.motion.reach
    last = {}
    motion_bad = None
    for r in trace.steps:
        if r.agent_id in last and r.t > 0:
            px, py = last[r.agent_id]
            if math.hypot(r.x - px, r.y - py) > reach + 1e-12:
                motion_bad = motion_bad or r.t
        last[r.agent_id] = (r.x, r.y)
    results.append(("motion", motion_bad is None,
                    "every step within u_max*dt" if motion_bad is None
                    else f"step longer than u_max*dt at t={motion_bad}"))

    reference = sample_reference(config.build_mixture(), config.N, config.seed)
    ub_at = {}
    recorded = {}
    for m in trace.metrics:
        ub_at[m.t] = m.ub_global
        if m.exact_w is not None:
            recorded[m.t] = m.exact_w
    if recorded:
        checkpoints = sorted(recorded)
    else:
        times = sorted(ub_at)
        picks = {round(k * (len(times) - 1) / (DEFAULT_CHECKPOINTS - 1))
                 for k in range(DEFAULT_CHECKPOINTS)}
        checkpoints = [times[k] for k in sorted(picks)]
    n_sources_max = config.n_agents * (config.M + 1)
    if n_sources_max * config.N > config.exact_cap:
        log.warning("exact checks skipped: %d x %d cells exceeds cap %d",
                    n_sources_max, config.N, config.exact_cap)
        results.append(("bound-dominance", True, "skipped (over exact-solver cap)"))
    else:
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            exact = dict(zip(checkpoints, pool.map(
                lambda t: _exact_at(trace, config, reference, t), checkpoints)))
        mismatch = [t for t in recorded if abs(recorded[t] - exact[t]) > 1e-9 * max(1.0, exact[t])]
        results.append(("exact-recompute", not mismatch,
                        f"{len(recorded)} recorded values reproduced" if not mismatch
                        else f"recorded exact_w differs at t={mismatch[0]}"))
        bad = [t for t in checkpoints if exact[t] > ub_at[t] + DOMINANCE_TOL]
        results.append(("bound-dominance", not bad,
                        f"{len(checkpoints)} checkpoints" if not bad
                        else f"bound dominance violated at t={bad[0]} "
                             f"(exact {exact[bad[0]]:.12g} > ub {ub_at[bad[0]]:.12g})"))

    fresh = run(config)
    diff = first_divergence(fresh.tables(), trace.tables())
    results.append(("replay", diff is None,
                    "bitwise identical rerun" if diff is None
                    else f"diverges in {diff[0]} row {diff[1]}"))
    return results


def cmd_validate(args) -> int:
    trace_dir = args.trace_dir or args.out
    if trace_dir is None:
        print("validate needs a trace directory", file=sys.stderr)
        return EXIT_IO
    try:
        results = validate_trace(trace_dir)
    except ConfigError as exc:
        print(f"config error in trace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read trace: {exc}", file=sys.stderr)
        return EXIT_IO
    width = max(len(name) for name, _, _ in results)
    for name, ok, detail in results:
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    failed = [name for name, ok, _ in results if not ok]
    if failed:
        print(f"violated: {', '.join(failed)}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otswarm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="write the reference sample points as CSV")
    p.add_argument("--config", required=True, help="scenario JSON, or a bundled name")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("run", help="run a scenario and write its trace")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--exact-cadence", type=int, dest="exact_cadence",
                   help="exact Wasserstein check every K steps (0 disables)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="re-check a trace directory")
    p.add_argument("trace_dir", nargs="?")
    p.add_argument("--out", help="trace directory (alternative to the positional)")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
