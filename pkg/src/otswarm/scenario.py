"""Scenario configuration: JSON schema, parsing, and the stable config hash."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .agent import MotionParams
from .comms import CommConfig
from .distribution import GaussianComponent, GaussianMixture
from .planner import PlannerParams
from .transport import DEFAULT_CELL_CAP

_vec2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "required": ["domain", "mixture", "agents", "M", "N", "seed"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "domain": {**_vec2, "items": {"type": "number", "exclusiveMinimum": 0}},
        "mixture": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["mean", "cov"],
                "additionalProperties": False,
                "properties": {
                    "mean": _vec2,
                    "cov": {"type": "array", "items": _vec2, "minItems": 2, "maxItems": 2},
                    "weight": {"type": "number", "minimum": 0},
                },
            },
        },
        "agents": {"type": "array", "items": _vec2, "minItems": 1},
        "M": {"type": "integer", "minimum": 1},
        "N": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "planner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "h": {"type": "integer", "minimum": 1},
                "r0": {"type": "number", "exclusiveMinimum": 0},
                "delta": {"type": "number", "exclusiveMinimum": 0},
                "h_cap": {"type": "integer", "minimum": 1},
            },
        },
        "motion": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "u_max": {"type": "number", "exclusiveMinimum": 0},
                "dt": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "comm": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "r_comm": {"type": "number", "minimum": 0},
                "multi_hop": {"type": "boolean"},
                "finished_relay": {"type": "boolean"},
                "merge_timing": {"enum": ["timestep", "per_agent"]},
            },
        },
        "metrics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "exact_cadence": {"type": "integer", "minimum": 0},
                "exact_cap": {"type": "integer", "minimum": 1},
            },
        },
    },
}


class ConfigError(ValueError):
    """Scenario file could not be parsed or failed validation."""


@dataclass
class ScenarioConfig:
    domain: tuple[float, float] | None
    mixture: list[GaussianComponent]
    initial_positions: list[tuple[float, float]]
    M: int
    N: int
    seed: int = 0
    planner: PlannerParams = field(default_factory=PlannerParams)
    motion: MotionParams = field(default_factory=MotionParams)
    comm: CommConfig = field(default_factory=CommConfig)
    finished_relay: bool = True
    exact_cadence: int = 0
    exact_cap: int = DEFAULT_CELL_CAP
    name: str = ""

    def __post_init__(self):
        if self.domain is not None:
            self.domain = (float(self.domain[0]), float(self.domain[1]))
        self.mixture = [
            c if isinstance(c, GaussianComponent)
            else GaussianComponent(c["mean"], c["cov"], c.get("weight", 1.0))
            if isinstance(c, dict) else GaussianComponent(*c)
            for c in self.mixture
        ]
        self.initial_positions = [(float(x), float(y)) for x, y in self.initial_positions]
        if not self.initial_positions:
            raise ConfigError("at least one agent is required")
        if self.M < 1 or self.N < 1:
            raise ConfigError("M and N must be positive")
        w, h = self.domain or (math.inf, math.inf)
        for x, y in self.initial_positions:
            if self.domain is not None and not (0 <= x <= w and 0 <= y <= h):
                raise ConfigError(f"initial position {(x, y)} lies outside the domain {self.domain}")

    @property
    def n_agents(self) -> int:
        return len(self.initial_positions)

    def build_mixture(self) -> GaussianMixture:
        if self.domain is None or not self.mixture:
            raise ConfigError("sampling needs a domain and at least one mixture component")
        comps = [GaussianComponent(c.mean, c.cov, c.weight) for c in self.mixture]
        return GaussianMixture(comps, self.domain)

    def to_dict(self) -> dict:
        out = {
            "domain": list(self.domain) if self.domain is not None else None,
            "mixture": [
                {"mean": c.mean.tolist(), "cov": c.cov.tolist(), "weight": c.weight}
                for c in self.mixture
            ],
            "agents": [list(p) for p in self.initial_positions],
            "M": self.M,
            "N": self.N,
            "seed": self.seed,
            "planner": {"h": self.planner.h, "r0": self.planner.r0,
                        "delta": self.planner.delta, "h_cap": self.planner.h_cap},
            "motion": {"u_max": self.motion.u_max, "dt": self.motion.dt},
            "comm": {"r_comm": self.comm.r_comm, "multi_hop": self.comm.multi_hop,
                     "merge_timing": self.comm.merge_timing,
                     "finished_relay": self.finished_relay},
            "metrics": {"exact_cadence": self.exact_cadence, "exact_cap": self.exact_cap},
        }
        if self.name:
            out["name"] = self.name
        return out

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioConfig:
        try:
            jsonschema.validate(data, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"at {where}: {exc.message}") from None
        planner = data.get("planner", {})
        motion = data.get("motion", {})
        comm = data.get("comm", {})
        metrics = data.get("metrics", {})
        try:
            return cls(
                domain=tuple(data["domain"]),
                mixture=data["mixture"],
                initial_positions=data["agents"],
                M=data["M"],
                N=data["N"],
                seed=data["seed"],
                planner=PlannerParams(**planner),
                motion=MotionParams(**motion),
                comm=CommConfig(r_comm=comm.get("r_comm", 0.0),
                                multi_hop=comm.get("multi_hop", True),
                                merge_timing=comm.get("merge_timing", "timestep")),
                finished_relay=comm.get("finished_relay", True),
                exact_cadence=metrics.get("exact_cadence", 0),
                exact_cap=metrics.get("exact_cap", DEFAULT_CELL_CAP),
                name=data.get("name", ""),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def config_hash(self) -> str:
        return config_hash(self.to_dict())


def config_hash(data: dict) -> str:
    """SHA-256 of the canonical JSON form; insensitive to key order."""
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> ScenarioConfig:
    """Read a scenario file, or a bundled scenario by name (``desk``, ``paper_fig3``)."""
    p = Path(path)
    if not p.exists() and not p.suffix:
        ref = resources.files("otswarm") / "data" / f"{p.name}.json"
        if ref.is_file():
            text = ref.read_text(encoding="utf-8")
        else:
            raise FileNotFoundError(path)
    else:
        text = p.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return ScenarioConfig.from_dict(data)
