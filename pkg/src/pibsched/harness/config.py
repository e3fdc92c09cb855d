"""Experiment configuration files (JSON) and their validation."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path

from ..baselines import PolicyKind

OUTPUT_DIR_ENV = "PIB_SCHED_OUTPUT_DIR"


class ExperimentKind(str, Enum):
    REGRET = "regret"
    BOTTLENECK = "bottleneck"
    FUSION_COUNT = "fusion-count"
    DELAYED_CAMERAS = "delayed-cameras"
    SERVERS = "servers"


# sweep axis and its unit, per experiment kind
SWEEP_AXES = {
    ExperimentKind.BOTTLENECK: "bottleneck_bps",
    ExperimentKind.FUSION_COUNT: "fused_cameras",
    ExperimentKind.DELAYED_CAMERAS: "delayed_cameras",
    ExperimentKind.SERVERS: "edge_servers",
}


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: ExperimentKind = ExperimentKind.REGRET
    name: str = "experiment"
    scenario: str | None = None  # world JSON for detection sweeps; None uses the built-in world
    channel: dict = field(default_factory=dict)  # LinkParams overrides
    network: dict = field(default_factory=dict)  # canonical_network keyword overrides
    policy: PolicyKind = PolicyKind.UCB
    compare: tuple[PolicyKind, ...] = ()  # extra policies for the server sweep
    horizon: int = 1000
    seeds: tuple[int, ...] = (0,)
    alpha: float = 1.0
    cadence: int = 50
    sweep: tuple[float, ...] = ()
    trials: int = 500
    burn_in_frac: float = 0.1
    feature_bits: float = 32_000.0  # surrogate per-camera payload before priority scaling
    deadline_s: float = 0.5  # slot deadline for the detection sweeps (2 frames per second)
    false_pos_rate: float | None = None  # overrides every camera's rate when set
    output_dir: str = "results"
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "experiment", ExperimentKind(self.experiment))
        object.__setattr__(self, "policy", PolicyKind(self.policy))
        object.__setattr__(self, "compare", tuple(PolicyKind(p) for p in self.compare))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "sweep", tuple(float(v) for v in self.sweep))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if any(b <= a for a, b in zip(self.sweep, self.sweep[1:])):
            raise ValueError("sweep values must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0.0 <= self.burn_in_frac < 1.0:
            raise ValueError("burn_in_frac must be in [0, 1)")
        if self.cadence < 0 or self.jobs < 1:
            raise ValueError("cadence must be >= 0 and jobs >= 1")
        if self.feature_bits <= 0 or self.deadline_s <= 0:
            raise ValueError("feature_bits and deadline_s must be positive")

    @property
    def sweep_axis(self) -> str | None:
        return SWEEP_AXES.get(self.experiment)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["experiment"] = self.experiment.value
        d["policy"] = self.policy.value
        d["compare"] = [p.value for p in self.compare]
        d["seeds"] = list(self.seeds)
        d["sweep"] = list(self.sweep)
        return d

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def config_from_dict(doc: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(unknown)}")
    return ExperimentConfig(**doc)


def load_config(path: str | Path, env: dict | None = None) -> ExperimentConfig:
    """Read a config file; a set output-dir environment variable replaces ``output_dir``."""
    cfg = config_from_dict(json.loads(Path(path).read_text()))
    override = (os.environ if env is None else env).get(OUTPUT_DIR_ENV)
    return replace(cfg, output_dir=override) if override else cfg


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
