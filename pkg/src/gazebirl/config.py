"""Experiment configuration file (JSON).

Every key is optional; omitted keys take the defaults below::

    {
      "table": {"bounds": [0, 0, 1.0, 0.6], "radii": {"bowl": 0.1, "plate": 0.1}, "min_sep": 0.25},
      "grid_resolution": 20,
      "offset_scale": 1.5,
      "width_scale": 1.0,
      "birl": {"confidence": 10, "prior_scale": 1.0, "chain_length": 20000,
               "burn_in": 5000, "proposal_step": 0.1},
      "demo_counts": [5, 1],
      "profiles": {"kt": {"base": 1, "dominance": 2, "switches_per_demo": 24},
                   "video": {"base": 1, "dominance": 4, "switches_per_demo": 2}},
      "instructions": [["bowl", "right"], ["plate", "left"]],
      "n_configs": 100,
      "seed": 0,
      "noise_sd": 0.01,
      "gaze_budget_ms": 5000,
      "restarts": 32,
      "estimator": "map",
      "demo_scene": "ambiguous",
      "jobs": 1
    }

``demo_scene`` is ``"ambiguous"`` (side-by-side objects whose facing kernels
coincide) or ``"in_config"`` (demonstrate in each evaluation configuration).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .birl import BirlConfig
from .reward import Instruction
from .sim import DEFAULT_BOUNDS, DEFAULT_RADII, PROFILES, GazeProfile


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TableSettings:
    bounds: tuple[float, float, float, float] = DEFAULT_BOUNDS
    radii: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_RADII))
    min_sep: float = 0.25


@dataclass(frozen=True)
class ExperimentConfig:
    table: TableSettings = field(default_factory=TableSettings)
    grid_resolution: int = 20
    offset_scale: float = 1.5
    width_scale: float = 1.0
    birl: BirlConfig = field(default_factory=BirlConfig)
    demo_counts: tuple[int, ...] = (5, 1)
    profiles: dict[str, GazeProfile] = field(default_factory=lambda: {k: PROFILES[k] for k in ("kt", "video")})
    instructions: tuple[Instruction, ...] = (Instruction("bowl", "right"), Instruction("plate", "left"))
    n_configs: int = 100
    seed: int = 0
    noise_sd: float = 0.01
    gaze_budget_ms: float = 5000.0
    restarts: int = 32
    estimator: str = "map"
    demo_scene: str = "ambiguous"
    jobs: int = 1

    def __post_init__(self):
        if self.n_configs < 1:
            raise ConfigError("n_configs must be at least 1")
        if not self.demo_counts or any(n < 1 for n in self.demo_counts):
            raise ConfigError("demo_counts must be positive")
        if self.grid_resolution < 2:
            raise ConfigError("grid_resolution must be at least 2")
        if self.restarts < 1 or self.jobs < 1:
            raise ConfigError("restarts and jobs must be at least 1")
        if self.demo_scene not in ("ambiguous", "in_config"):
            raise ConfigError("demo_scene must be 'ambiguous' or 'in_config'")
        if self.estimator not in ("map", "mean"):
            raise ConfigError("estimator must be 'map' or 'mean'")
        if len(self.table.radii) != 2 and self.demo_scene == "ambiguous":
            raise ConfigError("the ambiguous demonstration scene needs exactly two objects")
        for ins in self.instructions:
            if ins.reference not in self.table.radii:
                raise ConfigError(f"instruction references unknown object {ins.reference!r}")
            if ins.side not in ("left", "right"):
                raise ConfigError(f"instruction side must be left or right, got {ins.side!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["table"]["bounds"] = list(self.table.bounds)
        d["birl"].pop("seed")
        d["birl"].pop("use_gaze")
        d["demo_counts"] = list(self.demo_counts)
        d["instructions"] = [list(i) for i in self.instructions]
        d["profiles"] = {k: {"base": p.base, "dominance": p.dominance, "switches_per_demo": p.switches_per_demo} for k, p in self.profiles.items()}
        return d


def _check_keys(d: dict, allowed, where: str):
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def config_from_dict(d: dict) -> ExperimentConfig:
    top = {f.name for f in fields(ExperimentConfig)}
    _check_keys(d, top, "config")
    kw: dict = {}
    for key, value in d.items():
        if key == "table":
            _check_keys(value, {"bounds", "radii", "min_sep"}, "table")
            t = TableSettings()
            kw["table"] = TableSettings(
                bounds=tuple(float(v) for v in value.get("bounds", t.bounds)),
                radii={k: float(v) for k, v in value.get("radii", t.radii).items()},
                min_sep=float(value.get("min_sep", t.min_sep)),
            )
        elif key == "birl":
            allowed = {"confidence", "prior_scale", "chain_length", "burn_in", "proposal_step"}
            _check_keys(value, allowed, "birl")
            try:
                kw["birl"] = BirlConfig(**value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"birl: {e}") from None
        elif key == "profiles":
            profiles = {}
            for name, p in value.items():
                if isinstance(p, str):
                    p = PROFILES[p].__dict__
                _check_keys(p, {"name", "base", "dominance", "switches_per_demo"}, f"profile {name!r}")
                profiles[name] = GazeProfile(name, float(p["base"]), float(p["dominance"]), int(p["switches_per_demo"]))
            kw["profiles"] = profiles
        elif key == "instructions":
            kw["instructions"] = tuple(Instruction(str(r), str(s)) for r, s in value)
        elif key == "demo_counts":
            kw["demo_counts"] = tuple(int(v) for v in value)
        else:
            kw[key] = value
    try:
        return ExperimentConfig(**kw)
    except TypeError as e:
        raise ConfigError(str(e)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return config_from_dict(data)
