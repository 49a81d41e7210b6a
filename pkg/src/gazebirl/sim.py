"""Tabletop placement scenes, the discrete placement grid and synthetic
demonstrations with accompanying fixation times."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .reward import (
    Instruction,
    KernelLayout,
    TableConfig,
    TableObject,
    ground_truth_reward,
    maximize_reward,
)

DEFAULT_BOUNDS = (0.0, 0.0, 1.0, 0.6)
DEFAULT_RADII = {"bowl": 0.1, "plate": 0.1}
INSTRUCTIONS = (Instruction("bowl", "right"), Instruction("plate", "left"))


class InfeasibleError(RuntimeError):
    pass


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed_sequence(seed))


def sample_configurations(
    n: int,
    bounds: Sequence[float] = DEFAULT_BOUNDS,
    min_sep: float = 0.25,
    seed=0,
    radii: dict[str, float] = DEFAULT_RADII,
    max_attempts: int = 1000,
) -> list[TableConfig]:
    """Independent uniform object placements, each object fully on the table and
    pairwise center distances at least ``min_sep``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = _rng(seed)
    xmin, ymin, xmax, ymax = bounds
    configs = []
    for _ in range(n):
        for _attempt in range(max_attempts):
            objs = []
            for name, r in radii.items():
                if xmax - xmin < 2 * r or ymax - ymin < 2 * r:
                    raise InfeasibleError(f"object {name!r} of radius {r} does not fit the table")
                cx = rng.uniform(xmin + r, xmax - r)
                cy = rng.uniform(ymin + r, ymax - r)
                objs.append(TableObject(name, (float(cx), float(cy)), float(r)))
            if all(
                math.dist(a.center, b.center) >= min_sep for i, a in enumerate(objs) for b in objs[i + 1 :]
            ):
                configs.append(TableConfig(tuple(float(b) for b in bounds), tuple(objs)))
                break
        else:
            raise InfeasibleError(f"could not separate objects by {min_sep} m within {max_attempts} attempts")
    return configs


def ambiguous_configuration(
    bounds: Sequence[float] = DEFAULT_BOUNDS,
    radius: float = 0.1,
    offset_scale: float = 1.5,
    names: tuple[str, str] = ("bowl", "plate"),
) -> TableConfig:
    """Two equal objects side by side so that the right-hand kernels of the
    first coincide with the left-hand kernels of the second.

    Placing an item in the gap then satisfies both "right of ``names[0]``"
    and "left of ``names[1]``" equally well.
    """
    xmin, ymin, xmax, ymax = bounds
    half = offset_scale * radius / math.sqrt(2.0)
    mx, my = (xmin + xmax) / 2, (ymin + ymax) / 2
    left = TableObject(names[0], (mx - half, my), radius)
    right = TableObject(names[1], (mx + half, my), radius)
    return TableConfig(tuple(float(b) for b in bounds), (left, right))


@dataclass(frozen=True, eq=False)
class ActionGrid:
    resolution: int
    bounds: tuple[float, float, float, float]
    cells: np.ndarray  # (resolution**2, 2), x varying fastest

    @property
    def cell_size(self) -> tuple[float, float]:
        xmin, ymin, xmax, ymax = self.bounds
        return (xmax - xmin) / self.resolution, (ymax - ymin) / self.resolution

    def __len__(self) -> int:
        return len(self.cells)

    def nearest(self, x: Sequence[float]) -> int:
        xmin, ymin, _, _ = self.bounds
        wx, wy = self.cell_size
        col = min(max(int((x[0] - xmin) // wx), 0), self.resolution - 1)
        row = min(max(int((x[1] - ymin) // wy), 0), self.resolution - 1)
        return row * self.resolution + col


def build_action_grid(table: TableConfig, resolution: int = 20) -> ActionGrid:
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    xmin, ymin, xmax, ymax = table.bounds
    xs = xmin + (np.arange(resolution) + 0.5) * (xmax - xmin) / resolution
    ys = ymin + (np.arange(resolution) + 0.5) * (ymax - ymin) / resolution
    gx, gy = np.meshgrid(xs, ys)
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    cells.setflags(write=False)
    return ActionGrid(resolution, table.bounds, cells)


@dataclass(frozen=True)
class GazeGenConfig:
    """Fixation-share generator: Dirichlet with ``base`` concentration for every
    object and ``base * dominance`` for the instructed reference object."""

    base: float = 1.0
    dominance: float = 3.0
    budget_ms: float = 5000.0
    seed: int | Sequence[int] = 0

    def __post_init__(self):
        if self.base <= 0 or self.dominance <= 0 or self.budget_ms <= 0:
            raise ValueError("gaze generator parameters must be positive")


@dataclass(frozen=True)
class GazeProfile:
    """Named gaze-richness preset used by the experiment."""

    name: str
    base: float
    dominance: float
    switches_per_demo: int

    def generator(self, budget_ms: float, seed) -> GazeGenConfig:
        return GazeGenConfig(self.base, self.dominance, budget_ms, seed)


PROFILES = {
    "video": GazeProfile("video", base=1.0, dominance=4.0, switches_per_demo=2),
    "kt": GazeProfile("kt", base=1.0, dominance=2.0, switches_per_demo=24),
}


@dataclass(frozen=True)
class Demonstration:
    placement: tuple[float, float]
    fixation_times: dict[str, float] | None = None
    instruction: Instruction | None = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "placement", (float(self.placement[0]), float(self.placement[1])))
        if self.fixation_times is not None:
            if any(v < 0 for v in self.fixation_times.values()):
                raise ValueError("fixation times must be non-negative")
            object.__setattr__(self, "fixation_times", {k: float(v) for k, v in self.fixation_times.items()})
        if self.instruction is not None:
            object.__setattr__(self, "instruction", Instruction(*self.instruction))

    def without_gaze(self) -> "Demonstration":
        return replace(self, fixation_times=None)

    def to_dict(self) -> dict:
        d: dict = {"placement": list(self.placement), "fixation_times": self.fixation_times}
        if self.instruction is not None:
            d["eval_only"] = {"instruction": {"reference": self.instruction.reference, "side": self.instruction.side}}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Demonstration":
        instr = d.get("eval_only", {}).get("instruction")
        return cls(
            placement=tuple(d["placement"]),
            fixation_times=d.get("fixation_times"),
            instruction=Instruction(instr["reference"], instr["side"]) if instr else None,
        )


def dump_demonstrations(demos: Sequence[Demonstration], header: dict | None = None) -> str:
    doc = {"demonstrations": [d.to_dict() for d in demos]}
    if header is not None:
        doc = {"config": header, **doc}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def load_demonstrations(text: str) -> list[Demonstration]:
    doc = json.loads(text)
    items = doc["demonstrations"] if isinstance(doc, dict) else doc
    return [Demonstration.from_dict(d) for d in items]


def draw_fixation_times(names: Sequence[str], reference: str, gaze: GazeGenConfig, rng: np.random.Generator) -> dict[str, float]:
    alpha = np.array([gaze.base * (gaze.dominance if n == reference else 1.0) for n in names])
    share = rng.dirichlet(alpha)
    return {n: float(s * gaze.budget_ms) for n, s in zip(names, share)}


def synthesize_demonstration(
    table: TableConfig,
    instruction: Instruction,
    layout: KernelLayout,
    noise_sd: float = 0.01,
    gaze: GazeGenConfig = GazeGenConfig(),
) -> Demonstration:
    """Noisy placement at the ground-truth optimum plus a fixation-time draw.

    All randomness comes from ``gaze.seed``.
    """
    instruction = Instruction(*instruction)
    table.object(instruction.reference)
    rng = _rng(gaze.seed)
    target = maximize_reward(ground_truth_reward(instruction, layout), layout, table.bounds)
    offset = rng.normal(0.0, noise_sd, size=2) if noise_sd > 0 else np.zeros(2)
    placement = table.clip(target + offset)
    times = draw_fixation_times(table.names, instruction.reference, gaze, rng)
    return Demonstration((float(placement[0]), float(placement[1])), times, instruction)


def synthesize_demonstrations(
    table: TableConfig,
    instruction: Instruction,
    layout: KernelLayout,
    n: int,
    noise_sd: float,
    profile: GazeProfile,
    budget_ms: float,
    seed,
) -> list[Demonstration]:
    children = seed_sequence(seed).spawn(n)
    return [
        synthesize_demonstration(table, instruction, layout, noise_sd, profile.generator(budget_ms, child))
        for child in children
    ]
