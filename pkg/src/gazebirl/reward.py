"""RBF placement reward surfaces over a tabletop.

Every object carries five Gaussian kernels: one at its center and four on the
diagonals. A reward is a non-negative weight per kernel, normalized to sum to
one, and ``R(x) = sum_ij w_ij * exp(-|x - c_ij|^2 / sigma_i^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

KERNELS = ("center", "top_right", "top_left", "bottom_right", "bottom_left")
_DIAGONALS = {
    "center": (0.0, 0.0),
    "top_right": (1.0, 1.0),
    "top_left": (-1.0, 1.0),
    "bottom_right": (1.0, -1.0),
    "bottom_left": (-1.0, -1.0),
}
SIDES = {"right": ("top_right", "bottom_right"), "left": ("top_left", "bottom_left")}
SIMPLEX_TOL = 1e-9


class Instruction(NamedTuple):
    reference: str
    side: str

    def __str__(self) -> str:
        return f"{self.side}_of_{self.reference}"


@dataclass(frozen=True)
class TableObject:
    name: str
    center: tuple[float, float]
    radius: float


@dataclass(frozen=True)
class TableConfig:
    """Axis-aligned table ``bounds`` = (xmin, ymin, xmax, ymax) in meters."""

    bounds: tuple[float, float, float, float]
    objects: tuple[TableObject, ...]

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate table bounds {self.bounds}")
        names = [o.name for o in self.objects]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate object names {names}")
        for o in self.objects:
            if not (xmin <= o.center[0] <= xmax and ymin <= o.center[1] <= ymax):
                raise ValueError(f"object {o.name!r} center {o.center} outside table {self.bounds}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(o.name for o in self.objects)

    @property
    def diagonal(self) -> float:
        xmin, ymin, xmax, ymax = self.bounds
        return math.hypot(xmax - xmin, ymax - ymin)

    def object(self, name: str) -> TableObject:
        for o in self.objects:
            if o.name == name:
                return o
        raise KeyError(f"no object named {name!r} on the table (have {list(self.names)})")

    def contains(self, x: Sequence[float], tol: float = 1e-12) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin - tol <= x[0] <= xmax + tol and ymin - tol <= x[1] <= ymax + tol

    def clip(self, x: np.ndarray) -> np.ndarray:
        xmin, ymin, xmax, ymax = self.bounds
        return np.clip(x, [xmin, ymin], [xmax, ymax])

    def to_dict(self) -> dict:
        return {
            "bounds": list(self.bounds),
            "objects": [{"name": o.name, "center": list(o.center), "radius": o.radius} for o in self.objects],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TableConfig":
        return cls(
            bounds=tuple(float(v) for v in d["bounds"]),
            objects=tuple(
                TableObject(o["name"], (float(o["center"][0]), float(o["center"][1])), float(o["radius"])) for o in d["objects"]
            ),
        )


@dataclass(frozen=True, eq=False)
class KernelLayout:
    names: tuple[str, ...]
    centers: np.ndarray  # (k, 5, 2), kernel order as KERNELS
    sigma2: np.ndarray  # (k,)

    def __post_init__(self):
        c = np.array(self.centers, dtype=float).reshape(len(self.names), len(KERNELS), 2)
        s = np.array(self.sigma2, dtype=float).reshape(len(self.names))
        if np.any(s <= 0):
            raise ValueError("kernel widths must be positive")
        c.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "sigma2", s)

    @property
    def n_objects(self) -> int:
        return len(self.names)

    @property
    def n_kernels(self) -> int:
        return len(self.names) * len(KERNELS)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no object named {name!r} in layout (have {list(self.names)})") from None

    def kernel(self, name: str, kernel: str) -> np.ndarray:
        return self.centers[self.index(name), KERNELS.index(kernel)]


@dataclass(frozen=True, eq=False)
class RewardParams:
    """Kernel weights (k objects x 5 kernels) on the probability simplex."""

    names: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(len(self.names), len(KERNELS))
        if np.any(w < 0):
            raise ValueError("reward weights must be non-negative")
        if abs(w.sum() - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"reward weights must sum to 1, got {w.sum()!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "names", tuple(self.names))

    @classmethod
    def from_flat(cls, names: Sequence[str], flat: np.ndarray) -> "RewardParams":
        return cls(tuple(names), np.asarray(flat, dtype=float).reshape(len(names), len(KERNELS)))

    @classmethod
    def uniform(cls, names: Sequence[str]) -> "RewardParams":
        k = len(names)
        return cls(tuple(names), np.full((k, len(KERNELS)), 1.0 / (k * len(KERNELS))))

    @property
    def flat(self) -> np.ndarray:
        return self.weights.reshape(-1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RewardParams):
            return NotImplemented
        return self.names == other.names and np.array_equal(self.weights, other.weights)

    def __repr__(self) -> str:
        return f"RewardParams(names={self.names}, weights={np.round(self.weights, 4).tolist()})"


def rbf(x, c, sigma2: float):
    if sigma2 <= 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    d = np.asarray(x, dtype=float) - np.asarray(c, dtype=float)
    return np.exp(-np.sum(d * d, axis=-1) / sigma2)


def build_layout(table: TableConfig, offset_scale: float = 1.5, width_scale: float = 1.0) -> KernelLayout:
    if offset_scale < 0 or width_scale <= 0:
        raise ValueError("offset_scale must be >= 0 and width_scale > 0")
    dirs = np.array([_DIAGONALS[k] for k in KERNELS]) / math.sqrt(2.0)
    centers = np.empty((len(table.objects), len(KERNELS), 2))
    sigma2 = np.empty(len(table.objects))
    for i, obj in enumerate(table.objects):
        centers[i] = np.asarray(obj.center) + offset_scale * obj.radius * dirs
        sigma2[i] = (width_scale * obj.radius) ** 2
    return KernelLayout(table.names, centers, sigma2)


def _weights(params, layout: KernelLayout) -> np.ndarray:
    if isinstance(params, RewardParams):
        if params.names != layout.names:
            raise ValueError(f"params objects {params.names} do not match layout {layout.names}")
        w = params.weights
    else:
        w = np.asarray(params, dtype=float)
    if w.size != layout.n_kernels:
        raise ValueError(f"expected {layout.n_kernels} weights, got {w.size}")
    return w.reshape(layout.n_objects, len(KERNELS))


def features(x, layout: KernelLayout) -> np.ndarray:
    """Kernel activations at points ``x`` (..., 2) -> (..., k*5), flattened object-major."""
    x = np.asarray(x, dtype=float)
    d = x[..., None, None, :] - layout.centers
    act = np.exp(-np.sum(d * d, axis=-1) / layout.sigma2[:, None])
    return act.reshape(*x.shape[:-1], layout.n_kernels)


def reward(x, params, layout: KernelLayout):
    """Reward at ``x`` (2,) or (n, 2). ``params`` may be RewardParams or a raw weight array."""
    w = _weights(params, layout)
    return features(x, layout) @ w.reshape(-1)


def reward_gradient(x, params, layout: KernelLayout) -> np.ndarray:
    w = _weights(params, layout)
    x = np.asarray(x, dtype=float)
    d = x[..., None, None, :] - layout.centers  # (..., k, 5, 2)
    act = np.exp(-np.sum(d * d, axis=-1) / layout.sigma2[:, None])
    coef = w * act * (-2.0 / layout.sigma2[:, None])
    return np.sum(coef[..., None] * d, axis=(-3, -2))


def object_weight_sums(params: RewardParams) -> dict[str, float]:
    # sequential summation, matching the compiled chain kernel bit for bit
    return {name: float(sum(row.tolist())) for name, row in zip(params.names, params.weights)}


def ground_truth_reward(instruction: Instruction, layout: KernelLayout) -> RewardParams:
    """Half the mass on each of the two reference-object kernels on the instructed side."""
    ref, side = instruction
    if side not in SIDES:
        raise ValueError(f"side must be one of {sorted(SIDES)}, got {side!r}")
    i = layout.index(ref)
    w = np.zeros((layout.n_objects, len(KERNELS)))
    for k in SIDES[side]:
        w[i, KERNELS.index(k)] = 0.5
    return RewardParams(layout.names, w)


def ascend(params, layout: KernelLayout, bounds, starts, tol: float = 1e-6, max_iter: int = 20000) -> tuple[np.ndarray, np.ndarray]:
    """Projected fixed-length gradient ascent from each of ``starts`` (n, 2).

    Steps have length ``0.05 * sigma_min`` along the normalized gradient and
    are halved whenever they fail to increase the reward; a start terminates
    once its step drops below ``tol`` meters. Returns (termini, rewards).
    """
    lo = np.array(bounds[:2], dtype=float)
    hi = np.array(bounds[2:], dtype=float)
    x = np.clip(np.array(starts, dtype=float).reshape(-1, 2), lo, hi)
    r = reward(x, params, layout)
    step = np.full(len(x), 0.05 * math.sqrt(float(layout.sigma2.min())))
    active = np.ones(len(x), dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        g = reward_gradient(x[idx], params, layout)
        norm = np.linalg.norm(g, axis=1)
        flat = norm == 0
        active[idx[flat]] = False
        idx, g, norm = idx[~flat], g[~flat], norm[~flat]
        if len(idx) == 0:
            break
        cand = np.clip(x[idx] + (step[idx] / norm)[:, None] * g, lo, hi)
        rc = reward(cand, params, layout)
        better = rc > r[idx]
        x[idx[better]] = cand[better]
        r[idx[better]] = rc[better]
        worse = idx[~better]
        step[worse] *= 0.5
        active[worse[step[worse] < tol]] = False
    return x, r


def grid_points(bounds, nx: int, ny: int) -> np.ndarray:
    """Lattice including the table edges, (nx*ny, 2), x varying fastest."""
    xmin, ymin, xmax, ymax = bounds
    gx, gy = np.meshgrid(np.linspace(xmin, xmax, nx), np.linspace(ymin, ymax, ny))
    return np.column_stack([gx.ravel(), gy.ravel()])


def maximize_reward(params, layout: KernelLayout, bounds, spacing: float = 0.005) -> np.ndarray:
    """Deterministic global maximizer: dense-lattice argmax refined by :func:`ascend`."""
    xmin, ymin, xmax, ymax = bounds
    nx = max(2, int(round((xmax - xmin) / spacing)) + 1)
    ny = max(2, int(round((ymax - ymin) / spacing)) + 1)
    pts = grid_points(bounds, nx, ny)
    best = pts[int(np.argmax(reward(pts, params, layout)))]
    x, _ = ascend(params, layout, bounds, best[None, :])
    return x[0]
