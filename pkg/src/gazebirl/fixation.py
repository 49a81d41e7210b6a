"""Velocity, area and duration based fixation detection.

Samples faster than ``max_speed`` are saccades. Each remaining sample gets an
object of attention: the object whose color box covers a strict majority of
the pixels in a disk of ``attention_radius`` around the gaze point. Runs of
samples on the same object lasting at least ``min_fixation_ms`` are fixations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Sequence

import numpy as np
from scipy.signal import fftconvolve

from .gaze_io import GazeTrace, InputError, ObjectSpec, ParseError, ValidationError


class Label(str, Enum):
    CANDIDATE = "candidate"
    SACCADE = "saccade"
    INVALID = "invalid"


@dataclass(frozen=True)
class FilterConfig:
    max_speed: float = 700.0  # px/s
    attention_radius: float = 100.0  # px
    majority_fraction: float = 0.5  # coverage must be strictly greater
    min_fixation_ms: float = 100.0
    dropout_bridge_ms: float = 40.0

    def __post_init__(self):
        for name in ("max_speed", "attention_radius", "min_fixation_ms"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive", field=name)
        if self.dropout_bridge_ms < 0:
            raise ValidationError("dropout_bridge_ms must be non-negative", field="dropout_bridge_ms")
        if not 0.5 <= self.majority_fraction <= 1.0:
            raise ValidationError("majority_fraction must lie in [0.5, 1]", field="majority_fraction")

    @classmethod
    def from_dict(cls, d: dict) -> "FilterConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown filter settings {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class Fixation:
    start: float
    end: float
    object: str | None
    centroid: tuple[float, float]

    @property
    def duration(self) -> float:
        return self.end - self.start


def _disk_offsets(radius: float) -> np.ndarray:
    r = int(np.floor(radius))
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
    return (dx * dx + dy * dy <= radius * radius).astype(float)


@dataclass(frozen=True, eq=False)
class SceneRaster:
    """Static RGB image of the egocentric scene, ``pixels`` is (height, width, 3)."""

    pixels: np.ndarray
    _coverage: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValidationError(f"raster must be (height, width, 3), got {px.shape}")
        px = np.array(px, dtype=np.uint8, copy=True)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def frame_size(self) -> tuple[int, int]:
        h, w = self.pixels.shape[:2]
        return (w, h)

    def coverage_maps(self, objects: Sequence[ObjectSpec], radius: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-pixel disk counts: (k, h, w) object pixel counts and (h, w) in-frame counts.

        Counts are exact integers; FFT round-off is removed by rounding.
        """
        key = (tuple(objects), float(radius))
        hit = self._coverage.get(key)
        if hit is not None:
            return hit
        disk = _disk_offsets(radius)
        h, w = self.pixels.shape[:2]
        total = np.rint(fftconvolve(np.ones((h, w)), disk, mode="same")).astype(np.int64)
        counts = np.zeros((len(objects), h, w), dtype=np.int64)
        for i, obj in enumerate(objects):
            mask = obj.matches(self.pixels).astype(float)
            if mask.any():
                counts[i] = np.rint(fftconvolve(mask, disk, mode="same")).astype(np.int64)
        self._coverage[key] = (counts, total)
        return counts, total


def pixel_index(point: Sequence[float], frame_size: tuple[int, int]) -> tuple[int, int]:
    """Nearest pixel (col, row) to a continuous gaze point, clipped into the frame."""
    w, h = frame_size
    col = int(np.floor(point[0] + 0.5))
    row = int(np.floor(point[1] + 0.5))
    return min(max(col, 0), w - 1), min(max(row, 0), h - 1)


def _pick_object(counts: np.ndarray, total: int, objects: Sequence[ObjectSpec], fraction: float) -> str | None:
    if total == 0:
        return None
    winners = [i for i in range(len(objects)) if counts[i] > fraction * total]
    if not winners:
        return None
    best = max(counts[i] for i in winners)
    top = [i for i in winners if counts[i] == best]
    if len(top) > 1:
        return None
    return objects[top[0]].name


def object_of_attention(
    point: Sequence[float],
    raster: SceneRaster,
    objects: Sequence[ObjectSpec],
    config: FilterConfig = FilterConfig(),
) -> str | None:
    """Object covering a strict majority of in-frame pixels around ``point``; ``None`` otherwise."""
    counts, total = raster.coverage_maps(objects, config.attention_radius)
    col, row = pixel_index(point, raster.frame_size)
    return _pick_object(counts[:, row, col], int(total[row, col]), objects, config.majority_fraction)


def classify_speed(trace: GazeTrace, config: FilterConfig = FilterConfig()) -> list[Label]:
    labels: list[Label] = []
    prev: int | None = None
    for i in range(len(trace)):
        if not trace.valid[i]:
            labels.append(Label.INVALID)
            continue
        if prev is None:
            labels.append(Label.CANDIDATE)
        else:
            dist = float(np.hypot(*(trace.positions[i] - trace.positions[prev])))
            elapsed = (trace.timestamps[i] - trace.timestamps[prev]) / 1000.0
            labels.append(Label.SACCADE if dist / elapsed > config.max_speed else Label.CANDIDATE)
        prev = i
    return labels


def sample_objects(
    trace: GazeTrace,
    raster: SceneRaster,
    objects: Sequence[ObjectSpec],
    config: FilterConfig,
    labels: Sequence[Label],
) -> list[str | None]:
    counts, total = raster.coverage_maps(objects, config.attention_radius)
    out: list[str | None] = []
    for i, lab in enumerate(labels):
        if lab is not Label.CANDIDATE:
            out.append(None)
            continue
        col, row = pixel_index(trace.positions[i], raster.frame_size)
        out.append(_pick_object(counts[:, row, col], int(total[row, col]), objects, config.majority_fraction))
    return out


def detect_fixations(
    trace: GazeTrace,
    raster: SceneRaster,
    objects: Sequence[ObjectSpec],
    config: FilterConfig = FilterConfig(),
) -> list[Fixation]:
    if trace.frame_size != raster.frame_size:
        raise ValidationError(f"trace frame {trace.frame_size} does not match raster {raster.frame_size}")
    labels = classify_speed(trace, config)
    objs = sample_objects(trace, raster, objects, config, labels)
    dt = trace.dt

    fixations: list[Fixation] = []
    run: list[int] = []  # candidate sample indices of the open run
    run_obj: str | None = None
    gap = 0  # invalid samples since the last run member

    def close():
        if run and trace.timestamps[run[-1]] - trace.timestamps[run[0]] >= config.min_fixation_ms:
            cx, cy = trace.positions[run].mean(axis=0)
            fixations.append(
                Fixation(float(trace.timestamps[run[0]]), float(trace.timestamps[run[-1]]), run_obj, (float(cx), float(cy)))
            )

    for i, lab in enumerate(labels):
        if lab is Label.INVALID:
            if run:
                gap += 1
                if gap * dt > config.dropout_bridge_ms:
                    close()
                    run, gap = [], 0
            continue
        if lab is Label.SACCADE:
            close()
            run, gap = [], 0
            continue
        if run and objs[i] == run_obj:
            run.append(i)
        else:
            close()
            run, run_obj = [i], objs[i]
        gap = 0
    close()
    return fixations


# -- raster construction ------------------------------------------------------


def render_layout(layout: dict) -> SceneRaster:
    """Rasterize a synthetic layout description.

    ``layout`` has ``width``, ``height``, optional ``background`` color and a
    ``shapes`` list of ``{"shape": "rect", "x0", "y0", "x1", "y1", "color"}``
    (half-open pixel ranges) or ``{"shape": "disk", "cx", "cy", "r", "color"}``.
    Later shapes paint over earlier ones.
    """
    try:
        w, h = int(layout["width"]), int(layout["height"])
    except KeyError as e:
        raise ParseError(f"layout missing {e.args[0]!r}", field=e.args[0]) from None
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:] = layout.get("background", [128, 128, 128])
    rows, cols = np.mgrid[0:h, 0:w]
    for idx, s in enumerate(layout.get("shapes", [])):
        color = s.get("color")
        if color is None or len(color) != 3:
            raise ParseError(f"shape #{idx} needs a 3-channel color", field="color")
        kind = s.get("shape")
        if kind == "rect":
            img[max(int(s["y0"]), 0) : int(s["y1"]), max(int(s["x0"]), 0) : int(s["x1"])] = color
        elif kind == "disk":
            mask = (cols - s["cx"]) ** 2 + (rows - s["cy"]) ** 2 <= s["r"] ** 2
            img[mask] = color
        else:
            raise ParseError(f"shape #{idx}: unknown shape {kind!r}", field="shape")
    return SceneRaster(img)


def load_raster(path: str | Path) -> SceneRaster:
    """Load a lossless image (PNG/BMP/TIFF) or a ``.json`` synthetic layout."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            layout = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}: {e.msg}", line=e.lineno) from None
        return render_layout(layout)
    from PIL import Image

    try:
        with Image.open(path) as im:
            return SceneRaster(np.asarray(im.convert("RGB")))
    except OSError as e:
        raise InputError(f"{path}: cannot read image ({e})") from None


def read_layout(raw: str | IO[str]) -> SceneRaster:
    text = raw if isinstance(raw, str) else raw.read()
    return render_layout(json.loads(text))
