"""Synthetic egocentric scenes, gaze traces and fixation corpora."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fixation import Fixation, SceneRaster, render_layout
from .gaze_io import GazeTrace, Keyframe, KeyframeLog, ObjectSpec
from .sim import seed_sequence


@dataclass(frozen=True)
class SyntheticScene:
    layout: dict
    objects: tuple[ObjectSpec, ...]
    anchors: dict[str, tuple[float, float]]  # pixel point well inside each object
    background: tuple[float, float]  # pixel point attending to no object

    @property
    def frame_size(self) -> tuple[int, int]:
        return (self.layout["width"], self.layout["height"])

    def raster(self) -> SceneRaster:
        return render_layout(self.layout)


def _spec(name, color, relevant=True, gripper=False, tol=25) -> ObjectSpec:
    lo = tuple(max(0, c - tol) for c in color)
    hi = tuple(min(255, c + tol) for c in color)
    return ObjectSpec(name, lo, hi, relevant, gripper)


def placement_scene() -> SyntheticScene:
    """A 640x480 first-person view of the placement table: yellow bowl, red plate,
    purple cup (task irrelevant) and the blue robot gripper at the top."""
    colors = {"bowl": (230, 200, 30), "plate": (200, 30, 30), "cup": (130, 40, 160), "gripper": (30, 60, 200)}
    layout = {
        "width": 640,
        "height": 480,
        "background": [128, 128, 128],
        "shapes": [
            {"shape": "disk", "cx": 170, "cy": 300, "r": 115, "color": list(colors["bowl"])},
            {"shape": "disk", "cx": 470, "cy": 300, "r": 115, "color": list(colors["plate"])},
            {"shape": "disk", "cx": 320, "cy": 430, "r": 45, "color": list(colors["cup"])},
            {"shape": "rect", "x0": 220, "y0": 0, "x1": 420, "y1": 150, "color": list(colors["gripper"])},
        ],
    }
    objects = (
        _spec("bowl", colors["bowl"]),
        _spec("plate", colors["plate"]),
        _spec("cup", colors["cup"], relevant=False),
        _spec("gripper", colors["gripper"], gripper=True),
    )
    anchors = {"bowl": (170.0, 300.0), "plate": (470.0, 300.0), "cup": (320.0, 440.0), "gripper": (320.0, 60.0)}
    return SyntheticScene(layout, objects, anchors, background=(320.0, 240.0))


def _split_units(units: int, parts: int, rng: np.random.Generator, min_units: int) -> list[int]:
    """Split ``units`` into ``parts`` integers, each at least ``min_units``."""
    spare = units - parts * min_units
    cuts = np.sort(rng.integers(0, spare + 1, size=parts - 1))
    sizes = np.diff(np.concatenate([[0], cuts, [spare]]))
    return [int(s) + min_units for s in sizes]


@dataclass(frozen=True)
class SyntheticTrace:
    trace: GazeTrace
    keyframes: KeyframeLog
    dwells: tuple[tuple[str, float, float], ...]  # (object, start ms, end ms) as measured


def synthesize_trace(
    fixation_times: dict[str, float],
    scene: SyntheticScene,
    switches: int = 2,
    gripper_glances: int = 0,
    sample_rate: float = 50.0,
    jitter_px: float = 1.0,
    dropout_rate: float = 0.0,
    min_fixation_ms: float = 100.0,
    seed=0,
) -> SyntheticTrace:
    """Gaze trace whose measured fixation time per object reproduces ``fixation_times``.

    Gaze dwells at object anchors with small jitter. A dwell meant to measure
    ``d`` ms uses ``d/dt + 1`` steady samples preceded by an arrival sample; it
    is separated from the next by one transit sample at the background point,
    so both arrival and transit read as saccades. Dropouts are single interior
    samples and get bridged by the filter. Objects with less than one minimum
    fixation of time are left out.
    """
    rng = np.random.default_rng(seed_sequence(seed))
    dt = 1000.0 / sample_rate
    min_units = int(np.ceil(min_fixation_ms / dt))
    total = sum(fixation_times.values())
    n_dwells = switches + 1

    dwells: list[tuple[str, int]] = []
    for name, f in fixation_times.items():
        units = int(round(f / dt))
        if units < min_units:
            continue
        want = max(1, int(round(n_dwells * f / total))) if total > 0 else 1
        parts = max(1, min(want, units // min_units))
        dwells += [(name, u) for u in _split_units(units, parts, rng, min_units)]
    dwells += [("gripper", min_units + 1) for _ in range(gripper_glances)]
    order = rng.permutation(len(dwells))
    dwells = [dwells[i] for i in order]

    ts, pos, valid = [], [], []

    def emit(point, ok=True):
        ts.append(len(ts) * dt)
        pos.append(point if ok else (np.nan, np.nan))
        valid.append(ok)

    bg = np.asarray(scene.background)
    emit(bg)
    spans = []
    keyframes = []
    prev_obj = None
    for k, (name, units) in enumerate(dwells):
        anchor = np.asarray(scene.anchors[name])
        if k > 0:
            emit(bg + rng.normal(0, jitter_px, 2))
        emit(anchor + rng.normal(0, jitter_px, 2))  # arrival
        start = len(ts) * dt
        if k > 0:
            keyframes.append(Keyframe(start, "shift", name != prev_obj))
        for s in range(units + 1):
            interior = 0 < s < units
            if interior and dropout_rate > 0 and rng.random() < dropout_rate and valid[-1]:
                emit(None, ok=False)
            else:
                emit(anchor + rng.normal(0, jitter_px, 2))
        spans.append((name, start, (len(ts) - 1) * dt))
        prev_obj = name
    emit(bg)

    trace = GazeTrace(np.array(ts), np.array(pos, dtype=float), np.array(valid), sample_rate, scene.frame_size)
    return SyntheticTrace(trace, KeyframeLog(tuple(keyframes)), tuple(spans))


def reference_frame_corpus(
    n_segments: int,
    alignment: float,
    objects: Sequence[str] = ("green_cup", "yellow_cup", "red_bowl", "blue_bowl"),
    segment_ms: float = 2000.0,
    seed=0,
) -> list[tuple[list[Fixation], tuple[float, float], str]]:
    """Segments whose longest-attended object is the target with probability ``alignment``.

    Each item is (fixations, segment, target). Fixations are laid out back to
    back; the winning object receives more total time than any other.
    """
    rng = np.random.default_rng(seed_sequence(seed))
    corpus = []
    for s in range(n_segments):
        t0 = s * segment_ms
        target = objects[rng.integers(len(objects))]
        if rng.random() < alignment:
            winner = target
        else:
            others = [o for o in objects if o != target]
            winner = others[rng.integers(len(others))]
        losers = [o for o in objects if o != winner]
        win_time = rng.uniform(0.4, 0.6) * segment_ms
        rest = segment_ms - win_time
        shares = rng.dirichlet(np.ones(len(losers))) * rest
        shares = np.minimum(shares, 0.9 * win_time)
        pieces = [(winner, win_time)] + list(zip(losers, shares))
        order = rng.permutation(len(pieces))
        fixations = []
        t = t0
        for i in order:
            name, d = pieces[i]
            fixations.append(Fixation(float(t), float(t + d), name, (0.0, 0.0)))
            t += d
        corpus.append((fixations, (t0, t0 + segment_ms), target))
    return corpus
