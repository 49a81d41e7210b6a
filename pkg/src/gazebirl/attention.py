"""Fixation-time statistics: per-object totals, task relevance, reference frames,
keyframe attention changes and gripper attention."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .fixation import Fixation
from .gaze_io import KeyframeLog, ObjectSpec, ValidationError


@dataclass(frozen=True)
class FixationSummary:
    times: dict[str, float]  # ms per named object
    duration: float  # ms

    @property
    def proportions(self) -> dict[str, float]:
        if self.duration <= 0:
            return {k: 0.0 for k in self.times}
        return {k: v / self.duration for k, v in self.times.items()}

    def to_dict(self) -> dict:
        props = self.proportions
        return {
            "duration_ms": self.duration,
            "objects": [{"name": k, "time_ms": self.times[k], "proportion": props[k]} for k in sorted(self.times)],
        }


def check_disjoint(fixations: Sequence[Fixation]) -> None:
    ordered = sorted(fixations, key=lambda f: (f.start, f.end))
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise ValidationError(f"overlapping fixations [{a.start}, {a.end}] and [{b.start}, {b.end}]")


def summarize_fixations(fixations: Sequence[Fixation], trace_duration: float) -> FixationSummary:
    check_disjoint(fixations)
    times: dict[str, float] = defaultdict(float)
    for f in fixations:
        if f.start < 0 or f.end > trace_duration:
            raise ValidationError(f"fixation [{f.start}, {f.end}] outside trace duration {trace_duration}")
        if f.object is not None:
            times[f.object] += f.duration
    return FixationSummary(dict(sorted(times.items())), float(trace_duration))


def _spec_index(objects: Iterable[ObjectSpec]) -> dict[str, ObjectSpec]:
    return {o.name: o for o in objects}


def task_relevance_split(summary: FixationSummary, objects: Sequence[ObjectSpec]) -> tuple[float, float]:
    """(relevant, irrelevant) shares of the trace duration spent on named objects."""
    specs = _spec_index(objects)
    relevant = irrelevant = 0.0
    for name, p in summary.proportions.items():
        if name not in specs:
            raise ValidationError(f"summary object {name!r} has no spec", field="name")
        if specs[name].task_relevant:
            relevant += p
        else:
            irrelevant += p
    return relevant, irrelevant


def clipped_times(fixations: Iterable[Fixation], t0: float, t1: float) -> dict[str, float]:
    """Per-object fixation time inside [t0, t1]; background fixations are skipped."""
    out: dict[str, float] = defaultdict(float)
    for f in fixations:
        if f.object is None:
            continue
        overlap = min(f.end, t1) - max(f.start, t0)
        if overlap > 0:
            out[f.object] += overlap
    return dict(out)


def dominant_object(times: dict[str, float]) -> str | None:
    positive = {k: v for k, v in times.items() if v > 0}
    if not positive:
        return None
    best = max(positive.values())
    top = [k for k, v in positive.items() if v == best]
    return top[0] if len(top) == 1 else None


def infer_reference_frame(fixations: Sequence[Fixation], segment: tuple[float, float]) -> str | None:
    t0, t1 = segment
    if not t0 < t1:
        raise ValueError(f"segment start {t0} must precede end {t1}")
    return dominant_object(clipped_times(fixations, t0, t1))


def segment_reference_frames(fixations: Sequence[Fixation], keyframes: KeyframeLog, duration: float) -> list[tuple[float, float, str | None]]:
    """Reference object for each inter-keyframe segment, including the lead-in and tail."""
    bounds = [0.0, *keyframes.timestamps, float(duration)]
    rows = []
    for t0, t1 in zip(bounds, bounds[1:]):
        if t1 > t0:
            rows.append((t0, t1, infer_reference_frame(fixations, (t0, t1))))
    return rows


@dataclass(frozen=True)
class KeyframeAttention:
    timestamp: float
    before: str | None
    after: str | None
    changed: bool | None


@dataclass(frozen=True)
class KeyframeAttentionReport:
    entries: tuple[KeyframeAttention, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["keyframe_ts", "before_obj", "after_obj", "changed"])
        for e in self.entries:
            changed = "" if e.changed is None else str(e.changed).lower()
            w.writerow([f"{e.timestamp:g}", e.before or "", e.after or "", changed])
        return buf.getvalue()


def keyframe_attention_change(fixations: Sequence[Fixation], keyframes: KeyframeLog, window_ms: float = 3000.0) -> KeyframeAttentionReport:
    entries = []
    for kf in keyframes:
        t = kf.timestamp
        before = after = None
        changed = None
        if window_ms > 0:
            before = dominant_object(clipped_times(fixations, t - window_ms, t))
            after = dominant_object(clipped_times(fixations, t, t + window_ms))
            if before is not None and after is not None:
                changed = before != after
        entries.append(KeyframeAttention(t, before, after, changed))
    return KeyframeAttentionReport(tuple(entries))


def step_change_rates(report: KeyframeAttentionReport, keyframes: KeyframeLog) -> tuple[float, float]:
    """Fraction of step and non-step keyframes whose object of attention changed.

    Undefined flags are excluded; a group with no defined flags yields NaN.
    """
    if len(report) != len(keyframes):
        raise ValidationError("report and keyframe log lengths differ")
    counts = {True: [0, 0], False: [0, 0]}
    labeled = 0
    for entry, kf in zip(report, keyframes):
        if kf.is_step is None:
            continue
        labeled += 1
        if entry.changed is None:
            continue
        counts[kf.is_step][0] += int(entry.changed)
        counts[kf.is_step][1] += 1
    if labeled == 0:
        raise ValidationError("no keyframes carry is_step labels", field="is_step")
    if counts[True][1] == 0 and counts[False][1] == 0:
        raise ValidationError("all labeled keyframes have undefined attention change")

    def rate(c):
        return c[0] / c[1] if c[1] else float("nan")

    return rate(counts[True]), rate(counts[False])


def gripper_attention_ratio(summary: FixationSummary, objects: Sequence[ObjectSpec]) -> float:
    """Gripper time over gripper plus task-relevant object time."""
    grippers = [o for o in objects if o.is_gripper]
    if len(grippers) != 1:
        raise ValidationError(f"expected exactly one gripper spec, found {len(grippers)}", field="is_gripper")
    specs = _spec_index(objects)
    g = summary.times.get(grippers[0].name, 0.0)
    task = 0.0
    for name, t in summary.times.items():
        if name not in specs:
            raise ValidationError(f"summary object {name!r} has no spec", field="name")
        spec = specs[name]
        if spec.task_relevant and not spec.is_gripper:
            task += t
    if g + task == 0:
        return 0.0
    return g / (g + task)
