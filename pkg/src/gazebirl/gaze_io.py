"""Parsing and validation of gaze logs, object color specs and keyframe logs.

Gaze log format (UTF-8)::

    timestamp_ms,gaze_x_px,gaze_y_px,valid
    0,320.5,240.0,1
    20,321.0,241.5,1

Object specs are a JSON list of objects::

    [{"name": "red_bowl", "color_lower": [150, 0, 0], "color_upper": [255, 80, 80],
      "task_relevant": true, "is_gripper": false}]

Keyframe logs hold ``timestamp_ms,label,is_step`` lines; label and is_step
may be left empty and a leading header line is optional.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from typing import IO, Iterator, NamedTuple, Sequence

import numpy as np

GAZE_HEADER = ("timestamp_ms", "gaze_x_px", "gaze_y_px", "valid")
KEYFRAME_HEADER = ("timestamp_ms", "label", "is_step")
JITTER_TOLERANCE_MS = 1.0

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n"}


class InputError(ValueError):
    """Raised for malformed or inconsistent input data.

    ``line`` is the 1-based line number in the source text (if known) and
    ``field`` names the offending field.
    """

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.detail = message
        self.line = line
        self.field = field


class ParseError(InputError):
    pass


class ValidationError(InputError):
    pass


def _read_text(raw: str | IO[str]) -> str:
    if isinstance(raw, str):
        return raw
    return raw.read()


def _parse_bool(token: str, line: int, name: str) -> bool:
    t = token.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ParseError(f"expected a boolean, got {token!r}", line=line, field=name)


def _parse_float(token: str, line: int, name: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"expected a number, got {token!r}", line=line, field=name) from None
    if not np.isfinite(value):
        raise ParseError(f"non-finite value {token!r}", line=line, field=name)
    return value


class GazeSample(NamedTuple):
    timestamp: float
    position: tuple[float, float]
    valid: bool


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GazeTrace:
    """A fixed-rate gaze stream in egocentric pixel coordinates.

    Arrays are stored read-only: ``timestamps`` (n,), ``positions`` (n, 2)
    as (x, y) pixels and ``valid`` (n,) dropout flags.
    """

    timestamps: np.ndarray
    positions: np.ndarray
    valid: np.ndarray
    sample_rate: float
    frame_size: tuple[int, int]

    def __post_init__(self):
        object.__setattr__(self, "timestamps", _frozen(np.asarray(self.timestamps, dtype=float).reshape(-1)))
        object.__setattr__(self, "positions", _frozen(np.asarray(self.positions, dtype=float).reshape(-1, 2)))
        object.__setattr__(self, "valid", _frozen(np.asarray(self.valid, dtype=bool).reshape(-1)))
        object.__setattr__(self, "frame_size", (int(self.frame_size[0]), int(self.frame_size[1])))
        n = len(self.timestamps)
        if len(self.positions) != n or len(self.valid) != n:
            raise ValidationError("timestamps, positions and valid must have equal length")
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive", field="sample_rate")
        validate_trace(self)

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> GazeSample:
        x, y = self.positions[i]
        return GazeSample(float(self.timestamps[i]), (float(x), float(y)), bool(self.valid[i]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GazeTrace):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.frame_size == other.frame_size
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.positions, other.positions, equal_nan=True)
            and np.array_equal(self.valid, other.valid)
        )

    @property
    def samples(self) -> Iterator[GazeSample]:
        return (self[i] for i in range(len(self)))

    @property
    def dt(self) -> float:
        """Nominal inter-sample interval in ms."""
        return 1000.0 / self.sample_rate

    @property
    def duration(self) -> float:
        if len(self) == 0:
            return 0.0
        return float(self.timestamps[-1] - self.timestamps[0]) + self.dt


def validate_trace(trace: GazeTrace, line_offset: int = 1) -> None:
    """Check ordering, sampling regularity and frame bounds.

    Row ``i`` (0-based) is reported as data row ``i + 1`` on line ``i + 1 + line_offset``.
    """
    ts = trace.timestamps
    for i, t in enumerate(ts):
        if t < 0:
            raise ValidationError(f"row {i + 1}: negative timestamp {t}", line=i + 1 + line_offset, field="timestamp_ms")
    for i in range(1, len(ts)):
        if ts[i] <= ts[i - 1]:
            raise ValidationError(
                f"row {i + 1}: non-monotonic timestamp {ts[i]} after {ts[i - 1]}",
                line=i + 1 + line_offset,
                field="timestamp_ms",
            )
    dt = trace.dt
    for i in range(1, len(ts)):
        delta = ts[i] - ts[i - 1]
        if abs(delta - dt) > JITTER_TOLERANCE_MS:
            raise ValidationError(
                f"row {i + 1}: sample interval {delta:g} ms inconsistent with {trace.sample_rate:g} Hz",
                line=i + 1 + line_offset,
                field="timestamp_ms",
            )
    w, h = trace.frame_size
    for i in np.flatnonzero(trace.valid):
        x, y = trace.positions[i]
        if not (0 <= x < w and 0 <= y < h):
            raise ValidationError(
                f"row {i + 1}: gaze ({x:g}, {y:g}) outside {w}x{h} frame",
                line=i + 1 + line_offset,
                field="gaze_x_px" if not 0 <= x < w else "gaze_y_px",
            )


def _leading_comments(lines: list[str]) -> int:
    # provenance lines ("# ...") may precede the header
    n = 0
    while n < len(lines) and lines[n].startswith("#"):
        n += 1
    return n


def parse_gaze_log(raw: str | IO[str], sample_rate: float = 50.0, frame_size: tuple[int, int] = (1920, 1080)) -> GazeTrace:
    """Parse a delimiter-separated gaze log into a validated trace.

    Dropout rows (``valid`` false) are kept. Their coordinates may be empty,
    in which case they are stored as NaN.
    """
    lines = _read_text(raw).lstrip("﻿").splitlines()
    skip = _leading_comments(lines)
    if len(lines) <= skip or lines[skip].strip() == "":
        raise ParseError("missing header", line=skip + 1)
    header = tuple(tok.strip() for tok in lines[skip].split(","))
    if header != GAZE_HEADER:
        raise ParseError(f"expected header {','.join(GAZE_HEADER)!r}, got {lines[skip]!r}", line=skip + 1)

    ts, xs, ys, valid, source = [], [], [], [], []
    for lineno, line in enumerate(lines[skip + 1 :], start=skip + 2):
        if not line.strip():
            continue
        source.append(lineno)
        tokens = line.split(",")
        if len(tokens) != 4:
            raise ParseError(f"expected 4 fields, got {len(tokens)}", line=lineno)
        t = _parse_float(tokens[0], lineno, "timestamp_ms")
        ok = _parse_bool(tokens[3], lineno, "valid")
        if ok or (tokens[1].strip() and tokens[2].strip()):
            x = _parse_float(tokens[1], lineno, "gaze_x_px")
            y = _parse_float(tokens[2], lineno, "gaze_y_px")
        else:
            x = y = float("nan")
        ts.append(t)
        xs.append(x)
        ys.append(y)
        valid.append(ok)

    try:
        return GazeTrace(
            timestamps=np.array(ts, dtype=float),
            positions=np.column_stack([xs, ys]) if ts else np.zeros((0, 2)),
            valid=np.array(valid, dtype=bool),
            sample_rate=sample_rate,
            frame_size=frame_size,
        )
    except ValidationError as e:
        if e.line is None:
            raise
        # validate_trace numbers rows as if the header were line 1 with no gaps
        raise ValidationError(e.detail, line=source[e.line - 2], field=e.field) from None


def _fmt(v: float) -> str:
    if np.isnan(v):
        return ""
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))


def format_gaze_log(trace: GazeTrace) -> str:
    out = io.StringIO()
    out.write(",".join(GAZE_HEADER) + "\n")
    for t, (x, y), ok in zip(trace.timestamps, trace.positions, trace.valid):
        out.write(f"{_fmt(t)},{_fmt(x)},{_fmt(y)},{int(ok)}\n")
    return out.getvalue()


@dataclass(frozen=True)
class ObjectSpec:
    name: str
    color_lower: tuple[int, int, int]
    color_upper: tuple[int, int, int]
    task_relevant: bool = True
    is_gripper: bool = False

    def __post_init__(self):
        lo = tuple(int(v) for v in self.color_lower)
        hi = tuple(int(v) for v in self.color_upper)
        if len(lo) != 3 or len(hi) != 3:
            raise ValidationError(f"object {self.name!r}: color bounds need 3 channels", field="color_lower")
        for ch, (a, b) in enumerate(zip(lo, hi)):
            if not (0 <= a <= 255 and 0 <= b <= 255):
                raise ValidationError(f"object {self.name!r}: channel {ch} bound outside 0-255", field="color_lower")
            if a > b:
                raise ValidationError(
                    f"object {self.name!r}: channel {ch} lower bound {a} exceeds upper bound {b}",
                    field="color_lower",
                )
        object.__setattr__(self, "color_lower", lo)
        object.__setattr__(self, "color_upper", hi)

    def matches(self, pixels: np.ndarray) -> np.ndarray:
        """Boolean mask of pixels (..., 3) inside this object's color box."""
        lo = np.asarray(self.color_lower)
        hi = np.asarray(self.color_upper)
        return np.all((pixels >= lo) & (pixels <= hi), axis=-1)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "color_lower": list(self.color_lower),
            "color_upper": list(self.color_upper),
            "task_relevant": self.task_relevant,
            "is_gripper": self.is_gripper,
        }


def validate_object_specs(specs: Sequence[ObjectSpec]) -> list[ObjectSpec]:
    seen: set[str] = set()
    for spec in specs:
        if spec.name in seen:
            raise ValidationError(f"duplicate object name {spec.name!r}", field="name")
        seen.add(spec.name)
    grippers = [s.name for s in specs if s.is_gripper]
    if len(grippers) > 1:
        raise ValidationError(f"more than one gripper object: {grippers}", field="is_gripper")
    return list(specs)


def parse_object_specs(raw: str | IO[str]) -> list[ObjectSpec]:
    text = _read_text(raw)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno) from None
    if isinstance(data, dict):
        data = data.get("objects")
    if not isinstance(data, list):
        raise ParseError("expected a JSON list of object specs")

    specs = []
    for idx, entry in enumerate(data):
        if not isinstance(entry, dict):
            raise ParseError(f"object #{idx} is not a mapping")
        for key in ("name", "color_lower", "color_upper"):
            if key not in entry:
                raise ParseError(f"object #{idx} missing {key!r}", field=key)
        specs.append(
            ObjectSpec(
                name=str(entry["name"]),
                color_lower=tuple(entry["color_lower"]),
                color_upper=tuple(entry["color_upper"]),
                task_relevant=bool(entry.get("task_relevant", True)),
                is_gripper=bool(entry.get("is_gripper", False)),
            )
        )
    return validate_object_specs(specs)


def format_object_specs(specs: Sequence[ObjectSpec]) -> str:
    return json.dumps([s.to_dict() for s in specs], indent=2) + "\n"


class Keyframe(NamedTuple):
    timestamp: float
    label: str | None = None
    is_step: bool | None = None


@dataclass(frozen=True)
class KeyframeLog:
    entries: tuple[Keyframe, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(Keyframe(*e) for e in self.entries))
        for i in range(1, len(self.entries)):
            if self.entries[i].timestamp <= self.entries[i - 1].timestamp:
                raise ValidationError(f"keyframe {i + 1}: non-monotonic timestamp", field="timestamp_ms")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def timestamps(self) -> list[float]:
        return [e.timestamp for e in self.entries]


def parse_keyframes(raw: str | IO[str], trace_duration: float) -> KeyframeLog:
    entries: list[Keyframe] = []
    prev_line = None
    lines = _read_text(raw).lstrip("﻿").splitlines()
    skip = _leading_comments(lines)
    for lineno, line in enumerate(lines[skip:], start=skip + 1):
        if not line.strip():
            continue
        tokens = [tok.strip() for tok in line.split(",")]
        if lineno == skip + 1 and tokens[0] == KEYFRAME_HEADER[0]:
            continue
        if len(tokens) > 3:
            raise ParseError(f"expected at most 3 fields, got {len(tokens)}", line=lineno)
        tokens += [""] * (3 - len(tokens))
        t = _parse_float(tokens[0], lineno, "timestamp_ms")
        if t < 0 or t > trace_duration:
            raise ValidationError(
                f"keyframe at {t:g} ms outside trace duration {trace_duration:g} ms",
                line=lineno,
                field="timestamp_ms",
            )
        if entries and t <= entries[-1].timestamp:
            raise ValidationError(
                f"non-monotonic keyframe {t:g} ms after {entries[-1].timestamp:g} ms (line {prev_line})",
                line=lineno,
                field="timestamp_ms",
            )
        label = tokens[1] or None
        is_step = _parse_bool(tokens[2], lineno, "is_step") if tokens[2] else None
        entries.append(Keyframe(t, label, is_step))
        prev_line = lineno
    return KeyframeLog(tuple(entries))


def format_keyframes(log: KeyframeLog) -> str:
    lines = [",".join(KEYFRAME_HEADER)]
    for e in log:
        step = "" if e.is_step is None else ("true" if e.is_step else "false")
        lines.append(f"{_fmt(e.timestamp)},{e.label or ''},{step}")
    return "\n".join(lines) + "\n"
