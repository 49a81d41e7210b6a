import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gazebirl.gaze_io import (
    GazeTrace,
    InputError,
    Keyframe,
    KeyframeLog,
    ObjectSpec,
    ParseError,
    ValidationError,
    format_gaze_log,
    format_keyframes,
    format_object_specs,
    parse_gaze_log,
    parse_keyframes,
    parse_object_specs,
)

HEADER = "timestamp_ms,gaze_x_px,gaze_y_px,valid\n"


def log(*rows):
    return HEADER + "".join(f"{r}\n" for r in rows)


def test_three_rows_at_50hz():
    trace = parse_gaze_log(log("0,10,10,1", "20,11,10,1", "40,12,10,1"))
    assert len(trace) == 3
    assert np.allclose(np.diff(trace.timestamps), 20.0)
    assert trace.duration == 60.0


def test_empty_body():
    trace = parse_gaze_log(HEADER)
    assert len(trace) == 0
    assert trace.duration == 0.0


def test_non_monotonic_names_row_three():
    with pytest.raises(ValidationError) as err:
        parse_gaze_log(log("0,1,1,1", "40,1,1,1", "20,1,1,1"))
    assert "row 3" in str(err.value)
    assert err.value.line == 4
    assert err.value.field == "timestamp_ms"


def test_accepts_stream_and_bom():
    trace = parse_gaze_log(io.StringIO("﻿" + log("0,1,1,1")))
    assert len(trace) == 1


def test_provenance_comments_before_header():
    trace = parse_gaze_log("# made by a generator\n# second line\n" + log("0,1,1,1", "20,2,2,1"))
    assert len(trace) == 2
    with pytest.raises(ValidationError) as err:
        parse_gaze_log("# note\n" + log("0,1,1,1", "20,5000,1,1"))
    assert err.value.line == 4


def test_jitter_tolerance():
    parse_gaze_log(log("0,1,1,1", "21,1,1,1", "40.5,1,1,1"))
    with pytest.raises(ValidationError, match="interval"):
        parse_gaze_log(log("0,1,1,1", "22.5,1,1,1"))


@pytest.mark.parametrize(
    "body, field",
    [
        ("abc,1,1,1", "timestamp_ms"),
        ("0,x,1,1", "gaze_x_px"),
        ("0,1,1,maybe", "valid"),
        ("-20,1,1,1", "timestamp_ms"),
        ("0,1,2000,1", "gaze_y_px"),
    ],
)
def test_errors_name_line_and_field(body, field):
    with pytest.raises(InputError) as err:
        parse_gaze_log(log(body))
    assert err.value.line == 2
    assert err.value.field == field
    assert "line 2" in str(err.value)


def test_wrong_field_count():
    with pytest.raises(ParseError) as err:
        parse_gaze_log(log("0,1,1,1", "20,1,1"))
    assert err.value.line == 3


def test_bad_header():
    with pytest.raises(ParseError) as err:
        parse_gaze_log("t,x,y,v\n0,1,1,1\n")
    assert err.value.line == 1
    with pytest.raises(ParseError):
        parse_gaze_log("")


def test_dropouts_kept_with_missing_coordinates():
    trace = parse_gaze_log(log("0,1,1,1", "20,,,0", "40,3000,-5,0"))
    assert list(trace.valid) == [True, False, False]
    assert np.isnan(trace.positions[1]).all()
    # invalid rows are not bounds-checked
    assert trace.positions[2, 0] == 3000.0


def test_trace_is_read_only():
    trace = parse_gaze_log(log("0,1,1,1"))
    with pytest.raises(ValueError):
        trace.positions[0, 0] = 5.0


coord = st.floats(min_value=0, max_value=1919.99, allow_nan=False)


@st.composite
def traces(draw):
    n = draw(st.integers(0, 40))
    rate = draw(st.sampled_from([30.0, 50.0, 60.0, 120.0]))
    dt = 1000.0 / rate
    t0 = draw(st.floats(0, 1e5, allow_nan=False))
    jitter = draw(st.lists(st.floats(-0.9, 0.9), min_size=n, max_size=n))
    ts = [t0 + i * dt + j for i, j in enumerate(jitter)]
    # keep consecutive intervals within the 1 ms tolerance
    for i in range(1, n):
        ts[i] = min(max(ts[i], ts[i - 1] + dt - 0.99), ts[i - 1] + dt + 0.99)
    xs = draw(st.lists(coord, min_size=n, max_size=n))
    ys = draw(st.lists(st.floats(0, 1079.99, allow_nan=False), min_size=n, max_size=n))
    valid = draw(st.lists(st.booleans(), min_size=n, max_size=n))
    pos = np.column_stack([xs, ys]) if n else np.zeros((0, 2))
    pos[~np.array(valid, dtype=bool)] = np.nan if draw(st.booleans()) else 0.0
    return GazeTrace(np.array(ts), pos, np.array(valid, dtype=bool), rate, (1920, 1080))


@settings(max_examples=200, deadline=None)
@given(traces())
def test_round_trip(trace):
    again = parse_gaze_log(format_gaze_log(trace), trace.sample_rate, trace.frame_size)
    assert again == trace
    assert np.array_equal(again.positions, trace.positions, equal_nan=True)


SPECS = """[
  {"name": "red_bowl", "color_lower": [150, 0, 0], "color_upper": [255, 80, 80]},
  {"name": "green_cup", "color_lower": [0, 150, 0], "color_upper": [80, 255, 80], "task_relevant": false}
]"""


def test_two_specs():
    specs = parse_object_specs(SPECS)
    assert [s.name for s in specs] == ["red_bowl", "green_cup"]
    assert specs[1].task_relevant is False
    assert parse_object_specs(format_object_specs(specs)) == specs
    assert parse_object_specs('{"objects": %s}' % SPECS) == specs


def test_duplicate_name():
    dup = '[{"name": "red_bowl", "color_lower": [0,0,0], "color_upper": [1,1,1]},' ' {"name": "red_bowl", "color_lower": [0,0,0], "color_upper": [1,1,1]}]'
    with pytest.raises(ValidationError, match="duplicate"):
        parse_object_specs(dup)


def test_inverted_bounds():
    bad = '[{"name": "a", "color_lower": [200, 0, 0], "color_upper": [100, 255, 255]}]'
    with pytest.raises(ValidationError, match="lower bound 200 exceeds upper bound 100"):
        parse_object_specs(bad)


def test_two_grippers_rejected():
    two = '[{"name": "g1", "color_lower": [0,0,0], "color_upper": [1,1,1], "is_gripper": true},' ' {"name": "g2", "color_lower": [0,0,0], "color_upper": [1,1,1], "is_gripper": true}]'
    with pytest.raises(ValidationError, match="gripper"):
        parse_object_specs(two)


def test_spec_json_error_has_line():
    with pytest.raises(ParseError) as err:
        parse_object_specs('[\n{"name": }\n]')
    assert err.value.line == 2


def test_spec_matches_box():
    spec = ObjectSpec("a", (10, 10, 10), (20, 20, 20))
    px = np.array([[[10, 15, 20], [9, 15, 15], [21, 15, 15]]], dtype=np.uint8)
    assert spec.matches(px).tolist() == [[True, False, False]]


def test_keyframes_in_range():
    kf = parse_keyframes("1000\n5000\n", 10000)
    assert len(kf) == 2
    assert kf.timestamps == [1000.0, 5000.0]


def test_keyframe_out_of_range():
    with pytest.raises(ValidationError) as err:
        parse_keyframes("12000\n", 10000)
    assert err.value.line == 1


def test_keyframes_empty():
    assert len(parse_keyframes("", 10000)) == 0


def test_keyframes_non_monotonic():
    with pytest.raises(ValidationError, match="non-monotonic"):
        parse_keyframes("timestamp_ms,label,is_step\n2000,a,true\n1000,b,false\n", 10000)


def test_keyframes_round_trip():
    log_ = KeyframeLog((Keyframe(10.0, "grasp", True), Keyframe(20.5, None, None), Keyframe(30.0, "move", False)))
    assert parse_keyframes(format_keyframes(log_), 100) == log_
    assert parse_keyframes("# provenance\n" + format_keyframes(log_), 100) == log_
