import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gazebirl.fixation import (
    FilterConfig,
    Label,
    SceneRaster,
    classify_speed,
    detect_fixations,
    load_raster,
    object_of_attention,
    render_layout,
    sample_objects,
)
from gazebirl.gaze_io import GazeTrace, ObjectSpec, ValidationError
from gazebirl.synth import placement_scene, synthesize_trace

from generators import filter_oracle_mismatches, random_scene, random_trace
from oracles import disk_object, speed_labels

RED = ObjectSpec("red_bowl", (200, 0, 0), (255, 50, 50))
GREEN = ObjectSpec("green_cup", (0, 200, 0), (50, 255, 50))


def blank(w=640, h=480):
    return np.full((h, w, 3), 128, dtype=np.uint8)


def trace_of(points, valid=None, rate=50.0, frame=(640, 480)):
    pts = np.asarray(points, dtype=float)
    ts = np.arange(len(pts)) * 1000.0 / rate
    v = np.ones(len(pts), bool) if valid is None else np.asarray(valid)
    return GazeTrace(ts, pts, v, rate, frame)


def test_static_gaze_all_candidates():
    labels = classify_speed(trace_of([(100, 100)] * 20))
    assert labels == [Label.CANDIDATE] * 20


def test_fast_jump_is_saccade():
    labels = classify_speed(trace_of([(0, 0), (500, 0)]), FilterConfig(max_speed=1000))
    assert labels == [Label.CANDIDATE, Label.SACCADE]


def test_speed_uses_previous_valid_sample():
    # 40 px over 60 ms (two dropouts in between) is 667 px/s: below 700
    labels = classify_speed(trace_of([(0, 0), (0, 0), (0, 0), (40, 0)], valid=[True, False, False, True]))
    assert labels == [Label.CANDIDATE, Label.INVALID, Label.INVALID, Label.CANDIDATE]


def test_speed_labels_match_pairwise_oracle():
    rng = np.random.default_rng(3)
    trace = random_trace(rng, (640, 480), n=1000)
    cfg = FilterConfig(max_speed=700)
    got = [lab.value for lab in classify_speed(trace, cfg)]
    want = speed_labels(trace.timestamps.tolist(), trace.positions.tolist(), trace.valid.tolist(), 700)
    assert got == want
    assert {"saccade", "candidate", "invalid"} <= set(got)


def disk_scene(radius=200):
    px = blank()
    yy, xx = np.mgrid[0:480, 0:640]
    px[(xx - 320) ** 2 + (yy - 240) ** 2 <= radius**2] = (230, 20, 20)
    return SceneRaster(px)


def test_object_at_disk_center():
    assert object_of_attention((320, 240), disk_scene(), [RED, GREEN]) == "red_bowl"


def test_blank_region_is_none():
    assert object_of_attention((320, 240), SceneRaster(blank()), [RED, GREEN]) is None


def half_plane(edge):
    px = blank()
    px[:, edge:] = (230, 20, 20)
    return SceneRaster(px)


def test_edge_coverage_threshold():
    raster = half_plane(320)
    cfg = FilterConfig()
    # pick gaze columns whose exact disk coverage is closest to 60% and 40%
    fractions = {}
    for col in range(300, 341):
        r = int(cfg.attention_radius)
        dy, dx = np.mgrid[-r : r + 1, -r : r + 1]
        inside = dx**2 + dy**2 <= cfg.attention_radius**2
        cols = col + dx[inside]
        fractions[col] = float(np.mean(cols >= 320))
    col60 = min(fractions, key=lambda c: abs(fractions[c] - 0.6))
    col40 = min(fractions, key=lambda c: abs(fractions[c] - 0.4))
    assert abs(fractions[col60] - 0.6) < 0.01 and abs(fractions[col40] - 0.4) < 0.01
    assert object_of_attention((col60, 240), raster, [RED], cfg) == "red_bowl"
    assert object_of_attention((col40, 240), raster, [RED], cfg) is None
    for col in (col60, col40):
        assert object_of_attention((col, 240), raster, [RED], cfg) == disk_object((col, 240), raster.pixels, [RED], 100, 0.5)


def test_coverage_threshold_is_strict():
    px = np.zeros((2, 2, 3), np.uint8)
    px[0, :] = (230, 20, 20)
    raster = SceneRaster(px)
    cfg = FilterConfig(attention_radius=1.0)
    # disk at (0,0) in-frame: (0,0), (1,0), (0,1) -> 2 of 3 red
    assert object_of_attention((0, 0), raster, [RED], cfg) == "red_bowl"
    # exactly 2/3 coverage does not exceed a 2/3 threshold
    cfg_hi = FilterConfig(attention_radius=1.0, majority_fraction=2 / 3)
    assert object_of_attention((0, 0), raster, [RED], cfg_hi) is None


def test_off_frame_disk_counts_in_frame_pixels_only():
    raster = half_plane(560)
    # at the right edge the in-frame part of the disk is mostly red
    assert object_of_attention((639, 240), raster, [RED]) == "red_bowl"
    assert object_of_attention((639, 240), raster, [RED]) == disk_object((639, 240), raster.pixels, [RED], 100, 0.5)


def test_coverage_matches_pixel_loop_oracle():
    rng = np.random.default_rng(11)
    layout, raster, specs = random_scene(rng)
    cfg = FilterConfig(attention_radius=9.0)
    for _ in range(300):
        p = rng.uniform([0, 0], raster.frame_size)
        assert object_of_attention(p, raster, specs, cfg) == disk_object(p, raster.pixels, specs, 9.0, 0.5)


def on_object_scene():
    px = blank()
    px[100:300, 100:300] = (230, 20, 20)
    px[100:300, 400:600] = (20, 230, 20)
    return SceneRaster(px)


def test_seven_samples_make_one_fixation():
    fix = detect_fixations(trace_of([(200, 200)] * 7), on_object_scene(), [RED, GREEN])
    assert len(fix) == 1
    assert fix[0].object == "red_bowl"
    assert fix[0].duration == 120.0
    assert fix[0].centroid == (200.0, 200.0)


def test_four_samples_too_short():
    assert detect_fixations(trace_of([(200, 200)] * 4), on_object_scene(), [RED, GREEN]) == []


def test_alternating_objects_every_two_samples():
    # 2-sample dwells, 12 px hops between objects: slow enough to stay candidates
    px = blank()
    px[:, :320] = (230, 20, 20)
    px[:, 320:] = (20, 230, 20)
    pts = []
    for k in range(20):
        pts += [(314 if k % 2 == 0 else 326, 240)] * 2
    cfg = FilterConfig(attention_radius=5)
    trace = trace_of(pts)
    assert all(lab is Label.CANDIDATE for lab in classify_speed(trace, cfg))
    assert detect_fixations(trace, SceneRaster(px), [RED, GREEN], cfg) == []


def test_dropout_bridging():
    scene = on_object_scene()
    pts = [(200, 200)] * 10
    short = [True] * 4 + [False] * 2 + [True] * 4
    fix = detect_fixations(trace_of(pts, short), scene, [RED])
    assert [(f.start, f.end) for f in fix] == [(0.0, 180.0)]
    long_gap = [True] * 4 + [False] * 3 + [True] * 3
    fix = detect_fixations(trace_of(pts, long_gap), scene, [RED])
    # 60 ms gap is not bridged; neither piece reaches 100 ms
    assert fix == []


def test_background_runs_are_fixations_with_no_object():
    fix = detect_fixations(trace_of([(50, 400)] * 8), on_object_scene(), [RED])
    assert len(fix) == 1 and fix[0].object is None


def test_frame_mismatch_rejected():
    with pytest.raises(ValidationError):
        detect_fixations(trace_of([(1, 1)], frame=(100, 100)), on_object_scene(), [RED])


def test_filter_config_validation():
    with pytest.raises(ValidationError):
        FilterConfig(majority_fraction=0.4)
    with pytest.raises(ValidationError):
        FilterConfig(max_speed=0)
    with pytest.raises(ValidationError):
        FilterConfig.from_dict({"speed": 3})
    assert FilterConfig.from_dict(FilterConfig().to_dict()) == FilterConfig()


def test_oracle_equivalence_small():
    bad, compared = filter_oracle_mismatches(150, seed=5)
    assert bad == 0 and compared > 500


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_fixation_invariants(seed):
    rng = np.random.default_rng(seed)
    layout, raster, specs = random_scene(rng)
    trace = random_trace(rng, raster.frame_size)
    cfg = FilterConfig(attention_radius=8)
    fix = detect_fixations(trace, raster, specs, cfg)
    labels = classify_speed(trace, cfg)
    objs = sample_objects(trace, raster, specs, cfg, labels)
    ts = trace.timestamps
    for a, b in zip(fix, fix[1:]):
        assert a.end < b.start
    for f in fix:
        assert f.duration >= cfg.min_fixation_ms
        assert f.start in ts and f.end in ts
        inside = (ts >= f.start) & (ts <= f.end)
        for i in np.flatnonzero(inside):
            assert labels[i] is not Label.SACCADE
            if labels[i] is Label.CANDIDATE:
                assert objs[i] == f.object


def upscale(raster: SceneRaster, k: int) -> SceneRaster:
    return SceneRaster(np.repeat(np.repeat(raster.pixels, k, axis=0), k, axis=1))


@pytest.mark.parametrize("seed", range(5))
def test_scale_invariance(seed):
    scene = placement_scene()
    raster = scene.raster()
    times = {"bowl": 2000.0, "plate": 1000.0, "cup": 500.0}
    st_ = synthesize_trace(times, scene, switches=6, gripper_glances=2, dropout_rate=0.05, seed=seed)
    cfg = FilterConfig()
    base = detect_fixations(st_.trace, raster, scene.objects, cfg)
    k = 2
    t = st_.trace
    big = GazeTrace(t.timestamps, t.positions * k, t.valid, t.sample_rate, (t.frame_size[0] * k, t.frame_size[1] * k))
    cfg_big = FilterConfig(max_speed=cfg.max_speed * k, attention_radius=cfg.attention_radius * k)
    scaled = detect_fixations(big, upscale(raster, k), scene.objects, cfg_big)
    assert [(f.start, f.end, f.object) for f in scaled] == [(f.start, f.end, f.object) for f in base]
    assert len(base) >= 4


def test_layout_and_png_load_agree(tmp_path):
    from PIL import Image

    scene = placement_scene()
    raster = render_layout(scene.layout)
    Image.fromarray(raster.pixels).save(tmp_path / "scene.png")
    import json

    (tmp_path / "scene.json").write_text(json.dumps(scene.layout))
    assert np.array_equal(load_raster(tmp_path / "scene.png").pixels, raster.pixels)
    assert np.array_equal(load_raster(tmp_path / "scene.json").pixels, raster.pixels)
