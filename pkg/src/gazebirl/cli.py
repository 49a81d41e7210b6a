"""Command-line entry point: ``gazebirl analyze | birl | synth``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import attention
from .config import ConfigError, ExperimentConfig, load_config
from .experiment import force_no_gaze, header_lines, loss_table, per_config_table, results_table, run_experiment, settings_for
from .fixation import FilterConfig, detect_fixations, load_raster
from .gaze_io import InputError, format_gaze_log, format_keyframes, format_object_specs, parse_gaze_log, parse_keyframes, parse_object_specs
from .reward import Instruction, build_layout
from .sim import PROFILES, dump_demonstrations, seed_sequence, synthesize_demonstrations
from .synth import placement_scene, synthesize_trace

OUT_ENV = "GAZEBIRL_OUT"
log = logging.getLogger("gazebirl")


class CliError(Exception):
    pass


def _read(path: str, what: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} file not found: {path}")
    return p.read_text(encoding="utf-8")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "results"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8", newline="")
    log.info("wrote %s", path)


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


# -- analyze ------------------------------------------------------------------


def cmd_analyze(args) -> None:
    objects = _wrap(lambda: parse_object_specs(_read(args.objects, "object spec")), args.objects)
    raster = _wrap(lambda: load_raster(args.scene) if Path(args.scene).is_file() else _missing(args.scene, "scene"), args.scene)
    trace = _wrap(lambda: parse_gaze_log(_read(args.gaze, "gaze log"), args.sample_rate, raster.frame_size), args.gaze)
    fcfg = FilterConfig()
    if args.filter:
        fcfg = _wrap(lambda: FilterConfig.from_dict(json.loads(_read(args.filter, "filter config"))), args.filter)
    keyframes = None
    if args.keyframes:
        keyframes = _wrap(lambda: parse_keyframes(_read(args.keyframes, "keyframe"), trace.duration), args.keyframes)

    fixations = detect_fixations(trace, raster, objects, fcfg)
    summary = attention.summarize_fixations(fixations, trace.duration)
    relevant, irrelevant = attention.task_relevance_split(summary, objects)
    has_gripper = any(o.is_gripper for o in objects)

    inputs = {"gaze": args.gaze, "scene": args.scene, "objects": args.objects, "keyframes": args.keyframes}
    doc = {
        "inputs": inputs,
        "filter": fcfg.to_dict(),
        "sample_rate": trace.sample_rate,
        "window_ms": args.window_ms,
        "n_samples": len(trace),
        "n_fixations": len(fixations),
        **summary.to_dict(),
        "task_relevant_proportion": relevant,
        "task_irrelevant_proportion": irrelevant,
        "gripper_attention_ratio": attention.gripper_attention_ratio(summary, objects) if has_gripper else None,
    }
    head = "# gazebirl " + json.dumps({"inputs": inputs, "filter": fcfg.to_dict(), "window_ms": args.window_ms}, sort_keys=True, separators=(",", ":")) + "\n"
    out = _out_dir(args)

    buf = io.StringIO()
    buf.write(head)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["start_ms", "end_ms", "duration_ms", "object", "centroid_x_px", "centroid_y_px"])
    for f in fixations:
        w.writerow([f"{f.start:g}", f"{f.end:g}", f"{f.duration:g}", f.object or "", f"{f.centroid[0]:.3f}", f"{f.centroid[1]:.3f}"])
    _write(out / "fixations.csv", buf.getvalue())

    if keyframes is not None:
        report = attention.keyframe_attention_change(fixations, keyframes, args.window_ms)
        _write(out / "keyframe_attention.csv", head + report.to_csv())
        try:
            step, nonstep = attention.step_change_rates(report, keyframes)
            doc["step_change_rate"], doc["nonstep_change_rate"] = _finite(step), _finite(nonstep)
        except InputError as e:
            doc["step_change_rate"] = doc["nonstep_change_rate"] = None
            log.warning("step change rates unavailable: %s", e)
        segments = attention.segment_reference_frames(fixations, keyframes, trace.duration)
        buf = io.StringIO()
        buf.write(head)
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["segment_start_ms", "segment_end_ms", "reference_object"])
        for t0, t1, obj in segments:
            w.writerow([f"{t0:g}", f"{t1:g}", obj or ""])
        _write(out / "reference_frames.csv", buf.getvalue())

    _write(out / "summary.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _finite(v: float):
    return None if v != v else v


def _missing(path: str, what: str):
    raise CliError(f"{what} file not found: {path}")


def _wrap(fn, path: str):
    try:
        return fn()
    except (InputError, json.JSONDecodeError) as e:
        raise CliError(f"{path}: {e}") from None


# -- birl -----------------------------------------------------------------------


def cmd_birl(args) -> None:
    cfg = _resolve_config(args)
    if args.no_gaze:
        cfg = force_no_gaze(cfg)
    jobs = args.jobs or cfg.jobs
    out = _out_dir(args)
    results = run_experiment(cfg, jobs, progress=lambda msg: log.info("running %s", msg))
    _write(out / "policy_loss.csv", loss_table(results, "evd"))
    _write(out / "placement_loss.csv", loss_table(results, "placement"))
    _write(out / "results.csv", results_table(results))
    _write(out / "per_config.csv", per_config_table(results))


# -- synth ----------------------------------------------------------------------


def _parse_instruction(text: str) -> Instruction:
    try:
        ref, side = text.split("-")
    except ValueError:
        raise CliError(f"instruction must look like bowl-right, got {text!r}") from None
    return Instruction(ref, side)


def cmd_synth(args) -> None:
    cfg = _resolve_config(args)
    instruction = _parse_instruction(args.instruction)
    if instruction.reference not in cfg.table.radii:
        raise CliError(f"unknown reference object {instruction.reference!r}")
    profile = cfg.profiles.get(args.profile) or PROFILES.get(args.profile)
    if profile is None:
        raise CliError(f"unknown gaze profile {args.profile!r}")
    settings = settings_for(replace(cfg, demo_scene="ambiguous"))
    scene = settings.demo_scene
    layout = build_layout(scene, cfg.offset_scale, cfg.width_scale)
    demo_seed, trace_seed = seed_sequence([cfg.seed, 0x5EED]).spawn(2)
    demos = synthesize_demonstrations(scene, instruction, layout, args.n, cfg.noise_sd, profile, cfg.gaze_budget_ms, demo_seed)

    out = _out_dir(args)
    extra = {"instruction": str(instruction), "profile": profile.name, "n": args.n}
    header = {"seed": cfg.seed, "config": cfg.to_dict(), **extra, "table": scene.to_dict()}
    _write(out / "demos.json", dump_demonstrations(demos, header))

    view = placement_scene()
    head = header_lines(cfg, extra)
    _write(out / "scene.json", json.dumps({"provenance": header, **view.layout}, indent=2) + "\n")
    specs = json.loads(format_object_specs(view.objects))
    _write(out / "objects.json", json.dumps({"provenance": header, "objects": specs}, indent=2) + "\n")
    (out / "traces").mkdir(exist_ok=True)
    (out / "keyframes").mkdir(exist_ok=True)
    glances = profile.switches_per_demo // 4
    for k, (demo, child) in enumerate(zip(demos, trace_seed.spawn(len(demos)))):
        st = synthesize_trace(demo.fixation_times, view, profile.switches_per_demo, glances, seed=child, dropout_rate=0.01)
        _write(out / "traces" / f"trace_{k:03d}.csv", head + format_gaze_log(st.trace))
        _write(out / "keyframes" / f"keyframes_{k:03d}.csv", head + format_keyframes(st.keyframes))


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gazebirl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
        sp.add_argument("--config", help="experiment config JSON")
        sp.add_argument("--seed", type=int, help="master seed (overrides config)")

    a = sub.add_parser("analyze", help="fixation filtering and attention statistics for one gaze log")
    a.add_argument("--gaze", required=True, help="gaze log CSV")
    a.add_argument("--scene", required=True, help="scene image (PNG) or synthetic layout JSON")
    a.add_argument("--objects", required=True, help="object spec JSON")
    a.add_argument("--keyframes", help="keyframe log")
    a.add_argument("--filter", help="filter settings JSON")
    a.add_argument("--sample-rate", type=float, default=50.0)
    a.add_argument("--window-ms", type=float, default=3000.0)
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    b = sub.add_parser("birl", help="run the placement reward-learning experiment")
    common(b)
    b.add_argument("--jobs", type=int, help="parallel worker processes")
    b.add_argument("--no-gaze", action="store_true", help="set the gaze prior scale to 0 (both arms identical)")
    b.set_defaults(func=cmd_birl)

    s = sub.add_parser("synth", help="write synthetic demonstrations and gaze traces")
    common(s)
    s.add_argument("--n", type=int, default=5, help="number of demonstrations")
    s.add_argument("--profile", default="video")
    s.add_argument("--instruction", default="bowl-right")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (CliError, ConfigError, InputError) as e:
        print(f"gazebirl {args.command}: error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"gazebirl {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
