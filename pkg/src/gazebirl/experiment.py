"""The full placement experiment grid and its result tables."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace

from .config import ExperimentConfig
from .policy import ExperimentSettings, GeneralizationResult, generalization_eval, relative_improvement
from .sim import ambiguous_configuration, sample_configurations

PROFILE_LABELS = {"kt": "KT", "video": "Video"}


def settings_for(cfg: ExperimentConfig) -> ExperimentSettings:
    names = tuple(cfg.table.radii)
    if cfg.demo_scene == "ambiguous":
        radius = cfg.table.radii[names[0]]
        scene = ambiguous_configuration(cfg.table.bounds, radius, cfg.offset_scale, names)
    else:
        scene = None
    return ExperimentSettings(
        birl=cfg.birl,
        grid_resolution=cfg.grid_resolution,
        offset_scale=cfg.offset_scale,
        width_scale=cfg.width_scale,
        noise_sd=cfg.noise_sd,
        gaze_budget_ms=cfg.gaze_budget_ms,
        restarts=cfg.restarts,
        estimator=cfg.estimator,
        demo_scene=scene,
    )


@dataclass(frozen=True)
class ExperimentResults:
    config: ExperimentConfig
    cells: tuple[GeneralizationResult, ...]  # ordered (n_demos, profile, instruction)

    def cell(self, n_demos: int, profile: str, instruction) -> GeneralizationResult:
        for c in self.cells:
            if c.n_demos == n_demos and c.profile == profile and tuple(c.instruction) == tuple(instruction):
                return c
        raise KeyError((n_demos, profile, instruction))

    def groups(self):
        for n in self.config.demo_counts:
            for p in self.config.profiles:
                yield n, p, [self.cell(n, p, i) for i in self.config.instructions]


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None, progress=None) -> ExperimentResults:
    configs = sample_configurations(
        cfg.n_configs, cfg.table.bounds, cfg.table.min_sep, [cfg.seed, 0xC0FF], cfg.table.radii
    )
    settings = settings_for(cfg)
    cells = []
    for n in cfg.demo_counts:
        for name, profile in cfg.profiles.items():
            for ins in cfg.instructions:
                if progress:
                    progress(f"{n} demos, {name} gaze, {ins}")
                cells.append(generalization_eval(configs, ins, n, settings, cfg.seed, profile, jobs or cfg.jobs))
    return ExperimentResults(cfg, tuple(cells))


def header_lines(cfg: ExperimentConfig, extra: dict | None = None) -> str:
    doc = {"seed": cfg.seed, "config": cfg.to_dict()}
    if extra:
        doc.update(extra)
    return f"# gazebirl {json.dumps(doc, sort_keys=True, separators=(',', ':'))}\n"


def _num(v: float) -> str:
    return f"{v:.6f}"


def _pct(v: float) -> str:
    return f"{100 * v:.2f}"


def _mean_improvement(cells, metric: str) -> float:
    return sum(getattr(c, metric) for c in cells) / len(cells)


def loss_table(results: ExperimentResults, metric: str) -> str:
    """Wide table shaped like the paper's: a column per (demo count, profile,
    instruction); rows for each arm and the instruction-averaged improvement."""
    mean = "mean_evd" if metric == "evd" else "mean_placement_loss"
    imp = "evd_improvement" if metric == "evd" else "placement_improvement"
    buf = io.StringIO()
    buf.write(header_lines(results.config, {"table": metric}))
    w = csv.writer(buf, lineterminator="\n")
    cols, without, with_, improvement = [], [], [], []
    for n, p, cells in results.groups():
        for i, c in enumerate(cells):
            cols.append(f"{n}_{p}_{c.instruction.reference}")
            without.append(_num(getattr(c, mean)(False)))
            with_.append(_num(getattr(c, mean)(True)))
            improvement.append(_pct(_mean_improvement(cells, imp)) if i == 0 else "")
    w.writerow(["row"] + cols)
    w.writerow(["without_gaze"] + without)
    w.writerow(["with_gaze"] + with_)
    w.writerow(["improvement_pct"] + improvement)
    return buf.getvalue()


RESULT_COLUMNS = [
    "profile",
    "arm",
    "n_demos",
    "instruction",
    "mean_evd",
    "mean_placement_loss",
    "mean_placement_loss_norm",
    "evd_improvement_pct",
    "placement_improvement_pct",
    "match_rate",
]


def results_table(results: ExperimentResults) -> str:
    """Long-form rows per arm; instruction ``all`` pools configurations across instructions."""
    buf = io.StringIO()
    buf.write(header_lines(results.config, {"table": "results"}))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for n, p, cells in results.groups():
        diag = cells[0].table_diagonal
        groups = [(str(c.instruction), [c]) for c in cells] + [("all", cells)]
        for label, group in groups:
            outcomes = {True: [], False: []}
            for c in group:
                for o in c.outcomes:
                    outcomes[True].append(o.with_gaze)
                    outcomes[False].append(o.without_gaze)
            means = {}
            for gaze in (True, False):
                arm = outcomes[gaze]
                ref_match = [
                    a.dominant_object == c.instruction.reference
                    for c in group
                    for a in (o.with_gaze if gaze else o.without_gaze for o in c.outcomes)
                ]
                means[gaze] = (
                    sum(a.evd for a in arm) / len(arm),
                    sum(a.placement_loss for a in arm) / len(arm),
                    sum(ref_match) / len(ref_match),
                )
            evd_imp = relative_improvement(means[True][0], means[False][0])
            pl_imp = relative_improvement(means[True][1], means[False][1])
            for gaze in (False, True):
                e, pl, m = means[gaze]
                w.writerow(
                    [p, "with_gaze" if gaze else "without_gaze", n, label, _num(e), _num(pl), _num(pl / diag), _pct(evd_imp), _pct(pl_imp), _num(m)]
                )
    return buf.getvalue()


def per_config_table(results: ExperimentResults) -> str:
    buf = io.StringIO()
    buf.write(header_lines(results.config, {"table": "per_config"}))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["profile", "n_demos", "instruction", "config", "arm", "evd", "placement_loss", "placement_x", "placement_y", "dominant_object"])
    for c in results.cells:
        for o in c.outcomes:
            for arm, a in (("without_gaze", o.without_gaze), ("with_gaze", o.with_gaze)):
                w.writerow(
                    [c.profile, c.n_demos, str(c.instruction), o.index, arm, _num(a.evd), _num(a.placement_loss), _num(a.placement[0]), _num(a.placement[1]), a.dominant_object or ""]
                )
    return buf.getvalue()


def force_no_gaze(cfg: ExperimentConfig) -> ExperimentConfig:
    return replace(cfg, birl=replace(cfg.birl, prior_scale=0.0))
