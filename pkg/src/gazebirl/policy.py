"""Placement policy extraction, EVD and placement loss, and the multi-configuration
generalization experiment."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .birl import BirlConfig, map_reward, mean_reward, run_mcmc
from .reward import (
    Instruction,
    KernelLayout,
    RewardParams,
    TableConfig,
    ascend,
    build_layout,
    ground_truth_reward,
    object_weight_sums,
    reward,
)
from .sim import (
    PROFILES,
    GazeProfile,
    ambiguous_configuration,
    build_action_grid,
    seed_sequence,
    synthesize_demonstrations,
)

logger = logging.getLogger(__name__)

TIE_TOL = 1e-9


def _termini(params, layout: KernelLayout, table: TableConfig, restarts: int, seed) -> tuple[np.ndarray, np.ndarray]:
    if restarts < 1:
        raise ValueError("restarts must be at least 1")
    rng = np.random.default_rng(seed_sequence(seed))
    xmin, ymin, xmax, ymax = table.bounds
    starts = rng.uniform([xmin, ymin], [xmax, ymax], size=(restarts, 2))
    return ascend(params, layout, table.bounds, starts)


def _canonical_best(x: np.ndarray, r: np.ndarray, merge: float = 1e-4) -> np.ndarray:
    # equal-reward termini: lowest (x, y) wins so the choice does not depend on restart order.
    # coordinates within ``merge`` of each other compare equal, which rounding cannot guarantee
    near = np.flatnonzero(r >= r.max() - TIE_TOL)
    pts = x[near]
    cand = np.flatnonzero(pts[:, 0] <= pts[:, 0].min() + merge)
    cand = cand[pts[cand, 1] <= pts[cand, 1].min() + merge]
    return pts[cand[np.argmax(r[near][cand])]].copy()


def best_placement(params, layout: KernelLayout, table: TableConfig, restarts: int = 32, seed=0) -> np.ndarray:
    """Highest-reward terminus of gradient ascent from ``restarts`` uniform starts."""
    x, r = _termini(params, layout, table, restarts, seed)
    return _canonical_best(x, r)


def optimal_placements(params, layout: KernelLayout, table: TableConfig, restarts: int = 32, seed=0, merge: float = 1e-4) -> np.ndarray:
    """All distinct termini whose reward ties the best one (within 1e-9)."""
    x, r = _termini(params, layout, table, restarts, seed)
    near = x[r >= r.max() - TIE_TOL]
    out: list[np.ndarray] = []
    for p in near[np.lexsort((near[:, 1], near[:, 0]))]:
        if all(np.linalg.norm(p - q) > merge for q in out):
            out.append(p)
    return np.array(out)


def evd(policy_placement, gt_params: RewardParams, layout: KernelLayout, table: TableConfig, restarts: int = 32, seed=0):
    """Optimal ground-truth reward minus the reward earned at ``policy_placement``.

    The placement task is one step, so a policy's value is the reward of its
    placement. ``policy_placement`` may be one point (2,) or a batch (n, 2).
    """
    x_star = best_placement(gt_params, layout, table, restarts, seed)
    pts = np.asarray(policy_placement, dtype=float)
    diff = reward(x_star, gt_params, layout) - reward(pts, gt_params, layout)
    if np.min(diff) < -TIE_TOL:
        logger.warning("policy placement beats the optimizer by %.3g; optimum estimate was not global", -np.min(diff))
    out = np.maximum(diff, 0.0)
    return float(out) if out.ndim == 0 else out


def placement_loss(policy_placement, gt_placement) -> float:
    return float(math.dist(tuple(map(float, policy_placement)), tuple(map(float, gt_placement))))


def dominant_weight_object(params: RewardParams) -> str | None:
    sums = object_weight_sums(params)
    best = max(sums.values())
    top = [k for k, v in sums.items() if v == best]
    return top[0] if len(top) == 1 else None


def transfer(params: RewardParams, layout: KernelLayout) -> RewardParams:
    """Re-express object-relative weights on another scene with the same objects."""
    if set(params.names) != set(layout.names):
        raise ValueError(f"objects {params.names} do not match target layout {layout.names}")
    order = [params.names.index(n) for n in layout.names]
    return RewardParams(layout.names, params.weights[order])


@dataclass(frozen=True)
class ExperimentSettings:
    """Everything a single generalization run needs besides the evaluation scenes."""

    birl: BirlConfig = BirlConfig()
    grid_resolution: int = 20
    offset_scale: float = 1.5
    width_scale: float = 1.0
    noise_sd: float = 0.01
    gaze_budget_ms: float = 5000.0
    restarts: int = 32
    estimator: str = "map"
    demo_scene: TableConfig | None = field(default_factory=ambiguous_configuration)

    def __post_init__(self):
        if self.estimator not in ("map", "mean"):
            raise ValueError("estimator must be 'map' or 'mean'")


@dataclass(frozen=True)
class ArmOutcome:
    evd: float
    placement_loss: float
    placement: tuple[float, float]
    dominant_object: str | None


@dataclass(frozen=True)
class ConfigOutcome:
    index: int
    with_gaze: ArmOutcome
    without_gaze: ArmOutcome


@dataclass(frozen=True)
class GeneralizationResult:
    instruction: Instruction
    n_demos: int
    profile: str
    outcomes: tuple[ConfigOutcome, ...]
    table_diagonal: float

    def _mean(self, arm: str, metric: str) -> float:
        return float(np.mean([getattr(getattr(o, arm), metric) for o in self.outcomes]))

    def mean_evd(self, gaze: bool) -> float:
        return self._mean("with_gaze" if gaze else "without_gaze", "evd")

    def mean_placement_loss(self, gaze: bool) -> float:
        return self._mean("with_gaze" if gaze else "without_gaze", "placement_loss")

    @property
    def evd_improvement(self) -> float:
        return relative_improvement(self.mean_evd(True), self.mean_evd(False))

    @property
    def placement_improvement(self) -> float:
        return relative_improvement(self.mean_placement_loss(True), self.mean_placement_loss(False))

    def match_rate(self, gaze: bool) -> float:
        arm = "with_gaze" if gaze else "without_gaze"
        return float(np.mean([getattr(o, arm).dominant_object == self.instruction.reference for o in self.outcomes]))


def relative_improvement(with_gaze: float, without_gaze: float) -> float:
    """``1 - with/without``; 0 when both are 0."""
    if without_gaze == 0:
        return 0.0 if with_gaze == 0 else float("-inf")
    return 1.0 - with_gaze / without_gaze


def config_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index)])


def _run_arm(demos, layout, grid, birl: BirlConfig, estimator: str) -> RewardParams:
    chain = run_mcmc(demos, layout, grid, birl)
    return map_reward(chain) if estimator == "map" else mean_reward(chain)


def _evaluate_config(job) -> ConfigOutcome:
    index, config, instruction, n_demos, profile, settings, seed = job
    demo_seed, chain_seed, place_seed = config_seed(seed, index).spawn(3)
    scene = settings.demo_scene if settings.demo_scene is not None else config
    scene_layout = build_layout(scene, settings.offset_scale, settings.width_scale)
    grid = build_action_grid(scene, settings.grid_resolution)
    demos = synthesize_demonstrations(
        scene, instruction, scene_layout, n_demos, settings.noise_sd, profile, settings.gaze_budget_ms, demo_seed
    )

    eval_layout = build_layout(config, settings.offset_scale, settings.width_scale)
    gt = ground_truth_reward(instruction, eval_layout)
    optima = optimal_placements(gt, eval_layout, config, settings.restarts, place_seed)
    r_star = float(np.max(reward(optima, gt, eval_layout)))

    chain_seed_int = int(chain_seed.generate_state(1, dtype=np.uint64)[0])
    arms = {}
    for use_gaze in (True, False):
        birl = replace(settings.birl, use_gaze=use_gaze, seed=chain_seed_int)
        learned = transfer(_run_arm(demos, scene_layout, grid, birl, settings.estimator), eval_layout)
        x = best_placement(learned, eval_layout, config, settings.restarts, place_seed)
        value = r_star - float(reward(x, gt, eval_layout))
        loss = min(placement_loss(x, p) for p in optima)
        arms[use_gaze] = ArmOutcome(max(value, 0.0), loss, (float(x[0]), float(x[1])), dominant_weight_object(learned))
    return ConfigOutcome(index, arms[True], arms[False])


def generalization_eval(
    configs: Sequence[TableConfig],
    instruction: Instruction,
    n_demos: int,
    settings: ExperimentSettings = ExperimentSettings(),
    seed: int = 0,
    profile: GazeProfile | str = "video",
    jobs: int = 1,
) -> GeneralizationResult:
    """Learn a reward from demonstrations with and without the gaze prior and
    score both policies on every configuration.

    Demonstrations come from ``settings.demo_scene`` (an ambiguous side-by-side
    layout by default), or from each evaluation configuration itself when that
    is ``None``. Both arms share demonstrations and chain seeds; they differ
    only in whether the gaze prior is applied.
    """
    if not configs:
        raise ValueError("at least one configuration is required")
    if isinstance(profile, str):
        profile = PROFILES[profile]
    instruction = Instruction(*instruction)
    jobs_list = [(i, c, instruction, n_demos, profile, settings, seed) for i, c in enumerate(configs)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_config, jobs_list, chunksize=max(1, len(jobs_list) // (4 * jobs))))
    else:
        outcomes = [_evaluate_config(j) for j in jobs_list]
    return GeneralizationResult(instruction, n_demos, profile.name, tuple(outcomes), configs[0].diagonal)
