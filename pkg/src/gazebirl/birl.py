"""Bayesian IRL over RBF placement rewards.

The placement task is a single-state, one-step decision problem, so
``Q*(s, a) = R(a)`` and the softmax demonstrator likelihood is evaluated over
the cells of an :class:`~gazebirl.sim.ActionGrid`. Fixation times enter as an
additive log-prior penalty on object weight orderings that contradict the
fixation ordering.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numba
import numpy as np
from scipy.special import logsumexp

from .reward import KernelLayout, RewardParams, features, object_weight_sums
from .sim import ActionGrid, Demonstration, seed_sequence

MIN_FIXATION_MS = 1.0  # denominator clamp for zero fixation times


@dataclass(frozen=True)
class BirlConfig:
    confidence: float = 10.0
    prior_scale: float = 1.0
    chain_length: int = 20000
    burn_in: int = 5000
    proposal_step: float = 0.1
    seed: int = 0
    use_gaze: bool = True

    def __post_init__(self):
        if self.confidence < 0 or self.prior_scale < 0:
            raise ValueError("confidence and prior_scale must be non-negative")
        if not 0 <= self.burn_in < self.chain_length:
            raise ValueError("burn_in must satisfy 0 <= burn_in < chain_length")
        if self.proposal_step <= 0:
            raise ValueError("proposal_step must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class PosteriorChain:
    names: tuple[str, ...]
    samples: np.ndarray  # (n, k*5) flattened weights
    scores: np.ndarray  # (n,) unnormalized log posterior
    acceptance_rate: float

    def __len__(self) -> int:
        return len(self.scores)

    def params(self, i: int) -> RewardParams:
        return RewardParams.from_flat(self.names, self.samples[i])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        k = self.samples.shape[1] // len(self.names)
        w.writerow(["index", "score"] + [f"w_{n}_{j}" for n in self.names for j in range(k)])
        for i, (s, row) in enumerate(zip(self.scores, self.samples)):
            w.writerow([i, repr(float(s))] + [repr(float(v)) for v in row])
        return buf.getvalue()


def _demo_cells(demos: Sequence[Demonstration], grid: ActionGrid) -> np.ndarray:
    return np.array([grid.nearest(d.placement) for d in demos], dtype=np.int64)


def log_likelihood(
    demos: Sequence[Demonstration],
    params: RewardParams,
    layout: KernelLayout,
    grid: ActionGrid,
    c: float,
) -> float:
    if len(grid) == 0:
        raise ValueError("empty action grid")
    if not demos:
        raise ValueError("at least one demonstration is required")
    r = features(grid.cells, layout) @ np.asarray(params.flat if isinstance(params, RewardParams) else params).reshape(-1)
    return grid_log_likelihood(r, _demo_cells(demos, grid), c)


def grid_log_likelihood(rewards: np.ndarray, demo_cells: np.ndarray, c: float) -> float:
    """Softmax log-likelihood from per-cell rewards and demonstrated cell indices."""
    z = c * np.asarray(rewards, dtype=float)
    return float(np.sum(z[demo_cells]) - len(demo_cells) * logsumexp(z))


def aggregate_fixation_times(demos: Sequence[Demonstration]) -> dict[str, float] | None:
    if any(d.fixation_times is None for d in demos):
        return None
    total: dict[str, float] = {}
    for d in demos:
        for k, v in d.fixation_times.items():
            total[k] = total.get(k, 0.0) + v
    return total


def gaze_log_prior(params: RewardParams, fixation_times: dict[str, float], scale: float = 1.0) -> float:
    """``-scale * sum_{i != j} [w_i < w_j and f_i > f_j] * f_i / f_j``."""
    sums = object_weight_sums(params)
    missing = [n for n in sums if n not in fixation_times]
    if missing:
        raise KeyError(f"no fixation time for objects {missing}")
    names = list(sums)
    penalty = 0.0
    for i in names:
        for j in names:
            if i != j and sums[i] < sums[j] and fixation_times[i] > fixation_times[j]:
                penalty += fixation_times[i] / max(fixation_times[j], MIN_FIXATION_MS)
    return -scale * penalty


def _uses_prior(demos: Sequence[Demonstration], config: BirlConfig) -> dict[str, float] | None:
    if not config.use_gaze:
        return None
    f = aggregate_fixation_times(demos)
    if f is None:
        raise ValueError("use_gaze is set but some demonstrations lack fixation_times")
    return f


def log_posterior(
    demos: Sequence[Demonstration],
    params: RewardParams,
    layout: KernelLayout,
    grid: ActionGrid,
    config: BirlConfig,
) -> float:
    ll = log_likelihood(demos, params, layout, grid, config.confidence)
    f = _uses_prior(demos, config)
    if f is None:
        return ll
    return ll + gaze_log_prior(params, f, config.prior_scale)


@numba.njit(cache=True)
def _score(phi, w, demo_cells, c, obj_of, n_obj, f, lam, use_prior):
    z = c * (phi @ w)
    m = z.max()
    lse = m + math.log(np.sum(np.exp(z - m)))
    ll = 0.0
    for d in demo_cells:
        ll += z[d]
    ll -= demo_cells.shape[0] * lse
    if not use_prior:
        return ll
    sums = np.zeros(n_obj)
    for k in range(w.shape[0]):
        sums[obj_of[k]] += w[k]
    pen = 0.0
    for i in range(n_obj):
        for j in range(n_obj):
            if i != j and sums[i] < sums[j] and f[i] > f[j]:
                pen += f[i] / max(f[j], 1.0)
    return ll - lam * pen


@numba.njit(cache=True)
def _chain(phi, w0, demo_cells, c, obj_of, n_obj, f, lam, use_prior, pair_i, pair_j, eps, logu, burn_in):
    n_steps = pair_i.shape[0]
    K = w0.shape[0]
    w = w0.copy()
    score = _score(phi, w, demo_cells, c, obj_of, n_obj, f, lam, use_prior)
    samples = np.empty((n_steps - burn_in, K))
    scores = np.empty(n_steps - burn_in)
    accepted = 0
    prop = w.copy()
    for t in range(n_steps):
        i = pair_i[t]
        j = pair_j[t]
        total = w[i] + w[j]
        for k in range(K):
            prop[k] = w[k]
        if total > 0.0:
            # reflect w_i + eps back into [0, total]; keeps the pair sum fixed
            y = w[i] + eps[t]
            period = 2.0 * total
            y = y - period * math.floor(y / period)
            if y > total:
                y = period - y
            prop[i] = y
            prop[j] = total - y
        new_score = _score(phi, prop, demo_cells, c, obj_of, n_obj, f, lam, use_prior)
        if logu[t] < new_score - score:
            for k in range(K):
                w[k] = prop[k]
            score = new_score
            accepted += 1
        if t >= burn_in:
            samples[t - burn_in] = w
            scores[t - burn_in] = score
    return samples, scores, accepted


def proposal_draws(n_steps: int, n_weights: int, step: float, seed) -> tuple[np.ndarray, ...]:
    """Random numbers consumed by the chain: a uniform ordered pair of distinct
    weights, a Gaussian transfer and a log-uniform acceptance variate per step."""
    rng = np.random.default_rng(seed_sequence(seed))
    pair_i = rng.integers(0, n_weights, size=n_steps)
    pair_j = rng.integers(0, n_weights - 1, size=n_steps)
    pair_j = pair_j + (pair_j >= pair_i)
    eps = rng.normal(0.0, step, size=n_steps)
    logu = np.log(rng.random(size=n_steps))
    return pair_i, pair_j, eps, logu


def reflect_transfer(w: np.ndarray, i: int, j: int, eps: float) -> np.ndarray:
    """Python mirror of the chain's proposal move, for inspection and tests."""
    out = np.array(w, dtype=float)
    total = out[i] + out[j]
    if total > 0:
        period = 2.0 * total
        y = out[i] + eps
        y = y - period * math.floor(y / period)
        if y > total:
            y = period - y
        out[i], out[j] = y, total - y
    return out


def run_mcmc(
    demos: Sequence[Demonstration],
    layout: KernelLayout,
    grid: ActionGrid,
    config: BirlConfig = BirlConfig(),
    init: RewardParams | None = None,
) -> PosteriorChain:
    """Random-walk Metropolis over the weight simplex.

    Each step picks an ordered pair of distinct weights and moves a Gaussian
    amount of mass between them, reflecting at the simplex faces. The move is
    symmetric, so acceptance is ``min(1, exp(delta log posterior))``. The
    first ``burn_in`` states are dropped; the chain starts from uniform weights.
    """
    if not demos:
        raise ValueError("at least one demonstration is required")
    f = _uses_prior(demos, config)
    names = layout.names
    phi = np.ascontiguousarray(features(grid.cells, layout))
    K = phi.shape[1]
    obj_of = np.repeat(np.arange(len(names)), K // len(names)).astype(np.int64)
    f_arr = np.array([f[n] for n in names] if f is not None else np.zeros(len(names)), dtype=float)
    if f is not None:
        missing = [n for n in names if n not in f]
        if missing:
            raise KeyError(f"no fixation time for objects {missing}")
    w0 = (init.flat if init is not None else RewardParams.uniform(names).flat).astype(float)
    return sample_weights(phi, _demo_cells(demos, grid), obj_of, f_arr, config, w0, names, use_prior=f is not None)


def sample_weights(
    phi: np.ndarray,
    demo_cells: np.ndarray,
    obj_of: np.ndarray,
    fixation_times: np.ndarray,
    config: BirlConfig,
    w0: np.ndarray,
    names: Sequence[str],
    use_prior: bool = True,
) -> PosteriorChain:
    """Metropolis chain over simplex weights for a precomputed feature matrix.

    ``phi`` is (cells, K) kernel activations, ``obj_of`` maps each weight to its
    object index and ``fixation_times`` is indexed by object.
    """
    phi = np.ascontiguousarray(phi, dtype=float)
    K = phi.shape[1]
    pair_i, pair_j, eps, logu = proposal_draws(config.chain_length, K, config.proposal_step, config.seed)
    samples, scores, accepted = _chain(
        phi,
        np.asarray(w0, dtype=float),
        np.asarray(demo_cells, dtype=np.int64),
        float(config.confidence),
        np.asarray(obj_of, dtype=np.int64),
        len(names),
        np.asarray(fixation_times, dtype=float),
        float(config.prior_scale),
        bool(use_prior),
        pair_i,
        pair_j,
        eps,
        logu,
        int(config.burn_in),
    )
    return PosteriorChain(tuple(names), samples, scores, accepted / config.chain_length)


def map_reward(chain: PosteriorChain) -> RewardParams:
    if len(chain) == 0:
        raise ValueError("empty chain")
    return chain.params(int(np.argmax(chain.scores)))


def mean_reward(chain: PosteriorChain) -> RewardParams:
    if len(chain) == 0:
        raise ValueError("empty chain")
    m = chain.samples.mean(axis=0)
    m = np.clip(m, 0.0, None)
    return RewardParams.from_flat(chain.names, m / m.sum())
