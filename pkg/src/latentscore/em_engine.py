"""EM fitting of the hidden-root model with tournament initialization.

``run_em`` alternates expectation and maximization steps on incomplete data
until the objective's relative change drops below a tolerance.  The objective
is ``g = log p(D|theta) + log p(theta)`` in MAP mode and the plain log
likelihood in ML mode; each iteration increases it, so traces are monotone
up to floating-point noise.

``tournament_init`` spreads a power-of-two field of random restarts over a
halving schedule: every surviving copy runs twice as many iterations as in
the previous round, then the better half advances.  With the default field
of 64 the rounds run 1, 2, 4, 8, 16, 32 iterations, so the eventual winner
has seen 63 iterations before the main loop starts.  Ties advance the copy
with the lower index, which keeps the whole procedure a pure function of the
seed stream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .model_core import (
    Dataset,
    ModelSpec,
    ParamSet,
    PriorSet,
    _component_log_scores,
    align_hidden_arity,
    clamp_rows,
    counts_from_posteriors,
    expected_counts,
    log_prior,
)
from .numerics import NumericalFailureError, SeededStream
from .synth_data import StatSet, generate_model


class DegeneratePriorError(ValueError):
    """MAP M step hit a row whose posterior-count denominator is not positive."""


class StarvedRowError(ValueError):
    """ML M step hit a row with zero expected count, leaving it undefined."""


@dataclass(frozen=True)
class EmConfig:
    """Knobs for the EM loop and its initialization."""

    mode: str = "map"
    rel_tol: float = 1e-5
    max_iters_after_init: int = 200
    tournament_start: int = 64

    def __post_init__(self):
        if self.mode not in ("map", "ml"):
            raise ValueError("mode must be 'map' or 'ml'")
        if not self.rel_tol > 0.0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters_after_init < 1:
            raise ValueError("max_iters_after_init must be >= 1")
        ts = self.tournament_start
        if ts < 2 or (ts & (ts - 1)) != 0:
            raise ValueError("tournament_start must be a power of two >= 2")


@dataclass
class EmResult:
    """What a fit produced: parameters, objective trace, and stopping state."""

    params: ParamSet
    final_g: float
    converged: bool
    iterations_used: int
    g_trace: list[float] = field(repr=False)


def e_step(params: ParamSet, data: Dataset) -> StatSet:
    """Posterior-weighted sufficient statistics at ``params``.

    Totals are conserved: the root counts sum to N, and each leaf table's
    total is N as well.
    """
    if data.is_complete:
        raise ValueError("E step expects incomplete data; use sufficient_stats "
                         "for a dataset with the hidden column")
    root_counts, leaf_counts = expected_counts(params, data)
    return StatSet(data.spec, root_counts, leaf_counts)


def _map_rows(counts: np.ndarray, alphas: np.ndarray) -> np.ndarray:
    counts = np.atleast_2d(counts)
    alphas = np.atleast_2d(alphas)
    r = counts.shape[1]
    denom = counts.sum(axis=1) + alphas.sum(axis=1) - r
    if np.any(denom <= 0.0):
        raise DegeneratePriorError(
            "posterior-mode update undefined: row count + alpha total <= arity")
    return clamp_rows((counts + alphas - 1.0) / denom[:, None])


def _ml_rows(counts: np.ndarray) -> np.ndarray:
    counts = np.atleast_2d(counts)
    denom = counts.sum(axis=1)
    if np.any(denom <= 0.0):
        raise StarvedRowError("a row has zero expected count; its maximum-"
                              "likelihood update is undefined")
    return clamp_rows(counts / denom[:, None])


def m_step_map(stats: StatSet, prior: PriorSet) -> ParamSet:
    """Row-wise posterior mode: (counts + alpha - 1) / (total + alpha0 - r)."""
    if stats.spec != prior.spec:
        raise ValueError("statistics and prior describe different models")
    root = _map_rows(stats.root, prior.root)[0]
    leaves = [_map_rows(c, a) for c, a in zip(stats.leaves, prior.leaves)]
    return ParamSet(stats.spec, root, leaves)


def m_step_ml(stats: StatSet) -> ParamSet:
    """Row-wise relative frequencies of the expected counts."""
    root = _ml_rows(stats.root)[0]
    leaves = [_ml_rows(c) for c in stats.leaves]
    return ParamSet(stats.spec, root, leaves)


def _evaluate(params: ParamSet, data: Dataset, prior: PriorSet | None,
              mode: str):
    """One pass over the data: objective value plus the posterior matrix."""
    scores = _component_log_scores(params, data.rows)
    row_ls = logsumexp(scores, axis=1)
    g = float(row_ls.sum())
    if mode == "map":
        g += log_prior(params, prior)
    post = np.exp(scores - row_ls[:, None])
    return g, post


def _one_m_step(post: np.ndarray, data: Dataset, prior: PriorSet | None,
                mode: str) -> ParamSet:
    root_counts, leaf_counts = counts_from_posteriors(post, data)
    stats = StatSet(data.spec, root_counts, leaf_counts)
    if mode == "map":
        return m_step_map(stats, prior)
    return m_step_ml(stats)


def _check_fit_inputs(data: Dataset, prior: PriorSet | None,
                      config: EmConfig) -> None:
    if data.is_complete:
        raise ValueError("EM expects incomplete data; complete data has "
                         "closed-form estimates")
    if config.mode == "map":
        if prior is None:
            raise ValueError("MAP mode needs a prior")
        if prior.spec != data.spec:
            raise ValueError("prior and data describe different models")


def run_em(init: ParamSet, data: Dataset, prior: PriorSet | None,
           config: EmConfig) -> EmResult:
    """Iterate E and M steps from ``init`` until converged or out of budget.

    Convergence: |g_t - g_{t-1}| / |g_{t-1}| < rel_tol, falling back to the
    absolute change when the previous value is exactly zero.  The trace
    records the objective at ``init`` and after every M step.
    """
    _check_fit_inputs(data, prior, config)
    if init.spec != data.spec:
        raise ValueError("initial parameters and data describe different models")
    params = init
    g, post = _evaluate(params, data, prior, config.mode)
    if not np.isfinite(g):
        raise NumericalFailureError("objective non-finite at the initial "
                                    "parameters")
    trace = [g]
    converged = False
    iterations = 0
    for it in range(1, config.max_iters_after_init + 1):
        params = _one_m_step(post, data, prior, config.mode)
        g_new, post = _evaluate(params, data, prior, config.mode)
        if not np.isfinite(g_new):
            raise NumericalFailureError(
                f"objective became non-finite at iteration {it}")
        trace.append(g_new)
        iterations = it
        prev = trace[-2]
        change = abs(g_new - prev)
        rel = change if prev == 0.0 else change / abs(prev)
        if rel < config.rel_tol:
            converged = True
            break
    return EmResult(params=params, final_g=trace[-1], converged=converged,
                    iterations_used=iterations, g_trace=trace)


def _run_fixed(params: ParamSet, data: Dataset, prior: PriorSet | None,
               mode: str, count: int):
    g, post = _evaluate(params, data, prior, mode)
    for _ in range(count):
        params = _one_m_step(post, data, prior, mode)
        g, post = _evaluate(params, data, prior, mode)
    if not np.isfinite(g):
        raise NumericalFailureError("objective became non-finite during "
                                    "initialization")
    return params, g


def tournament_init(data: Dataset, spec: ModelSpec, prior: PriorSet | None,
                    config: EmConfig, rng: SeededStream) -> ParamSet:
    """Halving tournament over random restarts; returns the winning ParamSet.

    ``spec`` is the model to fit; it may assume a different hidden arity
    than ``data.spec`` carries.  Copy ``i`` draws its start from
    ``rng.child(i)``, so the result depends only on the stream, not on
    evaluation order or thread count.
    """
    data = align_hidden_arity(spec, data)
    _check_fit_inputs(data, prior, config)
    copies = [(idx, generate_model(spec, rng.child(idx)))
              for idx in range(config.tournament_start)]
    iters = 1
    while len(copies) > 1:
        scored = []
        for idx, params in copies:
            params, g = _run_fixed(params, data, prior, config.mode, iters)
            scored.append((g, idx, params))
        scored.sort(key=lambda t: (-t[0], t[1]))
        copies = [(idx, params) for _, idx, params in scored[:len(copies) // 2]]
        iters *= 2
    return copies[0][1]


def fit(data: Dataset, spec: ModelSpec, prior: PriorSet | None,
        config: EmConfig | None = None,
        rng: SeededStream | None = None) -> EmResult:
    """Tournament initialization followed by the full EM loop."""
    if config is None:
        config = EmConfig()
    if rng is None:
        raise ValueError("fit needs a SeededStream for the restarts")
    data = align_hidden_arity(spec, data)
    init = tournament_init(data, spec, prior, config, rng)
    return run_em(init, data, prior, config)


def result_metadata(result: EmResult) -> dict:
    """The metadata block stored next to a trained model."""
    return {
        "final_g": result.final_g,
        "converged": result.converged,
        "iterations_used": result.iterations_used,
    }
