"""Log marginal-likelihood scores for the hidden-root model.

Complete data has a closed-form score (``bd_complete``).  Incomplete data
does not, so this module provides five asymptotic approximations, all
evaluated at the posterior mode found by EM:

- ``laplace``: second-order expansion of g around the mode; needs the
  determinant of the negative Hessian, so it costs O(d^2) gradient calls.
- ``bic``: log likelihood at the mode minus (d/2) log N.
- ``draper``: bic plus (d/2) log 2*pi, a constant offset per dimension.
- ``mled``: the closed form applied to the fractional expected statistics.
- ``cs``: mled rescaled by the gap between the observed log likelihood and
  the expected complete-data log likelihood at the mode.

``oracle_exact`` sums the closed form over every completion of the hidden
column, which is exponential in N and therefore capped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .em_engine import EmResult, e_step
from .model_core import (
    Dataset,
    ModelSpec,
    ParamSet,
    PriorSet,
    align_hidden_arity,
    dimension,
    grad_g,
    log_likelihood,
    log_posterior_g,
    params_to_free,
)
from .numerics import (
    NotPositiveDefiniteError,
    NumericalFailureError,
    log_det_pd,
    log_sum_exp,
)
from .synth_data import StatSet

MEASURES = ("laplace", "bic", "draper", "mled", "cs")

ORACLE_CAP = 2 ** 20

LOG_2PI = math.log(2.0 * math.pi)


class EnumerationInfeasibleError(RuntimeError):
    """Exact enumeration would exceed the completion cap."""


def _params_of(mode) -> ParamSet:
    """Measure entry points take an EmResult or a bare ParamSet."""
    return mode.params if isinstance(mode, EmResult) else mode


def _bd_rows(counts: np.ndarray, alphas: np.ndarray) -> float:
    counts = np.atleast_2d(counts)
    alphas = np.atleast_2d(alphas)
    a0 = alphas.sum(axis=1)
    return float((gammaln(a0) - gammaln(a0 + counts.sum(axis=1))
                  + (gammaln(alphas + counts) - gammaln(alphas)).sum(axis=1)
                  ).sum())


def fractional_bd(stats: StatSet, prior: PriorSet) -> float:
    """The closed-form score with gamma functions taken at real-valued counts."""
    if stats.spec != prior.spec:
        raise ValueError("statistics and prior describe different models")
    total = _bd_rows(stats.root, prior.root)
    for counts, alphas in zip(stats.leaves, prior.leaves):
        total += _bd_rows(counts, alphas)
    return total


def bd_complete(stats: StatSet, prior: PriorSet) -> float:
    """Exact log marginal likelihood of complete data from integer counts."""
    if not stats.is_integral:
        raise ValueError("bd_complete needs integer counts; fractional "
                         "statistics go through fractional_bd")
    return fractional_bd(stats, prior)


def _expected_complete_loglik(params: ParamSet, stats: StatSet) -> float:
    """sum over all cells of E[N] * log theta."""
    total = float((stats.root * np.log(params.root)).sum())
    for table, counts in zip(params.leaves, stats.leaves):
        total += float((counts * np.log(table)).sum())
    return total


# ---------------------------------------------------------------------------
# Exact oracle by enumeration of hidden-column completions.

def oracle_exact(data: Dataset, spec: ModelSpec, prior: PriorSet,
                 cap: int = ORACLE_CAP) -> float:
    """log p(D) as log-sum-exp of the closed form over all c^N completions.

    Raises EnumerationInfeasibleError when c^N exceeds ``cap``.
    """
    if data.is_complete:
        raise ValueError("data already carries a hidden column; score it "
                         "with bd_complete instead")
    data = align_hidden_arity(spec, data)
    if prior.spec != spec:
        raise ValueError("prior and spec describe different models")
    c = spec.hidden_arity
    n = data.n_samples
    m = c ** n
    if m > cap:
        raise EnumerationInfeasibleError(
            f"{c}^{n} = {m} hidden completions exceed the cap of {cap}")

    # Completion t's hidden column is row t of this base-c digit matrix.
    idx = np.arange(m, dtype=np.int64)
    completions = np.empty((m, n), dtype=np.int8)
    power = 1
    for t in range(n - 1, -1, -1):
        completions[:, t] = (idx // power) % c
        power *= c

    masks = [completions == j for j in range(c)]
    root_counts = [masks[j].sum(axis=1) for j in range(c)]

    # All counts are integers in 0..N, so gammaln(alpha + count) is a table
    # lookup once the table for that alpha exists.
    tables: dict[float, np.ndarray] = {}

    def shifted_gammaln(alpha_val: float, count: np.ndarray) -> np.ndarray:
        key = float(alpha_val)
        t = tables.get(key)
        if t is None:
            t = gammaln(key + np.arange(n + 1, dtype=float))
            tables[key] = t
        return t[count]

    total = np.zeros(m)
    ra = prior.root
    ra0 = float(ra.sum())
    total += gammaln(ra0) - gammaln(ra0 + n)
    for j in range(c):
        total += shifted_gammaln(ra[j], root_counts[j]) - gammaln(float(ra[j]))
    for i, r in enumerate(spec.observed_arities):
        col = data.rows[:, i]
        sel = [np.flatnonzero(col == k) for k in range(r)]
        alphas = prior.leaves[i]
        for j in range(c):
            a_row = alphas[j]
            a0 = float(a_row.sum())
            total += gammaln(a0) - shifted_gammaln(a0, root_counts[j])
            for k in range(r):
                cnt = masks[j][:, sel[k]].sum(axis=1)
                total += shifted_gammaln(a_row[k], cnt) - gammaln(float(a_row[k]))
    return log_sum_exp(total)


# ---------------------------------------------------------------------------
# Curvature at the mode.

def neg_hessian(coords: np.ndarray, data: Dataset, prior: PriorSet,
                rel_step: float = 1e-5) -> np.ndarray:
    """-(d^2 g / dx^2) by central differences of the exact gradient.

    The step for coordinate j is rel_step * max(1, |x_j|).  The averaged
    matrix (J + J^T) / 2 is exactly symmetric, which log_det_pd requires.
    """
    x = np.asarray(coords, dtype=float)
    d = x.size
    jac = np.empty((d, d))
    for j in range(d):
        h = rel_step * max(1.0, abs(x[j]))
        xp = x.copy()
        xp[j] += h
        xm = x.copy()
        xm[j] -= h
        try:
            gp = grad_g(xp, data, prior)
            gm = grad_g(xm, data, prior)
        except ValueError as exc:
            raise NumericalFailureError(
                f"difference step at coordinate {j} left the simplex") from exc
        jac[:, j] = (gp - gm) / (2.0 * h)
    a = -(jac + jac.T) / 2.0
    if not np.all(np.isfinite(a)):
        raise NumericalFailureError("negative Hessian has non-finite entries")
    return a


# ---------------------------------------------------------------------------
# The five measures.

def laplace_score(em, data: Dataset, prior: PriorSet) -> float:
    """g at the mode + (d/2) log 2*pi - half the log determinant of -H.

    ``em`` is an EmResult (or the mode ParamSet itself).  Raises
    NotPositiveDefiniteError when the curvature is not positive definite
    (the mode sits on a ridge or a boundary).
    """
    params = _params_of(em)
    coords = params_to_free(params)
    g = log_posterior_g(params, data, prior)
    a = neg_hessian(coords, data, prior)
    d = coords.size
    return g + 0.5 * d * LOG_2PI - 0.5 * log_det_pd(a)


def bic_score(loglik_at_mode: float, d: int, n_samples: int) -> float:
    return loglik_at_mode - 0.5 * d * math.log(n_samples)


def draper_score(loglik_at_mode: float, d: int, n_samples: int) -> float:
    return bic_score(loglik_at_mode, d, n_samples) + 0.5 * d * LOG_2PI


def mled_score(em, data: Dataset, prior: PriorSet) -> float:
    """Closed form on the expected statistics at the mode."""
    return fractional_bd(e_step(_params_of(em), data), prior)


def cs_score(em, data: Dataset, prior: PriorSet) -> float:
    """mled - E[complete log lik] + observed log lik, all at the mode.

    The difference corrects the complete-data form for the data actually
    observed; the dimension penalties of the two pieces cancel exactly
    because the completed dataset has the same d and N.
    """
    params = _params_of(em)
    stats = e_step(params, data)
    if data.spec.hidden_arity == 1:
        # Nothing is hidden, so the completed data IS the observed data and
        # the two likelihood terms are the same quantity.
        return fractional_bd(stats, prior)
    return (fractional_bd(stats, prior)
            - _expected_complete_loglik(params, stats)
            + log_likelihood(params, data))


# ---------------------------------------------------------------------------
# Batch evaluation.

@dataclass
class ScoreReport:
    """All requested scores at one parameter point, plus shared context.

    ``scores`` holds the measures that evaluated; ``failures`` maps each
    failed measure to a one-line reason.  Keys of the two never overlap.
    """

    measures: tuple[str, ...]
    n_samples: int
    dim: int
    loglik_at_mode: float
    g_at_mode: float
    scores: dict[str, float] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    def csv_header(self) -> str:
        return ",".join(self.measures)

    def csv_row(self) -> str:
        cells = []
        for name in self.measures:
            cells.append(repr(self.scores[name]) if name in self.scores else "")
        return ",".join(cells)


def score_report(em, data: Dataset, prior: PriorSet,
                 measures=MEASURES, oracle_cap: int = ORACLE_CAP) -> ScoreReport:
    """Evaluate the requested measures at one mode, sharing one E step.

    ``measures`` may include "oracle" in addition to the approximations.
    Failures (non-positive-definite curvature, infeasible enumeration,
    numerics) are recorded per measure instead of raised.
    """
    params = _params_of(em)
    measures = tuple(measures)
    known = set(MEASURES) | {"oracle"}
    unknown = [m for m in measures if m not in known]
    if unknown:
        raise ValueError(f"unknown measures: {unknown}")

    d = dimension(data.spec)
    n = data.n_samples
    ll = log_likelihood(params, data)
    g = log_posterior_g(params, data, prior)
    report = ScoreReport(measures=measures, n_samples=n, dim=d,
                         loglik_at_mode=ll, g_at_mode=g)

    need_stats = bool({"mled", "cs"} & set(measures))
    stats = e_step(params, data) if need_stats else None
    mled_val = fractional_bd(stats, prior) if need_stats else None

    for name in measures:
        try:
            if name == "bic":
                val = bic_score(ll, d, n)
            elif name == "draper":
                val = draper_score(ll, d, n)
            elif name == "mled":
                val = mled_val
            elif name == "cs":
                if data.spec.hidden_arity == 1:
                    val = mled_val
                else:
                    val = (mled_val
                           - _expected_complete_loglik(params, stats) + ll)
            elif name == "laplace":
                val = laplace_score(params, data, prior)
            else:
                val = oracle_exact(data, data.spec, prior, cap=oracle_cap)
        except (NotPositiveDefiniteError, NumericalFailureError,
                EnumerationInfeasibleError) as exc:
            report.failures[name] = f"{type(exc).__name__}: {exc}"
            continue
        report.scores[name] = float(val)
    return report
