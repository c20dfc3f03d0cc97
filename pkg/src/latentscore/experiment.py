"""Arity-recovery sweeps: fit every candidate hidden arity to synthetic data
and compare where each score measure puts its peak.

One sweep draws a true model, samples ``replicates`` datasets from it, strips
the hidden column, and fits every arity in ``test_c_range`` to every dataset.
Each (replicate, test arity) cell runs one tournament-initialized MAP fit and
evaluates all requested measures at that mode; a failing measure invalidates
only its own cell entry.

Randomness is budgeted by stream index so a run is a pure function of the
master seed: cell k (replicate-major order) uses SeededStream(master_seed, k),
while the true model and the datasets live on high stream indices that small
cell counts can never reach.  Cells may run on several worker threads
(LATENT_SCORE_THREADS; 0 or unset picks a small default); results are
assembled in task order, so every emitted byte is identical across thread
counts and reruns.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from time import perf_counter

from .em_engine import (
    DegeneratePriorError,
    EmConfig,
    StarvedRowError,
    fit,
)
from .model_core import (
    Dataset,
    ModelSpec,
    ParamSet,
    PriorSet,
    dimension,
    model_to_json_dict,
    params_from_json_dict,
)
from .numerics import NumericalFailureError, SeededStream
from .scoring import MEASURES, score_report
from .synth_data import generate_model, sample_dataset, strip_hidden

log = logging.getLogger(__name__)

THREADS_ENV = "LATENT_SCORE_THREADS"

# Stream indices for the sweep's own draws; cells use small indices 0..K-1.
_MODEL_STREAM = 2 ** 32
_DATASET_STREAM_BASE = 2 ** 32 + 1


class SelectionError(RuntimeError):
    """No valid score to select from (every candidate arity failed)."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a sweep depends on; JSON-serializable for re-rendering."""

    n_observed: int
    c_true: int
    n_samples: int
    test_c_range: tuple[int, int]
    replicates: int
    epsilon: float = 0.01
    measures: tuple[str, ...] = MEASURES
    master_seed: int = 1
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "test_c_range",
                           tuple(int(c) for c in self.test_c_range))
        object.__setattr__(self, "measures", tuple(self.measures))
        if self.n_observed < 1:
            raise ValueError("n_observed must be >= 1")
        if self.c_true < 1:
            raise ValueError("c_true must be >= 1")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if len(self.test_c_range) != 2:
            raise ValueError("test_c_range must be an inclusive (low, high) "
                             "pair")
        lo, hi = self.test_c_range
        if lo < 1 or hi < lo:
            raise ValueError("test_c_range must satisfy 1 <= low <= high")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")
        if not self.measures:
            raise ValueError("measures must be non-empty")
        allowed = set(MEASURES) | {"oracle"}
        unknown = [m for m in self.measures if m not in allowed]
        if unknown:
            raise ValueError(f"unknown measures: {unknown}")

    @property
    def test_arities(self) -> tuple[int, ...]:
        lo, hi = self.test_c_range
        return tuple(range(lo, hi + 1))

    @property
    def alpha(self) -> float:
        """Every Dirichlet hyperparameter is 1 + epsilon."""
        return 1.0 + self.epsilon


def config_to_json_dict(config: ExperimentConfig) -> dict:
    return {
        "n_observed": config.n_observed,
        "c_true": config.c_true,
        "n_samples": config.n_samples,
        "test_c_range": list(config.test_c_range),
        "replicates": config.replicates,
        "epsilon": config.epsilon,
        "measures": list(config.measures),
        "master_seed": config.master_seed,
        "output_dir": config.output_dir,
    }


def config_from_json_dict(doc: dict) -> ExperimentConfig:
    return ExperimentConfig(
        n_observed=doc["n_observed"],
        c_true=doc["c_true"],
        n_samples=doc["n_samples"],
        test_c_range=tuple(doc["test_c_range"]),
        replicates=doc["replicates"],
        epsilon=doc.get("epsilon", 0.01),
        measures=tuple(doc.get("measures", MEASURES)),
        master_seed=doc.get("master_seed", 1),
        output_dir=doc.get("output_dir"),
    )


@dataclass
class CellResult:
    """One (replicate, test arity) fit and its scores."""

    replicate: int
    test_c: int
    dim: int
    final_g: float | None
    converged: bool
    iterations_used: int
    scores: dict[str, float] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)


@dataclass
class SweepResult:
    config: ExperimentConfig
    true_model: ParamSet
    cells: list[CellResult]

    def replicate_cells(self, replicate: int) -> list[CellResult]:
        return [c for c in self.cells if c.replicate == replicate]

    def measure_curve(self, replicate: int, measure: str) -> dict[int, float]:
        """test_c -> log score over the cells where the measure is valid."""
        return {c.test_c: c.scores[measure]
                for c in self.replicate_cells(replicate)
                if measure in c.scores}


def _thread_count(n_tasks: int) -> int:
    raw = os.environ.get(THREADS_ENV, "0")
    try:
        k = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if k < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    if k == 0:
        k = min(os.cpu_count() or 1, 8)
    return max(1, min(k, n_tasks))


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """Run every cell of the sweep; deterministic given the master seed."""
    spec_true = ModelSpec((2,) * config.n_observed, config.c_true)
    true_model = generate_model(
        spec_true, SeededStream(config.master_seed, _MODEL_STREAM))
    datasets = []
    for rep in range(config.replicates):
        complete = sample_dataset(
            true_model, config.n_samples,
            SeededStream(config.master_seed, _DATASET_STREAM_BASE + rep))
        datasets.append(strip_hidden(complete))

    tasks = [(rep, tc) for rep in range(config.replicates)
             for tc in config.test_arities]
    em_cfg = EmConfig(mode="map")

    def run_cell(k: int) -> CellResult:
        rep, tc = tasks[k]
        spec_fit = ModelSpec(spec_true.observed_arities, tc)
        data_fit = Dataset(spec_fit, datasets[rep].rows)
        prior = PriorSet.symmetric(spec_fit, config.alpha)
        rng = SeededStream(config.master_seed, k)
        started = perf_counter()
        try:
            em = fit(data_fit, spec_fit, prior, em_cfg, rng)
        except (NumericalFailureError, DegeneratePriorError,
                StarvedRowError) as exc:
            reason = f"{type(exc).__name__}: {exc}"
            log.warning("cell rep=%d c=%d failed to fit: %s", rep, tc, reason)
            return CellResult(replicate=rep, test_c=tc,
                              dim=dimension(spec_fit), final_g=None,
                              converged=False, iterations_used=0,
                              failures={m: reason for m in config.measures})
        report = score_report(em, data_fit, prior, config.measures)
        log.debug("cell rep=%d c=%d: %d iterations, %.3fs",
                  rep, tc, em.iterations_used, perf_counter() - started)
        return CellResult(replicate=rep, test_c=tc, dim=report.dim,
                          final_g=em.final_g, converged=em.converged,
                          iterations_used=em.iterations_used,
                          scores=report.scores, failures=report.failures)

    n_threads = _thread_count(len(tasks))
    log.info("sweep: %d cells on %d threads", len(tasks), n_threads)
    started = perf_counter()
    if n_threads == 1:
        cells = [run_cell(k) for k in range(len(tasks))]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            cells = list(pool.map(run_cell, range(len(tasks))))
    log.info("sweep finished in %.3fs", perf_counter() - started)
    return SweepResult(config=config, true_model=true_model, cells=cells)


# ---------------------------------------------------------------------------
# Selection and summaries.

def select_model(curve: dict[int, float]) -> int:
    """Test arity whose score is highest; ties go to the smallest arity."""
    best_c = None
    best = None
    for tc in sorted(curve):
        v = curve[tc]
        if best is None or v > best:
            best, best_c = v, tc
    if best_c is None:
        raise SelectionError("no valid cells to select from")
    return best_c


def delta_c(selections: dict[str, int]) -> dict[str, int]:
    """Per-measure selected arity minus the laplace-selected arity."""
    if "laplace" not in selections:
        raise ValueError("delta_c needs the laplace selection as baseline")
    base = selections["laplace"]
    return {m: s - base for m, s in selections.items() if m != "laplace"}


def replicate_selections(result: SweepResult, replicate: int) -> dict[str, int]:
    """Selected arity per measure, skipping measures with no valid cell."""
    selections = {}
    for measure in result.config.measures:
        curve = result.measure_curve(replicate, measure)
        try:
            selections[measure] = select_model(curve)
        except SelectionError:
            continue
    return selections


def summarize_deltas(result: SweepResult) -> list[dict]:
    """Mean and sample sd of delta_c per measure (laplace excluded)."""
    per_measure: dict[str, list[float]] = {
        m: [] for m in result.config.measures if m != "laplace"}
    for rep in range(result.config.replicates):
        selections = replicate_selections(result, rep)
        if "laplace" not in selections:
            continue
        for measure, d in delta_c(selections).items():
            per_measure[measure].append(float(d))
    rows = []
    for measure, deltas in per_measure.items():
        mean, sd = _mean_sd(deltas)
        rows.append({"measure": measure, "replicates_used": len(deltas),
                     "mean_delta_c": mean, "sd_delta_c": sd})
    return rows


def _mean_sd(values: list[float]):
    n = len(values)
    if n == 0:
        return None, None
    mean = sum(values) / n
    if n < 2:
        return mean, None
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, var ** 0.5


# ---------------------------------------------------------------------------
# Files.  All floats print through repr, which round-trips exactly, and all
# iteration orders are fixed, so reruns produce identical bytes.

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_safe(text: str) -> str:
    return text.replace(",", ";").replace("\n", " ")


def result_to_json_dict(result: SweepResult) -> dict:
    return {
        "config": config_to_json_dict(result.config),
        "true_model": model_to_json_dict(result.true_model),
        "cells": [
            {
                "replicate": c.replicate,
                "test_c": c.test_c,
                "dim": c.dim,
                "final_g": c.final_g,
                "converged": c.converged,
                "iterations_used": c.iterations_used,
                "scores": c.scores,
                "failures": c.failures,
            }
            for c in result.cells
        ],
    }


def result_from_json_dict(doc: dict) -> SweepResult:
    cells = [
        CellResult(replicate=c["replicate"], test_c=c["test_c"], dim=c["dim"],
                   final_g=c["final_g"], converged=c["converged"],
                   iterations_used=c["iterations_used"],
                   scores=dict(c["scores"]), failures=dict(c["failures"]))
        for c in doc["cells"]
    ]
    return SweepResult(config=config_from_json_dict(doc["config"]),
                       true_model=params_from_json_dict(doc["true_model"]),
                       cells=cells)


def emit_reports(result: SweepResult, out_dir) -> None:
    """Write curves.csv, selection.csv, summary.csv, and run.json."""
    os.makedirs(out_dir, exist_ok=True)
    config = result.config

    lines = ["replicate,test_c,measure,log_score,valid,reason"]
    for cell in result.cells:
        for measure in config.measures:
            if measure in cell.scores:
                lines.append(f"{cell.replicate},{cell.test_c},{measure},"
                             f"{_fmt(cell.scores[measure])},true,")
            else:
                reason = _csv_safe(cell.failures.get(measure, ""))
                lines.append(f"{cell.replicate},{cell.test_c},{measure},"
                             f",false,{reason}")
    _write_lines(os.path.join(out_dir, "curves.csv"), lines)

    lines = ["replicate,measure,selected_c,delta_c"]
    for rep in range(config.replicates):
        selections = replicate_selections(result, rep)
        deltas = (delta_c(selections) if "laplace" in selections else {})
        for measure in config.measures:
            sel = selections.get(measure)
            if measure == "laplace":
                d = 0 if sel is not None else None
            else:
                d = deltas.get(measure)
            lines.append(f"{rep},{measure},{_fmt(sel)},{_fmt(d)}")
    _write_lines(os.path.join(out_dir, "selection.csv"), lines)

    lines = ["measure,mean_delta_c,sd_delta_c"]
    for row in summarize_deltas(result):
        lines.append(f"{row['measure']},{_fmt(row['mean_delta_c'])},"
                     f"{_fmt(row['sd_delta_c'])}")
    _write_lines(os.path.join(out_dir, "summary.csv"), lines)

    with open(os.path.join(out_dir, "run.json"), "w", encoding="utf-8") as fh:
        json.dump(result_to_json_dict(result), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_lines(path: str, lines: list[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
