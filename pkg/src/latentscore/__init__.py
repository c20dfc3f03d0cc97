"""Marginal-likelihood approximations for discrete naive-Bayes models with
a hidden root, plus the EM training and experiment harness to compare them.
"""

from .em_engine import (
    DegeneratePriorError,
    EmConfig,
    EmResult,
    StarvedRowError,
    e_step,
    fit,
    m_step_map,
    m_step_ml,
    result_metadata,
    run_em,
    tournament_init,
)
from .experiment import (
    CellResult,
    ExperimentConfig,
    SelectionError,
    SweepResult,
    delta_c,
    emit_reports,
    run_sweep,
    select_model,
    summarize_deltas,
)
from .model_core import (
    Dataset,
    ModelSpec,
    ParamSet,
    PriorSet,
    binary_spec,
    dimension,
    free_to_params,
    grad_g,
    log_likelihood,
    log_posterior_g,
    log_prior,
    params_to_free,
    posterior_over_hidden,
    read_model,
    write_model,
)
from .numerics import (
    NotPositiveDefiniteError,
    NumericalFailureError,
    SeededStream,
    log_det_pd,
    log_gamma,
    log_sum_exp,
    sample_dirichlet,
)
from .scoring import (
    MEASURES,
    EnumerationInfeasibleError,
    ScoreReport,
    bd_complete,
    bic_score,
    cs_score,
    draper_score,
    fractional_bd,
    laplace_score,
    mled_score,
    neg_hessian,
    oracle_exact,
    score_report,
)
from .synth_data import (
    DatasetParseError,
    StatSet,
    generate_model,
    read_dataset,
    sample_dataset,
    strip_hidden,
    sufficient_stats,
    write_dataset,
)

__version__ = "0.1.0"

__all__ = [
    "CellResult",
    "Dataset",
    "DatasetParseError",
    "DegeneratePriorError",
    "EmConfig",
    "EmResult",
    "EnumerationInfeasibleError",
    "ExperimentConfig",
    "MEASURES",
    "ModelSpec",
    "NotPositiveDefiniteError",
    "NumericalFailureError",
    "ParamSet",
    "PriorSet",
    "ScoreReport",
    "SeededStream",
    "SelectionError",
    "StarvedRowError",
    "StatSet",
    "SweepResult",
    "bd_complete",
    "bic_score",
    "binary_spec",
    "cs_score",
    "delta_c",
    "dimension",
    "draper_score",
    "e_step",
    "emit_reports",
    "fit",
    "fractional_bd",
    "free_to_params",
    "generate_model",
    "grad_g",
    "laplace_score",
    "log_det_pd",
    "log_gamma",
    "log_likelihood",
    "log_posterior_g",
    "log_prior",
    "log_sum_exp",
    "m_step_map",
    "m_step_ml",
    "mled_score",
    "neg_hessian",
    "oracle_exact",
    "params_to_free",
    "posterior_over_hidden",
    "read_dataset",
    "read_model",
    "result_metadata",
    "run_em",
    "run_sweep",
    "sample_dataset",
    "sample_dirichlet",
    "score_report",
    "select_model",
    "strip_hidden",
    "sufficient_stats",
    "summarize_deltas",
    "tournament_init",
    "write_dataset",
    "write_model",
]
