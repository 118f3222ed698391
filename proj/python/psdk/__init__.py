"""Low-rank covariance averaging on the restricted PSD manifold."""

from ._psdk import (
    ConfigError,
    NumericalError,
    NotInManifoldError,
    dpca_bw,
    dpca_fan,
    f_R,
    find_index,
    format_double,
    full_pca,
    geodesic_distance,
    karcher_mean,
    log_cholesky,
    lq_givens,
    lrc_dpca,
    membership_check,
    predict_lq,
    procrustes_sign,
    projector_distance,
    reduced_cholesky,
    run_experiment,
    slope_fit,
)

CSV_HEADER = "experiment,method,p,K,M,n,sigma_sq,repetition,seed,error,wall_time_ms"

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "NumericalError",
    "NotInManifoldError",
    "dpca_bw",
    "dpca_fan",
    "f_R",
    "find_index",
    "format_double",
    "full_pca",
    "geodesic_distance",
    "karcher_mean",
    "log_cholesky",
    "lq_givens",
    "lrc_dpca",
    "membership_check",
    "predict_lq",
    "procrustes_sign",
    "projector_distance",
    "reduced_cholesky",
    "run_experiment",
    "slope_fit",
]
