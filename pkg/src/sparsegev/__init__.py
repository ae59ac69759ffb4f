"""Sparse latent-GEV models for dependency learning among extreme-value time series.

Observations are Gumbel around latent locations that follow a sparse vector
autoregression.  The package fits the model by a particle-filter EM with an
L1-penalised M-step, reads the dependency graph off the nonzero lag
coefficients, forecasts one step ahead, and benchmarks the method against
Lasso-Granger, transfer entropy and a Gaussian copula.
"""
from .errors import (ConvergenceError, DegenerateDataError, DimensionError, DomainError, ParseError,
                     ParticleDegeneracyError, SparseGevError)
from .evd import (EULER_GAMMA, GevParams, GumbelParams, fit_gumbel_mle, gev_cdf, gev_pdf, gumbel_cdf,
                  gumbel_logpdf, gumbel_pdf, gumbel_quantile, gumbel_sample, lambert_w0)
from .graph import DependencyGraph, Edge
from .model import (GroundTruthGraph, LatentPath, SparseGevModel, TimeSeriesPanel, extract_graph,
                    ground_truth, make_synthetic_suite, predict_next, simulate, synthetic_model,
                    transition_mean)
from .inference import PosteriorSummary, ParticleEnsemble, proposal_params, run_filter
from .learning import EmConfig, EmTrace, fit, forecast, select_lambda
from .baselines import TeConfig, copula_method, knn_entropy, lasso_granger, te_graph, transfer_entropy
from .evaluation import (BenchmarkConfig, EvalReport, MethodSpec, block_maxima, edge_auc, normalize_panel,
                         run_benchmark, sliding_window_rmse, synthetic_benchmark)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "DegenerateDataError", "DimensionError", "DomainError", "ParseError",
    "ParticleDegeneracyError", "SparseGevError", "EULER_GAMMA", "GevParams", "GumbelParams",
    "fit_gumbel_mle", "gev_cdf", "gev_pdf", "gumbel_cdf", "gumbel_logpdf", "gumbel_pdf",
    "gumbel_quantile", "gumbel_sample", "lambert_w0", "DependencyGraph", "Edge", "GroundTruthGraph",
    "LatentPath", "SparseGevModel", "TimeSeriesPanel", "extract_graph", "ground_truth",
    "make_synthetic_suite", "predict_next", "simulate", "synthetic_model", "transition_mean",
    "PosteriorSummary", "ParticleEnsemble", "proposal_params", "run_filter", "EmConfig", "EmTrace",
    "fit", "forecast", "select_lambda", "TeConfig", "copula_method", "knn_entropy", "lasso_granger",
    "te_graph", "transfer_entropy", "BenchmarkConfig", "EvalReport", "MethodSpec", "block_maxima",
    "edge_auc", "normalize_panel", "run_benchmark", "sliding_window_rmse", "synthetic_benchmark",
]
