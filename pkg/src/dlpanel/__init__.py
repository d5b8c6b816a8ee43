"""Estimation and uniformly valid inference for high-dimensional dynamic
panel data models with unit fixed effects.

The pipeline: a weighted panel lasso (cyclic coordinate descent), nodewise
regressions building an approximate inverse of the scaled Gram matrix, a
one-step debiased estimator, heteroskedasticity-robust covariance blocks,
and honest confidence intervals / joint chi-square tests.  A simulator and
Monte Carlo harness reproduce coverage, interval length, size, and power
summaries, with full and oracle least-squares baselines.
"""
from .baselines import baseline_inference, ols_baselines
from .covariance import RobustCovariance, asy_variance, residuals, sigma_blocks
from .debias import DebiasedEstimate, delta_diagnostic, desparsify
from .dgp import (DgpConfig, check_stability, equidistant_beta,
                  hetero_loading, replication_rng, simulate_panel, simulate_x)
from .distributions import chi2_cdf, chi2_sf, norm_cdf, norm_quantile
from .exceptions import NumericalError
from .experiments import (EXPERIMENTS, ExperimentReport, ExperimentSpec,
                          run_experiment)
from .inference import (InferenceResult, WaldTest, confidence_interval,
                        contrast_zstat, wald_chi2)
from .model import (DesignSystem, PanelData, build_design, gram,
                    response_vector)
from .nodewise import (NodewiseInverse, approx_inverse_check, fit_nodewise,
                       lambda_node_theoretical)
from .panel_io import dumps_json, load_panel, save_json, save_panel
from .solver import (LassoFit, StackedRegressors, WeightedLassoProblem,
                     kkt_report, lambda_theoretical, panel_problem,
                     select_lambda, solve_weighted_lasso)

__version__ = "0.1.0"

__all__ = [
    "DesignSystem", "PanelData", "build_design", "gram", "response_vector",
    "StackedRegressors", "WeightedLassoProblem", "LassoFit",
    "solve_weighted_lasso", "kkt_report", "select_lambda",
    "lambda_theoretical", "panel_problem",
    "NodewiseInverse", "fit_nodewise", "approx_inverse_check",
    "lambda_node_theoretical",
    "DebiasedEstimate", "desparsify", "delta_diagnostic",
    "RobustCovariance", "residuals", "sigma_blocks", "asy_variance",
    "norm_cdf", "norm_quantile", "chi2_cdf", "chi2_sf",
    "InferenceResult", "WaldTest", "confidence_interval", "wald_chi2",
    "contrast_zstat",
    "DgpConfig", "check_stability", "simulate_x", "simulate_panel",
    "replication_rng", "equidistant_beta", "hetero_loading",
    "ols_baselines", "baseline_inference",
    "EXPERIMENTS", "ExperimentSpec", "ExperimentReport", "run_experiment",
    "load_panel", "save_panel", "save_json", "dumps_json",
    "NumericalError",
]
