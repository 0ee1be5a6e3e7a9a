"""Rank-1 matrix denoising with doubly heteroscedastic noise.

Theory (fixed points, MMSE limits, thresholds, bulk edge), the pre-processed
spectral estimator and its baselines, Bayes-AMP with state evolution, and a
seeded Monte Carlo harness.
"""

from .amp import (AmpState, FromVector, OracleWarmStart, SeTrack, amp_estimate,
                  amp_fixed_point_residual, run_bayes_amp, se_recursion)
from .errors import (BelowThreshold, ConfigError, Diverged, DomainError, HspecError,
                     NoConvergence, NoCriticalPoint, NotPositiveDefinite)
from .estimators import (EstimateReport, evaluate, optimal_spectral, preprocess,
                         preprocess_operator, top_singular_pair, vanilla_svd, whiten_svd)
from .harness import ExperimentConfig, load_config, parse_config_text, run_experiment, theory_table
from .model import ProblemInstance, load_instance, sample_instance, save_instance, whitened_view
from .spectra import (CovarianceModel, SpectralMeasure, expect, make_circulant, make_custom,
                      make_identity, make_toeplitz, measure_of)
from .theory import (MmseLimits, TheoryParams, bulk_edge, compute_theory, derived_scalars,
                     fixed_point_residual, gaussian_channel_free_energy, mmse_limits, rs_potential,
                     solve_fixed_point, weak_recovery_threshold)

__version__ = "0.1.0"

__all__ = [
    "AmpState",
    "BelowThreshold",
    "ConfigError",
    "CovarianceModel",
    "Diverged",
    "DomainError",
    "EstimateReport",
    "ExperimentConfig",
    "FromVector",
    "HspecError",
    "MmseLimits",
    "NoConvergence",
    "NoCriticalPoint",
    "NotPositiveDefinite",
    "OracleWarmStart",
    "ProblemInstance",
    "SeTrack",
    "SpectralMeasure",
    "TheoryParams",
    "amp_estimate",
    "amp_fixed_point_residual",
    "bulk_edge",
    "compute_theory",
    "derived_scalars",
    "evaluate",
    "expect",
    "fixed_point_residual",
    "gaussian_channel_free_energy",
    "load_config",
    "load_instance",
    "make_circulant",
    "make_custom",
    "make_identity",
    "make_toeplitz",
    "measure_of",
    "mmse_limits",
    "optimal_spectral",
    "parse_config_text",
    "preprocess",
    "preprocess_operator",
    "rs_potential",
    "run_bayes_amp",
    "run_experiment",
    "sample_instance",
    "save_instance",
    "se_recursion",
    "solve_fixed_point",
    "theory_table",
    "top_singular_pair",
    "vanilla_svd",
    "weak_recovery_threshold",
    "whiten_svd",
    "whitened_view",
]
