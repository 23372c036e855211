"""Covariance estimation for stationary spatial Gaussian random fields.

Exact maximum likelihood, covariance-tapered likelihoods, and weighted
pairwise composite likelihoods (marginal, conditional, difference) over
irregular point sets, with Fisher/Godambe asymptotic-variance machinery,
asymptotic relative efficiency sweeps, seeded field simulation, and
leave-one-out predictive scoring.
"""

from .covariance import (CovarianceSpec, TaperSpec, assemble_sigma,
                         assemble_tapered_sigma, cov, cov_grad, taper)
from .errors import (ConfigError, DegenerateCorrelationError,
                     NotPositiveDefiniteError, SingularInformationError)
from .geometry import (LocationSet, PairSet, distance, distance_matrix,
                       pairs_within, perturbed_grid_design,
                       read_locations_csv, write_locations_csv)
from .inference import (AreReport, FitResult, GodambeInfo, are, are_sweep,
                        fisher_info, fit, godambe_cl, godambe_taper)
from .linalg import cholesky, quad_form, schur, solve, trace_product
from .objectives import (ObjectiveSpec, ObjectiveValue, evaluate, loglik,
                         loglik_taper1, loglik_taper2, pl)
from .predict import LooPrediction, ScoreReport, gaussian_crps, loo_predict, scores
from .simulate import (Realization, read_field_csv, simulate_batch,
                       simulate_grf, write_realizations_csv)

__version__ = "0.1.0"

__all__ = [
    "AreReport", "ConfigError", "CovarianceSpec", "DegenerateCorrelationError",
    "FitResult", "GodambeInfo", "LocationSet", "LooPrediction",
    "NotPositiveDefiniteError", "ObjectiveSpec", "ObjectiveValue", "PairSet",
    "Realization", "ScoreReport", "SingularInformationError", "TaperSpec",
    "are", "are_sweep", "assemble_sigma", "assemble_tapered_sigma", "cholesky",
    "cov", "cov_grad", "distance", "distance_matrix", "evaluate", "fisher_info",
    "fit", "gaussian_crps", "godambe_cl", "godambe_taper", "loglik",
    "loglik_taper1", "loglik_taper2", "loo_predict", "pairs_within",
    "perturbed_grid_design", "pl", "quad_form", "read_field_csv",
    "read_locations_csv", "schur", "scores", "simulate_batch", "simulate_grf",
    "solve", "taper", "trace_product", "write_locations_csv",
    "write_realizations_csv",
]
