"""Leave-one-out conditional prediction and the three predictive scores.

Predictions come from the precision-matrix identity: with Q = S^{-1},
the conditional mean of z_i given the rest is z_i - (Qz)_i / Q_ii and the
conditional variance is 1 / Q_ii, so one factorization serves all n
leave-one-out problems. Scores use the exact Gaussian log-density and the
closed-form Gaussian CRPS.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import linalg
from .covariance import assemble_sigma


@dataclass(frozen=True)
class LooPrediction:
    """Conditional mean and variance of each observation given all others."""

    mean: np.ndarray
    variance: np.ndarray


@dataclass(frozen=True)
class ScoreReport:
    """Point and probabilistic prediction scores averaged over sites."""

    rmse: float
    lscore: float
    crps: float

    def as_row(self):
        return {"rmse": self.rmse, "lscore": self.lscore, "crps": self.crps}


def loo_predict(spec, locs, z, dm=None):
    """Leave-one-out conditional means and variances under a covariance model.

    Prediction always uses the exact (non-tapered) covariance with the
    supplied parameters, whatever objective produced them.
    """
    z = np.asarray(z, dtype=float)
    if z.shape[0] != locs.n:
        raise ValueError(f"data length {z.shape[0]} does not match {locs.n} locations")
    sigma = assemble_sigma(spec, locs, dm=dm)
    factor = linalg.cholesky(sigma)
    q_diag = np.diagonal(factor.inverse()).copy()
    qz = factor.solve(z)
    return LooPrediction(mean=z - qz / q_diag, variance=1.0 / q_diag)


def gaussian_crps(mean, variance, z):
    """Closed-form CRPS of a Gaussian forecast: v [u (2 Phi(u) - 1) + 2 phi(u) - 1/sqrt(pi)]."""
    v = np.sqrt(np.asarray(variance, dtype=float))
    u = (np.asarray(z, dtype=float) - np.asarray(mean, dtype=float)) / v
    pdf = np.exp(-0.5 * u * u) / np.sqrt(2.0 * np.pi)
    return v * (u * (2.0 * ndtr(u) - 1.0) + 2.0 * pdf - 1.0 / np.sqrt(np.pi))


def scores(pred, z):
    """RMSE, logarithmic score, and CRPS of leave-one-out predictions.

    LSCORE is the negative mean Gaussian log-density
    1/2 log(2 pi v^2) + (z - m)^2 / (2 v^2).
    """
    z = np.asarray(z, dtype=float)
    m, v2 = pred.mean, pred.variance
    if z.shape != m.shape:
        raise ValueError(f"dimension mismatch: {z.shape} vs {m.shape}")
    if np.any(v2 <= 0):
        raise ValueError("predictive variances must be positive")
    err = z - m
    rmse = float(np.sqrt(np.mean(err ** 2)))
    lscore = float(np.mean(0.5 * np.log(2.0 * np.pi * v2) + err ** 2 / (2.0 * v2)))
    crps = float(np.mean(gaussian_crps(m, v2, z)))
    return ScoreReport(rmse=rmse, lscore=lscore, crps=crps)
