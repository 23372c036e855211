"""Objective functions for covariance estimation and their analytic gradients.

Six objectives share one calling convention: the exact Gaussian
log-likelihood, the two tapered likelihoods (covariance-only tapering, and
the both-sides tapering whose score is unbiased), and the three weighted
pairwise composite log-likelihoods built from marginal, conditional and
difference pair densities with cut-off weights. Additive constants that do
not depend on the parameters (the 2*pi terms) are omitted throughout.

Pairwise objects under a nugget use the total variance s = sigma2 + nugget
and the pair correlation r = sigma2 * rho(h) / s, the exact bivariate
marginal of the nugget model.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .covariance import (TaperSpec, assemble_sigma, assemble_sigma_grad,
                         assemble_tapered_sigma, correlation,
                         correlation_dphi, taper)
from .errors import DegenerateCorrelationError
from .geometry import distance_matrix, pairs_within

KINDS = ("ml", "taper1", "taper2", "pl_marginal", "pl_conditional", "pl_difference")
PL_KINDS = {"marginal", "conditional", "difference"}
FREE_DEFAULT = ("sigma2", "phi")


@dataclass(frozen=True)
class ObjectiveSpec:
    """Which objective to evaluate, with its taper or cut-off settings."""

    kind: str
    taper: TaperSpec | None = None
    cutoff: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind in ("taper1", "taper2"):
            if self.taper is None:
                raise ValueError(f"{self.kind} requires a taper")
        elif self.taper is not None:
            raise ValueError(f"{self.kind} takes no taper")
        if self.kind in ("ml", "taper1", "taper2") and self.cutoff is not None:
            raise ValueError(f"{self.kind} takes no cutoff")

    def pair_cutoff(self):
        """Cut-off distance implied for pair enumeration (None = unbounded)."""
        if self.kind in ("taper1", "taper2"):
            return self.taper.range if self.taper.kind == "wendland" else None
        if self.kind.startswith("pl_"):
            return self.cutoff
        return None


@dataclass(frozen=True)
class ObjectiveValue:
    """Objective value and, when requested, the gradient over free parameters."""

    value: float
    grad: np.ndarray | None = None


def build_pairs(objective, locs):
    """Enumerate the pairs an ObjectiveSpec needs (None for exact ML)."""
    if objective.kind == "ml":
        return None
    return pairs_within(locs, objective.pair_cutoff())


def evaluate(objective, spec, locs, z, pairs=None, free=FREE_DEFAULT, with_grad=True):
    """Evaluate any ObjectiveSpec; pairs may be passed to avoid re-enumeration."""
    if objective.kind == "ml":
        return loglik(spec, locs, z, free=free, with_grad=with_grad)
    if pairs is None:
        pairs = build_pairs(objective, locs)
    if objective.kind == "taper1":
        return loglik_taper1(spec, objective.taper, locs, pairs, z, free=free, with_grad=with_grad)
    if objective.kind == "taper2":
        return loglik_taper2(spec, objective.taper, locs, pairs, z, free=free, with_grad=with_grad)
    return pl(objective.kind.removeprefix("pl_"), spec, locs, pairs, z,
              free=free, with_grad=with_grad)


# ---------------------------------------------------------------------------
# exact likelihood


def loglik(spec, locs, z, free=FREE_DEFAULT, with_grad=True, dm=None):
    """Exact Gaussian log-likelihood -1/2 log|S| - 1/2 z' S^{-1} z.

    The gradient is -1/2 tr(S^{-1} S_a) + 1/2 z' S^{-1} S_a S^{-1} z per
    free parameter a.
    """
    z = np.asarray(z, dtype=float)
    if dm is None:
        dm = distance_matrix(locs)
    sigma = assemble_sigma(spec, locs, dm=dm)
    factor = linalg.cholesky(sigma)
    alpha = factor.solve(z)
    value = -0.5 * factor.log_det - 0.5 * float(z @ alpha)
    if not with_grad:
        return ObjectiveValue(value)
    sigma_inv = factor.inverse()
    grads = assemble_sigma_grad(spec, locs, free=free, dm=dm)
    g = np.empty(len(free))
    for a, da in enumerate(grads):
        g[a] = -0.5 * np.sum(sigma_inv * da) + 0.5 * float(alpha @ da @ alpha)
    return ObjectiveValue(value, g)


# ---------------------------------------------------------------------------
# tapered likelihoods


def _taper_support_entries(factor, pairs):
    """Diagonal of the inverse plus inverse entries at the pair positions."""
    n = factor.n
    rows = np.concatenate([np.arange(n), pairs.i])
    cols = np.concatenate([np.arange(n), pairs.j])
    vals = factor.inverse_entries(rows, cols)
    return vals[:n], vals[n:]


def _tapered_grad_entries(spec, tspec, pairs, free):
    """Entries of each dS_T/dtheta on the support: (diagonal, off-diagonal) arrays."""
    rho = correlation(spec, pairs.h)
    rvals = taper(tspec, pairs.h)
    zeros = np.zeros(pairs.size)
    out = []
    for name in free:
        if name == "sigma2":
            out.append((1.0, rho * rvals))
        elif name == "phi":
            out.append((0.0, spec.sigma2 * correlation_dphi(spec, pairs.h) * rvals))
        elif name == "nugget":
            out.append((1.0, zeros))
        else:
            raise ValueError(f"unknown parameter {name!r}")
    return out


def _support_sum(diag_a, off_a, diag_b, off_b):
    """Sum of A o B over a shared symmetric support given entry arrays."""
    return float(np.sum(diag_a * diag_b) + 2.0 * np.sum(off_a * off_b))


def loglik_taper1(spec, tspec, locs, pairs, z, free=FREE_DEFAULT, with_grad=True):
    """One-sided tapered likelihood: the exact form with S replaced by S o R."""
    z = np.asarray(z, dtype=float)
    sigma_t = assemble_tapered_sigma(spec, tspec, locs, pairs)
    factor = linalg.cholesky(sigma_t)
    alpha = factor.solve(z)
    value = -0.5 * factor.log_det - 0.5 * float(z @ alpha)
    if not with_grad:
        return ObjectiveValue(value)
    inv_diag, inv_off = _taper_support_entries(factor, pairs)
    ai, aj = alpha[pairs.i], alpha[pairs.j]
    g = np.empty(len(free))
    for a, (gd, go) in enumerate(_tapered_grad_entries(spec, tspec, pairs, free)):
        tr = _support_sum(gd, go, inv_diag, inv_off)
        quad = float(np.sum(gd * alpha * alpha) + 2.0 * np.sum(go * ai * aj))
        g[a] = -0.5 * tr + 0.5 * quad
    return ObjectiveValue(value, g)


def loglik_taper2(spec, tspec, locs, pairs, z, free=FREE_DEFAULT, with_grad=True):
    """Two-sided tapered likelihood with the taper-masked quadratic term.

    The quadratic term sums [S_T^{-1}]_ij r(h_ij) z_i z_j over the taper
    support plus the diagonal only; the inverse is obtained entrywise on
    that pattern and never materialized in full for the value.
    """
    z = np.asarray(z, dtype=float)
    sigma_t = assemble_tapered_sigma(spec, tspec, locs, pairs)
    factor = linalg.cholesky(sigma_t)
    inv_diag, inv_off = _taper_support_entries(factor, pairs)
    rvals = taper(tspec, pairs.h)
    zi, zj = z[pairs.i], z[pairs.j]
    qterm = float(np.sum(inv_diag * z * z) + 2.0 * np.sum(inv_off * rvals * zi * zj))
    value = -0.5 * factor.log_det - 0.5 * qterm
    if not with_grad:
        return ObjectiveValue(value)

    # gradient: -1/2 tr(S_T^{-1} S_a) + 1/2 tr(V S_a), V = S_T^{-1} W S_T^{-1},
    # W = R o z z' on the support; both traces reduce to support sums
    w_dense = np.zeros((locs.n, locs.n))
    w_dense[pairs.i, pairs.j] = rvals * zi * zj
    w_dense[pairs.j, pairs.i] = rvals * zi * zj
    np.fill_diagonal(w_dense, z * z)
    t1 = factor.solve(w_dense)
    v = factor.solve(t1.T)
    v_diag = np.diagonal(v)
    v_off = 0.5 * (v[pairs.i, pairs.j] + v[pairs.j, pairs.i])
    g = np.empty(len(free))
    for a, (gd, go) in enumerate(_tapered_grad_entries(spec, tspec, pairs, free)):
        g[a] = -0.5 * _support_sum(gd, go, inv_diag, inv_off) \
            + 0.5 * _support_sum(gd, go, v_diag, v_off)
    return ObjectiveValue(value, g)


# ---------------------------------------------------------------------------
# pairwise composite likelihoods


def _pair_state(spec, pairs, free):
    """Total variance s, pair correlations r, and their parameter partials."""
    s = spec.sigma2 + spec.nugget
    rho = correlation(spec, pairs.h)
    r = spec.sigma2 * rho / s
    ds, dr = [], []
    for name in free:
        if name == "sigma2":
            ds.append(1.0)
            dr.append(rho * spec.nugget / s ** 2)
        elif name == "phi":
            ds.append(0.0)
            dr.append(spec.sigma2 * correlation_dphi(spec, pairs.h) / s)
        elif name == "nugget":
            ds.append(1.0)
            dr.append(-spec.sigma2 * rho / s ** 2)
        else:
            raise ValueError(f"unknown parameter {name!r}")
    return s, r, ds, dr


def _check_admissible(kind, r, pairs):
    bad = r >= 1.0 if kind == "difference" else np.abs(r) >= 1.0
    idx = np.nonzero(bad)[0]
    if idx.size:
        i, j = int(pairs.i[idx[0]]), int(pairs.j[idx[0]])
        raise DegenerateCorrelationError(
            f"pair correlation {r[idx[0]]:.6f} for pair ({i}, {j}) is degenerate", pair=(i, j))


def pl(kind, spec, locs, pairs, z, free=FREE_DEFAULT, with_grad=True):
    """Weighted pairwise composite log-likelihood of the given kind.

    Parameters
    ----------
    kind : {"marginal", "conditional", "difference"}
        Pair density used: the joint density of the pair, the two
        conditional densities (through the identity
        2 l_ij - l_i - l_j), or the density of the pair difference.

    The cut-off weights are implicit: only pairs inside the PairSet (whose
    cutoff is the weight distance) contribute, each with weight one.
    """
    if kind not in PL_KINDS:
        raise ValueError(f"unknown pairwise kind {kind!r}")
    z = np.asarray(z, dtype=float)
    if z.shape[0] != locs.n:
        raise ValueError(f"data length {z.shape[0]} does not match {locs.n} locations")
    s, r, ds, dr = _pair_state(spec, pairs, free)
    _check_admissible(kind, r, pairs)
    zi, zj = z[pairs.i], z[pairs.j]

    if kind == "difference":
        omr = 1.0 - r
        u2 = (zi - zj) ** 2
        value = -0.5 * float(np.sum(np.log(s) + np.log(omr) + u2 / (2.0 * s * omr)))
        if not with_grad:
            return ObjectiveValue(value)
        dl_ds = -0.5 / s + u2 / (4.0 * s ** 2 * omr)
        dl_dr = 0.5 / omr - u2 / (4.0 * s * omr ** 2)
        g = np.array([float(np.sum(dl_ds * ds[a] + dl_dr * dr[a])) for a in range(len(free))])
        return ObjectiveValue(value, g)

    omr2 = 1.0 - r * r
    b = zi * zi + zj * zj - 2.0 * r * zi * zj
    value_m = -0.5 * float(np.sum(2.0 * np.log(s) + np.log(omr2) + b / (s * omr2)))
    if with_grad:
        dl_ds = -1.0 / s + b / (2.0 * s ** 2 * omr2)
        dl_dr = r / omr2 + zi * zj / (s * omr2) - r * b / (s * omr2 ** 2)
        g_m = np.array([float(np.sum(dl_ds * ds[a] + dl_dr * dr[a])) for a in range(len(free))])
    if kind == "marginal":
        return ObjectiveValue(value_m, g_m if with_grad else None)

    # conditional through 2 l_ij - l_i - l_j with single-site multiplicities
    m = pairs.multiplicity()
    site = -0.5 * np.log(s) - z * z / (2.0 * s)
    value = 2.0 * value_m - float(m @ site)
    if not with_grad:
        return ObjectiveValue(value)
    dsite_ds = -0.5 / s + z * z / (2.0 * s ** 2)
    site_term = float(m @ dsite_ds)
    g = 2.0 * g_m - site_term * np.array([ds[a] for a in range(len(free))])
    return ObjectiveValue(value, g)
