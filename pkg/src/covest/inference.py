"""Estimation by numerical optimization, information matrices, and ARE.

Fits maximize any objective with L-BFGS-B on log-transformed positive
parameters (free nugget uses exp(u) - 1e-10 so zero stays reachable),
falling back to Nelder-Mead when the line search fails. Asymptotic
variances come from the Fisher information for exact ML and from Godambe
sandwich matrices G = H J^{-1} H' for the unbiased tapered likelihood and
the pairwise composite likelihoods.
"""

import json
import time
from dataclasses import dataclass

import numpy as np
import scipy.optimize
import scipy.sparse as sp

from . import linalg
from .covariance import TaperSpec, assemble_sigma, assemble_sigma_grad, correlation, \
    correlation_dphi, taper
from .errors import (DegenerateCorrelationError, NotPositiveDefiniteError,
                     SingularInformationError)
from .geometry import distance, distance_matrix, pairs_within
from .objectives import FREE_DEFAULT, build_pairs, evaluate

_NUGGET_SHIFT = 1e-10  # free nugget optimizes log(nugget + shift)


@dataclass
class FitResult:
    """Outcome of one maximum-objective fit."""

    method: str
    param_names: tuple
    theta: np.ndarray
    objective_at_opt: float
    converged: bool
    n_iter: int
    n_evals: int
    n_starts: int
    std_errors: np.ndarray | None
    info: dict | None
    wall_time: float
    message: str = ""

    def params(self):
        return dict(zip(self.param_names, (float(t) for t in self.theta)))

    def to_dict(self):
        out = {
            "method": self.method,
            "param_names": list(self.param_names),
            "estimates": self.params(),
            "std_errors": (None if self.std_errors is None else
                           dict(zip(self.param_names, (float(s) for s in self.std_errors)))),
            "objective": float(self.objective_at_opt),
            "converged": bool(self.converged),
            "n_iter": int(self.n_iter),
            "n_evals": int(self.n_evals),
            "n_starts": int(self.n_starts),
            "wall_time_s": float(self.wall_time),
            "message": self.message,
        }
        if self.info is not None:
            out["info"] = {k: np.asarray(v).tolist() for k, v in self.info.items()}
        return out

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=2, **kw)


@dataclass(frozen=True)
class GodambeInfo:
    """Sandwich pieces: curvature H, score variance J, and G = H J^{-1} H'."""

    H: np.ndarray
    J: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class AreReport:
    """One point of an efficiency sweep."""

    method: str
    percent_target: float
    percent_nonzero: float
    d: float
    are: float
    p: int
    error: str | None = None


def _domain_diameter(locs):
    lo = locs.points.min(axis=0)
    hi = locs.points.max(axis=0)
    return max(distance(lo, hi, locs.metric, locs.radius_km), 1e-12)


def default_bounds(locs):
    """Box constraints keeping all parameters positive, phi scaled to the domain."""
    diam = _domain_diameter(locs)
    return {"sigma2": (1e-8, 1e8), "phi": (1e-3 * diam, 10.0 * diam), "nugget": (0.0, 1e8)}


def _shift(name):
    return _NUGGET_SHIFT if name == "nugget" else 0.0


def fit(objective, spec0, locs, z, free=FREE_DEFAULT, bounds=None, phi_starts=None,
        n_starts=5, max_iter=300, compute_info=True):
    """Maximize an ObjectiveSpec over the free covariance parameters.

    Parameters
    ----------
    objective : ObjectiveSpec
    spec0 : CovarianceSpec
        Starting point; must lie inside the bounds.
    free : tuple of str
        Names among ("sigma2", "phi", "nugget") to estimate.
    bounds : dict, optional
        name -> (lo, hi) box constraints; defaults scale phi to the domain.
    phi_starts : sequence of float, optional
        Multi-start grid for phi; default n_starts values log-spaced over
        the phi bounds. The best objective wins, ties go to smallest phi.
    compute_info : bool
        Attach information matrices and standard errors (Fisher for ML,
        Godambe for the unbiased taper and the pairwise likelihoods).

    Returns
    -------
    FitResult
        converged=False is reported, never silently ignored.
    """
    t_start = time.perf_counter()
    z = np.asarray(z, dtype=float)
    box = default_bounds(locs)
    if bounds:
        box.update(bounds)
    for name in free:
        lo, hi = box[name]
        val = getattr(spec0, name)
        if not (lo <= val <= hi):
            raise ValueError(f"starting {name}={val} outside bounds [{lo}, {hi}]")

    pairs = build_pairs(objective, locs)
    n_evals = [0]

    def neg_obj(u, start_guard):
        theta = np.exp(u) - np.array([_shift(nm) for nm in free])
        model = spec0.with_theta(free, theta)
        n_evals[0] += 1
        try:
            ov = evaluate(objective, model, locs, z, pairs=pairs, free=free, with_grad=True)
        except (NotPositiveDefiniteError, DegenerateCorrelationError, np.linalg.LinAlgError):
            if start_guard[0]:
                raise
            # exploration step left the numerically admissible region
            return 1e25, np.zeros(len(free))
        start_guard[0] = False
        return -ov.value, -(ov.grad * (theta + np.array([_shift(nm) for nm in free])))

    if "phi" in free and phi_starts is None:
        lo, hi = box["phi"]
        phi_starts = np.geomspace(lo, hi, n_starts)
    elif "phi" not in free:
        phi_starts = [spec0.phi]
    starts = [spec0.with_theta(free, [p if nm == "phi" else getattr(spec0, nm) for nm in free])
              for p in phi_starts]

    log_bounds = [(np.log(max(box[nm][0], 0.0) + _shift(nm) + (0.0 if box[nm][0] + _shift(nm) > 0 else 1e-300)),
                   np.log(box[nm][1] + _shift(nm))) for nm in free]

    candidates = []
    for start in starts:
        u0 = np.log(start.theta(free) + np.array([_shift(nm) for nm in free]))
        guard = [True]
        res = scipy.optimize.minimize(
            neg_obj, u0, args=(guard,), jac=True, method="L-BFGS-B",
            bounds=log_bounds, options={"maxiter": max_iter})
        if not res.success:
            guard_nm = [False]
            res_nm = scipy.optimize.minimize(
                lambda u: neg_obj(u, guard_nm)[0], res.x, method="Nelder-Mead",
                options={"maxiter": 40 * max_iter, "xatol": 1e-10, "fatol": 1e-12})
            if res_nm.fun <= res.fun:
                res = res_nm
        theta = np.exp(res.x) - np.array([_shift(nm) for nm in free])
        candidates.append((float(-res.fun), theta, bool(res.success),
                           int(getattr(res, "nit", 0)), str(res.message)))

    best_val = max(c[0] for c in candidates)
    tol = 1e-9 * max(1.0, abs(best_val))
    near = [c for c in candidates if c[0] >= best_val - tol]
    if "phi" in free:
        k = free.index("phi")
        near.sort(key=lambda c: c[1][k])
    value, theta, converged, n_iter, message = near[0]
    model_hat = spec0.with_theta(free, theta)

    std_errors = info = None
    if compute_info:
        std_errors, info = _errors_and_info(objective, model_hat, locs, pairs, free)

    return FitResult(
        method=objective.kind, param_names=tuple(free), theta=theta,
        objective_at_opt=value, converged=converged, n_iter=n_iter,
        n_evals=n_evals[0], n_starts=len(starts), std_errors=std_errors,
        info=info, wall_time=time.perf_counter() - t_start, message=message)


def _errors_and_info(objective, model, locs, pairs, free):
    """Standard errors from the method's information matrix (None for taper1)."""
    kind = objective.kind
    if kind == "ml":
        fisher = fisher_info(model, locs, free)
        cov = _pd_inverse(fisher, "Fisher information")
        return np.sqrt(np.diagonal(cov)), {"fisher": fisher}
    if kind == "taper2":
        g = godambe_taper(model, objective.taper, locs, pairs, free)
        cov = _pd_inverse(g.G, "Godambe information")
        return np.sqrt(np.diagonal(cov)), {"H": g.H, "J": g.J, "G": g.G}
    if kind.startswith("pl_"):
        g = godambe_cl(kind.removeprefix("pl_"), model, locs, pairs, free)
        cov = _pd_inverse(g.G, "Godambe information")
        return np.sqrt(np.diagonal(cov)), {"H": g.H, "J": g.J, "G": g.G}
    return None, None  # taper1 score is biased; no sandwich is reported


def _pd_inverse(mat, what):
    try:
        return np.linalg.inv(mat)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError(f"{what} matrix is singular") from exc


def _symmetrize(m):
    return 0.5 * (m + m.T)


def fisher_info(spec, locs, free=FREE_DEFAULT, dm=None):
    """Fisher information 1/2 tr(S^{-1} S_a S^{-1} S_b) of the exact likelihood."""
    if dm is None:
        dm = distance_matrix(locs)
    sigma = assemble_sigma(spec, locs, dm=dm)
    factor = linalg.cholesky(sigma)
    sigma_inv = factor.inverse()
    prods = [sigma_inv @ da for da in assemble_sigma_grad(spec, locs, free=free, dm=dm)]
    p = len(free)
    out = np.empty((p, p))
    for a in range(p):
        for b in range(a, p):
            out[a, b] = out[b, a] = 0.5 * np.sum(prods[a] * prods[b].T)
    return _symmetrize(out)


def godambe_taper(spec, tspec, locs, pairs=None, free=FREE_DEFAULT, dm=None):
    """Godambe pieces of the unbiased tapered likelihood (dense fallback).

    H_ab = 1/2 tr{B_a (S_b o R)} and
    J_ab = 1/2 tr{(B_a o R) S (B_b o R) S} with
    B_a = S_T^{-1} (S_a o R) S_T^{-1}; suited to inference-time use for
    moderate n, where densifying the tapered matrix is affordable.
    """
    if dm is None:
        dm = distance_matrix(locs)
    n = locs.n
    if tspec.kind == "none":
        r = np.ones((n, n))
    else:
        r = taper(tspec, dm)
        np.fill_diagonal(r, 1.0)
    sigma = assemble_sigma(spec, locs, dm=dm)
    sigma_t = sigma * r
    factor = linalg.cholesky(sigma_t)
    minv = factor.inverse()
    tapered_grads = [da * r for da in assemble_sigma_grad(spec, locs, free=free, dm=dm)]
    b_mats = [minv @ da @ minv for da in tapered_grads]
    p = len(free)
    h = np.empty((p, p))
    for a in range(p):
        for b in range(a, p):
            h[a, b] = h[b, a] = 0.5 * np.sum(b_mats[a] * tapered_grads[b])
    x_mats = [(ba * r) @ sigma for ba in b_mats]
    j = np.empty((p, p))
    for a in range(p):
        for b in range(a, p):
            j[a, b] = j[b, a] = 0.5 * np.sum(x_mats[a] * x_mats[b].T)
    return _sandwich(_symmetrize(h), _symmetrize(j))


def _sandwich(h, j):
    try:
        g = h @ np.linalg.solve(j, h.T)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError("score-variance matrix J is singular") from exc
    return GodambeInfo(H=h, J=j, G=_symmetrize(g))


def _pair_quadratic_derivs(kind, spec, pairs, free):
    """Per-pair derivatives of the score quadratic-form coefficients.

    Each pair objective is c(theta) + a (z_i^2 + z_j^2) + 2 b z_i z_j; this
    returns (da_k, db_k) arrays per free parameter, plus the site-term
    derivative dq_k for the conditional kind.
    """
    s = spec.sigma2 + spec.nugget
    rho = correlation(spec, pairs.h)
    r = spec.sigma2 * rho / s
    das, dbs, dqs = [], [], []
    base = "difference" if kind == "difference" else "marginal"
    if base == "marginal":
        omr2 = 1.0 - r * r
        da_ds = 1.0 / (2.0 * s ** 2 * omr2)
        da_dr = -r / (s * omr2 ** 2)
        db_ds = -r / (2.0 * s ** 2 * omr2)
        db_dr = (1.0 + r * r) / (2.0 * s * omr2 ** 2)
    else:
        omr = 1.0 - r
        da_ds = 1.0 / (4.0 * s ** 2 * omr)
        da_dr = -1.0 / (4.0 * s * omr ** 2)
        db_ds = -da_ds
        db_dr = -da_dr
    for name in free:
        if name == "sigma2":
            ds, dr = 1.0, rho * spec.nugget / s ** 2
        elif name == "phi":
            ds, dr = 0.0, spec.sigma2 * correlation_dphi(spec, pairs.h) / s
        elif name == "nugget":
            ds, dr = 1.0, -spec.sigma2 * rho / s ** 2
        else:
            raise ValueError(f"unknown parameter {name!r}")
        das.append(da_ds * ds + da_dr * dr)
        dbs.append(db_ds * ds + db_dr * dr)
        dqs.append(ds / (2.0 * s ** 2))  # site term l_i has coefficient -1/(2s) on z_i^2
    return s, r, das, dbs, dqs


def godambe_cl(kind, spec, locs, pairs, free=FREE_DEFAULT, dm=None):
    """Godambe pieces of a weighted pairwise composite likelihood.

    Writes each pair's score as a quadratic form in its 2-vector. H sums
    the per-pair Bartlett identities 2 tr(Q_a S2 Q_b S2) on the pair's
    2x2 covariance (for the conditional kind through the
    2 l_ij - l_i - l_j split). J scatters the score matrices into sparse
    n x n operators Q_a and evaluates the exact Gaussian quadratic-form
    covariance J_ab = 2 tr(Q_a S Q_b S) with the full dense covariance,
    which is the pair-couple sum over joint 4x4 (or overlapping) blocks
    computed without enumerating couples.
    """
    if kind not in ("marginal", "conditional", "difference"):
        raise ValueError(f"unknown pairwise kind {kind!r}")
    if pairs.size == 0:
        raise ValueError("pairwise Godambe needs at least one pair")
    n = locs.n
    p = len(free)
    s, r, das, dbs, dqs = _pair_quadratic_derivs(kind, spec, pairs, free)
    t = s * r

    # H from per-pair 2x2 identities
    h = np.empty((p, p))
    xs = [das[k] * s + dbs[k] * t for k in range(p)]
    ys = [das[k] * t + dbs[k] * s for k in range(p)]
    for a in range(p):
        for b in range(a, p):
            h[a, b] = h[b, a] = 4.0 * float(np.sum(xs[a] * xs[b] + ys[a] * ys[b]))
    if kind == "conditional":
        # 2 l_ij - l_i - l_j: double the pair curvature, subtract the site terms
        dq = np.asarray(dqs)
        h = 2.0 * h - 2.0 * pairs.size * 2.0 * s ** 2 * np.outer(dq, dq)

    # J from scattered score operators against the dense covariance
    if dm is None:
        dm = distance_matrix(locs)
    sigma = assemble_sigma(spec, locs, dm=dm)
    idx = np.arange(n)
    x_mats = []
    for k in range(p):
        if kind == "conditional":
            diag_coef = 2.0 * das[k] - dqs[k]
            off_coef = 2.0 * dbs[k]
        else:
            diag_coef, off_coef = das[k], dbs[k]
        diag_coef = np.broadcast_to(diag_coef, pairs.h.shape)
        off_coef = np.broadcast_to(off_coef, pairs.h.shape)
        rows = np.concatenate([pairs.i, pairs.j, pairs.i, pairs.j])
        cols = np.concatenate([pairs.i, pairs.j, pairs.j, pairs.i])
        data = np.concatenate([diag_coef, diag_coef, off_coef, off_coef])
        q = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
        x_mats.append(q @ sigma)
    j = np.empty((p, p))
    for a in range(p):
        for b in range(a, p):
            j[a, b] = j[b, a] = 2.0 * float(np.sum(x_mats[a] * x_mats[b].T))
    return _sandwich(_symmetrize(h), _symmetrize(j))


def are(g, fisher, p=None):
    """Asymptotic relative efficiency (|G| / |I|)^(1/p) of a sandwich vs Fisher."""
    g = np.asarray(g, dtype=float)
    fisher = np.asarray(fisher, dtype=float)
    if g.shape != fisher.shape:
        raise ValueError(f"order mismatch: {g.shape} vs {fisher.shape}")
    if p is None:
        p = g.shape[0]
    sign_g, logdet_g = np.linalg.slogdet(g)
    sign_i, logdet_i = np.linalg.slogdet(fisher)
    if sign_g <= 0 or sign_i <= 0:
        raise NotPositiveDefiniteError("information matrices must have positive determinants")
    return float(np.exp((logdet_g - logdet_i) / p))


def sparsity_to_distance(locs, percents, all_pair_h=None):
    """Distances achieving target nonzero fractions of the tapered matrix.

    The nonzero fraction of an n x n tapered matrix with P(d) within-range
    pairs is (n + 2 P(d)) / n^2; inverting by sorting all pair distances.

    Returns
    -------
    list of (percent_target, percent_actual, d)
    """
    n = locs.n
    if all_pair_h is None:
        all_pair_h = pairs_within(locs, None).h
    h_sorted = np.sort(all_pair_h)
    out = []
    for pct in percents:
        m_pairs = int(np.floor((pct * n * n - n) / 2.0))
        if m_pairs < 1:
            raise ValueError(f"target fraction {pct} admits no off-diagonal pairs at n={n}")
        d = float(h_sorted[m_pairs - 1])
        actual = int(np.searchsorted(h_sorted, d, side="right"))
        out.append((float(pct), (n + 2.0 * actual) / (n * n), d))
    return out


def are_sweep(methods, spec, locs, percents, free=FREE_DEFAULT):
    """Efficiency curves over a sequence of tapered-matrix nonzero fractions.

    Parameters
    ----------
    methods : sequence from {"taper", "marginal", "conditional", "difference"}

    Returns
    -------
    list of AreReport
        Definiteness failures are recorded per point; the sweep continues.
    """
    dm = distance_matrix(locs)
    fisher = fisher_info(spec, locs, free=free, dm=dm)
    targets = sparsity_to_distance(locs, percents)
    reports = []
    for pct, pct_actual, d in targets:
        pairs = pairs_within(locs, d)
        for method in methods:
            try:
                if method == "taper":
                    info = godambe_taper(spec, TaperSpec("wendland", d), locs, pairs,
                                         free=free, dm=dm)
                else:
                    info = godambe_cl(method, spec, locs, pairs, free=free, dm=dm)
                val = are(info.G, fisher, len(free))
                reports.append(AreReport(method, pct, pct_actual, d, val, len(free)))
            except (NotPositiveDefiniteError, SingularInformationError) as exc:
                reports.append(AreReport(method, pct, pct_actual, d, float("nan"),
                                         len(free), error=str(exc)))
    return reports
