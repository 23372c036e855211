"""Parametric covariance families, analytic gradients, and the Wendland taper.

Four isotropic correlation families are provided: exponential, Cauchy,
spherical and wave (cardinal sine). Under the "practical" range convention
the range parameter phi is the distance at which correlation drops to (at
most) 0.05; under the "natural" convention the raw rate 1/phi is used, as
in exp(-h/phi). The spherical family is compactly supported at phi under
both conventions.
"""

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import distance_matrix

FAMILIES = ("exponential", "cauchy", "spherical", "wave")
RANGE_CONVENTIONS = ("practical", "natural")
PARAM_NAMES = ("sigma2", "phi", "nugget")

# rate constants achieving |correlation(phi)| <= 0.05; the wave constant is
# the conventional printed value, not a recomputed sinc root
_PRACTICAL_RATE = {
    "exponential": 3.0,
    "cauchy": math.sqrt(19.0),
    "spherical": 1.0,
    "wave": 20.371,
}


@dataclass(frozen=True)
class CovarianceSpec:
    """A stationary isotropic covariance model sigma2 * rho(h; phi) + nugget * 1{h=0}."""

    family: str
    sigma2: float
    phi: float
    nugget: float = 0.0
    range_convention: str = "practical"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown covariance family {self.family!r}")
        if self.range_convention not in RANGE_CONVENTIONS:
            raise ValueError(f"unknown range convention {self.range_convention!r}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.phi > 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        if self.nugget < 0:
            raise ValueError(f"nugget must be non-negative, got {self.nugget}")

    @property
    def rate(self):
        if self.family == "spherical" or self.range_convention == "natural":
            return 1.0
        return _PRACTICAL_RATE[self.family]

    def replace(self, **kw):
        d = dict(family=self.family, sigma2=self.sigma2, phi=self.phi,
                 nugget=self.nugget, range_convention=self.range_convention)
        d.update(kw)
        return CovarianceSpec(**d)

    def theta(self, free):
        """Parameter vector for the named free parameters."""
        return np.array([getattr(self, name) for name in free])

    def with_theta(self, free, theta):
        return self.replace(**dict(zip(free, (float(t) for t in theta))))


@dataclass(frozen=True)
class TaperSpec:
    """A compactly supported taper correlation: Wendland with range d, or none."""

    kind: str = "wendland"
    range: float | None = None

    def __post_init__(self):
        if self.kind not in ("wendland", "none"):
            raise ValueError(f"unknown taper kind {self.kind!r}")
        if self.kind == "wendland":
            if self.range is None or not self.range > 0:
                raise ValueError("wendland taper needs a positive range")
        elif self.range is not None:
            raise ValueError("taper kind 'none' takes no range")


def correlation(spec, h):
    """Correlation rho(h; phi) of the family, without variance or nugget."""
    h = np.asarray(h, dtype=float)
    u = spec.rate * h / spec.phi
    if spec.family == "exponential":
        return np.exp(-u)
    if spec.family == "cauchy":
        return 1.0 / (1.0 + u * u)
    if spec.family == "spherical":
        v = h / spec.phi
        return np.where(v < 1.0, 1.0 - 1.5 * v + 0.5 * v ** 3, 0.0)
    # wave: sin(u)/u with the sinc limit 1 at u = 0
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(u == 0.0, 1.0, np.sin(u) / np.where(u == 0.0, 1.0, u))


def correlation_dphi(spec, h):
    """Partial derivative of the correlation with respect to phi.

    The spherical family is non-differentiable at h = phi; the (zero)
    one-sided limit is used there, which coincides from both sides.
    """
    h = np.asarray(h, dtype=float)
    u = spec.rate * h / spec.phi
    if spec.family == "exponential":
        return np.exp(-u) * u / spec.phi
    if spec.family == "cauchy":
        return 2.0 * u * u / (spec.phi * (1.0 + u * u) ** 2)
    if spec.family == "spherical":
        v = h / spec.phi
        return np.where(v < 1.0, 1.5 * (v - v ** 3) / spec.phi, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(u == 0.0, 1.0, np.sin(u) / np.where(u == 0.0, 1.0, u))
    return np.where(u == 0.0, 0.0, (rho - np.cos(u)) / spec.phi)


def cov(spec, h):
    """Covariance at lag h: nugget * 1{h=0} + sigma2 * rho(h; phi)."""
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("distances must be non-negative")
    c = spec.sigma2 * correlation(spec, h)
    if spec.nugget != 0.0:
        c = c + spec.nugget * (h == 0.0)
    return c if c.ndim else float(c)


def cov_grad(spec, h, free=("sigma2", "phi")):
    """Analytic partials of cov with respect to the named free parameters.

    Returns
    -------
    ndarray, shape h.shape + (len(free),)
    """
    h = np.asarray(h, dtype=float)
    cols = []
    for name in free:
        if name == "sigma2":
            cols.append(correlation(spec, h))
        elif name == "phi":
            cols.append(spec.sigma2 * correlation_dphi(spec, h))
        elif name == "nugget":
            cols.append((h == 0.0).astype(float))
        else:
            raise ValueError(f"unknown parameter {name!r}")
    return np.stack(cols, axis=-1)


def taper(tspec, h):
    """Taper correlation in [0, 1]: Wendland (1 - h/d)^4_+ (1 + 4h/d), or 1 for kind 'none'."""
    h = np.asarray(h, dtype=float)
    if tspec.kind == "none":
        out = np.ones_like(h)
        return out if out.ndim else 1.0
    t = np.maximum(1.0 - h / tspec.range, 0.0)
    out = t ** 4 * (1.0 + 4.0 * h / tspec.range)
    return out if out.ndim else float(out)


def assemble_sigma(spec, locs, dm=None):
    """Dense n x n covariance matrix over a LocationSet.

    Parameters
    ----------
    dm : ndarray, optional
        Precomputed distance matrix, reused across repeated assemblies.
    """
    if dm is None:
        dm = distance_matrix(locs)
    c = spec.sigma2 * correlation(spec, dm)
    idx = np.arange(dm.shape[0])
    c[idx, idx] = spec.sigma2 + spec.nugget
    return c


def assemble_sigma_grad(spec, locs, free=("sigma2", "phi"), dm=None):
    """Dense partial-derivative matrices of assemble_sigma, one per free parameter."""
    if dm is None:
        dm = distance_matrix(locs)
    return [np.ascontiguousarray(g) for g in np.moveaxis(cov_grad(spec, dm, free), -1, 0)]


def _check_taper_pairs(tspec, pairs):
    if tspec.kind == "wendland":
        if pairs.cutoff is None or pairs.cutoff != tspec.range:
            raise ValueError(
                f"pair cutoff {pairs.cutoff} does not match taper range {tspec.range}")
    elif pairs.cutoff is not None:
        raise ValueError("taper kind 'none' requires unbounded pairs")


def _symmetric_csc(n, pairs, off_values, diag_values):
    rows = np.concatenate([pairs.i, pairs.j, np.arange(n)])
    cols = np.concatenate([pairs.j, pairs.i, np.arange(n)])
    data = np.concatenate([off_values, off_values, diag_values])
    m = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsc()
    m.sum_duplicates()
    m.sort_indices()
    return m


def assemble_tapered_sigma(spec, tspec, locs, pairs):
    """Sparse tapered covariance: the Schur product of cov and the taper.

    Only entries inside the taper support plus the diagonal are stored.
    The pairs must have been built with cutoff equal to the taper range.
    """
    _check_taper_pairs(tspec, pairs)
    off = cov(spec, pairs.h) * taper(tspec, pairs.h)
    diag = np.full(locs.n, spec.sigma2 + spec.nugget)
    return _symmetric_csc(locs.n, pairs, off, diag)


def assemble_tapered_sigma_grad(spec, tspec, locs, pairs, free=("sigma2", "phi")):
    """Sparse partials of assemble_tapered_sigma, one per free parameter."""
    _check_taper_pairs(tspec, pairs)
    r = taper(tspec, pairs.h)
    n = locs.n
    out = []
    for name in free:
        if name == "sigma2":
            out.append(_symmetric_csc(n, pairs, correlation(spec, pairs.h) * r, np.ones(n)))
        elif name == "phi":
            out.append(_symmetric_csc(
                n, pairs, spec.sigma2 * correlation_dphi(spec, pairs.h) * r, np.zeros(n)))
        elif name == "nugget":
            out.append(sp.identity(n, format="csc"))
        else:
            raise ValueError(f"unknown parameter {name!r}")
    return out
