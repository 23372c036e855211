"""Seeded simulation of zero-mean stationary Gaussian random fields.

Realizations are drawn as L eps with L the dense Cholesky factor of the
covariance and eps standard normals produced by inverse-CDF transform of
Philox counter-based uniforms, so each (seed, rep) pair maps to one fixed
stream independent of execution order or thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .covariance import assemble_sigma
from .errors import NotPositiveDefiniteError


@dataclass(frozen=True)
class Realization:
    """Field values at the generating LocationSet for one replicate."""

    values: np.ndarray
    seed: int
    rep: int


def _standard_normals(n, seed, rep):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(rep)))))
    u = rng.random(n)
    # random() is in [0, 1); keep ndtri finite at the measure-zero endpoint
    return ndtri(np.fmax(u, 1e-300))


def _chol_lower(spec, locs):
    sigma = assemble_sigma(spec, locs)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"covariance matrix is not positive definite: {exc}") from exc


def simulate_grf(spec, locs, seed, rep=0, chol=None):
    """Draw one realization of the field at the given locations.

    Parameters
    ----------
    chol : ndarray, optional
        Precomputed lower Cholesky factor of the covariance, reused when
        drawing many replicates for the same model and locations.

    Returns
    -------
    Realization
    """
    if chol is None:
        chol = _chol_lower(spec, locs)
    eps = _standard_normals(locs.n, seed, rep)
    return Realization(values=chol @ eps, seed=int(seed), rep=int(rep))


def simulate_batch(spec, locs, n_reps, seed, threads=1):
    """Draw n_reps independent replicates sharing one Cholesky factor.

    Replicate r uses the stream keyed by (seed, r), so results do not
    depend on execution order or on the number of threads.

    Returns
    -------
    list of Realization
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    chol = _chol_lower(spec, locs)

    def draw(r):
        return simulate_grf(spec, locs, seed, rep=r, chol=chol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(draw, range(n_reps)))
    return [draw(r) for r in range(n_reps)]


def write_realizations_csv(path, locs, realizations):
    """Write replicates as CSV rows ``rep,x,y,z``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("rep,x,y,z\n")
        for real in realizations:
            for (x, y), z in zip(locs.points, real.values):
                fh.write(f"{real.rep},{float(x)!r},{float(y)!r},{float(z)!r}\n")


def read_field_csv(path):
    """Read an observation CSV with header ``x,y,z`` or ``lon,lat,z``.

    Unparseable rows are reported with their 1-based row numbers.

    Returns
    -------
    (LocationSet, ndarray)
    """
    from .geometry import LocationSet

    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = [c.strip().lower() for c in lines[0].split(",")]
    if header[:3] == ["x", "y", "z"]:
        metric = "euclidean"
    elif header[:3] == ["lon", "lat", "z"]:
        metric = "greatcircle"
    else:
        raise ValueError(f"{path}: expected header 'x,y,z' or 'lon,lat,z', got {header!r}")
    rows, bad = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if len(parts) != 3:
                raise ValueError
            rows.append([float(p) for p in parts])
        except ValueError:
            bad.append(lineno)
    if bad:
        shown = ", ".join(str(b) for b in bad[:10])
        more = "" if len(bad) <= 10 else f" (+{len(bad) - 10} more)"
        raise ValueError(f"{path}: unparseable row(s) {shown}{more}")
    raw = np.asarray(rows, dtype=float)
    if raw.size == 0:
        raise ValueError(f"{path}: no data rows")
    return LocationSet(raw[:, :2], metric=metric), raw[:, 2]
