"""Spatial locations, distance metrics, sampling designs and pair enumeration.

Planar coordinates are abstract units; spherical coordinates are degrees
(lon, lat) with distances in kilometres along great circles.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform

EARTH_RADIUS_KM = 6371.0

_METRICS = ("euclidean", "greatcircle")


@dataclass(frozen=True)
class LocationSet:
    """An ordered set of distinct planar or spherical point locations.

    Parameters
    ----------
    points : ndarray, shape (n, 2)
        Coordinates: (x, y) for the euclidean metric, (lon, lat) in
        degrees for the greatcircle metric.
    metric : {"euclidean", "greatcircle"}
    radius_km : float
        Sphere radius used by the greatcircle metric.
    """

    points: np.ndarray
    metric: str = "euclidean"
    radius_km: float = EARTH_RADIUS_KM

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
        if pts.shape[0] < 1:
            raise ValueError("at least one location is required")
        if not np.all(np.isfinite(pts)):
            raise ValueError("points contain non-finite coordinates")
        if self.metric not in _METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "greatcircle":
            lon, lat = pts[:, 0], pts[:, 1]
            if np.any(np.abs(lat) > 90.0) or np.any(np.abs(lon) > 180.0):
                raise ValueError("greatcircle coordinates need |lat| <= 90 and lon in [-180, 180]")
            if self.radius_km <= 0:
                raise ValueError("radius_km must be positive")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("locations contain exactly coincident points")
        object.__setattr__(self, "points", pts)

    @property
    def n(self):
        return self.points.shape[0]

    def __len__(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class PairSet:
    """All unordered location pairs within a cutoff distance.

    Stores parallel arrays (i, j, h) with i < j and h the inter-point
    distance; exhaustive for h <= cutoff (cutoff None means unbounded).
    """

    i: np.ndarray
    j: np.ndarray
    h: np.ndarray
    cutoff: float | None
    n: int

    def __post_init__(self):
        object.__setattr__(self, "i", np.asarray(self.i, dtype=np.int64))
        object.__setattr__(self, "j", np.asarray(self.j, dtype=np.int64))
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float))

    @property
    def size(self):
        return self.i.shape[0]

    def multiplicity(self):
        """Number of pairs each site participates in, shape (n,)."""
        return np.bincount(self.i, minlength=self.n) + np.bincount(self.j, minlength=self.n)


def _haversine(a, b, radius_km):
    """Great-circle distance between (lon, lat) degree arrays, broadcast over rows."""
    lon1, lat1 = np.radians(a[..., 0]), np.radians(a[..., 1])
    lon2, lat2 = np.radians(b[..., 0]), np.radians(b[..., 1])
    s = (np.sin((lat2 - lat1) / 2.0) ** 2
         + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2.0) ** 2)
    return 2.0 * radius_km * np.arcsin(np.minimum(np.sqrt(s), 1.0))


def distance(a, b, metric="euclidean", radius_km=EARTH_RADIUS_KM):
    """Distance between two points under the given metric.

    Parameters
    ----------
    a, b : array_like, shape (2,)
        Coordinates; (lon, lat) degrees for the greatcircle metric.

    Returns
    -------
    float
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if metric == "euclidean":
        return float(np.hypot(a[0] - b[0], a[1] - b[1]))
    if metric == "greatcircle":
        for p in (a, b):
            if abs(p[1]) > 90.0 or abs(p[0]) > 180.0:
                raise ValueError("greatcircle coordinates need |lat| <= 90 and lon in [-180, 180]")
        return float(_haversine(a, b, radius_km))
    raise ValueError(f"unknown metric {metric!r}")


def distance_matrix(locs):
    """Full symmetric n x n distance matrix of a LocationSet."""
    if locs.metric == "euclidean":
        return squareform(pdist(locs.points))
    d = _haversine(locs.points[:, None, :], locs.points[None, :, :], locs.radius_km)
    np.fill_diagonal(d, 0.0)
    return d


def _cross_distance(locs, ia, ib):
    """Distances between two index blocks of a LocationSet."""
    if locs.metric == "euclidean":
        return cdist(locs.points[ia], locs.points[ib])
    return _haversine(locs.points[ia, None, :], locs.points[None, ib, :], locs.radius_km)


def perturbed_grid_design(k, increment=0.03, jitter=0.01, seed=0, n_points=None):
    """Jittered regular-grid sampling design on the square [0, 2^(k/2)]^2.

    Builds the regular grid with the given increment, perturbs each
    coordinate independently by a uniform draw on [-jitter, jitter], then
    samples ``n_points`` (default 500 * 2^k) grid nodes without
    replacement. Deterministic for a fixed seed.

    Returns
    -------
    LocationSet
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if increment <= 0:
        raise ValueError("increment must be positive")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    side = 2.0 ** (k / 2.0)
    m = int(np.floor(side / increment + 1e-9)) + 1
    target = int(n_points) if n_points is not None else 500 * 2 ** k
    if m * m < target:
        raise ValueError(f"grid of {m * m} nodes cannot supply {target} points")
    axis = np.arange(m) * increment
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    pts = grid + rng.uniform(-jitter, jitter, size=grid.shape)
    keep = rng.choice(m * m, size=target, replace=False)
    return LocationSet(pts[keep], metric="euclidean")


def _bin_coordinates(locs, cutoff):
    """Coordinates and cell width used for uniform-grid binning.

    Euclidean points bin directly; spherical points are embedded on the
    sphere in 3-D, where a great-circle cutoff d corresponds to the chord
    2 R sin(d / 2R), monotone in d, so chord-based binning is exhaustive.
    """
    if locs.metric == "euclidean":
        return locs.points, float(cutoff)
    r = locs.radius_km
    lon, lat = np.radians(locs.points[:, 0]), np.radians(locs.points[:, 1])
    xyz = np.column_stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)]) * r
    chord = 2.0 * r * np.sin(min(cutoff / (2.0 * r), np.pi / 2.0))
    return xyz, chord


def pairs_within(locs, cutoff=None):
    """Enumerate every unordered pair of locations with distance <= cutoff.

    Uses uniform-grid binning with cell width equal to the cutoff and a
    one-cell neighbourhood scan, so the cost is proportional to the number
    of candidate neighbours rather than n^2. Pairs exactly at the cutoff
    are included. ``cutoff=None`` returns all n(n-1)/2 pairs.

    Returns
    -------
    PairSet
        Sorted canonically by (i, j).
    """
    n = locs.n
    if cutoff is None:
        if n < 2:
            return PairSet(np.empty(0, int), np.empty(0, int), np.empty(0), None, n)
        i, j = np.triu_indices(n, k=1)
        if locs.metric == "euclidean":
            h = pdist(locs.points)
        else:
            h = _haversine(locs.points[i], locs.points[j], locs.radius_km)
        return PairSet(i, j, h, None, n)

    if cutoff <= 0:
        raise ValueError("cutoff must be positive or None")
    coords, width = _bin_coordinates(locs, cutoff)
    cells = np.floor(coords / width).astype(np.int64)
    dim = coords.shape[1]

    # group point indices by cell
    order = np.lexsort(cells.T[::-1])
    sorted_cells = cells[order]
    boundaries = np.nonzero(np.any(np.diff(sorted_cells, axis=0) != 0, axis=1))[0] + 1
    starts = np.concatenate([[0], boundaries, [n]])
    cell_map = {}
    for a, b in zip(starts[:-1], starts[1:]):
        cell_map[tuple(sorted_cells[a])] = order[a:b]

    # forward half of the neighbourhood so each unordered cell pair is seen once
    offsets = [tuple(o - 1 for o in off) for off in np.ndindex(*(3,) * dim)
               if tuple(o - 1 for o in off) > (0,) * dim]

    out_i, out_j, out_h = [], [], []

    def _collect(ia, ib, within_cell):
        d = _cross_distance(locs, ia, ib)
        if within_cell:
            r, c = np.triu_indices(len(ia), k=1)
            di, dj, dh = ia[r], ib[c], d[r, c]
        else:
            r, c = np.nonzero(d <= cutoff)
            di, dj, dh = ia[r], ib[c], d[r, c]
        keep = dh <= cutoff
        di, dj, dh = di[keep], dj[keep], dh[keep]
        swap = di > dj
        di2 = np.where(swap, dj, di)
        dj2 = np.where(swap, di, dj)
        out_i.append(di2)
        out_j.append(dj2)
        out_h.append(dh)

    for key, idx in cell_map.items():
        if len(idx) > 1:
            _collect(idx, idx, within_cell=True)
        for off in offsets:
            other = cell_map.get(tuple(k + o for k, o in zip(key, off)))
            if other is not None:
                _collect(idx, other, within_cell=False)

    if out_i:
        i = np.concatenate(out_i)
        j = np.concatenate(out_j)
        h = np.concatenate(out_h)
    else:
        i = np.empty(0, dtype=np.int64)
        j = np.empty(0, dtype=np.int64)
        h = np.empty(0)
    order = np.lexsort((j, i))
    return PairSet(i[order], j[order], h[order], float(cutoff), n)


def read_locations_csv(path, radius_km=EARTH_RADIUS_KM):
    """Read a locations CSV with header ``x,y`` (planar) or ``lon,lat`` (spherical).

    The metric is inferred from the header.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().lower().split(",")
    if header[:2] == ["x", "y"]:
        metric = "euclidean"
    elif header[:2] == ["lon", "lat"]:
        metric = "greatcircle"
    else:
        raise ValueError(f"{path}: expected header 'x,y' or 'lon,lat', got {header!r}")
    pts = np.loadtxt(path, delimiter=",", skiprows=1, usecols=(0, 1), ndmin=2)
    return LocationSet(pts, metric=metric, radius_km=radius_km)


def write_locations_csv(path, locs):
    """Write a LocationSet in the CSV layout read_locations_csv expects."""
    header = "x,y" if locs.metric == "euclidean" else "lon,lat"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for x, y in locs.points:
            fh.write(f"{float(x)!r},{float(y)!r}\n")
