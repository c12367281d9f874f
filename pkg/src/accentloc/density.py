"""Spatial probability densities over planar locations.

Three representations are supported:

* :class:`DeltaSet` -- weighted point masses,
* :class:`Grid` -- piecewise-constant raster; ``values[j, i]`` is the average
  density (per km^2) over cell column ``i``, row ``j`` with row 0 at the south,
* :class:`GaussianMixture` -- weighted bivariate normals.

Operations that need spatial structure for a mixture (region integration,
posteriors) go through :func:`rasterize`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import DegenerateDensityError, InvalidDensityError, SchemaError
from .spatial import Location, Polygon, Tessellation, as_points

DEFAULT_RESOLUTION = (512, 512)
DEFAULT_SUBCELLS = 4
MASS_TOL = 1e-9
_CACHE_LIMIT = 16


@dataclass(frozen=True, eq=False)
class DeltaSet:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points).copy()
        w = np.asarray(self.weights, dtype=float).reshape(-1).copy()
        if len(pts) == 0:
            raise SchemaError("delta set has no points")
        if len(w) != len(pts):
            raise SchemaError(f"delta set has {len(pts)} points but {len(w)} weights")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(w))):
            raise SchemaError("delta set has non-finite entries")
        if np.any(w < 0):
            raise SchemaError("delta weights must be non-negative")
        pts.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def single(cls, loc) -> "DeltaSet":
        return cls(as_points(loc), np.ones(1))


@dataclass(frozen=True, eq=False)
class Grid:
    bbox: tuple[float, float, float, float]
    values: np.ndarray

    def __post_init__(self):
        bbox = tuple(float(v) for v in self.bbox)
        if len(bbox) != 4 or not all(math.isfinite(v) for v in bbox):
            raise SchemaError(f"grid bbox must be 4 finite numbers, got {self.bbox}")
        if not (bbox[2] > bbox[0] and bbox[3] > bbox[1]):
            raise SchemaError(f"grid bbox is empty: {bbox}")
        vals = np.array(self.values, dtype=float)
        if vals.ndim != 2 or vals.size == 0:
            raise SchemaError(f"grid values must be a non-empty 2-D array, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise SchemaError("grid values must be finite and non-negative")
        vals.flags.writeable = False
        object.__setattr__(self, "bbox", bbox)
        object.__setattr__(self, "values", vals)

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def dx(self) -> float:
        return (self.bbox[2] - self.bbox[0]) / self.nx

    @property
    def dy(self) -> float:
        return (self.bbox[3] - self.bbox[1]) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    @property
    def x_centers(self) -> np.ndarray:
        return self.bbox[0] + (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_centers(self) -> np.ndarray:
        return self.bbox[1] + (np.arange(self.ny) + 0.5) * self.dy

    @property
    def masses(self) -> np.ndarray:
        return self.values * self.cell_area

    @property
    def geometry(self) -> tuple:
        return (self.bbox, self.nx, self.ny)

    def centers(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x_centers, self.y_centers)
        return np.column_stack([X.ravel(), Y.ravel()])


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    means: np.ndarray
    covs: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        means = as_points(self.means).copy()
        covs = np.array(self.covs, dtype=float).reshape(-1, 2, 2)
        w = np.asarray(self.weights, dtype=float).reshape(-1).copy()
        if not (len(means) == len(covs) == len(w)) or len(w) == 0:
            raise SchemaError("gaussian mixture needs equal, non-zero numbers of means, covariances and weights")
        if not (np.all(np.isfinite(means)) and np.all(np.isfinite(covs)) and np.all(np.isfinite(w))):
            raise SchemaError("gaussian mixture has non-finite entries")
        if np.any(w < 0):
            raise SchemaError("mixture weights must be non-negative")
        for k, c in enumerate(covs):
            if not np.allclose(c, c.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(c).max())):
                raise SchemaError(f"covariance {k} is not symmetric")
            if np.linalg.eigvalsh(c).min() <= 0:
                raise SchemaError(f"covariance {k} is not positive definite")
        for a in (means, covs, w):
            a.flags.writeable = False
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covs", covs)
        object.__setattr__(self, "weights", w)

    @classmethod
    def isotropic(cls, means, sigmas, weights) -> "GaussianMixture":
        sig = np.broadcast_to(np.asarray(sigmas, dtype=float), (len(as_points(means)),))
        covs = np.array([np.eye(2) * s * s for s in sig])
        return cls(means, covs, weights)

    @property
    def sigmas(self) -> np.ndarray:
        """Per-component marginal standard deviations, shape (k, 2)."""
        return np.sqrt(np.stack([self.covs[:, 0, 0], self.covs[:, 1, 1]], axis=1))


SpatialDensity = Union[DeltaSet, Grid, GaussianMixture]


@dataclass(frozen=True)
class DiscreteDistribution:
    """Probabilities over region ids plus the mass falling outside every region."""

    entries: Mapping[str, float]
    outside_mass: float = 0.0

    def __post_init__(self):
        entries = {str(k): float(v) for k, v in sorted(self.entries.items())}
        outside = float(self.outside_mass)
        vals = list(entries.values()) + [outside]
        if not all(math.isfinite(v) for v in vals):
            raise SchemaError("discrete distribution has non-finite probabilities")
        if any(v < 0 for v in vals):
            raise SchemaError("discrete distribution has negative probabilities")
        total = math.fsum(vals)
        if abs(total - 1.0) > MASS_TOL:
            raise SchemaError(f"discrete distribution sums to {total!r}, not 1")
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "outside_mass", outside)

    @property
    def region_ids(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def __getitem__(self, rid: str) -> float:
        return self.entries[rid]

    def renormalized(self) -> "DiscreteDistribution":
        """Fold the outside mass proportionally into the entries."""
        inside = math.fsum(self.entries.values())
        if inside <= 0:
            raise DegenerateDensityError("no mass inside the tessellation to renormalize")
        return DiscreteDistribution({k: v / inside for k, v in self.entries.items()}, 0.0)


# --------------------------------------------------------------------------
# basic properties


def total_mass(d: SpatialDensity) -> float:
    if isinstance(d, DeltaSet):
        return math.fsum(d.weights)
    if isinstance(d, Grid):
        return float(d.values.sum()) * d.cell_area
    if isinstance(d, GaussianMixture):
        return math.fsum(d.weights)
    raise SchemaError(f"not a spatial density: {type(d).__name__}")


def normalize(d: SpatialDensity) -> SpatialDensity:
    mass = total_mass(d)
    if not (math.isfinite(mass) and mass > 0):
        raise DegenerateDensityError(f"cannot normalize a density with mass {mass!r}")
    if isinstance(d, DeltaSet):
        return DeltaSet(d.points, d.weights / mass)
    if isinstance(d, Grid):
        return Grid(d.bbox, d.values / mass)
    return GaussianMixture(d.means, d.covs, d.weights / mass)


def gmm_pdf(gmm: GaussianMixture, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=float)
    flat = pts.reshape(-1, 2)
    out = np.zeros(len(flat))
    for mu, cov, w in zip(gmm.means, gmm.covs, gmm.weights):
        if w == 0:
            continue
        inv = np.linalg.inv(cov)
        det = np.linalg.det(cov)
        dx = flat[:, 0] - mu[0]
        dy = flat[:, 1] - mu[1]
        q = inv[0, 0] * dx * dx + 2 * inv[0, 1] * dx * dy + inv[1, 1] * dy * dy
        out += w * np.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))
    return out.reshape(pts.shape[:-1])


def _grid_cell_index(g: Grid, pts: np.ndarray):
    """Cell indices of points; points on the max edge belong to the last cell."""
    i = np.floor((pts[:, 0] - g.bbox[0]) / g.dx).astype(np.int64)
    j = np.floor((pts[:, 1] - g.bbox[1]) / g.dy).astype(np.int64)
    i = np.where(pts[:, 0] == g.bbox[2], g.nx - 1, i)
    j = np.where(pts[:, 1] == g.bbox[3], g.ny - 1, j)
    ok = (i >= 0) & (i < g.nx) & (j >= 0) & (j < g.ny)
    return i, j, ok


def density_at(d: SpatialDensity, pts) -> np.ndarray:
    """Pointwise density values. Delta sets have no pointwise density."""
    arr = np.asarray(pts, dtype=float)
    flat = arr.reshape(-1, 2)
    if isinstance(d, GaussianMixture):
        return gmm_pdf(d, flat).reshape(arr.shape[:-1])
    if isinstance(d, Grid):
        i, j, ok = _grid_cell_index(d, flat)
        out = np.zeros(len(flat))
        out[ok] = d.values[j[ok], i[ok]]
        return out.reshape(arr.shape[:-1])
    raise InvalidDensityError("a delta set has no pointwise density")


# --------------------------------------------------------------------------
# rasterization


def auto_bbox(d: SpatialDensity, n_sigma: float = 4.0) -> tuple[float, float, float, float]:
    """Bounding box of the support: +-n_sigma around mixture components, the
    grid's own bbox, or the points' hull (padded to non-zero size) for deltas."""
    if isinstance(d, Grid):
        return d.bbox
    if isinstance(d, GaussianMixture):
        keep = d.weights > 0
        lo = (d.means - n_sigma * d.sigmas)[keep].min(axis=0)
        hi = (d.means + n_sigma * d.sigmas)[keep].max(axis=0)
        return (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1]))
    keep = d.weights > 0
    lo = d.points[keep].min(axis=0)
    hi = d.points[keep].max(axis=0)
    pad = 0.5 * max(1.0, float((hi - lo).max()) * 0.01)
    return (float(lo[0] - pad), float(lo[1] - pad), float(hi[0] + pad), float(hi[1] + pad))


def _empty_grid_centers(bbox, nx: int, ny: int):
    xmin, ymin, xmax, ymax = bbox
    dx = (xmax - xmin) / nx
    dy = (ymax - ymin) / ny
    xs = xmin + (np.arange(nx) + 0.5) * dx
    ys = ymin + (np.arange(ny) + 0.5) * dy
    return xs, ys, dx, dy


def resample(d: SpatialDensity, bbox, nx: int, ny: int, subcells: int = DEFAULT_SUBCELLS) -> Grid:
    """Express ``d`` as cell-average densities on the given grid geometry.

    Mass outside ``bbox`` is dropped, not renormalized. Mixtures are sampled at
    cell centres; grids are averaged over ``subcells`` x ``subcells`` points per
    target cell; deltas deposit their weight in the containing cell.
    """
    bbox = tuple(float(v) for v in bbox)
    xs, ys, dx, dy = _empty_grid_centers(bbox, nx, ny)
    if isinstance(d, GaussianMixture):
        X, Y = np.meshgrid(xs, ys)
        return Grid(bbox, gmm_pdf(d, np.stack([X, Y], axis=-1)))
    if isinstance(d, Grid):
        if d.bbox == bbox and d.nx == nx and d.ny == ny:
            return d
        s = subcells
        sx = bbox[0] + (np.arange(nx * s) + 0.5) * dx / s
        sy = bbox[1] + (np.arange(ny * s) + 0.5) * dy / s
        X, Y = np.meshgrid(sx, sy)
        vals = density_at(d, np.stack([X, Y], axis=-1))
        return Grid(bbox, vals.reshape(ny, s, nx, s).mean(axis=(1, 3)))
    tmp = Grid(bbox, np.zeros((ny, nx)))
    i, j, ok = _grid_cell_index(tmp, d.points)
    vals = np.zeros((ny, nx))
    np.add.at(vals, (j[ok], i[ok]), d.weights[ok] / (dx * dy))
    return Grid(bbox, vals)


def rasterize(d: SpatialDensity, resolution=DEFAULT_RESOLUTION, bbox=None) -> Grid:
    """Normalized raster of ``d`` on ``bbox`` (default :func:`auto_bbox`)."""
    if isinstance(d, Grid) and bbox is None:
        return d
    nx, ny = resolution
    g = resample(d, bbox if bbox is not None else auto_bbox(d), nx, ny)
    return normalize(g)


# --------------------------------------------------------------------------
# region integration


def _sample_offsets(s: int) -> np.ndarray:
    """Fractional in-cell offsets of the s*s integration points, shape (s*s, 2).

    Point (a, b) lies inside subcell (a, b), shifted so that all s*s points
    have distinct x strata and distinct y strata (an n-rooks pattern). An
    axis-aligned edge is then resolved to 1/s^2 of a cell instead of 1/s.
    """
    a, b = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    a, b = a.ravel(), b.ravel()
    return np.column_stack([(a * s + b + 0.5) / (s * s), (b * s + a + 0.5) / (s * s)])


def _cell_block(g: Grid, poly: Polygon):
    """Index ranges of the cells overlapping the polygon's bbox."""
    xmin, ymin, xmax, ymax = poly.bbox
    i0 = max(int(math.floor((xmin - g.bbox[0]) / g.dx)), 0)
    i1 = min(int(math.floor((xmax - g.bbox[0]) / g.dx)) + 1, g.nx)
    j0 = max(int(math.floor((ymin - g.bbox[1]) / g.dy)), 0)
    j1 = min(int(math.floor((ymax - g.bbox[1]) / g.dy)) + 1, g.ny)
    return i0, i1, j0, j1


def _block_points(g: Grid, i0, i1, j0, j1, offsets):
    xs = g.bbox[0] + (np.arange(i0, i1)[None, :, None] + offsets[None, None, :, 0]) * g.dx
    ys = g.bbox[1] + (np.arange(j0, j1)[:, None, None] + offsets[None, None, :, 1]) * g.dy
    return np.broadcast_arrays(xs, ys)


def _subcell_labels(g: Grid, tess: Tessellation, s: int) -> np.ndarray:
    """Region index of every integration point, shape (ny, nx, s*s), -1 outside.

    Regions are visited in id order and a point keeps its first region, which
    implements the smallest-id rule on shared boundaries. Cached on the
    tessellation per grid geometry.
    """
    key = ("labels", g.bbox, g.nx, g.ny, s)
    cached = tess._cache.get(key)
    if cached is not None:
        return cached
    offsets = _sample_offsets(s)
    labels = np.full((g.ny, g.nx, s * s), -1, dtype=np.int32)
    for r, (_, poly) in enumerate(tess.regions):
        i0, i1, j0, j1 = _cell_block(g, poly)
        if i0 >= i1 or j0 >= j1:
            continue
        block = labels[j0:j1, i0:i1]
        free = block == -1
        if not free.any():
            continue
        X, Y = _block_points(g, i0, i1, j0, j1, offsets)
        hit = poly.contains(X[free], Y[free])
        sub = block[free]
        sub[hit] = r
        block[free] = sub
    labels.flags.writeable = False
    if len(tess._cache) >= _CACHE_LIMIT:
        tess._cache.pop(next(iter(tess._cache)))
    tess._cache[key] = labels
    return labels


def integrate_region(
    d: SpatialDensity,
    poly: Polygon,
    subcells: int = DEFAULT_SUBCELLS,
    resolution=DEFAULT_RESOLUTION,
) -> float:
    """Probability mass of ``d`` inside ``poly`` (boundary included).

    Grid cells are split into ``subcells`` x ``subcells`` subcells with one
    integration point each; a cell contributes its mass times the fraction of
    its points inside the polygon.
    """
    if not isinstance(poly, Polygon):
        raise SchemaError("integrate_region needs a Polygon")
    if isinstance(d, DeltaSet):
        hit = poly.contains(d.points[:, 0], d.points[:, 1])
        return math.fsum(d.weights[hit])
    g = rasterize(d, resolution)
    i0, i1, j0, j1 = _cell_block(g, poly)
    if i0 >= i1 or j0 >= j1:
        return 0.0
    X, Y = _block_points(g, i0, i1, j0, j1, _sample_offsets(subcells))
    frac = poly.contains(X, Y).mean(axis=2)
    return float((g.values[j0:j1, i0:i1] * frac).sum()) * g.cell_area


def _aggregation_grid(d: SpatialDensity, tess: Tessellation, resolution) -> Grid:
    """Grid used for aggregation, holding absolute mass per unit area.

    Mixtures are rasterized on their support clipped to the tessellation bbox,
    without renormalizing: mass beyond the clip is outside every region anyway
    and ends up in ``outside_mass``.
    """
    if isinstance(d, Grid):
        return d
    lo = np.maximum(auto_bbox(d)[:2], tess.bbox[:2])
    hi = np.minimum(auto_bbox(d)[2:], tess.bbox[2:])
    if np.any(hi <= lo):
        return Grid(tess.bbox, np.zeros((1, 1)))
    nx, ny = resolution
    g = resample(d, (*lo, *hi), nx, ny)
    return Grid(g.bbox, g.values / total_mass(d))


def aggregate(
    d: SpatialDensity,
    tess: Tessellation,
    renormalize: bool = False,
    subcells: int = DEFAULT_SUBCELLS,
    resolution=DEFAULT_RESOLUTION,
) -> DiscreteDistribution:
    """Integrate ``d`` over every region of ``tess``.

    Shared-boundary points are assigned once, to the smallest region id, so
    the entries plus ``outside_mass`` always sum to one.
    """
    from .spatial import assign_points

    n = len(tess.regions)
    if isinstance(d, DeltaSet):
        labels = assign_points(d.points, tess)
        mass = total_mass(d)
        inside = labels >= 0
        per = np.bincount(labels[inside], weights=d.weights[inside], minlength=n) / mass
    else:
        g = _aggregation_grid(d, tess, resolution)
        s = subcells
        labels = _subcell_labels(g, tess, s)
        w = np.broadcast_to((g.values * (g.cell_area / (s * s)))[:, :, None], labels.shape)
        inside = labels >= 0
        per = np.bincount(labels[inside], weights=w[inside], minlength=n)
        if isinstance(d, Grid):
            per = per / total_mass(d)
    per = np.clip(per, 0.0, None)
    outside = 1.0 - math.fsum(per)
    if outside < 0:
        # rounding only; entries already account for all the mass
        per = per / math.fsum(per)
        outside = 0.0
    dist = DiscreteDistribution(dict(zip(tess.ids, per.tolist())), outside)
    return dist.renormalized() if renormalize else dist


# --------------------------------------------------------------------------
# point estimates


def mean(d: SpatialDensity) -> Location:
    """Probability-weighted centroid."""
    if isinstance(d, DeltaSet):
        w = d.weights / total_mass(d)
        c = w @ d.points
    elif isinstance(d, Grid):
        m = d.masses / d.masses.sum()
        c = np.array([m.sum(axis=0) @ d.x_centers, m.sum(axis=1) @ d.y_centers])
    else:
        w = d.weights / total_mass(d)
        c = w @ d.means
    return Location(float(c[0]), float(c[1]))


def _lexmin(points: np.ndarray) -> np.ndarray:
    order = np.lexsort((points[:, 1], points[:, 0]))
    return points[order[0]]


def mode(d: SpatialDensity, search=DEFAULT_RESOLUTION, climb_steps: int = 20) -> Location:
    """Location of the highest mode.

    Ties go to the lexicographically smallest (x, y). For mixtures the density
    is searched on a ``search`` grid over :func:`auto_bbox` and then refined by
    a compass search that halves its step whenever no neighbour improves.
    """
    if isinstance(d, DeltaSet):
        best = d.weights.max()
        return Location(*map(float, _lexmin(d.points[d.weights == best])))
    if isinstance(d, Grid):
        best = d.values.max()
        jj, ii = np.nonzero(d.values == best)
        pts = np.column_stack([d.x_centers[ii], d.y_centers[jj]])
        return Location(*map(float, _lexmin(pts)))
    nx, ny = search
    g = resample(d, auto_bbox(d), nx, ny)
    jj, ii = np.nonzero(g.values == g.values.max())
    cur = _lexmin(np.column_stack([g.x_centers[ii], g.y_centers[jj]]))
    cur_val = float(gmm_pdf(d, cur))
    step = np.array([g.dx, g.dy])
    dirs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    for _ in range(climb_steps):
        cand = cur + dirs * step
        vals = gmm_pdf(d, cand)
        k = int(np.argmax(vals))
        if vals[k] > cur_val:
            cur, cur_val = cand[k], float(vals[k])
        else:
            step = step / 2
    return Location(float(cur[0]), float(cur[1]))


# --------------------------------------------------------------------------
# Bayes composition


def _product(likelihood: Grid, prior: SpatialDensity) -> np.ndarray:
    if not isinstance(likelihood, Grid):
        raise SchemaError("likelihood must be a Grid")
    p = resample(prior, likelihood.bbox, likelihood.nx, likelihood.ny)
    return likelihood.values * p.values


def evidence(likelihood: Grid, prior: SpatialDensity) -> float:
    """Normalizer of the posterior: the integral of likelihood times prior."""
    return float(_product(likelihood, prior).sum()) * likelihood.cell_area


def posterior(likelihood: Grid, prior: SpatialDensity) -> Grid:
    """Normalized pointwise product of ``likelihood`` and ``prior`` on the likelihood's grid."""
    prod = _product(likelihood, prior)
    z = float(prod.sum()) * likelihood.cell_area
    if not (math.isfinite(z) and z > 0):
        raise DegenerateDensityError("posterior has zero mass: likelihood and prior do not overlap")
    return Grid(likelihood.bbox, prod / z)


def total_variation(a: Grid, b: Grid) -> float:
    """Total variation distance between two grids of identical geometry."""
    if a.geometry != b.geometry:
        raise SchemaError("total variation needs identical grid geometry")
    return 0.5 * float(np.abs(a.masses / a.masses.sum() - b.masses / b.masses.sum()).sum())


# --------------------------------------------------------------------------
# sampling


def sample(d: SpatialDensity, n: int, seed: int | np.random.Generator) -> np.ndarray:
    """``n`` i.i.d. draws as an (n, 2) array; deterministic given ``seed``."""
    if n < 1:
        raise SchemaError("sample size must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if isinstance(d, DeltaSet):
        idx = rng.choice(len(d.weights), size=n, p=d.weights / d.weights.sum())
        return d.points[idx].copy()
    if isinstance(d, Grid):
        m = d.masses.ravel()
        cell = rng.choice(m.size, size=n, p=m / m.sum())
        j, i = np.divmod(cell, d.nx)
        u = rng.random((n, 2))
        return np.column_stack([d.bbox[0] + (i + u[:, 0]) * d.dx, d.bbox[1] + (j + u[:, 1]) * d.dy])
    comp = rng.choice(len(d.weights), size=n, p=d.weights / d.weights.sum())
    chol = np.linalg.cholesky(d.covs)
    z = rng.standard_normal((n, 2))
    return d.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)
