"""Planar geometry: locations, polygons, tessellations and distance functions.

All coordinates are kilometres in a single planar projection (x east, y
north). Longitude/latitude input is converted with an equirectangular
projection about a reference latitude, see :func:`project_lonlat`.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np
import shapely
from shapely.strtree import STRtree

from .errors import GeometryError, InvalidDensityError, SchemaError

if TYPE_CHECKING:
    from .density import SpatialDensity

EARTH_RADIUS_KM = 6371.0088


@dataclass(frozen=True, slots=True)
class Location:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise SchemaError(f"location coordinates must be finite, got ({self.x}, {self.y})")

    def __iter__(self):
        yield self.x
        yield self.y

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def as_location(obj) -> Location:
    if isinstance(obj, Location):
        return obj
    x, y = obj
    return Location(float(x), float(y))


def as_points(obj) -> np.ndarray:
    """Coerce a location, a sequence of locations or an array to an (n, 2) float array."""
    if isinstance(obj, Location):
        return obj.as_array()[None, :]
    if not isinstance(obj, np.ndarray):
        obj = [tuple(p) if isinstance(p, Location) else p for p in obj]
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise SchemaError(f"expected points of shape (n, 2), got {arr.shape}")
    return arr


def project_lonlat(lon, lat, ref_lat: float = 52.0):
    """Equirectangular projection of degrees to planar kilometres.

    ``x = R * lon * cos(ref_lat)`` and ``y = R * lat`` (angles in radians).
    The default reference latitude is roughly the centre of the Netherlands.
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    x = EARTH_RADIUS_KM * np.radians(lon) * math.cos(math.radians(ref_lat))
    y = EARTH_RADIUS_KM * np.radians(lat)
    return x, y


# --------------------------------------------------------------------------
# Polygons


def _ring_array(coords, what: str) -> np.ndarray:
    ring = as_points(coords)
    if not np.all(np.isfinite(ring)):
        raise GeometryError(f"{what}: non-finite vertex")
    if len(ring) > 1 and np.array_equal(ring[0], ring[-1]):
        ring = ring[:-1]
    if len(ring) < 3:
        raise GeometryError(f"{what}: a ring needs at least 3 distinct vertices")
    return ring


def _signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


@dataclass(frozen=True, eq=False)
class Polygon:
    """Simple polygon with optional holes.

    Rings are stored open (the closing vertex is dropped on construction).
    Validity (no self-intersection, positive exterior area) is checked with
    shapely.
    """

    exterior: np.ndarray
    holes: tuple[np.ndarray, ...] = ()
    _bbox: tuple[float, float, float, float] = field(init=False, repr=False)

    def __post_init__(self):
        ext = _ring_array(self.exterior, "exterior ring")
        holes = tuple(_ring_array(h, f"interior ring {k}") for k, h in enumerate(self.holes))
        if abs(_signed_area(ext)) <= 0.0:
            raise GeometryError("exterior ring has zero area")
        ext.flags.writeable = False
        for h in holes:
            h.flags.writeable = False
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", holes)
        if not self.to_shapely().is_valid:
            reason = shapely.is_valid_reason(self.to_shapely())
            raise GeometryError(f"invalid polygon: {reason}")
        lo = ext.min(axis=0)
        hi = ext.max(axis=0)
        object.__setattr__(self, "_bbox", (float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])))

    @classmethod
    def box(cls, xmin: float, ymin: float, xmax: float, ymax: float) -> "Polygon":
        return cls(np.array([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]], dtype=float))

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return self._bbox

    @property
    def area(self) -> float:
        return abs(_signed_area(self.exterior)) - sum(abs(_signed_area(h)) for h in self.holes)

    def to_shapely(self) -> shapely.Polygon:
        return shapely.Polygon(self.exterior, [h for h in self.holes])

    def _eps(self) -> float:
        xmin, ymin, xmax, ymax = self._bbox
        return 1e-9 * max(1.0, xmax - xmin, ymax - ymin)

    def contains(self, x, y) -> np.ndarray:
        """Closed containment test (boundary counts as inside), vectorised.

        Even-odd ray casting over all rings, plus an explicit distance-to-edge
        check so that points on an edge are always reported inside.
        """
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        inside = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        on_edge = np.zeros_like(inside)
        eps = self._eps()
        for ring in (self.exterior, *self.holes):
            xi, yi = ring[:, 0], ring[:, 1]
            xj, yj = np.roll(xi, 1), np.roll(yi, 1)
            for a in range(len(ring)):
                x1, y1, x2, y2 = xi[a], yi[a], xj[a], yj[a]
                straddle = (y1 > y) != (y2 > y)
                if y2 != y1:
                    xcross = (x2 - x1) * (y - y1) / (y2 - y1) + x1
                    inside ^= straddle & (x < xcross)
                # distance from point to the segment
                ex, ey = x2 - x1, y2 - y1
                seg2 = ex * ex + ey * ey
                t = np.clip(((x - x1) * ex + (y - y1) * ey) / seg2, 0.0, 1.0) if seg2 > 0 else 0.0
                dx = x - (x1 + t * ex)
                dy = y - (y1 + t * ey)
                on_edge |= dx * dx + dy * dy <= eps * eps
        return inside | on_edge

    def contains_point(self, loc) -> bool:
        loc = as_location(loc)
        xmin, ymin, xmax, ymax = self._bbox
        eps = self._eps()
        if not (xmin - eps <= loc.x <= xmax + eps and ymin - eps <= loc.y <= ymax + eps):
            return False
        return bool(self.contains(loc.x, loc.y))


# --------------------------------------------------------------------------
# Tessellations


@dataclass(frozen=True, eq=False)
class Tessellation:
    """Named, non-overlapping polygonal regions.

    Regions are kept sorted by id; that order is the boundary tie-break
    order (a point on a shared edge belongs to the smallest id).
    """

    regions: tuple[tuple[str, Polygon], ...]
    overlap_tolerance: float | None = None
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self):
        regions = tuple(sorted(((str(rid), poly) for rid, poly in self.regions), key=lambda r: r[0]))
        if not regions:
            raise GeometryError("tessellation has no regions")
        ids = [rid for rid, _ in regions]
        dupes = sorted(rid for rid, c in Counter(ids).items() if c > 1)
        if dupes:
            raise GeometryError(f"duplicate region_id(s): {', '.join(dupes)}")
        object.__setattr__(self, "regions", regions)
        total = sum(poly.area for _, poly in regions)
        tol = self.overlap_tolerance if self.overlap_tolerance is not None else 1e-9 * total
        self._check_overlaps(tol)

    def _check_overlaps(self, tol: float) -> None:
        shapes = [poly.to_shapely() for _, poly in self.regions]
        tree = STRtree(shapes)
        left, right = tree.query(shapes, predicate="intersects")
        for i, j in zip(left, right):
            if i >= j:
                continue
            overlap = shapes[i].intersection(shapes[j]).area
            if overlap >= tol:
                raise GeometryError(
                    f"regions {self.regions[i][0]!r} and {self.regions[j][0]!r} overlap (area {overlap:g})"
                )

    @property
    def ids(self) -> list[str]:
        return [rid for rid, _ in self.regions]

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        boxes = np.array([poly.bbox for _, poly in self.regions])
        return (float(boxes[:, 0].min()), float(boxes[:, 1].min()), float(boxes[:, 2].max()), float(boxes[:, 3].max()))

    @property
    def area(self) -> float:
        return sum(poly.area for _, poly in self.regions)

    def __len__(self):
        return len(self.regions)


def point_in_region(loc, tess: Tessellation) -> str | None:
    """Id of the region containing ``loc``, or None when it is outside every region."""
    loc = as_location(loc)
    for rid, poly in tess.regions:
        if poly.contains_point(loc):
            return rid
    return None


def assign_points(points, tess: Tessellation) -> np.ndarray:
    """Vectorised :func:`point_in_region`: region index per point, -1 outside."""
    pts = as_points(points)
    labels = np.full(len(pts), -1, dtype=np.int64)
    for r, (_, poly) in enumerate(tess.regions):
        xmin, ymin, xmax, ymax = poly.bbox
        eps = poly._eps()
        cand = (
            (labels == -1)
            & (pts[:, 0] >= xmin - eps)
            & (pts[:, 0] <= xmax + eps)
            & (pts[:, 1] >= ymin - eps)
            & (pts[:, 1] <= ymax + eps)
        )
        idx = np.flatnonzero(cand)
        if idx.size:
            hit = poly.contains(pts[idx, 0], pts[idx, 1])
            labels[idx[hit]] = r
    return labels


def grid_tessellation(bbox: Sequence[float], nx: int, ny: int, prefix: str = "R") -> Tessellation:
    """Rectangular nx-by-ny tessellation of ``bbox``; ids sort in row-major order from the south-west."""
    xmin, ymin, xmax, ymax = map(float, bbox)
    xs = np.linspace(xmin, xmax, nx + 1)
    ys = np.linspace(ymin, ymax, ny + 1)
    width = len(str(nx * ny - 1))
    regions = []
    for j in range(ny):
        for i in range(nx):
            rid = f"{prefix}{j * nx + i:0{width}d}"
            regions.append((rid, Polygon.box(xs[i], ys[j], xs[i + 1], ys[j + 1])))
    return Tessellation(tuple(regions))


# --------------------------------------------------------------------------
# Distance functions


@dataclass(frozen=True, eq=False)
class DistanceFunction:
    """One of ``euclidean``, ``saturated`` (clamped at ``tau`` km) or
    ``population_weighted`` (Euclidean length times the mean population
    density sampled at ``samples`` points along the segment)."""

    kind: str = "euclidean"
    tau: float | None = None
    density: "SpatialDensity | None" = None
    samples: int = 32

    def __post_init__(self):
        if self.kind not in ("euclidean", "saturated", "population_weighted"):
            raise SchemaError(f"unknown distance kind {self.kind!r}")
        if self.kind == "saturated" and (self.tau is None or not self.tau > 0):
            raise SchemaError("saturated distance needs tau > 0")
        if self.kind == "population_weighted":
            if self.density is None:
                raise SchemaError("population_weighted distance needs a density")
            if self.samples < 1:
                raise SchemaError("population_weighted distance needs samples >= 1")
            from .density import DeltaSet, total_mass

            mass = total_mass(self.density)
            if not (np.isfinite(mass) and mass > 0):
                raise InvalidDensityError("population density is not normalizable (mass must be finite and > 0)")
            if isinstance(self.density, DeltaSet):
                raise InvalidDensityError("population density must be pointwise evaluable (grid or gmm)")

    @classmethod
    def parse(cls, text: str, load_density=None) -> "DistanceFunction":
        """Parse ``euclidean``, ``saturated:<tau>`` or ``population:<density-file>:<samples>``."""
        head, _, rest = text.partition(":")
        if head == "euclidean" and not rest:
            return cls("euclidean")
        if head == "saturated":
            try:
                return cls("saturated", tau=float(rest))
            except ValueError:
                raise SchemaError(f"bad saturation distance {text!r}") from None
        if head == "population":
            path, _, samples = rest.rpartition(":")
            if not path or load_density is None:
                raise SchemaError(f"bad population distance {text!r}")
            try:
                n = int(samples)
            except ValueError:
                raise SchemaError(f"bad sample count in {text!r}") from None
            return cls("population_weighted", density=load_density(path), samples=n)
        raise SchemaError(f"unknown distance {text!r}")

    def describe(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "saturated":
            out["tau"] = self.tau
        if self.kind == "population_weighted":
            out["samples"] = self.samples
        return out

    def __call__(self, a, b) -> np.ndarray:
        """Distances between paired rows of ``a`` and ``b`` (arrays of shape (n, 2))."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        diff = a - b
        eu = np.hypot(diff[..., 0], diff[..., 1])
        if self.kind == "euclidean":
            return eu
        if self.kind == "saturated":
            return np.minimum(eu, self.tau)
        from .density import density_at

        # midpoints of `samples` equal sub-segments; symmetric under a <-> b
        ts = (np.arange(self.samples) + 0.5) / self.samples
        a2 = np.atleast_2d(a)
        b2 = np.atleast_2d(b)
        pts = a2[:, None, :] + ts[None, :, None] * (b2 - a2)[:, None, :]
        dens = density_at(self.density, pts.reshape(-1, 2)).reshape(pts.shape[:2])
        out = eu * dens.mean(axis=1).reshape(np.shape(eu))
        return out


def distance(D: DistanceFunction, a, b) -> float:
    """Scalar distance between two locations."""
    a = as_location(a).as_array()
    b = as_location(b).as_array()
    return float(np.asarray(D(a[None, :], b[None, :]))[0])

