"""Origin location of a speaker from a residence history.

A :class:`LocationHistory` is a sequence of residence episodes covering the
life span from age 0. From it we derive

* the place at a given age (:func:`density_at_time`),
* a time-integrated origin density where each episode is weighted by the
  age-dependent accent susceptibility (:func:`origin_density`),
* a single averaged location that is additionally weighted by a local
  accent-strength field (:func:`origin_point`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .density import (
    DEFAULT_RESOLUTION,
    DeltaSet,
    GaussianMixture,
    Grid,
    SpatialDensity,
    auto_bbox,
    density_at,
    mean,
    normalize,
    rasterize,
    resample,
)
from .errors import DegenerateDensityError, OutOfRangeError, SchemaError
from .spatial import Location


@dataclass(frozen=True, eq=False)
class Episode:
    start_age: float
    end_age: float
    place: SpatialDensity


@dataclass(frozen=True, eq=False)
class LocationHistory:
    """Contiguous residence episodes spanning ``[0, current_age]``."""

    episodes: tuple[Episode, ...]

    def __post_init__(self):
        eps = tuple(e if isinstance(e, Episode) else Episode(*e) for e in self.episodes)
        if not eps:
            raise SchemaError("location history has no episodes")
        if eps[0].start_age != 0:
            raise SchemaError(f"history must start at age 0, starts at {eps[0].start_age}")
        for k, e in enumerate(eps):
            if not (math.isfinite(e.start_age) and math.isfinite(e.end_age)) or not e.start_age < e.end_age:
                raise SchemaError(f"episode {k}: need start_age < end_age, got [{e.start_age}, {e.end_age}]")
            if k and e.start_age != eps[k - 1].end_age:
                kind = "gap" if e.start_age > eps[k - 1].end_age else "overlap"
                raise SchemaError(f"episode {k}: {kind} at age {eps[k - 1].end_age}")
        object.__setattr__(self, "episodes", eps)

    @classmethod
    def single(cls, place: SpatialDensity, age: float) -> "LocationHistory":
        return cls((Episode(0.0, float(age), place),))

    @property
    def current_age(self) -> float:
        return self.episodes[-1].end_age


@dataclass(frozen=True)
class SusceptibilityWeight:
    """Age-dependent weight w(t).

    ``uniform``: 1 everywhere. ``window``: 1 on ``[a_min, a_max]``, else 0.
    ``piecewise``: linear interpolation between ``breakpoints`` (age, weight),
    held constant beyond the first and last breakpoint.
    """

    kind: str = "window"
    a_min: float = 4.0
    a_max: float = 18.0
    breakpoints: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind not in ("uniform", "window", "piecewise"):
            raise SchemaError(f"unknown susceptibility kind {self.kind!r}")
        if self.kind == "window" and not self.a_min < self.a_max:
            raise SchemaError("window needs a_min < a_max")
        if self.kind == "piecewise":
            bp = tuple((float(a), float(w)) for a, w in self.breakpoints)
            if not bp:
                raise SchemaError("piecewise weight needs at least one breakpoint")
            ages = [a for a, _ in bp]
            if any(b <= a for a, b in zip(ages, ages[1:])):
                raise SchemaError("breakpoint ages must be strictly increasing")
            if any(w < 0 or not math.isfinite(w) for _, w in bp):
                raise SchemaError("breakpoint weights must be finite and non-negative")
            object.__setattr__(self, "breakpoints", bp)

    @classmethod
    def uniform(cls) -> "SusceptibilityWeight":
        return cls("uniform")

    @classmethod
    def window(cls, a_min: float, a_max: float) -> "SusceptibilityWeight":
        return cls("window", a_min, a_max)

    @classmethod
    def piecewise(cls, breakpoints: Sequence[tuple[float, float]]) -> "SusceptibilityWeight":
        return cls("piecewise", breakpoints=tuple(breakpoints))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "uniform":
            return np.ones_like(t)
        if self.kind == "window":
            return ((t >= self.a_min) & (t <= self.a_max)).astype(float)
        ages, ws = zip(*self.breakpoints)
        return np.interp(t, ages, ws)

    def integral(self, a: float, b: float) -> float:
        """Exact integral of w over [a, b]."""
        if b <= a:
            return 0.0
        if self.kind == "uniform":
            return b - a
        if self.kind == "window":
            return max(0.0, min(b, self.a_max) - max(a, self.a_min))
        knots = np.array([a, *[t for t, _ in self.breakpoints if a < t < b], b])
        vals = self(knots)
        return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(knots)))


@dataclass(frozen=True, eq=False)
class AccentStrengthField:
    """Non-negative field v(x) on a raster; ``fill`` applies outside the raster.

    With ``values=None`` the field is the constant ``fill`` everywhere.
    """

    values: np.ndarray | None = None
    bbox: tuple[float, float, float, float] | None = None
    fill: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.fill) and self.fill >= 0):
            raise SchemaError("fill must be finite and non-negative")
        if self.values is not None:
            if self.bbox is None:
                raise SchemaError("accent strength raster needs a bbox")
            # Grid validates finiteness and non-negativity
            object.__setattr__(self, "_grid", Grid(self.bbox, self.values))

    @classmethod
    def uniform(cls, value: float = 1.0) -> "AccentStrengthField":
        return cls(None, None, value)

    @property
    def is_uniform(self) -> bool:
        return self.values is None

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.values is None:
            return np.full(pts.shape[:-1], self.fill)
        g = self._grid
        out = density_at(g, pts)
        flat = pts.reshape(-1, 2)
        outside = (
            (flat[:, 0] < g.bbox[0]) | (flat[:, 0] > g.bbox[2]) | (flat[:, 1] < g.bbox[1]) | (flat[:, 1] > g.bbox[3])
        ).reshape(out.shape)
        return np.where(outside, self.fill, out)


DEFAULT_SUSCEPTIBILITY = SusceptibilityWeight()


def episode_weights(h: LocationHistory, w: SusceptibilityWeight = DEFAULT_SUSCEPTIBILITY) -> np.ndarray:
    """Normalized per-episode mixture weights, proportional to the integral of w."""
    raw = np.array([w.integral(e.start_age, e.end_age) for e in h.episodes])
    total = raw.sum()
    if not total > 0:
        raise DegenerateDensityError("susceptibility weight integrates to zero over the history")
    return raw / total


def _merge_deltas(points: np.ndarray, weights: np.ndarray) -> DeltaSet:
    keep = weights > 0
    uniq, inv = np.unique(points[keep], axis=0, return_inverse=True)
    merged = np.zeros(len(uniq))
    np.add.at(merged, inv.reshape(-1), weights[keep])
    return DeltaSet(uniq, merged / merged.sum())


def origin_density(
    h: LocationHistory,
    w: SusceptibilityWeight = DEFAULT_SUSCEPTIBILITY,
    resolution=DEFAULT_RESOLUTION,
) -> SpatialDensity:
    """Time-integrated origin density: a mixture of the episode places.

    The result stays a delta set (or a mixture) when every place is one;
    mixed representations are combined on a common raster.
    """
    ew = episode_weights(h, w)
    places = [normalize(e.place) for e in h.episodes]
    if all(isinstance(p, DeltaSet) for p in places):
        pts = np.concatenate([p.points for p in places])
        wts = np.concatenate([c * p.weights for c, p in zip(ew, places)])
        return _merge_deltas(pts, wts)
    if all(isinstance(p, GaussianMixture) for p in places):
        keep = [k for k, c in enumerate(ew) if c > 0]
        return GaussianMixture(
            np.concatenate([places[k].means for k in keep]),
            np.concatenate([places[k].covs for k in keep]),
            np.concatenate([ew[k] * places[k].weights for k in keep]),
        )
    boxes = np.array([auto_bbox(p) for c, p in zip(ew, places) if c > 0])
    bbox = (boxes[:, 0].min(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].max())
    nx, ny = resolution
    acc = np.zeros((ny, nx))
    for c, p in zip(ew, places):
        if c > 0:
            acc += c * normalize(resample(p, bbox, nx, ny)).values
    return Grid(bbox, acc)


def _strength_moments(place: SpatialDensity, v: AccentStrengthField, resolution):
    """(integral of v p, integral of v p x) for one normalized place density."""
    if v.is_uniform:
        c = mean(place)
        return v.fill, v.fill * np.array([c.x, c.y])
    if isinstance(place, DeltaSet):
        pts, m = place.points, place.weights
    else:
        g = rasterize(place, resolution)
        pts, m = g.centers(), g.masses.ravel()
    vm = v(pts) * m
    return float(vm.sum()), vm @ pts


def origin_point(
    h: LocationHistory,
    w: SusceptibilityWeight = DEFAULT_SUSCEPTIBILITY,
    v: AccentStrengthField | None = None,
    resolution=DEFAULT_RESOLUTION,
) -> Location:
    """Susceptibility- and accent-strength-weighted centroid of the history.

    The double integral of w v p x is divided by the double integral of w v p,
    so the result is a location.
    """
    v = v if v is not None else AccentStrengthField.uniform()
    ew = episode_weights(h, w)
    num = np.zeros(2)
    den = 0.0
    for c, e in zip(ew, h.episodes):
        if c == 0:
            continue
        m0, m1 = _strength_moments(normalize(e.place), v, resolution)
        num += c * m1
        den += c * m0
    if not den > 0:
        raise DegenerateDensityError("accent strength is zero wherever the origin density has mass")
    return Location(float(num[0] / den), float(num[1] / den))


def density_at_time(h: LocationHistory, t: float) -> SpatialDensity:
    """Place occupied at age ``t``; a boundary age belongs to the later episode."""
    if not (0 <= t <= h.current_age):
        raise OutOfRangeError(f"age {t} outside the history span [0, {h.current_age}]")
    for e in h.episodes:
        if e.start_age <= t < e.end_age:
            return e.place
    return h.episodes[-1].place

