"""Synthetic cohorts, a baseline Bayesian locator and participation decay.

The population prior is an isotropic Gaussian mixture of cities. Speakers
get a residence history (birthplace drawn from the prior, a possible move at
every decade of life), and an 8-dimensional accent feature vector: a fixed
sinusoidal embedding of their origin mean plus Gaussian noise. The baseline
locator inverts the embedding with a grid posterior against the prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .density import (
    DEFAULT_RESOLUTION,
    DeltaSet,
    GaussianMixture,
    Grid,
    auto_bbox,
    mean,
    posterior,
    sample,
)
from .errors import DomainError, InsufficientDataError, SchemaError
from .origin import DEFAULT_SUSCEPTIBILITY, Episode, LocationHistory, SusceptibilityWeight, origin_density
from .spatial import Location, as_location

MINUTES_PER_DAY = 24 * 60


@dataclass(frozen=True)
class City:
    center: Location
    spread: float
    weight: float

    def __post_init__(self):
        object.__setattr__(self, "center", as_location(self.center))
        if not (self.spread > 0 and math.isfinite(self.spread)):
            raise SchemaError(f"city spread must be > 0, got {self.spread}")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise SchemaError(f"city population weight must be > 0, got {self.weight}")


# Ten synthetic cities in a 300 x 300 km country; weights are relative populations.
DEFAULT_CITIES = (
    City(Location(120.0, 190.0), 8.0, 8.7),
    City(Location(95.0, 140.0), 7.0, 6.5),
    City(Location(80.0, 165.0), 6.0, 5.5),
    City(Location(140.0, 165.0), 6.0, 3.6),
    City(Location(165.0, 95.0), 7.0, 2.3),
    City(Location(240.0, 260.0), 9.0, 2.3),
    City(Location(215.0, 150.0), 8.0, 1.8),
    City(Location(200.0, 35.0), 10.0, 1.2),
    City(Location(60.0, 60.0), 12.0, 1.0),
    City(Location(250.0, 195.0), 8.0, 1.6),
)


@dataclass(frozen=True, eq=False)
class PopulationModel:
    cities: tuple[City, ...]

    @property
    def prior(self) -> GaussianMixture:
        w = np.array([c.weight for c in self.cities])
        return GaussianMixture.isotropic(
            [(c.center.x, c.center.y) for c in self.cities],
            [c.spread for c in self.cities],
            w / w.sum(),
        )

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return auto_bbox(self.prior)


def build_population(config) -> PopulationModel:
    """Population from a list of cities or a ``{"cities": [...]}`` mapping.

    City records are :class:`City` objects or mappings with ``center``,
    ``spread`` and ``weight`` (alias ``population_weight``).
    """
    cities = config.get("cities") if isinstance(config, dict) else config
    if not cities:
        raise SchemaError("population config needs at least one city")
    out = []
    for k, c in enumerate(cities):
        if isinstance(c, City):
            out.append(c)
            continue
        try:
            weight = c["weight"] if "weight" in c else c["population_weight"]
            out.append(City(as_location(c["center"]), float(c["spread"]), float(weight)))
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"city {k}: {exc}") from None
    return PopulationModel(tuple(out))


@dataclass(frozen=True)
class FeatureMap:
    """Sinusoidal location embedding: sin/cos of 2*pi*x/L and 2*pi*y/L per wavelength L (km)."""

    wavelengths: tuple[float, ...] = (800.0, 250.0)

    @property
    def dim(self) -> int:
        return 4 * len(self.wavelengths)

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        cols = []
        for lam in self.wavelengths:
            ax = 2 * math.pi * pts[..., 0] / lam
            ay = 2 * math.pi * pts[..., 1] / lam
            cols += [np.sin(ax), np.cos(ax), np.sin(ay), np.cos(ay)]
        return np.stack(cols, axis=-1)


@dataclass(frozen=True, eq=False)
class Speaker:
    speaker_id: str
    age: float
    history: LocationHistory
    features: np.ndarray
    true_origin: DeltaSet | GaussianMixture | Grid

    def __post_init__(self):
        if not np.all(np.isfinite(self.features)):
            raise SchemaError(f"speaker {self.speaker_id}: non-finite features")


def _simulate_one(
    k: int,
    prior: GaussianMixture,
    move_prob: float,
    sigma_f: float,
    seed: int,
    feature_map: FeatureMap,
    susceptibility: SusceptibilityWeight,
) -> Speaker:
    rng = np.random.default_rng(np.random.SeedSequence([seed, k]))
    age = float(rng.uniform(18.0, 80.0))
    place = sample(prior, 1, rng)[0]
    episodes = []
    start = 0.0
    decade = 10.0
    while decade < age:
        if rng.random() < move_prob:
            episodes.append(Episode(start, decade, DeltaSet.single(place)))
            place = sample(prior, 1, rng)[0]
            start = decade
        decade += 10.0
    episodes.append(Episode(start, age, DeltaSet.single(place)))
    history = LocationHistory(tuple(episodes))
    origin = origin_density(history, susceptibility)
    m = mean(origin)
    noise = rng.standard_normal(feature_map.dim)
    features = feature_map(np.array([m.x, m.y])) + sigma_f * noise
    return Speaker(f"spk{k:05d}", age, history, features, origin)


def simulate_speakers(
    pop: PopulationModel,
    n: int,
    move_prob: float,
    seed: int,
    sigma_f: float = 0.5,
    feature_map: FeatureMap = FeatureMap(),
    susceptibility: SusceptibilityWeight = DEFAULT_SUSCEPTIBILITY,
) -> list[Speaker]:
    """Simulate ``n`` speakers; speaker ``k`` uses its own seed ``(seed, k)``."""
    if n < 1:
        raise SchemaError("need at least one speaker")
    if not 0 <= move_prob <= 1:
        raise SchemaError(f"move_prob must be in [0, 1], got {move_prob}")
    if sigma_f < 0:
        raise SchemaError("sigma_f must be >= 0")
    prior = pop.prior
    return [_simulate_one(k, prior, move_prob, sigma_f, seed, feature_map, susceptibility) for k in range(n)]


def locator_likelihood(
    features,
    bbox,
    sigma_f: float,
    feature_map: FeatureMap = FeatureMap(),
    resolution=DEFAULT_RESOLUTION,
) -> Grid:
    """Gaussian feature likelihood on a grid, scaled so its maximum is 1."""
    if not sigma_f > 0:
        raise SchemaError("the locator needs sigma_f > 0")
    nx, ny = resolution
    xmin, ymin, xmax, ymax = bbox
    xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    X, Y = np.meshgrid(xs, ys)
    phi = feature_map(np.stack([X, Y], axis=-1))
    loglik = -np.sum((phi - np.asarray(features, dtype=float)) ** 2, axis=-1) / (2 * sigma_f**2)
    return Grid(bbox, np.exp(loglik - loglik.max()))


def baseline_locator(
    features,
    pop: PopulationModel,
    sigma_f: float,
    feature_map: FeatureMap = FeatureMap(),
    resolution=DEFAULT_RESOLUTION,
) -> Grid:
    """Grid posterior over origin given accent features, on the prior's bbox."""
    lik = locator_likelihood(features, pop.bbox, sigma_f, feature_map, resolution)
    return posterior(lik, pop.prior)


# --------------------------------------------------------------------------
# participation decay


@dataclass(frozen=True, eq=False)
class ParticipationSeries:
    days: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        days = np.asarray(self.days, dtype=float).reshape(-1)
        counts = np.asarray(self.counts, dtype=float).reshape(-1)
        if len(days) != len(counts):
            raise SchemaError("days and counts differ in length")
        if not (np.all(np.isfinite(days)) and np.all(np.isfinite(counts))):
            raise SchemaError("series has non-finite entries")
        if np.any(counts < 0):
            raise SchemaError("counts must be non-negative")
        if np.any(np.diff(days) <= 0):
            raise SchemaError("day indices must be strictly increasing")
        object.__setattr__(self, "days", days)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "ParticipationSeries":
        pairs = list(pairs)
        if not pairs:
            return cls(np.zeros(0), np.zeros(0))
        days, counts = zip(*pairs)
        return cls(np.array(days), np.array(counts))


@dataclass(frozen=True)
class DecayFit:
    R0: float
    d: float
    slope: float
    intercept: float
    slope_stderr: float
    n_points: int


def fit_decay(series: ParticipationSeries) -> DecayFit:
    """Least-squares line through (day, ln count), zero-count days excluded.

    The daily decay fraction is ``d = 1 - exp(slope)`` and the initial daily
    rate ``R0 = exp(intercept)``.
    """
    pos = series.counts > 0
    n = int(pos.sum())
    if n < 3:
        raise InsufficientDataError(f"need at least 3 positive counts, got {n}")
    t = series.days[pos]
    y = np.log(series.counts[pos])
    A = np.column_stack([t, np.ones_like(t)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, intercept])
    s2 = float(resid @ resid) / (n - 2)
    se = math.sqrt(s2 / float(((t - t.mean()) ** 2).sum()))
    return DecayFit(
        R0=math.exp(intercept),
        d=-math.expm1(slope),
        slope=float(slope),
        intercept=float(intercept),
        slope_stderr=se,
        n_points=n,
    )


def generate_series(
    R0: float,
    d: float,
    n_days: int,
    noise_sigma: float = 0.0,
    seed: int | None = None,
) -> ParticipationSeries:
    """Counts ``R0 * (1 - d)**k`` for k = 0..n_days-1, optionally times lognormal noise."""
    k = np.arange(n_days, dtype=float)
    counts = R0 * (1.0 - d) ** k
    if noise_sigma > 0:
        if seed is None:
            raise SchemaError("noisy series need an explicit seed")
        counts = counts * np.exp(noise_sigma * np.random.default_rng(seed).standard_normal(n_days))
    return ParticipationSeries(k, counts)


@dataclass(frozen=True)
class TotalPrediction:
    paper_formula: float
    geometric_series: float

    def as_dict(self) -> dict:
        return {
            "paper_formula": {"value": self.paper_formula, "formula": "N*R0/(1-d)"},
            "geometric_series": {"value": self.geometric_series, "formula": "N*R0/d"},
        }


def predict_total(R0_per_minute: float, d: float, N: float = MINUTES_PER_DAY) -> TotalPrediction:
    """Total recordings attributed to one event.

    Reports both ``N*R0/(1-d)`` as published and the geometric-series total
    ``N*R0/d`` (the sum of ``N*R0*(1-d)**k`` over k >= 0); the two agree only at d = 0.5.
    """
    if not 0 < d < 1:
        raise DomainError(f"decay fraction must be in (0, 1), got {d}")
    return TotalPrediction(N * R0_per_minute / (1 - d), N * R0_per_minute / d)


@dataclass
class SimConfig:
    cities: list = field(default_factory=lambda: list(DEFAULT_CITIES))
    n_speakers: int = 200
    move_prob: float = 0.2
    sigma_f: float = 0.5
    seed: int | None = None
    locator_grid: tuple[int, int] = (64, 64)
    wavelengths: tuple[float, ...] = FeatureMap().wavelengths
    tessellation: object = None

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        if not isinstance(raw, dict):
            raise SchemaError("simulation config must be a JSON object")
        known = {"cities", "n_speakers", "move_prob", "sigma_f", "seed", "locator_grid", "wavelengths", "tessellation"}
        unknown = set(raw) - known
        if unknown:
            raise SchemaError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls(**raw)
        if cfg.seed is None:
            raise SchemaError("simulation config needs an explicit seed")
        try:
            cfg.n_speakers = int(cfg.n_speakers)
            cfg.move_prob = float(cfg.move_prob)
            cfg.sigma_f = float(cfg.sigma_f)
            cfg.seed = int(cfg.seed)
            cfg.locator_grid = tuple(int(v) for v in cfg.locator_grid)
            cfg.wavelengths = tuple(float(v) for v in cfg.wavelengths)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"bad simulation config value: {exc}") from None
        if len(cfg.locator_grid) != 2 or min(cfg.locator_grid) < 1:
            raise SchemaError("locator_grid must be [nx, ny] with positive entries")
        return cfg
