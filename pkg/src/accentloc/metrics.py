"""Evaluation metrics for accent location.

Local metrics work on region distributions (cross entropy, classification),
distance-sensitive metrics on point estimates (regression error) or on full
densities (expected distance between independent draws, ``E_dist``).
Logarithms are natural, so entropies are in nats.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .density import (
    DEFAULT_RESOLUTION,
    DEFAULT_SUBCELLS,
    DeltaSet,
    DiscreteDistribution,
    GaussianMixture,
    Grid,
    SpatialDensity,
    aggregate,
    mean,
    sample,
)
from .errors import AccentLocError, FamilyMismatchError, MethodError, SchemaError
from .spatial import DistanceFunction, Location, Tessellation, as_location

EUCLIDEAN = DistanceFunction("euclidean")
OUTSIDE = "__outside__"


def family_of(obj) -> str:
    if isinstance(obj, DiscreteDistribution):
        return "discrete"
    if isinstance(obj, (DeltaSet, Grid, GaussianMixture)):
        return "density"
    if isinstance(obj, Location):
        return "point"
    raise SchemaError(f"unsupported trial member {type(obj).__name__}")


@dataclass(frozen=True, eq=False)
class Trial:
    trial_id: str
    reference: DiscreteDistribution | SpatialDensity | Location
    hypothesis: DiscreteDistribution | SpatialDensity | Location

    def __post_init__(self):
        ref, hyp = family_of(self.reference), family_of(self.hypothesis)
        if ref != hyp:
            raise FamilyMismatchError(f"trial {self.trial_id!r}: reference is {ref} but hypothesis is {hyp}")

    @property
    def family(self) -> str:
        return family_of(self.reference)


# --------------------------------------------------------------------------
# local metrics


def _categories(d: DiscreteDistribution):
    yield from d.entries.items()
    yield OUTSIDE, d.outside_mass


def trial_cross_entropy(ref: DiscreteDistribution, hyp: DiscreteDistribution, floor: float | None = None) -> float:
    """Cross entropy of one trial; the outside mass counts as one more category.

    A category with positive reference mass and zero hypothesis mass gives
    ``inf`` unless ``floor`` is set.
    """
    if ref.region_ids != hyp.region_ids:
        raise SchemaError("reference and hypothesis are over different region sets")
    terms = []
    for (rid, p), (_, q) in zip(_categories(ref), _categories(hyp)):
        if p == 0:
            continue
        if floor is not None:
            q = max(q, floor)
        if q == 0:
            return math.inf
        terms.append(-p * math.log(q))
    return math.fsum(terms)


def entropy(d: DiscreteDistribution) -> float:
    return math.fsum(-p * math.log(p) for _, p in _categories(d) if p > 0)


def prior_entropy(pi: DiscreteDistribution) -> float:
    """Entropy of a region prior, the cross entropy reached by answering the prior on prior-distributed trials."""
    return entropy(pi)


def _check_discrete(trials: Sequence[Trial]) -> tuple[str, ...]:
    if not trials:
        raise SchemaError("no trials")
    ids = None
    for t in trials:
        if t.family != "discrete":
            raise FamilyMismatchError(f"trial {t.trial_id!r} is not a discrete trial")
        for d in (t.reference, t.hypothesis):
            if ids is None:
                ids = d.region_ids
            elif d.region_ids != ids:
                raise SchemaError(f"trial {t.trial_id!r} uses a different region set")
    return ids


def cross_entropy(trials: Sequence[Trial], floor: float | None = None) -> float:
    """Trial-averaged cross entropy between reference and hypothesis region distributions (nats)."""
    _check_discrete(trials)
    vals = [trial_cross_entropy(t.reference, t.hypothesis, floor) for t in trials]
    if any(math.isinf(v) for v in vals):
        return math.inf
    return math.fsum(vals) / len(vals)


def classify(d: DiscreteDistribution) -> str:
    """Region with maximum probability; ties go to the smallest id."""
    if not d.entries:
        raise SchemaError("cannot classify an empty distribution")
    best = max(d.entries.values())
    return min(rid for rid, p in d.entries.items() if p == best)


def classification_accuracy(trials: Sequence[Trial]) -> float:
    _check_discrete(trials)
    hits = sum(classify(t.hypothesis) == classify(t.reference) for t in trials)
    return hits / len(trials)


# --------------------------------------------------------------------------
# distance-sensitive metrics


def regression_error(trials: Sequence[Trial], D: DistanceFunction = EUCLIDEAN) -> float:
    """Mean distance between reference and hypothesis point estimates (km)."""
    if not trials:
        raise SchemaError("no trials")
    for t in trials:
        if t.family != "point":
            raise FamilyMismatchError(f"trial {t.trial_id!r} is not a point trial")
    a = np.array([[t.reference.x, t.reference.y] for t in trials])
    b = np.array([[t.hypothesis.x, t.hypothesis.y] for t in trials])
    return math.fsum(np.asarray(D(a, b)).tolist()) / len(trials)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    method: str
    n: int


def _quadrature(hyp: Grid, ref: Grid, D: DistanceFunction, chunk: int = 2_000_000) -> float:
    mh = hyp.masses.ravel()
    mr = ref.masses.ravel()
    ph, pr = hyp.centers()[mh > 0], ref.centers()[mr > 0]
    mh, mr = mh[mh > 0] / mh.sum(), mr[mr > 0] / mr.sum()
    rows = max(1, chunk // len(pr))
    total = 0.0
    for k in range(0, len(ph), rows):
        a = ph[k:k + rows]
        dist = np.asarray(D(np.repeat(a, len(pr), axis=0), np.tile(pr, (len(a), 1)))).reshape(len(a), len(pr))
        total += float(mh[k:k + rows] @ dist @ mr)
    return total


def dist_metric(
    hyp: SpatialDensity,
    ref: SpatialDensity,
    D: DistanceFunction = EUCLIDEAN,
    method: str = "auto",
    n: int = 100_000,
    seed: int | np.random.SeedSequence | None = None,
) -> Estimate:
    """Expected distance between independent draws from ``hyp`` and ``ref``.

    ``quadrature`` (grids only) is the double sum over cell centres.
    ``monte_carlo`` averages D over ``n`` independent pairs and reports the
    standard error. ``auto`` picks quadrature for two grids.
    """
    both_grids = isinstance(hyp, Grid) and isinstance(ref, Grid)
    if method == "auto":
        method = "quadrature" if both_grids else "monte_carlo"
    if method == "quadrature":
        if not both_grids:
            raise MethodError("quadrature needs two grid densities")
        return Estimate(_quadrature(hyp, ref, D), 0.0, "quadrature", 0)
    if method != "monte_carlo":
        raise MethodError(f"unknown method {method!r}")
    if seed is None:
        raise SchemaError("monte carlo estimation needs an explicit seed")
    if n < 2:
        raise SchemaError("monte carlo needs n >= 2")
    rng = np.random.default_rng(seed)
    x = sample(hyp, n, rng)
    y = sample(ref, n, rng)
    d = np.asarray(D(x, y), dtype=float)
    return Estimate(float(d.mean()), float(d.std(ddof=1) / math.sqrt(n)), "monte_carlo", n)


def trial_seed(seed: int, trial_id: str) -> np.random.SeedSequence:
    """Per-trial seed that depends only on the run seed and the trial id."""
    return np.random.SeedSequence([int(seed), zlib.crc32(trial_id.encode("utf-8"))])


# --------------------------------------------------------------------------
# full run


@dataclass
class ScoreConfig:
    distance: DistanceFunction = EUCLIDEAN
    floor: float | None = None
    method: str = "auto"
    mc_samples: int = 100_000
    seed: int | None = None
    tessellation: Tessellation | None = None
    prior: SpatialDensity | DiscreteDistribution | None = None
    resolution: tuple[int, int] = DEFAULT_RESOLUTION
    subcells: int = DEFAULT_SUBCELLS

    def describe(self) -> dict:
        return {
            "distance": self.distance.describe(),
            "floor": self.floor,
            "log_base": "e",
            "method": self.method,
            "mc_samples": self.mc_samples,
            "seed": self.seed,
            "tessellation_regions": len(self.tessellation) if self.tessellation is not None else None,
            "prior": family_of(self.prior) if self.prior is not None else None,
            "grid": list(self.resolution),
            "subcells": self.subcells,
        }


@dataclass
class MetricReport:
    metrics: dict
    trials: list
    n_trials: int
    family: str
    config: dict
    inputs: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n_trials": self.n_trials,
            "metrics": self.metrics,
            "config": self.config,
            "inputs": self.inputs,
            "trials": self.trials,
        }


def _mean_or_none(rows: list[dict], key: str):
    vals = [r.get(key) for r in rows]
    if any(v is None for v in vals):
        return None
    if any(math.isinf(v) for v in vals):
        return math.inf
    return math.fsum(vals) / len(vals)


def _guarded(row: dict, key: str, fn):
    try:
        row[key] = fn()
    except AccentLocError as exc:
        row[key] = None
        row.setdefault("errors", {})[key] = f"{type(exc).__name__}: {exc}"


def _score_discrete(trials, cfg: ScoreConfig, prior: DiscreteDistribution | None):
    rows = []
    for t in trials:
        row = {"trial_id": t.trial_id}
        _guarded(row, "cross_entropy", lambda: trial_cross_entropy(t.reference, t.hypothesis, cfg.floor))
        _guarded(row, "reference_entropy", lambda: entropy(t.reference))
        _guarded(row, "correct", lambda: float(classify(t.hypothesis) == classify(t.reference)))
        if prior is not None:
            _guarded(row, "prior_cross_entropy", lambda: trial_cross_entropy(t.reference, prior, cfg.floor))
        rows.append(row)
    metrics = {
        "cross_entropy": _mean_or_none(rows, "cross_entropy"),
        "reference_entropy": _mean_or_none(rows, "reference_entropy"),
        "classification_accuracy": _mean_or_none(rows, "correct"),
    }
    if prior is not None:
        metrics["prior_cross_entropy"] = _mean_or_none(rows, "prior_cross_entropy")
        metrics["prior_entropy"] = prior_entropy(prior)
    return metrics, rows


def _score_points(trials, cfg: ScoreConfig):
    rows = []
    for t in trials:
        row = {"trial_id": t.trial_id}
        _guarded(row, "distance", lambda: regression_error([t], cfg.distance))
        rows.append(row)
    return {"regression_error": _mean_or_none(rows, "distance")}, rows


def _point(loc: Location) -> list[float]:
    return [loc.x, loc.y]


def _score_densities(trials, cfg: ScoreConfig):
    tess = cfg.tessellation
    prior = cfg.prior
    prior_regions = None
    prior_mean = None
    if prior is not None and not isinstance(prior, DiscreteDistribution):
        prior_mean = mean(prior)
        if tess is not None:
            prior_regions = aggregate(prior, tess, subcells=cfg.subcells, resolution=cfg.resolution)
    elif isinstance(prior, DiscreteDistribution):
        prior_regions = prior
    needs_seed = cfg.method == "monte_carlo" or (
        cfg.method == "auto" and any(not (isinstance(t.reference, Grid) and isinstance(t.hypothesis, Grid)) for t in trials)
    )
    if needs_seed and cfg.seed is None:
        raise SchemaError("density trials scored by monte carlo need an explicit seed")

    rows = []
    for t in trials:
        row = {"trial_id": t.trial_id}
        seed = trial_seed(cfg.seed, t.trial_id) if cfg.seed is not None else None

        def edist():
            est = dist_metric(t.hypothesis, t.reference, cfg.distance, cfg.method, cfg.mc_samples, seed)
            row["dist_metric_stderr"] = est.stderr
            return est.value

        _guarded(row, "dist_metric", edist)
        ref_mean, hyp_mean = mean(t.reference), mean(t.hypothesis)
        row["reference_mean"] = _point(ref_mean)
        row["hypothesis_mean"] = _point(hyp_mean)
        _guarded(row, "regression_error", lambda: regression_error([Trial(t.trial_id, ref_mean, hyp_mean)], cfg.distance))
        if prior_mean is not None:
            _guarded(
                row,
                "prior_regression_error",
                lambda: regression_error([Trial(t.trial_id, ref_mean, prior_mean)], cfg.distance),
            )
        if tess is not None:
            ref_r = aggregate(t.reference, tess, subcells=cfg.subcells, resolution=cfg.resolution)
            hyp_r = aggregate(t.hypothesis, tess, subcells=cfg.subcells, resolution=cfg.resolution)
            _guarded(row, "cross_entropy", lambda: trial_cross_entropy(ref_r, hyp_r, cfg.floor))
            _guarded(row, "reference_entropy", lambda: entropy(ref_r))
            _guarded(row, "correct", lambda: float(classify(hyp_r) == classify(ref_r)))
            if prior_regions is not None:
                _guarded(row, "prior_cross_entropy", lambda: trial_cross_entropy(ref_r, prior_regions, cfg.floor))
        rows.append(row)

    metrics = {
        "dist_metric": _mean_or_none(rows, "dist_metric"),
        "regression_error": _mean_or_none(rows, "regression_error"),
    }
    se = [r.get("dist_metric_stderr") for r in rows]
    if metrics["dist_metric"] is not None and all(s is not None for s in se):
        metrics["dist_metric_stderr"] = math.sqrt(math.fsum(s * s for s in se)) / len(rows)
    if prior_mean is not None:
        metrics["prior_regression_error"] = _mean_or_none(rows, "prior_regression_error")
    if tess is not None:
        metrics["cross_entropy"] = _mean_or_none(rows, "cross_entropy")
        metrics["reference_entropy"] = _mean_or_none(rows, "reference_entropy")
        metrics["classification_accuracy"] = _mean_or_none(rows, "correct")
        if prior_regions is not None:
            metrics["prior_cross_entropy"] = _mean_or_none(rows, "prior_cross_entropy")
            metrics["prior_entropy"] = prior_entropy(prior_regions)
    return metrics, rows


def score_run(trials: Sequence[Trial], config: ScoreConfig | None = None) -> MetricReport:
    """Compute every metric applicable to the (homogeneous) trial family.

    Per-trial failures are recorded in the breakdown under ``errors`` and make
    the corresponding aggregate ``None``.
    """
    cfg = config or ScoreConfig()
    if not trials:
        raise SchemaError("no trials to score")
    families = {t.family for t in trials}
    if len(families) > 1:
        raise FamilyMismatchError(f"trials mix families: {', '.join(sorted(families))}")
    ids = [t.trial_id for t in trials]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate trial ids")
    family = families.pop()
    if family == "discrete":
        _check_discrete(trials)
        prior = cfg.prior
        if prior is not None and not isinstance(prior, DiscreteDistribution):
            if cfg.tessellation is None:
                raise SchemaError("a density prior for discrete trials needs a tessellation")
            prior = aggregate(prior, cfg.tessellation, subcells=cfg.subcells, resolution=cfg.resolution)
        if prior is not None and prior.region_ids != trials[0].reference.region_ids:
            raise SchemaError("prior uses a different region set than the trials")
        metrics, rows = _score_discrete(trials, cfg, prior)
    elif family == "point":
        metrics, rows = _score_points(trials, cfg)
    else:
        metrics, rows = _score_densities(trials, cfg)
    return MetricReport(metrics, rows, len(trials), family, cfg.describe())


def as_point_trial(trial_id: str, ref, hyp) -> Trial:
    return Trial(trial_id, as_location(ref), as_location(hyp))
