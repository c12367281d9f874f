"""Accent location: origin densities, regional aggregation and evaluation metrics."""

from .density import (
    DeltaSet,
    DiscreteDistribution,
    GaussianMixture,
    Grid,
    aggregate,
    integrate_region,
    mean,
    mode,
    normalize,
    posterior,
    rasterize,
    sample,
)
from .metrics import (
    MetricReport,
    ScoreConfig,
    Trial,
    classification_accuracy,
    classify,
    cross_entropy,
    dist_metric,
    prior_entropy,
    regression_error,
    score_run,
)
from .origin import AccentStrengthField, Episode, LocationHistory, SusceptibilityWeight, density_at_time, origin_density, origin_point
from .sim import baseline_locator, build_population, fit_decay, predict_total, simulate_speakers
from .spatial import DistanceFunction, Location, Polygon, Tessellation, distance, point_in_region

__version__ = "0.1.0"
