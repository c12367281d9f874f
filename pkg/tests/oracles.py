"""Independent reference computations used by the tests.

Nothing here goes through the package's rasterization or containment code.
"""

import math

import mpmath
import numpy as np
import shapely
from scipy import stats


def raster_labels(tess, bbox, n=1000):
    """Region index per cell centre of an n x n raster over bbox, using shapely.

    Points on shared edges go to the smallest region id, like the package.
    """
    xmin, ymin, xmax, ymax = bbox
    xs = xmin + (np.arange(n) + 0.5) * (xmax - xmin) / n
    ys = ymin + (np.arange(n) + 0.5) * (ymax - ymin) / n
    X, Y = np.meshgrid(xs, ys)
    shapes = [poly.to_shapely() for _, poly in tess.regions]
    tree = shapely.STRtree(shapes)
    pts = shapely.points(X.ravel(), Y.ravel())
    pi, gi = tree.query(pts, predicate="intersects")
    order = np.lexsort((gi, pi))
    pi, gi = pi[order], gi[order]
    first = np.unique(pi, return_index=True)[1]
    labels = np.full(n * n, -1)
    labels[pi[first]] = gi[first]
    return X, Y, labels


def mvn_pdf(means, covs, weights, X, Y):
    pts = np.stack([X, Y], axis=-1)
    out = np.zeros(X.shape)
    for m, c, w in zip(means, covs, weights):
        out += w * stats.multivariate_normal(m, c).pdf(pts)
    return out


def raster_region_masses(means, covs, weights, tess, n=1000, labels=None):
    bbox = tess.bbox
    if labels is None:
        labels = raster_labels(tess, bbox, n)
    X, Y, lab = labels
    cell = (bbox[2] - bbox[0]) * (bbox[3] - bbox[1]) / (n * n)
    f = mvn_pdf(means, covs, weights, X, Y).ravel() * cell
    inside = lab >= 0
    return np.bincount(lab[inside], weights=f[inside], minlength=len(tess.regions))


def gaussian_product(m1, c1, m2, c2):
    """Mean and covariance of the normalized product of two Gaussians."""
    p1, p2 = np.linalg.inv(c1), np.linalg.inv(c2)
    cov = np.linalg.inv(p1 + p2)
    return cov @ (p1 @ np.asarray(m1) + p2 @ np.asarray(m2)), cov


def entropy_mp(probs, dps=50):
    with mpmath.workdps(dps):
        return float(-mpmath.fsum(mpmath.mpf(p) * mpmath.log(mpmath.mpf(p)) for p in probs if p > 0))


def segment_density_integral(fn, a, b, n=100_000):
    """Line integral of fn along a->b by a dense midpoint rule."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    t = (np.arange(n) + 0.5) / n
    pts = a + t[:, None] * (b - a)
    return float(np.linalg.norm(b - a) * fn(pts).mean())


def loglinear_fit(days, counts):
    """(R0, d, slope stderr) from scipy's linear regression of ln(count) on day."""
    days = np.asarray(days, float)
    counts = np.asarray(counts, float)
    keep = counts > 0
    res = stats.linregress(days[keep], np.log(counts[keep]))
    return math.exp(res.intercept), 1 - math.exp(res.slope), res.stderr


def binomial_3sigma(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)
