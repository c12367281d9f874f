import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from accentloc.density import Grid
from accentloc.errors import GeometryError, InvalidDensityError, SchemaError
from accentloc.spatial import (
    DistanceFunction,
    Location,
    Polygon,
    Tessellation,
    assign_points,
    distance,
    grid_tessellation,
    point_in_region,
    project_lonlat,
)

from oracles import binomial_3sigma, segment_density_integral

coords = st.floats(-1e3, 1e3, allow_nan=False)
points = st.tuples(coords, coords)


def test_location_must_be_finite():
    with pytest.raises(SchemaError):
        Location(math.nan, 0.0)
    with pytest.raises(SchemaError):
        Location(0.0, math.inf)


@pytest.mark.parametrize(
    "loc, expected",
    [((2, 3), "A"), ((12, 12), None), ((5, 2), "A"), ((7, 1), "B"), ((10, 5), "B"), ((0, 0), "A")],
)
def test_point_in_region(two_squares, loc, expected):
    assert point_in_region(loc, two_squares) == expected


def test_polygon_closes_and_rejects_bad_rings():
    p = Polygon([(0, 0), (1, 0), (1, 1), (0, 0)])
    assert len(p.exterior) == 3
    assert p.area == pytest.approx(0.5)
    with pytest.raises(GeometryError):
        Polygon([(0, 0), (1, 1)])
    with pytest.raises(GeometryError):
        Polygon([(0, 0), (1, 0), (2, 0)])  # zero area
    with pytest.raises(GeometryError):
        Polygon([(0, 0), (2, 2), (2, 0), (0, 2)])  # bow tie


def test_polygon_with_hole():
    p = Polygon([(0, 0), (10, 0), (10, 10), (0, 10)], holes=([(4, 4), (6, 4), (6, 6), (4, 6)],))
    assert p.area == pytest.approx(96)
    assert p.contains_point((1, 1))
    assert not p.contains_point((5, 5))
    assert p.contains_point((4, 5))  # on the hole's edge


def test_overlapping_unit_squares_rejected():
    with pytest.raises(GeometryError, match="overlap"):
        Tessellation((("a", Polygon.box(0, 0, 1, 1)), ("b", Polygon.box(0.5, 0, 1.5, 1))))


def test_duplicate_ids_rejected():
    with pytest.raises(GeometryError, match="duplicate"):
        Tessellation((("a", Polygon.box(0, 0, 1, 1)), ("a", Polygon.box(1, 0, 2, 1))))


def test_shared_edges_are_not_overlaps():
    tess = grid_tessellation((0, 0, 10, 10), 4, 3)
    assert len(tess) == 12
    assert tess.area == pytest.approx(100)


@settings(max_examples=50, deadline=None)
@given(st.lists(points, min_size=1, max_size=50))
def test_containment_agrees_with_shapely(pts):
    poly = Polygon([(0, 0), (400, -100), (600, 300), (200, 500), (-300, 200)])
    shp = poly.to_shapely()
    arr = np.array(pts)
    ours = poly.contains(arr[:, 0], arr[:, 1])
    pts_s = shapely.points(arr[:, 0], arr[:, 1])
    theirs = shapely.covers(shp, pts_s)
    # within the on-edge tolerance the two may legitimately differ
    clear = shapely.distance(shp.boundary, pts_s) > 1e-6
    assert np.array_equal(ours[clear], theirs[clear])
    assert ours[~clear].all()


def test_assign_points_matches_scalar(two_squares):
    rng = np.random.default_rng(0)
    pts = np.vstack([rng.uniform(-1, 11, (200, 2)), [[5, 2], [5, 5], [0, 0]]])
    labels = assign_points(pts, two_squares)
    ids = two_squares.ids
    for p, lab in zip(pts, labels):
        assert point_in_region(p, two_squares) == (ids[lab] if lab >= 0 else None)


def test_point_in_region_frequency_matches_area():
    tri = Polygon([(0, 0), (10, 0), (0, 10)])
    tess = Tessellation((("t", tri),))
    rng = np.random.default_rng(42)
    n = 20_000
    pts = rng.uniform(0, 10, (n, 2))
    freq = np.mean(assign_points(pts, tess) == 0)
    p = tri.area / 100
    assert abs(freq - p) < binomial_3sigma(p, n)
    sub = pts[:500]
    assert [point_in_region(q, tess) == "t" for q in sub] == list(assign_points(sub, tess) == 0)


@pytest.mark.parametrize(
    "D, expected",
    [
        (DistanceFunction("euclidean"), 5.0),
        (DistanceFunction("saturated", tau=2.0), 2.0),
        (DistanceFunction("saturated", tau=10.0), 5.0),
    ],
)
def test_distance_examples(D, expected):
    assert distance(D, (0, 0), (3, 4)) == pytest.approx(expected)


def test_population_distance_uniform_density_against_line_integral():
    dens = Grid((-1, -1, 6, 6), np.ones((7, 7)))
    D = DistanceFunction("population_weighted", density=dens, samples=16)
    oracle = segment_density_integral(lambda p: np.ones(len(p)), (0, 0), (3, 4))
    assert distance(D, (0, 0), (3, 4)) == pytest.approx(oracle) == pytest.approx(5.0)


def test_population_distance_tracks_line_integral_on_varying_density():
    vals = np.add.outer(np.arange(40), np.arange(40)).astype(float) + 1.0
    dens = Grid((0, 0, 40, 40), vals)

    def lookup(p):
        i = np.clip(np.floor(p[:, 0]).astype(int), 0, 39)
        j = np.clip(np.floor(p[:, 1]).astype(int), 0, 39)
        return vals[j, i]

    D = DistanceFunction("population_weighted", density=dens, samples=4000)
    a, b = (1.3, 2.7), (35.1, 29.9)
    assert distance(D, a, b) == pytest.approx(segment_density_integral(lookup, a, b), rel=1e-3)


def test_population_distance_needs_normalizable_density():
    with pytest.raises(InvalidDensityError):
        DistanceFunction("population_weighted", density=Grid((0, 0, 1, 1), np.zeros((2, 2))))
    from accentloc.density import DeltaSet

    with pytest.raises(InvalidDensityError):
        DistanceFunction("population_weighted", density=DeltaSet.single((0, 0)))


def _all_distances():
    dens = Grid((-50, -50, 50, 50), np.random.default_rng(1).uniform(0.1, 2.0, (20, 20)))
    return [
        DistanceFunction("euclidean"),
        DistanceFunction("saturated", tau=7.5),
        DistanceFunction("population_weighted", density=dens, samples=9),
    ]


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.floats(-60, 60), st.floats(-60, 60)), st.tuples(st.floats(-60, 60), st.floats(-60, 60)))
def test_distance_axioms(a, b):
    for D in _all_distances():
        dab, dba = distance(D, a, b), distance(D, b, a)
        assert dab >= 0
        assert dab == pytest.approx(dba, rel=1e-12, abs=1e-12)
        assert distance(D, a, a) == 0
        if D.kind == "saturated":
            assert dab <= D.tau


def test_parse_distance():
    assert DistanceFunction.parse("euclidean").kind == "euclidean"
    assert DistanceFunction.parse("saturated:2.5").tau == 2.5
    dens = Grid((0, 0, 1, 1), np.ones((1, 1)))
    D = DistanceFunction.parse("population:some/file.json:12", lambda p: dens)
    assert D.kind == "population_weighted" and D.samples == 12
    with pytest.raises(SchemaError):
        DistanceFunction.parse("manhattan")
    with pytest.raises(SchemaError):
        DistanceFunction.parse("saturated:abc")


def test_projection_equirectangular():
    x, y = project_lonlat(1.0, 52.0, ref_lat=52.0)
    assert y == pytest.approx(6371.0088 * math.radians(52.0))
    assert x == pytest.approx(6371.0088 * math.radians(1.0) * math.cos(math.radians(52.0)))
