import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings, strategies as st

from defeature.errors import (AlreadyInserted, ExtensionViolation, FeatureOutsideDomain, InvalidPolygon,
                              UnknownLabel)
from defeature.geometry import (BoundaryLabel as L, ExtensionPolicy, Feature, OuterDomain, Status, build_model,
                                circle_polygon, insert_features, make_extension, shoelace_area, square_polygon,
                                unit_square, validate_separation)


def polygon_perimeter(r, n=64):
    return 2 * n * r * math.sin(math.pi / n)


def two_holes():
    return build_model(unit_square(), [Feature(1, circle_polygon((1.1e-3, 1.1e-3), 1e-3)),
                                       Feature(2, circle_polygon((0.89, 0.89), 0.1))])


def protrusion(delta=0.2):
    outer = unit_square(("D", "N", "N", "N"))
    fp = shapely.box(0.3, 1.0, 0.4, 1.1)
    f = make_extension(Feature(1, positive_part=fp), ExtensionPolicy.IDENTITY, outer.polygon)
    return build_model(outer, [f, Feature(2, shapely.box(0.5, 0.9, 0.6, 1.0))])


def test_boundary_label_parse_round_trip():
    for lab in L:
        assert L.parse(lab.value) is lab
    with pytest.raises(UnknownLabel):
        L.parse("GammaQ")


def test_outer_domain_needs_one_tag_per_side():
    with pytest.raises(InvalidPolygon):
        OuterDomain(np.eye(3)[:, :2], ("D", "N"))
    with pytest.raises(InvalidPolygon):
        unit_square(("D", "N", "N", "X"))


def test_feature_needs_a_part():
    with pytest.raises(InvalidPolygon):
        Feature(1)


def test_two_holes_measures_and_areas():
    m = two_holes()
    assert m.n_removed == 2 and m.removed_ids == [1, 2]
    assert m.measure(L.GAMMA_N, 1) == pytest.approx(polygon_perimeter(1e-3), rel=1e-12)
    assert m.measure(L.GAMMA_N, 2) == pytest.approx(polygon_perimeter(0.1), rel=1e-12)
    assert m.measure(L.DIRICHLET_OUTER) == pytest.approx(2.0)
    assert m.measure(L.NEUMANN_OUTER) == pytest.approx(2.0)
    holes = circle_polygon((0, 0), 1e-3).area + circle_polygon((0, 0), 0.1).area
    assert m.exact.area == pytest.approx(1 - holes, rel=1e-12)
    assert m.defeatured.area == pytest.approx(1.0)


def test_insert_features_restores_geometry():
    m = two_holes()
    m1 = insert_features(m, {2})
    assert m1.iteration == 1 and m1.removed_ids == [1]
    assert m1.feature(2).status is Status.INSERTED
    assert m1.defeatured.area == pytest.approx(1 - circle_polygon((0, 0), 0.1).area, rel=1e-12)
    # the restored hole stays a Neumann boundary of the new defeatured domain
    assert m1.measure(L.GAMMA_N, 2) == pytest.approx(polygon_perimeter(0.1), rel=1e-12)
    assert m1.measure(L.GAMMA_0N, 2) == 0.0
    assert m1.measure(L.GAMMA_N, 1) == pytest.approx(polygon_perimeter(1e-3), rel=1e-12)
    with pytest.raises(AlreadyInserted):
        insert_features(m1, {2})
    with pytest.raises(KeyError):
        insert_features(m1, {7})
    m2 = insert_features(m1, {1})
    assert m2.n_removed == 0
    assert m2.defeatured.area == pytest.approx(m.exact.area, rel=1e-12)


def test_feature_outside_domain_rejected():
    with pytest.raises(FeatureOutsideDomain):
        build_model(unit_square(), [Feature(1, circle_polygon((1.5, 0.5), 0.1))])


def test_positive_feature_labels():
    m = protrusion()
    assert m.measure(L.GAMMA_0P, 1) == pytest.approx(0.1)
    assert m.measure(L.GAMMA_S, 1) == pytest.approx(0.3)
    assert m.measure(L.GAMMA_N, 2) == pytest.approx(0.3)
    assert m.measure(L.GAMMA_0N, 2) == pytest.approx(0.1)
    assert m.exact.area == pytest.approx(1.0)
    assert validate_separation(m).pairwise_ok


def test_bounding_box_extension_contains_positive_part():
    fp = shapely.Polygon([(0.2, 1.0), (0.4, 1.0), (0.3, 1.2)])
    f = make_extension(Feature(1, positive_part=fp), ExtensionPolicy.BOUNDING_BOX, unit_square().polygon)
    assert f.extension.contains(fp)
    assert f.void.area == pytest.approx(f.extension.area - fp.area)
    m = build_model(unit_square(), [f])
    assert m.measure(L.GAMMA_0P, 1) == pytest.approx(0.2)
    assert m.measure(L.GAMMA_TILDE, 1) > 0


def test_extension_must_contain_positive_part():
    fp = shapely.box(0.3, 1.0, 0.4, 1.1)
    bad = Feature(1, positive_part=fp, extension=shapely.box(0.3, 1.0, 0.35, 1.1))
    with pytest.raises(ExtensionViolation):
        build_model(unit_square(), [bad])


def test_extension_must_stay_outside_the_domain():
    fp = shapely.box(0.3, 1.0, 0.4, 1.1)
    bad = Feature(1, positive_part=fp, extension=shapely.box(0.3, 0.9, 0.4, 1.1))
    with pytest.raises(ExtensionViolation):
        build_model(unit_square(), [bad])


def test_separation_flags_touching_features():
    m = build_model(unit_square(), [Feature(1, shapely.box(0.2, 0.2, 0.4, 0.4)),
                                    Feature(2, shapely.box(0.4, 0.2, 0.6, 0.4))])
    rep = validate_separation(m)
    assert not rep.pairwise_ok and (1, 2) in rep.overlap_pairs


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5)), min_size=3, max_size=12, unique=True))
def test_shoelace_matches_polygon_library(points):
    hull = shapely.MultiPoint(points).convex_hull
    if hull.geom_type != "Polygon" or hull.area < 1e-6:
        return
    ring = np.asarray(hull.exterior.coords)[:-1]
    assert abs(shoelace_area(ring)) == pytest.approx(hull.area, rel=1e-10)
    assert shoelace_area(ring[::-1]) == pytest.approx(-shoelace_area(ring), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.2), st.floats(0.3, 0.7), st.floats(0.3, 0.7), st.booleans())
def test_hole_measure_and_area_balance(r, cx, cy, square):
    hole = square_polygon((cx, cy), 2 * r) if square else circle_polygon((cx, cy), r)
    m = build_model(unit_square(), [Feature(1, hole)])
    assert m.measure(L.GAMMA_N, 1) == pytest.approx(hole.length, rel=1e-10)
    assert m.exact.area + hole.area == pytest.approx(1.0, rel=1e-12)
    assert insert_features(m, [1]).defeatured.area == pytest.approx(m.exact.area, rel=1e-12)
