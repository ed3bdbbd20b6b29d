import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from defeature.errors import ExpressionError, ParseError, SchemaError
from defeature.geometry import BoundaryLabel as L
from defeature.scenario import (BUILTIN_GROUPS, DELTAS, RANDOM_27, Expression, builtin_scenarios, builtin_texts,
                                expand, load_scenario, parse_scenario)

MINIMAL = """scenario tiny
version 1

[domain]
polygon = 0 0  1 0  1 1  0 1
sides = D N N N

[problem]
kind = poisson

[data]
f = 1
gD = x*y
"""


def test_expression_arithmetic():
    pts = np.array([[0.5, 2.0], [1.0, -1.0]])
    e = Expression("2*x^2 - 3*y + exp(-x) + sin(pi*y)/2")
    expected = 2 * pts[:, 0] ** 2 - 3 * pts[:, 1] + np.exp(-pts[:, 0]) + np.sin(np.pi * pts[:, 1]) / 2
    assert np.allclose(e(pts), expected, rtol=1e-14)
    assert np.allclose(Expression("-2^2")(pts), -4.0)
    assert np.allclose(Expression("2^3^2")(pts), 512.0)
    v = Expression("(x, y + 1)")
    assert v.is_vector and np.allclose(v(pts), pts + [0, 1])
    assert np.allclose(Expression("if(x > 0.7, 1, 0)")(pts), [0, 1])


def test_malformed_expression_reports_position():
    with pytest.raises(ExpressionError) as exc:
        Expression("128e^(")
    assert exc.value.position == 3
    with pytest.raises(ExpressionError):
        parse_scenario(MINIMAL.replace("f = 1", "f = 128e^("))
    with pytest.raises(ExpressionError):
        Expression("foo(x)")


def test_minimal_scenario_and_empty_feature_list():
    sc = parse_scenario(MINIMAL)
    assert sc.name == "tiny" and sc.features == () and sc.adaptive is None
    model = sc.model()
    assert model.n_removed == 0
    assert model.measure(L.DIRICHLET_OUTER) == pytest.approx(1.0)
    assert parse_scenario(sc.to_text()) == sc


@pytest.mark.parametrize("text, error", [
    (MINIMAL.replace("kind = poisson", "kind = poisson\ncolour = red"), SchemaError),
    (MINIMAL.replace("version 1", "version 2"), SchemaError),
    (MINIMAL.replace("sides = D N N N", "sides = D N N"), SchemaError),
    (MINIMAL.replace("[data]", "[data"), ParseError),
    (MINIMAL.replace("gD = x*y", "gD x*y"), ParseError),
    (MINIMAL.replace("kind = poisson", "kind = heat"), SchemaError),
    (MINIMAL + "\n[feature 1]\nextension = bbox\n", SchemaError),
    (MINIMAL + "\n[feature 1]\nnegative = circle 0.5 0.5\n", SchemaError),
    (MINIMAL.replace("f = 1", "f = (1, 2)"), SchemaError),
    (MINIMAL + "\n[adaptive]\ntheta = 1.5\n", SchemaError),
])
def test_invalid_scenarios(text, error):
    with pytest.raises(error):
        parse_scenario(text)


def test_missing_file(tmp_path):
    with pytest.raises(SchemaError):
        load_scenario(tmp_path / "nope.scn")
    path = tmp_path / "tiny.scn"
    path.write_text(MINIMAL)
    assert load_scenario(path).name == "tiny"


def test_builtins_round_trip_and_build():
    scenarios = builtin_scenarios()
    names = {s.name for s in scenarios}
    assert {"two_holes_circular", "two_holes_square", "random_27", "stokes_shapes", "lid_cavity"} <= names
    for sc in scenarios:
        assert parse_scenario(sc.to_text()) == sc
        assert load_scenario(sc.name) == sc
        sc.model()


def test_two_holes_constants():
    sc = load_scenario("two_holes_circular")
    shapes = {f.id: f.negative.values for f in sc.features}
    assert shapes == {1: (1.1e-3, 1.1e-3, 1e-3), 2: (0.89, 0.89, 0.1)}
    pts = np.array([[0.2, 0.3]])
    bc = sc.boundary_data()
    assert bc.dirichlet_fn(L.DIRICHLET_OUTER)(pts) == pytest.approx(math.exp(-4))
    assert sc.sides == ("D", "N", "N", "D")


def test_random_27_table():
    sc = load_scenario("random_27")
    assert len(sc.features) == 27 and sc.adaptive == (0.95, 0.0, 100)
    cx, cy, r = sc.features[0].negative.values
    assert r == pytest.approx(8.13e-2) and (cx, cy) == pytest.approx((0.098, 0.093))
    for spec, (rad, x, y) in zip(sc.features, RANDOM_27):
        assert spec.negative.values == pytest.approx((x / 10, y / 10, rad / 100))
    from defeature.geometry import validate_separation
    assert validate_separation(sc.model()).pairwise_ok


def test_distance_delta_group():
    members = expand("distance_delta")
    assert len(members) == 5 and members == list(BUILTIN_GROUPS["distance_delta"])
    for name, delta in zip(members, DELTAS):
        model = load_scenario(name).model()
        assert model.n_removed == (2 if delta > 0 else 1)
    assert expand("lid_cavity") == ["lid_cavity"]


def test_stokes_builtins():
    shapes = load_scenario("stokes_shapes")
    assert shapes.problem == "stokes" and shapes.prefactor == 3
    model = shapes.model()
    assert model.feature(2).negative_part.area == pytest.approx(0.025 ** 2)
    lid = load_scenario("lid_cavity")
    gd = lid.boundary_data().dirichlet_fn(L.DIRICHLET_OUTER)
    assert np.allclose(gd(np.array([[0.5, 1.0], [0.5, 0.0], [0.0, 1.0]])), [[1, 0], [0, 0], [0, 0]])


def test_scalar_data_broadcast_for_vector_problems():
    sc = load_scenario("stokes_shapes")
    f = sc.boundary_data().source
    vals = f(np.array([[0.5, 0.5], [0.0, 0.0]]))
    assert vals.shape == (2, 2) and np.allclose(vals[:, 0], vals[:, 1])
    assert vals[1, 0] == pytest.approx(math.exp(2.0))


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 3))
def test_expression_matches_python(a, b, c):
    pts = np.array([[a, b]])
    e = Expression(f"({a!r})*x - y/({c!r}) + x*y^2")
    assert e(pts)[0] == pytest.approx(a * a - b / c + a * b * b, rel=1e-12, abs=1e-12)


def test_builtin_texts_are_parseable_text():
    for name, text in builtin_texts().items():
        assert text.startswith(f"scenario {name}\n")
