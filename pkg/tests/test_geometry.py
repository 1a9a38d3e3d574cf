import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bmround.geometry import (
    BodyValidationError,
    Ellipse,
    PolygonBody,
    RadialBody,
    SingularMapError,
    apply_map,
    area,
    as_map,
    disk,
    gauge_norm,
    image_radii,
    inclusion_gauges,
    inner_radius,
    lp_ball,
    outer_radius,
    radial_distance,
    radial_point,
    regular_polygon,
    rotation,
    square,
    validate,
)
from bmround.sampling import batch_bodies, random_body

from oracles import lp_ball_area

SQUARE = [[1, 1], [-1, 1], [-1, -1], [1, -1]]

maps = st.tuples(*[st.floats(-3, 3, allow_nan=False)] * 4).map(lambda t: np.array(t).reshape(2, 2)).filter(
    lambda M: abs(np.linalg.det(M)) > 0.05
)


@pytest.mark.parametrize(
    "vertices, invariant",
    [
        ([[1, 0], [0, 1], [1, 1]], "malformed"),
        ([[1, 0], [0, 1], [-1, 0], [0, -1], [0.5, 0.5]], "asymmetric"),
        ([[2, 0], [0, 1], [-2, 0], [0, -2]], "asymmetric"),
        ([[1, 0], [0.2, 0.2], [0, 1], [-1, 0], [-0.2, -0.2], [0, -1]], "nonconvex"),
        ([[1, 1], [-1, -1], [1, 1], [-1, -1]], "origin_not_interior"),
        ([[1, 1e-8], [-1, 1e-8], [-1, -1e-8], [1, -1e-8]], "degenerate"),
        ([[np.nan, 1], [-1, 1], [-1, -1], [1, -1]], "malformed"),
    ],
)
def test_validate_rejects(vertices, invariant):
    with pytest.raises(BodyValidationError) as err:
        validate(vertices)
    assert err.value.invariant == invariant


def test_validate_radial_rejects():
    with pytest.raises(BodyValidationError, match="malformed"):
        validate(samples=[1.0] * 4)
    with pytest.raises(BodyValidationError) as err:
        validate(samples=[1.0, 1.0, 0.3, 1.0, 1.0, 1.0, 0.3, 1.0])
    assert err.value.invariant == "nonconvex"
    with pytest.raises(BodyValidationError) as err:
        validate(samples=[1.0, -1.0] * 8)
    assert err.value.invariant == "origin_not_interior"


def test_validate_accepts_clockwise_and_drops_collinear():
    body = validate(SQUARE[::-1])
    assert isinstance(body, PolygonBody)
    assert area(body) == pytest.approx(4.0, abs=1e-14)
    mid = validate([[1, 0], [1, 1], [-1, 1], [-1, 0], [-1, -1], [1, -1]])
    assert len(mid.vertices) == 4


def test_square_basics():
    sq = validate(SQUARE)
    assert gauge_norm(sq, [3, -2]) == pytest.approx(3.0)
    assert inner_radius(sq) == pytest.approx(1.0)
    assert outer_radius(sq) == pytest.approx(math.sqrt(2))
    np.testing.assert_allclose(radial_point(sq, math.pi / 4), [1, 1], atol=1e-14)
    np.testing.assert_allclose(sq.support([[1, 0], [1, 1]]), [1, 2])
    assert square(2.0).area() == pytest.approx(16.0)


@pytest.mark.parametrize("n_sides", [4, 6, 8, 12])
def test_regular_polygon_area(n_sides):
    expected = 0.5 * n_sides * math.sin(2 * math.pi / n_sides)
    assert regular_polygon(n_sides).area() == pytest.approx(expected, rel=1e-14)


def test_regular_polygon_needs_even_sides():
    with pytest.raises(ValueError):
        regular_polygon(5)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 7.0, math.inf])
def test_lp_ball_area(p):
    expected = 4.0 if math.isinf(p) else lp_ball_area(p)
    assert lp_ball(p).area() == pytest.approx(expected, rel=1e-8)


def test_lp_ball_kinds():
    assert isinstance(lp_ball(math.inf), PolygonBody)
    assert isinstance(lp_ball(1), PolygonBody)
    assert isinstance(lp_ball(3), RadialBody)
    with pytest.raises(ValueError):
        lp_ball(0.5)


def test_disk():
    d = disk(2.0)
    assert d.area() == pytest.approx(4 * math.pi, rel=1e-12)
    assert d.inner_radius() == pytest.approx(2.0)
    assert d.outer_radius() == pytest.approx(2.0)
    assert gauge_norm(d, [0, 3]) == pytest.approx(1.5)


@given(maps)
def test_apply_map_scales_area(M):
    body = random_body(3)
    image = apply_map(M, body)
    assert image.area() == pytest.approx(abs(np.linalg.det(M)) * body.area(), rel=1e-9)
    assert image.gauge(body.vertices @ M.T) == pytest.approx(np.ones(len(body.vertices)))


@given(maps)
def test_image_radii_match_mapped_body(M):
    body = random_body(11)
    inner, outer = image_radii(body, M)
    image = body.mapped(M)
    assert inner == pytest.approx(image.inner_radius(), rel=1e-12)
    assert outer == pytest.approx(image.outer_radius(), rel=1e-12)


def test_radial_image_radii():
    body = lp_ball(3)
    T = np.diag([1.3, 1 / 1.3])
    inner, outer = image_radii(body, T)
    pts = body.boundary_points(200000) @ T.T
    r = np.hypot(*pts.T)
    assert inner == pytest.approx(r.min(), rel=1e-8)
    assert outer == pytest.approx(r.max(), rel=1e-8)


def test_singular_map():
    with pytest.raises(SingularMapError):
        as_map([[1, 2], [2, 4]])
    with pytest.raises(ValueError):
        as_map(np.eye(3))


@given(st.integers(0, 10**6), st.floats(0.1, 10), st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_gauge_is_a_norm(seed, t, x):
    body = random_body(seed)
    x = np.array(x)
    y = np.array([0.3, -1.7])
    g = body.gauge
    assert g(t * x) == pytest.approx(t * g(x), rel=1e-12, abs=1e-12)
    assert g(-x) == pytest.approx(g(x), rel=1e-12, abs=1e-12)
    assert g(x + y) <= g(x) + g(y) + 1e-12


@given(st.integers(0, 10**6))
def test_boundary_points_have_unit_gauge(seed):
    body = random_body(seed, k=3 + seed % 8)
    np.testing.assert_allclose(body.gauge(body.boundary_points(97)), 1.0, rtol=1e-12)


def test_radial_body_round_trip():
    body = lp_ball(3)
    pts = body.boundary_points(64)
    np.testing.assert_allclose(body.gauge(pts), 1.0, atol=1e-10)
    rotated = body.mapped(rotation(0.7)).mapped(rotation(-0.7))
    assert radial_distance(body, rotated) < 1e-8


def test_ellipse_shape_round_trip():
    E = Ellipse(3.0, 1.0, 0.4)
    F = Ellipse.from_shape(E.shape)
    assert (F.semi_major, F.semi_minor) == pytest.approx((3.0, 1.0))
    assert F.angle == pytest.approx(0.4)
    assert E.area() == pytest.approx(3 * math.pi)
    np.testing.assert_allclose(E.gauge(E.boundary_points(50)), 1.0, rtol=1e-12)
    G = Ellipse.preimage_of_disk(np.diag([0.5, 2.0]), 1.0)
    assert (G.semi_major, G.semi_minor) == pytest.approx((2.0, 0.5))


def test_inclusion_gauges():
    sq = validate(SQUARE)
    inscribed = Ellipse(1.0, 1.0, 0.0)
    worst_e_in_a, worst_a_in_e = inclusion_gauges(inscribed, sq)
    assert worst_e_in_a == pytest.approx(1.0)
    assert worst_a_in_e == pytest.approx(math.sqrt(2))


def test_random_body_is_deterministic():
    a, b = random_body(1, k=4), random_body(1, k=4)
    np.testing.assert_array_equal(a.vertices, b.vertices)
    with pytest.raises(ValueError):
        random_body(1, k=2)


def test_random_bodies_are_valid_and_fat():
    for body in batch_bodies(5, 300):
        assert validate(body.vertices).area() == pytest.approx(body.area())
        assert body.inner_radius() >= 1e-6 * body.outer_radius()


def test_to_json_round_trip():
    from bmround.specs import parse_body

    for body in (random_body(2), lp_ball(3)):
        again = parse_body(body.to_json())
        assert radial_distance(body, again) < 1e-12
