import math
from fractions import Fraction as F

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from pingpong.errors import ZeroVector
from pingpong.exact_core import (Ball, ProjHyperplane, ProjPoint, Region, Tube, apply_hyperplane, apply_point,
                                 ball_inside_ball, ball_inside_tube, det, disjoint_ball_tube, disjoint_balls,
                                 dist2_hyperplanes, dist2_point_hyperplane, dist2_points, inverse,
                                 lipschitz_bound, identity, primitive, region_contains,
                                 region_inside_region, sqrt_ge_sum, sqrt_gt_sum, tube_inside_tube,
                                 tube_misses_region)

ints = st.integers(-9, 9)
vec3 = st.tuples(ints, ints, ints).filter(any)
small_rat = st.fractions(min_value=0, max_value=2, max_denominator=50)

E12 = ((1, 1, 0), (0, 1, 0), (0, 0, 1))


def test_primitive_normalizes_sign_and_gcd():
    assert primitive((0, -4, 6)) == (0, 2, -3)
    assert ProjPoint((-2, 0, 0)) == ProjPoint((1, 0, 0))
    with pytest.raises(ZeroVector):
        primitive((0, 0, 0))


def test_distance_oracles():
    # hand-computed squared sines
    assert dist2_points(ProjPoint((1, 0, 0)), ProjPoint((1, 1, 0))) == F(1, 2)
    assert dist2_points(ProjPoint((1, 2, 3)), ProjPoint((-2, -4, -6))) == 0
    assert dist2_point_hyperplane(ProjPoint((1, 1, 1)), ProjHyperplane((1, 0, 0))) == F(1, 3)
    assert dist2_point_hyperplane(ProjPoint((0, 1, 1)), ProjHyperplane((2, 0, 1))) == F(1, 10)
    assert dist2_hyperplanes(ProjHyperplane((1, 0, 0)), ProjHyperplane((1, 1, 0))) == F(1, 2)


def test_matrix_oracles():
    assert det(((2, 3), (1, 2))) == 1
    assert inverse(E12) == ((1, -1, 0), (0, 1, 0), (0, 0, 1))
    assert lipschitz_bound(E12) == 16
    assert lipschitz_bound(identity(4)) == 16


def test_sqrt_sum_boundary():
    assert sqrt_ge_sum(1, F(1, 4), F(1, 4))
    assert not sqrt_gt_sum(1, F(1, 4), F(1, 4))
    assert sqrt_gt_sum(F(1, 2), F(1, 16), F(1, 16))
    assert not sqrt_ge_sum(F(1, 10), F(1, 16), F(1, 16))


@given(small_rat, small_rat, small_rat)
def test_sqrt_sum_matches_floats(a, b, c):
    lhs, rhs = math.sqrt(a), math.sqrt(b) + math.sqrt(c)
    assume(abs(lhs - rhs) > 1e-9)
    assert sqrt_gt_sum(a, b, c) == (lhs > rhs)
    assert sqrt_ge_sum(a, b, c) == (lhs > rhs)


@given(vec3, vec3)
def test_distance_symmetric_and_bounded(x, y):
    a, b = ProjPoint(x), ProjPoint(y)
    d = dist2_points(a, b)
    assert d == dist2_points(b, a)
    assert 0 <= d <= 1
    assert (d == 0) == (a == b)


@given(vec3, vec3, vec3)
def test_sine_distance_triangle_inequality(x, y, z):
    a, b, c = ProjPoint(x), ProjPoint(y), ProjPoint(z)
    # the sine of the angle between lines satisfies the triangle inequality
    assert math.sqrt(dist2_points(a, c)) <= math.sqrt(dist2_points(a, b)) + math.sqrt(dist2_points(b, c)) + 1e-12


@settings(max_examples=60)
@given(vec3, st.sampled_from([E12, ((1, 0, 0), (2, 1, 0), (0, 3, 1)), ((0, 0, 1), (1, 0, 0), (0, 1, 0))]))
def test_incidence_is_equivariant(x, g):
    L = ProjHyperplane(x)
    y = next(ProjPoint(v) for v in ((x[1], -x[0], 0), (0, x[2], -x[1]), (x[2], 0, -x[0])) if any(v))
    assert L.contains(y)
    assert apply_hyperplane(g, L).contains(apply_point(g, y))


@settings(max_examples=60)
@given(vec3, vec3)
def test_lipschitz_bound_holds(x, y):
    g = ((1, 2, 0), (0, 1, 0), (0, -1, 1))
    a, b = ProjPoint(x), ProjPoint(y)
    lam = lipschitz_bound(g)
    assert math.sqrt(dist2_points(apply_point(g, a), apply_point(g, b))) <= lam * math.sqrt(dist2_points(a, b)) + 1e-12


def test_region_predicates():
    p, L = ProjPoint((1, 0, 0)), ProjHyperplane((0, 1, 0))
    assert disjoint_ball_tube(ProjPoint((0, 1, 0)), F(1, 16), L, F(1, 16))
    assert not disjoint_ball_tube(p, F(1, 16), L, F(1, 16))
    assert disjoint_balls(p, F(1, 16), ProjPoint((0, 1, 0)), F(1, 16))
    assert ball_inside_tube(p, F(1, 100), L, F(1, 16))
    assert ball_inside_ball(p, F(1, 100), p, F(1, 16))
    assert not ball_inside_ball(p, F(1, 16), p, F(1, 100))
    assert tube_inside_tube(L, 0, ProjHyperplane((0, 10, 1)), F(1, 100))
    assert not tube_inside_tube(L, 0, ProjHyperplane((0, 1, 1)), F(1, 100))
    A = Region((Ball(p, F(1, 100)),))
    R = Region((), (Tube(L, F(1, 4)),))
    assert region_contains(A, p) and not region_contains(A, ProjPoint((0, 0, 1)))
    assert region_inside_region(A, R)
    assert not tube_misses_region(ProjHyperplane((1, 0, 0)), F(1, 100), R)
