from fractions import Fraction as F

import pytest

from conftest import H, P, THREE_CYCLE
from pingpong.congruence import closure_order, in_kernel, is_surjective, reduce_mod
from pingpong.constructions import (BuildConfig, build_profinitely_dense, check_avoidance_hypotheses,
                                    check_quad_assumption1, family_member, family_union_cert, quad_extend,
                                    quad_start, starting_system, avoid_step)
from pingpong.errors import EqualFunctions, PreconditionViolated, SearchExhausted
from pingpong.exact_core import (apply_hyperplane, apply_point, ball_inside_ball, inverse, matmul,
                                 tube_inside_tube)
from pingpong.lattice import complete_basis
from pingpong.schottky import evaluate_matrix_word, verify_quadruple, verify_system, z2_pair_cert

SHEAR = ((1, 1, 0), (0, 1, 0), (0, 0, 1))


# --------------------------------------------------------------------------
# dense builder

def test_dense_build_shape(dense_build):
    sys = dense_build.system
    assert len(sys.generators) == 12
    assert verify_system(sys).ok
    assert dense_build.structure_ok()
    for d in (3, 4):
        assert is_surjective(sys.matrices, d)
    assert closure_order([reduce_mod(g, 3) for g in sys.matrices]) == 5616


def test_dense_build_sits_inside_anchor_regions(dense_build):
    sys = dense_build.system
    for g in sys.generators:
        assert ball_inside_ball(g.u.point, g.eps2, P(1, 0, 0), F(1, 100) ** 2)
        assert tube_inside_tube(g.u.hyperplane, g.del2, H(0, 1, 0), F(1, 50) ** 2)


def test_dense_build_first_batch_structure(dense_build):
    first = [b for b in dense_build.batches if b.modulus == 3]
    assert len(first) == 6
    for b in first:
        assert in_kernel(b.conjugator, 3)
        assert b.exponent % b.period == 1
        assert b.check(dense_build.system.generators[b.index].u)


def test_dense_build_rejects_bad_anchor():
    with pytest.raises(PreconditionViolated, match="p ∈ L"):
        build_profinitely_dense(P(1, 0, 0), H(1, 0, 0), F(1, 100) ** 2, F(1, 50) ** 2)


# --------------------------------------------------------------------------
# starting system

def test_starting_system_worked_instance(started):
    sys, cert = started
    assert verify_system(sys).ok
    assert cert.check(sys)
    assert cert.full.ok and cert.full.revalidate()[0]
    # w2 is a word in S and also k (word in S) k^-1
    assert evaluate_matrix_word(sys.matrices, cert.word_in_s) == cert.w2
    conj = evaluate_matrix_word(sys.matrices, cert.conj_word)
    assert matmul(matmul(cert.k, conj), inverse(cert.k)) == cert.w2


def test_starting_system_rejections(start_anchors):
    anchors = list(start_anchors)
    k2L1 = apply_hyperplane(THREE_CYCLE, apply_hyperplane(THREE_CYCLE, anchors[0][1]))
    assert k2L1 == H(1, 1, 0)
    with pytest.raises(PreconditionViolated):
        starting_system(THREE_CYCLE, anchors[:2] + [(anchors[2][0], k2L1)], F(1, 16), F(1, 16))
    bad = [(P(1, 0, 0), H(0, 1, 0)), (P(0, 1, 0), H(0, 0, 1)), (P(0, 0, 1), H(1, -1, 0))]
    with pytest.raises(PreconditionViolated):
        starting_system(THREE_CYCLE, bad, F(1, 16), F(1, 16))


# --------------------------------------------------------------------------
# family

def test_family_members_and_union(spec8):
    zeros, ones = "0" * 8, "1" * 8
    a, b = family_member(spec8, zeros), family_member(spec8, ones)
    assert verify_system(a).ok and verify_system(b).ok
    base = len(spec8.base.generators)
    assert all(a.generators[base + i] != b.generators[base + i] for i in range(8))
    cert = family_union_cert(spec8, "01000000", "00000000")
    assert cert.ok and cert.revalidate()[0]
    u, w = spec8.choices[1]
    assert u.u.point == w.u.point and u.u.hyperplane != w.u.hyperplane
    assert z2_pair_cert(cert.pair.u, cert.pair.w).ok


def test_family_prefix_consistency(spec8):
    a, b = family_member(spec8, "10110000"), family_member(spec8, "10111111")
    base = len(spec8.base.generators)
    assert a.generators[:base + 4] == b.generators[:base + 4]


def test_family_rejections(spec8):
    with pytest.raises(PreconditionViolated):
        family_member(spec8, "0101")
    with pytest.raises(EqualFunctions):
        family_union_cert(spec8, "01010101", "01010101")


# --------------------------------------------------------------------------
# avoidance

def test_avoid_step(avoidance):
    inst, base, out, cert = avoidance
    check_avoidance_hypotheses(base, inst)
    assert verify_system(out).ok and out.contains(base)
    assert cert.ok and cert.revalidate()[0]


def test_avoid_step_rejections(avoidance):
    inst, base, _, _ = avoidance
    with pytest.raises(PreconditionViolated):
        avoid_step(base, inst, SHEAR, H(0, 1, 0))
    with pytest.raises(SearchExhausted):
        avoid_step(base, inst, ((1, 0, 0), (0, 0, -1), (0, 1, 0)), H(0, 1, 0), BuildConfig(depth=0))


# --------------------------------------------------------------------------
# quadruples

@pytest.fixture(scope="module")
def quad():
    return quad_start(SHEAR, P(1, 0, 0), THREE_CYCLE)


def test_quad_start(quad):
    q, cert = quad
    assert verify_quadruple(q).ok and q.nbhd_contains_attracting()
    check_quad_assumption1(q, SHEAR, P(1, 0, 0))
    assert cert.check(q.base) and cert.full.revalidate()[0]


def test_quad_start_rejections():
    with pytest.raises(PreconditionViolated):
        quad_start(((1, 0, 0), (0, 1, 0), (0, 0, 1)), P(1, 0, 0), THREE_CYCLE)
    with pytest.raises(PreconditionViolated):
        quad_start(SHEAR, P(1, 0, 0), SHEAR)


@pytest.mark.parametrize("h, branch", [(((1, 0, 0), (0, 1, 0), (1, 0, 1)), "h"),
                                       (complete_basis((1, 1, -1)), "g^-1 h g")])
def test_quad_extend_branches(quad, h, branch):
    q, _ = quad
    y = apply_point(h, P(1, 0, 0))
    assert any(b.contains_open(y) for b in q.open_nbhd.balls) == (branch != "h")
    q2, cert, got = quad_extend(q, SHEAR, P(1, 0, 0), h)
    assert got == branch
    assert verify_quadruple(q2).ok and q2.base.contains(q.base)
    check_quad_assumption1(q2, SHEAR, P(1, 0, 0))
    assert cert.ok and cert.revalidate()[0]


def test_quad_extend_rejects_identity(quad):
    with pytest.raises(PreconditionViolated):
        quad_extend(quad[0], SHEAR, P(1, 0, 0), ((1, 0, 0), (0, 1, 0), (0, 0, 1)))
