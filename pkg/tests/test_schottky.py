import random
from fractions import Fraction as F

import pytest

from conftest import H, P
from pingpong.errors import IndexOutOfRange, PointNotOnHyperplane, PreconditionViolated, SearchExhausted
from pingpong.exact_core import (Ball, Region, apply_hyperplane, apply_point, dist2_hyperplanes,
                                 dist2_point_hyperplane, dist2_points, identity)
from pingpong.congruence import in_kernel
from pingpong.schottky import (Generator, SchottkySystem, SearchBudget, add_generator, conjugator_search,
                               evaluate_word, invert_word, random_reduced_word, reduce_word, throw,
                               verify_system, z2_pair_cert)
from pingpong.unipotent import elementary, from_pair, power

E12 = elementary(3, 0, 1).matrix
E13 = elementary(3, 0, 2).matrix
E21 = elementary(3, 1, 0).matrix
SWAP = ((0, -1, 0), (1, 0, 0), (0, 0, 1))


def single(eps2=F(1, 100)):
    u = power(elementary(3, 0, 1), 22)
    A = Region((Ball(u.point, F(1, 100)),))
    R = A.with_tube(u.hyperplane, F(1, 4))
    return SchottkySystem((Generator(u, eps2, F(1, 4)),), A, R)


def test_verify_single_generator():
    assert verify_system(single()).ok


def test_verify_reports_condition_3():
    rep = verify_system(single(F(1, 2)))
    assert not rep.ok
    assert "3" in {v.condition for v in rep.violations}


def test_verify_reports_condition_2():
    u1 = power(elementary(3, 0, 1), 500)
    u3 = power(from_pair(P(0, 0, 1), H(0, 1, 0)), 500)   # L3 passes through p1 = [1:0:0]
    A = Region((Ball(u1.point, F(1, 10000)), Ball(u3.point, F(1, 10000))))
    R = A.with_tube(u1.hyperplane, F(1, 10000))
    sys = SchottkySystem((Generator(u1, F(1, 10000), F(1, 10000)), Generator(u3, F(1, 10000), F(1, 10000))), A, R)
    rep = verify_system(sys)
    assert not rep.ok
    assert any(v.condition == "2" for v in rep.violations)


def test_words():
    assert reduce_word([(0, 2), (0, -2), (1, 1), (1, 2), (2, 0)]) == ((1, 3),)
    assert invert_word(((0, 1), (1, -2))) == ((1, 2), (0, -1))
    sys = single()
    assert evaluate_word(sys, ()) == identity(3)
    assert evaluate_word(sys, ((0, 3),)) == power(sys.generators[0].u, 3).matrix
    with pytest.raises(IndexOutOfRange):
        evaluate_word(sys, ((1, 1),))


def test_add_generator_example():
    # [0:0:1] lies on L of the base generator, so use [0:1:0] on ker(1,0,0)
    sys = add_generator(single(), P(0, 1, 0), H(1, 0, 0), F(1, 100), F(1, 100))
    assert len(sys.generators) == 2 and verify_system(sys).ok
    assert sys.contains(single())
    w = ((0, 1), (1, 1), (0, -1), (1, -1))
    assert evaluate_word(sys, w) != identity(3)


def test_add_generator_rejections():
    with pytest.raises(PreconditionViolated):
        add_generator(single(), P(1, 0, 1000), H(0, 1, 0), F(1, 100), F(1, 100))
    with pytest.raises(PointNotOnHyperplane):
        add_generator(single(), P(0, 0, 1), H(0, 0, 1), F(1, 100), F(1, 100))


def test_z2_pair_oracles():
    assert z2_pair_cert(elementary(3, 0, 1), E13).ok
    assert not z2_pair_cert(elementary(3, 0, 1), E21).ok
    assert not z2_pair_cert(elementary(3, 0, 1), power(elementary(3, 0, 1), 5).matrix).ok


def _throw_base():
    u = power(from_pair(P(1, 1, 1), H(1, 1, -2)), 10 ** 4)
    A = Region((Ball(u.point, F(1, 400)),))
    R = A.with_tube(u.hyperplane, F(1, 400))
    return SchottkySystem((Generator(u, F(1, 400), F(1, 400)),), A, R)


def test_throw_signed_swap():
    base = _throw_base()
    assert verify_system(base).ok
    p2, L2 = P(1, 0, 0), H(0, 1, 1)
    p1, L1 = apply_point(SWAP, p2), H(1, 0, 2)
    assert p1 == P(0, 1, 0) and apply_hyperplane(SWAP, L2) != L1
    out, cert = throw(base, SWAP, p1, p2, L1, L2, F(1, 400), F(1, 400))
    assert verify_system(out).ok and out.contains(base)
    assert cert.pair.ok and z2_pair_cert(cert.pair.u, cert.pair.w).ok
    ok, problems = cert.revalidate()
    assert all("density" in p or "surjectivity" in p for p in problems)


def test_throw_rejections():
    base = _throw_base()
    p2, L2 = P(1, 0, 0), H(0, 1, 1)
    p1 = apply_point(SWAP, p2)
    L2b = H(0, 1, 3)
    with pytest.raises(PreconditionViolated, match="condition 3"):
        throw(base, SWAP, p1, p2, apply_hyperplane(SWAP, L2b), L2b, F(1, 400), F(1, 400))
    with pytest.raises(PreconditionViolated, match="condition 3"):
        throw(base, identity(3), p1, p2, H(1, 0, 2), L2, F(1, 400), F(1, 400))
    with pytest.raises(PreconditionViolated, match="condition 1"):
        throw(base, SWAP, p1, p2, H(1, 0, 2), L2, F(1, 7), F(1, 7))


def test_conjugator_search_examples():
    src, dst = (P(1, 0, 0), H(0, 1, 0)), (P(0, 1, 0), H(1, 0, 0))
    assert conjugator_search(src, src, F(1, 4), F(1, 4)) == identity(3)
    g = conjugator_search(src, dst, F(1, 4), F(1, 4))
    assert sorted(abs(x) for row in g for x in row) == [0] * 6 + [1] * 3
    assert dist2_points(apply_point(g, src[0]), dst[0]) < F(1, 4)
    assert dist2_hyperplanes(apply_hyperplane(g, src[1]), dst[1]) < F(1, 4)
    g = conjugator_search(src, (P(1, 3, 0), H(3, -1, 0)), F(1, 100), F(1, 100), kernel=3)
    assert in_kernel(g, 3)
    with pytest.raises(SearchExhausted):
        conjugator_search(src, dst, F(1, 10 ** 6), F(1, 10 ** 6), budget=SearchBudget(depth=0))


def test_freeness_and_distinct_words(dense_system, added_system, thrown):
    rng = random.Random(3)
    for sys in (dense_system, added_system, thrown[0]):
        k = len(sys.generators)
        for _ in range(150):
            w1 = random_reduced_word(k, 8, rng)
            w2 = random_reduced_word(k, 8, rng)
            assert evaluate_word(sys, w1) != identity(3)
            quotient = reduce_word(w1 + invert_word(w2))
            if quotient:
                assert evaluate_word(sys, w1) != evaluate_word(sys, w2)


def test_monotonicity(dense_system, added_system, thrown):
    for big in (added_system, thrown[0]):
        assert big.contains(dense_system)
        assert set(dense_system.generators) <= set(big.generators)
        assert set(dense_system.attracting.balls) <= set(big.attracting.balls)
        assert set(dense_system.repelling.tubes) <= set(big.repelling.tubes)


def test_verified_system_sampling_soundness(added_system):
    # random rational points outside each tube must land in the ball for k = ±1, ±3
    rng = random.Random(11)
    for g in added_system.generators:
        hits = 0
        while hits < 200:
            x = P(*(rng.randint(-10 ** 6, 10 ** 6) for _ in range(3)))
            if dist2_point_hyperplane(x, g.u.hyperplane) < g.del2:
                continue
            hits += 1
            for k in (1, -1, 3, -3):
                assert dist2_points(g.u.apply_point(x, k), g.u.point) < g.eps2
