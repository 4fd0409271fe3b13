"""Constructions of Schottky systems in SL(n, Z).

* build_profinitely_dense: a system whose generators reduce to the
  elementary matrices mod 3 and mod q^2, with all balls and tubes inside a
  prescribed [p]_eps and [L]_del.
* starting_system: a system S and an element k with
  <S> ∩ k<S>k^-1 nontrivial and <S, k> = SL(n, Z).
* family_spec / family_member / family_union_cert: one system per binary
  string, any two of which generate SL(n, Z) together.
* avoid_step, quad_start, quad_extend: single steps of the recursive
  extensions, plus finite drivers.

All region conditions are decided exactly.  The universally quantified
"for every x" hypotheses of the recursive steps are checked at the
witness points the step actually uses; everything else is exact.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from . import congruence
from .congruence import DensityWitness, density_witness, in_kernel, sl_order_formula
from .errors import EqualFunctions, PreconditionViolated, SearchExhausted
from .exact_core import (Ball, Matrix, ProjHyperplane, ProjPoint, Region, Tube, apply_hyperplane,
                         apply_point, ball_inside_ball, ball_misses_region, det, disjoint_ball_tube,
                         disjoint_balls, dist2_hyperplanes, dist2_point_hyperplane,
                         dist2_points, dot, identity, inverse, lipschitz_bound,
                         matmul, matvec, primitive, sqrt_gt_sum, tube_inside_tube,
                         tube_misses_region, vecmat)
from .lattice import (congruent_orthogonal_covector, congruent_vector, kernel_transporter,
                      lll_reduce, reducer)
from .schottky import (FullGroupCert, Generator, SchottkyQuadruple, SchottkySystem, Word,
                       add_generator, evaluate_word, full_group_cert, throw, verify_quadruple,
                       verify_system)
from .unipotent import (Rank1Unipotent, contraction_power, elementary, from_pair, power)


@dataclass(frozen=True)
class BuildConfig:
    q: int = 2                      # second batch lives in K_{q^2}
    moduli: Tuple[int, ...] = (3, 4)
    depth: int = 24                 # perturbation / enumeration budget
    seed: int = 0
    cap: int = congruence.DEFAULT_CAP


DEFAULT_CONFIG = BuildConfig()


# --------------------------------------------------------------------------
# small helpers

def _unit(x: Sequence) -> List[float]:
    norm = math.sqrt(sum(float(t) ** 2 for t in x))
    return [float(t) / norm for t in x]


def _period(n: int, d: int, cap: int) -> int:
    """A multiple of the exponent of SL(n, Z/d): the exponent itself when
    the group is small enough to enumerate, the group order otherwise."""
    if sl_order_formula(n, d) <= 10 ** 6:
        return congruence.exponent_of(d, n, cap)
    return sl_order_formula(n, d)


def _orth_basis(x: Sequence[int]) -> List[tuple]:
    """LLL-reduced integer basis of the vectors orthogonal to x."""
    m = reducer(x)
    return lll_reduce([m[r] for r in range(1, len(x))])


def _combos(basis: Sequence[Sequence[int]], bound: int):
    """Primitive small combinations of basis rows, roughly by size, one per
    projective class."""
    k = len(basis)
    seen = set()
    for b in range(1, bound + 1):
        for coeffs in itertools.product(range(-b, b + 1), repeat=k):
            if max(abs(c) for c in coeffs) != b:
                continue
            vec = tuple(sum(c * row[i] for c, row in zip(coeffs, basis)) for i in range(len(basis[0])))
            if not any(vec):
                continue
            prim = primitive(vec)
            if prim not in seen:
                seen.add(prim)
                yield prim


def points_on(L: ProjHyperplane, bound: int):
    for x in _combos(_orth_basis(L.covector), bound):
        yield ProjPoint(x)


def hyperplanes_through(x: ProjPoint, bound: int):
    for f in _combos(_orth_basis(x.coords), bound):
        yield ProjHyperplane(f)


def hyperplane_near(x: ProjPoint, direction: Sequence[int]) -> Optional[ProjHyperplane]:
    """The hyperplane through x whose covector is the orthogonal projection
    of direction onto x^perp (exact, then made primitive)."""
    xx = dot(x.coords, x.coords)
    fx = dot(direction, x.coords)
    f = tuple(xx * a - fx * b for a, b in zip(direction, x.coords))
    if not any(f):
        return None
    return ProjHyperplane(f)


def _halvings(start: int, stop: int):
    """Squared radii 4^-j for j = start..stop-1 (radius 2^-j)."""
    for j in range(start, stop):
        yield Fraction(1, 4 ** j)


def _first_radius(ok, start: int = 1, budget: int = 80, stage: str = "radius"):
    for r2 in _halvings(start, start + budget):
        if ok(r2):
            return r2
    raise SearchExhausted(stage, budget)


def _log2_floor_inv(x: float) -> int:
    return max(1, int(math.floor(-math.log2(x))) if x > 0 else 1)


def _misses_balls(L: ProjHyperplane, balls: Sequence[Ball], del2=0) -> bool:
    return all(disjoint_ball_tube(b.center, b.radius2, L, del2) for b in balls)


def _in_open_balls(x: ProjPoint, balls: Sequence[Ball]) -> bool:
    return any(dist2_points(b.center, x) < b.radius2 for b in balls)


def _outside_closed(x: ProjPoint, R: Region) -> bool:
    return ball_misses_region(x, 0, R)


# --------------------------------------------------------------------------
# profinitely dense systems

@dataclass(frozen=True)
class BatchRecord:
    """u = g e_{a,b}^s g^-1 with g = I mod modulus and s = 1 mod period."""

    index: int
    elementary: Tuple[int, int]
    conjugator: Matrix
    exponent: int
    modulus: int
    period: int

    def check(self, u: Rank1Unipotent) -> bool:
        n = len(self.conjugator)
        a, b = self.elementary
        g = self.conjugator
        e = elementary(n, a, b, self.exponent).matrix
        return (matmul(matmul(g, e), inverse(g)) == u.matrix
                and in_kernel(g, self.modulus)
                and self.exponent % self.period == 1 % self.period)


@dataclass(frozen=True)
class DenseBuild:
    system: SchottkySystem
    density: DensityWitness
    batches: Tuple[BatchRecord, ...]
    exact_index: Optional[int] = None    # generator with exact (p, L) data

    def __iter__(self):
        return iter((self.system, self.density))

    def structure_ok(self) -> bool:
        gens = self.system.generators
        return all(rec.check(gens[rec.index].u) for rec in self.batches)


def _anchor_directions(p: ProjPoint, L: ProjHyperplane, eps: float, count: int):
    """count anchor (point, covector) float directions inside [p]_eps,
    offset from p along the normal of L by distinct amounts."""
    P, F = _unit(p.coords), _unit(L.covector)
    step = eps / (2 * (count + 1))
    out = []
    for j in range(1, count + 1):
        tau = step * j
        out.append(([a + tau * b for a, b in zip(P, F)], [b - tau * a for a, b in zip(P, F)]))
    return out, step


def build_profinitely_dense(p: ProjPoint, L: ProjHyperplane, eps2, del2,
                            config: BuildConfig = DEFAULT_CONFIG, exact_anchor: bool = False) -> DenseBuild:
    """A verified system with A = [p]_eps, R = [L]_del and 2n^2 - 2n
    generators, reducing to every elementary matrix mod 3 (first batch)
    and mod q^2 (second batch).

    With exact_anchor an extra generator with attracting point p and
    fixed hyperplane L exactly is appended.
    """
    eps2, del2 = Fraction(eps2), Fraction(del2)
    if not L.contains(p):
        raise PreconditionViolated("p ∈ L", f"{p!r} is not on {L!r}")
    if not (0 < eps2 <= del2):
        raise PreconditionViolated("del >= eps > 0", f"eps2={eps2}, del2={del2}")
    n = p.n
    if n < 3:
        raise PreconditionViolated("n >= 3", f"n = {n}")
    d2 = config.q ** 2
    if 3 not in config.moduli or d2 not in config.moduli:
        raise PreconditionViolated("moduli contain 3 and q^2", f"moduli={config.moduli}, q={config.q}")
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    plan = [(ab, 3) for ab in pairs] + [(ab, d2) for ab in pairs]
    periods = {3: _period(n, 3, config.cap), d2: _period(n, d2, config.cap)}
    eps = math.sqrt(eps2)
    dirs, step = _anchor_directions(p, L, eps, len(plan))

    scale_boost = 1
    for _attempt in range(config.depth):
        data = []
        for (ab, d), (pd, fd) in zip(plan, dirs):
            a, b = ab
            sv = int(100 * d * math.sqrt(n) / step) * scale_boost + 1
            v = congruent_vector(pd, [int(r == a) for r in range(n)], d, sv)
            vlen = math.sqrt(dot(v, v))
            sf = int(200 * d * vlen ** (1 / (n - 1)) / step) * scale_boost + 1
            f = congruent_orthogonal_covector(v, fd, [int(r == b) for r in range(n)], d, sf)
            data.append((ab, d, v, f))
        pts = [ProjPoint(v) for _, _, v, _ in data]
        hps = [ProjHyperplane(f) for _, _, _, f in data]
        if exact_anchor:
            pts.append(p)
            hps.append(L)

        def ok(r2):
            if r2 > eps2:
                return False
            for x in pts:
                if not ball_inside_ball(x, r2, p, eps2):
                    return False
            for M in hps:
                if not tube_inside_tube(M, r2, L, del2):
                    return False
            return all(disjoint_ball_tube(x, r2, M, r2)
                       for i, x in enumerate(pts) for j, M in enumerate(hps) if i != j)

        try:
            rho2 = _first_radius(ok, _log2_floor_inv(step / 3), budget=6, stage="dense radii")
        except SearchExhausted:
            scale_boost *= 4
            continue
        break
    else:
        raise SearchExhausted("build_profinitely_dense", config.depth)

    gens, records = [], []
    for idx, (ab, d, v, f) in enumerate(data):
        t = periods[d]
        base = Rank1Unipotent(v, f, 1)
        c = contraction_power(base, rho2, rho2)
        s = 1 + t * max(0, -(-(c - 1) // t))
        u = Rank1Unipotent(v, f, s)
        g = kernel_transporter(v, f, ab[0], ab[1], d)
        rec = BatchRecord(idx, ab, g, s, d, t)
        assert rec.check(u)
        gens.append(Generator(u, rho2, rho2))
        records.append(rec)
    exact_index = None
    if exact_anchor:
        u0 = from_pair(p, L)
        gens.append(Generator(power(u0, contraction_power(u0, rho2, rho2)), rho2, rho2))
        exact_index = len(gens) - 1
    moduli = tuple(sorted(set(config.moduli)))
    witness = density_witness([g.u.matrix for g in gens[:len(records)]], moduli, config.cap,
                              recipe_conformant=True,
                              assumptions=(f"first batch conjugated by K_3, exponents 1 mod {periods[3]}",
                                           f"second batch conjugated by K_{d2}, exponents 1 mod {periods[d2]}"))
    if not all(witness.surjective):
        raise AssertionError(f"dense builder lost surjectivity: {witness}")
    A = Region((Ball(p, eps2),))
    R = Region((), (Tube(L, del2),))
    sys = SchottkySystem(tuple(gens), A, R, witness, len(records))
    result = verify_system(sys)
    if not result.ok:
        raise AssertionError(f"dense builder produced an invalid system: {result}")
    return DenseBuild(sys, witness, tuple(records), exact_index)


# --------------------------------------------------------------------------
# starting system: <S> ∩ k<S>k^-1 nontrivial and <S, k> = SL(n, Z)

@dataclass(frozen=True)
class StartCert:
    k: Matrix
    w2: Matrix
    word_in_s: Word            # w2 as a word in the system generators
    conj_word: Word            # w2 = k * conj_word * k^-1
    full: FullGroupCert

    def check(self, sys: SchottkySystem) -> bool:
        a = evaluate_word(sys, self.word_in_s)
        b = matmul(matmul(self.k, evaluate_word(sys, self.conj_word)), inverse(self.k))
        return a == self.w2 == b and self.w2 != identity(len(self.k))


def _check_start_bullets(k, anchors, eps2, del2):
    (p1, L1), (p2, L2), (p3, L3) = anchors
    for i, (p, L) in enumerate(anchors, start=1):
        if not L.contains(p):
            raise PreconditionViolated(f"p{i} ∈ L{i}", f"{p!r} is not on {L!r}")
    for i, (p, _) in enumerate(anchors, start=1):
        for j, (_, L) in enumerate(anchors, start=1):
            if i != j and not disjoint_ball_tube(p, eps2, L, del2):
                raise PreconditionViolated(
                    f"[p{i}]_eps ∩ [L{j}]_del = ∅",
                    f"need sqrt({dist2_point_hyperplane(p, L)}) > sqrt({eps2}) + sqrt({del2})")
    k2 = matmul(k, k)
    if apply_point(k, p1) != p2:
        raise PreconditionViolated("p2 = k p1", f"k p1 = {apply_point(k, p1)!r}")
    if apply_point(k2, p1) != p3:
        raise PreconditionViolated("p3 = k^2 p1", f"k^2 p1 = {apply_point(k2, p1)!r}")
    if apply_hyperplane(k, L1) != L2:
        raise PreconditionViolated("L2 = k L1", f"k L1 = {apply_hyperplane(k, L1)!r}")
    if apply_hyperplane(k2, L1) == L3:
        raise PreconditionViolated("L3 != k^2 L1", f"k^2 L1 = {L3!r}")


def starting_system(k: Matrix, anchors, eps2, del2, config: BuildConfig = DEFAULT_CONFIG):
    """System S with w2 ∈ <S> ∩ k<S>k^-1 and a certificate for <S, k>.

    S is a dense system about (p1, L1) containing an exact u1 at (p1, L1),
    plus w2 = k u1^j k^-1 (data (p2, L2)) and a power w3 of the unipotent
    at (p3, L3).  The Z^2 pair is (u1, k^-2 w3 k^2).
    """
    eps2, del2 = Fraction(eps2), Fraction(del2)
    k = tuple(map(tuple, k))
    if det(k) != 1:
        raise PreconditionViolated("k ∈ SL(n, Z)", f"det = {det(k)}")
    anchors = tuple((p, L) for p, L in anchors)
    if len(anchors) != 3:
        raise PreconditionViolated("three anchors", f"got {len(anchors)}")
    if not (0 < eps2 <= del2):
        raise PreconditionViolated("del >= eps > 0", f"eps2={eps2}, del2={del2}")
    _check_start_bullets(k, anchors, eps2, del2)
    (p1, L1), (p2, L2), (p3, L3) = anchors
    build = build_profinitely_dense(p1, L1, eps2, del2, config, exact_anchor=True)
    s0 = build.system
    i1 = build.exact_index
    u1 = s0.generators[i1].u
    prim = Rank1Unipotent(matvec(k, u1.v), vecmat(u1.f, inverse(k)), 1)
    need = contraction_power(prim, eps2, del2)
    j = -(-need // abs(u1.m))
    w2 = Rank1Unipotent(matvec(k, u1.v), vecmat(u1.f, inverse(k)), u1.m * j)
    assert w2.matrix == matmul(matmul(k, power(u1, j).matrix), inverse(k))
    u3 = from_pair(p3, L3)
    w3 = power(u3, contraction_power(u3, eps2, del2))
    sys = s0.extend([Generator(w2, eps2, del2), Generator(w3, eps2, del2)],
                    s0.attracting.with_ball(p2, eps2).with_ball(p3, eps2),
                    s0.repelling.with_tube(L2, del2).with_tube(L3, del2))
    result = verify_system(sys)
    if not result.ok:
        raise AssertionError(f"starting system failed verification: {result}")
    i2, i3 = len(s0.generators), len(s0.generators) + 1
    kk = len(sys.generators)
    full = full_group_cert(sys, [k], (i1, 1), [(kk, -2), (i3, 1), (kk, 2)],
                           density=s0.density, density_indices=range(s0.dense_prefix),
                           notes=("pair = (u1, k^-2 w3 k^2); last group generator is k",))
    cert = StartCert(k, w2.matrix, ((i2, 1),), ((i1, j),), full)
    assert cert.check(sys)
    return sys, cert


# --------------------------------------------------------------------------
# families indexed by binary strings

@dataclass(frozen=True)
class FamilyAnchor:
    p: ProjPoint
    L: ProjHyperplane
    eps2: Fraction
    del2: Fraction


@dataclass(frozen=True)
class FamilySpec:
    base: SchottkySystem
    anchors: Tuple[FamilyAnchor, ...]
    choices: Tuple[Tuple[Generator, Generator], ...]   # (u_{i,0}, u_{i,1}) per slot

    @property
    def size(self) -> int:
        return len(self.anchors)


def check_family_anchors(base: SchottkySystem, anchors: Sequence[FamilyAnchor]):
    for i, a in enumerate(anchors):
        if not a.L.contains(a.p):
            raise PreconditionViolated(f"p_{i} ∈ L_{i}")
        if not ball_misses_region(a.p, a.eps2, base.repelling):
            raise PreconditionViolated(f"[p_{i}]_eps ∩ R0 = ∅")
        if not tube_misses_region(a.L, a.del2, base.attracting):
            raise PreconditionViolated(f"[L_{i}]_del ∩ A0 = ∅")
        for j, b in enumerate(anchors):
            if i != j and not disjoint_ball_tube(a.p, a.eps2, b.L, b.del2):
                raise PreconditionViolated(f"[p_{i}]_eps ∩ [L_{j}]_del = ∅")


def _tilted(a: FamilyAnchor, gen_eps2) -> ProjHyperplane:
    """A hyperplane through p other than L whose gen_eps2-tube stays in
    the del-tube of L."""
    other = next(h for h in hyperplanes_through(a.p, 3) if h != a.L)
    for j in range(1, 200):
        M = 2 ** j
        f = tuple(M * x + y for x, y in zip(a.L.covector, other.covector))
        cand = ProjHyperplane(f)
        if cand != a.L and tube_inside_tube(cand, gen_eps2, a.L, a.del2):
            return cand
    raise SearchExhausted("family tilt", 200)


def family_spec(size: int, config: BuildConfig = DEFAULT_CONFIG,
                base: Optional[SchottkySystem] = None) -> FamilySpec:
    """Anchors at points (1, t, t^2) of the conic with tangent lines, for
    t = 1 + i/size; the base is a dense system about [0:1:0], ker(1,0,0)."""
    if size < 1:
        raise PreconditionViolated("size >= 1")
    if base is None:
        base = build_profinitely_dense(ProjPoint((0, 1, 0)), ProjHyperplane((1, 0, 0)),
                                       Fraction(1, 400), Fraction(1, 400), config).system
    if base.n != 3:
        raise PreconditionViolated("family anchors live in P^2", f"n = {base.n}")
    pts, hps = [], []
    for i in range(1, size + 1):
        a, b = size + i, size
        pts.append(ProjPoint((b * b, a * b, a * a)))
        hps.append(ProjHyperplane((a * a, -2 * a * b, b * b)))

    def ok(r2):
        anchors = [FamilyAnchor(x, M, r2, 4 * r2) for x, M in zip(pts, hps)]
        try:
            check_family_anchors(base, anchors)
        except PreconditionViolated:
            return False
        return True

    r2 = _first_radius(ok, 1, 80, "family radii")
    anchors = tuple(FamilyAnchor(x, M, r2, 4 * r2) for x, M in zip(pts, hps))
    choices = []
    for a in anchors:
        u0 = from_pair(a.p, a.L)
        u1 = from_pair(a.p, _tilted(a, r2))
        choices.append((Generator(power(u0, contraction_power(u0, r2, r2)), r2, r2),
                        Generator(power(u1, contraction_power(u1, r2, r2)), r2, r2)))
    return FamilySpec(base, anchors, tuple(choices))


def _bits(spec: FamilySpec, bits) -> Tuple[int, ...]:
    out = tuple(int(b) for b in bits)
    if len(out) != spec.size or any(b not in (0, 1) for b in out):
        raise PreconditionViolated("bits is a binary string of the family length",
                                   f"got {bits!r}, need length {spec.size}")
    return out


def family_member(spec: FamilySpec, bits) -> SchottkySystem:
    bits = _bits(spec, bits)
    check_family_anchors(spec.base, spec.anchors)
    A, R = spec.base.attracting, spec.base.repelling
    for a in spec.anchors:
        A = A.with_ball(a.p, a.eps2)
        R = R.with_tube(a.L, a.del2)
    sys = spec.base.extend([pair[b] for pair, b in zip(spec.choices, bits)], A, R)
    result = verify_system(sys)
    if not result.ok:
        raise AssertionError(f"family member failed verification: {result}")
    return sys


def family_union_cert(spec: FamilySpec, f, g) -> FullGroupCert:
    """Certificate for <S_f ∪ S_g> from the first slot where f and g differ."""
    f, g = _bits(spec, f), _bits(spec, g)
    if f == g:
        raise EqualFunctions("f and g coincide")
    first = next(i for i in range(spec.size) if f[i] != g[i])
    mats = list(spec.base.matrices)
    index = {}
    for i, pair in enumerate(spec.choices):
        for b in sorted({f[i], g[i]}):
            index[(i, b)] = len(mats)
            mats.append(pair[b].u.matrix)
    from .schottky import z2_pair_cert
    pair = z2_pair_cert(spec.choices[first][0].u, spec.choices[first][1].u.matrix)
    if not pair.ok:
        raise AssertionError(f"slot {first} pair rejected: {pair.reason}")
    return FullGroupCert(tuple(mats), pair,
                         (((index[(first, 0)], 1),), ((index[(first, 1)], 1),)),
                         spec.base.density, tuple(range(spec.base.dense_prefix)),
                         (f"pair from slot {first}: same attracting point, distinct hyperplanes",))


# --------------------------------------------------------------------------
# avoidance steps

@dataclass(frozen=True)
class AvoidanceInstance:
    L0: ProjHyperplane
    L1: ProjHyperplane
    L2: ProjHyperplane
    p0: ProjPoint
    rho2: Fraction

    def __post_init__(self):
        object.__setattr__(self, "rho2", Fraction(self.rho2))
        if len({self.L0, self.L1, self.L2}) != 3:
            raise PreconditionViolated("L0, L1, L2 pairwise distinct")
        if not self.L0.contains(self.p0) or self.L1.contains(self.p0) or self.L2.contains(self.p0):
            raise PreconditionViolated("p0 ∈ L0 \\ (L1 ∪ L2)")
        if self.rho2 <= 0:
            raise PreconditionViolated("rho > 0")


def avoidance_base(inst: AvoidanceInstance, config: BuildConfig = DEFAULT_CONFIG) -> SchottkySystem:
    """Dense system with A0 = [p0]_rho and R0 = [L0]_rho ∪ [L1]_rho."""
    s0 = build_profinitely_dense(inst.p0, inst.L0, inst.rho2, inst.rho2, config).system
    sys = SchottkySystem(s0.generators, s0.attracting, s0.repelling.with_tube(inst.L1, inst.rho2),
                         s0.density, s0.dense_prefix)
    check_avoidance_hypotheses(sys, inst)
    return sys


def check_avoidance_hypotheses(sys: SchottkySystem, inst: AvoidanceInstance):
    """The structural hypotheses, checked exactly: [L0 ∪ L1]_rho ⊆ R,
    [p0]_rho ⊆ A, A ⊆ R, A a union of balls, and sys verified."""
    for name, L in (("L0", inst.L0), ("L1", inst.L1)):
        if Tube(L, inst.rho2) not in sys.repelling.tubes and not any(
                tube_inside_tube(L, inst.rho2, t.hyperplane, t.radius2) for t in sys.repelling.tubes):
            raise PreconditionViolated(f"[{name}]_rho ⊆ R")
    if not any(ball_inside_ball(inst.p0, inst.rho2, b.center, b.radius2) for b in sys.attracting.balls):
        raise PreconditionViolated("[p0]_rho ⊆ A")
    if sys.attracting.tubes:
        raise PreconditionViolated("A is a union of balls")
    result = verify_system(sys)
    if not result.ok:
        raise PreconditionViolated("input is a Schottky system", str(result.violations))


def _throw_with_radius(sys, elem, P1, P2, M1, M2, stage, budget=80):
    last = None
    for r2 in _halvings(1, budget):
        try:
            return throw(sys, elem, P1, P2, M1, M2, r2, r2)
        except PreconditionViolated as exc:
            last = exc
    raise SearchExhausted(f"{stage} (last failure: {last})", budget)


def avoid_step(sys: SchottkySystem, inst: AvoidanceInstance, g: Matrix, L: ProjHyperplane,
               config: BuildConfig = DEFAULT_CONFIG):
    """Extend sys to S+ with a certificate for <S+, g> = SL(n, Z), given a
    hyperplane L inside the rho-tube of L2 with gL inside the rho-tube of L1."""
    g = tuple(map(tuple, g))
    n = sys.n
    if g == identity(n) or det(g) != 1:
        raise PreconditionViolated("g is a non-identity element of SL(n, Z)")
    if not tube_inside_tube(L, 0, inst.L2, inst.rho2):
        raise PreconditionViolated("L ⊆ [L2]_rho", f"dist^2(L, L2) = {dist2_hyperplanes(L, inst.L2)}")
    gL = apply_hyperplane(g, L)
    if not tube_inside_tube(gL, 0, inst.L1, inst.rho2):
        raise PreconditionViolated("gL ⊆ [L1]_rho", f"dist^2(gL, L1) = {dist2_hyperplanes(gL, inst.L1)}")
    check_avoidance_hypotheses(sys, inst)
    budget = config.depth
    if budget <= 0:
        raise SearchExhausted("avoid_step: witness w", budget)
    A, R = sys.attracting, sys.repelling
    bound = max(2, min(budget, 6))

    # w ∈ L outside A ∪ R, with L_w through w missing A and leaving [L2]_rho
    found = None
    for w in points_on(L, bound):
        if not (_outside_closed(w, A) and _outside_closed(w, R)):
            continue
        for Lw in hyperplanes_through(w, bound):
            if _misses_balls(Lw, A.balls) and not tube_inside_tube(Lw, 0, inst.L2, inst.rho2):
                found = (w, Lw)
                break
        if found:
            break
    if not found:
        raise SearchExhausted("avoid_step: witness w", budget)
    w, Lw = found
    w1 = apply_point(g, w)

    # helper unipotent u at (p1, L_{w1}) with w1 ∈ L_{w1}
    found = None
    for Lw1 in hyperplanes_through(w1, bound):
        if Lw1.contains(w) or not _misses_balls(Lw1, A.balls):
            continue
        for p1 in points_on(Lw1, bound):
            if (Lw.contains(p1) or not _outside_closed(p1, R)
                    or not disjoint_ball_tube(p1, 0, inst.L2, inst.rho2)):
                continue

            def ok(r2, p1=p1, Lw1=Lw1):
                return (ball_misses_region(p1, r2, R) and _misses_balls(Lw1, A.balls, r2)
                        and disjoint_ball_tube(w, 0, Lw1, r2) and disjoint_balls(w, 0, p1, r2)
                        and disjoint_ball_tube(p1, r2, Lw, 0))
            try:
                found = (Lw1, p1, _first_radius(ok, 1, 60, "avoid_step: helper radius"))
            except SearchExhausted:
                continue
            break
        if found:
            break
    if not found:
        raise SearchExhausted("avoid_step: helper hyperplane L_{w1}", budget)
    Lw1, p1, r2 = found
    s_star = add_generator(sys, p1, Lw1, r2, r2)
    iu = len(s_star.generators) - 1
    u = s_star.generators[iu].u.matrix
    h = matmul(matmul(inverse(g), u), g)
    assert apply_point(h, w) == w
    A2, R2 = s_star.attracting, s_star.repelling

    # p2 near w with p3 = h p2, and hyperplanes near L_w through each
    result = None
    units = [tuple(s * int(r == i) for r in range(n)) for i in range(n) for s in (1, -1)]
    for j in range(1, budget + 1):
        M = 2 ** j
        for e in units:
            p2 = ProjPoint(tuple(M * x + y for x, y in zip(w.coords, e)))
            p3 = apply_point(h, p2)
            if p3 == p2 or not all(_outside_closed(x, A2) and _outside_closed(x, R2) for x in (p2, p3)):
                continue
            for tweak in [None] + units:
                phi = Lw.covector if tweak is None else tuple(M * a + b for a, b in zip(Lw.covector, tweak))
                M2, M3 = hyperplane_near(p2, phi), hyperplane_near(p3, Lw.covector)
                if M2 is None or M3 is None:
                    continue
                if (apply_hyperplane(h, M2) == M3 or M3.contains(p2) or M2.contains(p3)
                        or not _misses_balls(M2, A2.balls) or not _misses_balls(M3, A2.balls)):
                    continue
                try:
                    result = _throw_with_radius(s_star, h, p3, p2, M3, M2, "avoid_step: throw radii")
                except SearchExhausted:
                    continue
                break
            if result:
                break
        if result:
            break
    if not result:
        raise SearchExhausted("avoid_step: points p2, p3 near w", budget)
    s_plus, _ = result
    i_v2 = s_plus.index_of(s_plus.generators[-1].u)
    i_v1 = s_plus.index_of(s_plus.generators[-2].u)
    G = len(s_plus.generators)
    # h = g^-1 u g, pair (v2, h^-1 v1 h)
    word = [(G, -1), (iu, -1), (G, 1), (i_v1, 1), (G, -1), (iu, 1), (G, 1)]
    cert = full_group_cert(s_plus, [g], (i_v2, 1), word, density=sys.density,
                           density_indices=range(sys.dense_prefix),
                           notes=("h = g^-1 u g with u the helper generator",
                                  "pair = (v2, h^-1 v1 h); last group generator is g"))
    check_avoidance_hypotheses(s_plus, inst)
    return s_plus, cert


def drive_avoidance(sys: SchottkySystem, inst: AvoidanceInstance, steps, config: BuildConfig = DEFAULT_CONFIG):
    """Apply avoid_step for each (g, L) in a finite list."""
    certs = []
    for g, L in steps:
        sys, cert = avoid_step(sys, inst, g, L, config)
        certs.append(cert)
    return sys, certs


# --------------------------------------------------------------------------
# quadruples (S, A, N, R) with N a union of open balls

def check_quad_assumption1(quad: SchottkyQuadruple, g: Matrix, p: ProjPoint):
    """p ∉ N̄ ∪ R ∪ gN̄ ∪ gR and N̄ ∩ gN̄ = ∅, exactly.

    Since gp = p, p ∉ gX iff p ∉ X.  For N̄ ∩ gN̄ the image g[c]_r lies in
    [gc]_{Λ r} with Λ an integer Lipschitz bound for g.
    """
    N, R = quad.open_nbhd, quad.base.repelling
    if apply_point(g, p) != p:
        raise PreconditionViolated("g p = p")
    for b in N.balls:
        if not disjoint_balls(p, 0, b.center, b.radius2):
            raise PreconditionViolated("p ∉ N̄", f"ball {b.center!r} of radius^2 {b.radius2}")
    if not _outside_closed(p, R):
        raise PreconditionViolated("p ∉ R")
    lam2 = lipschitz_bound(g) ** 2
    for bi in N.balls:
        for bj in N.balls:
            if not sqrt_gt_sum(dist2_points(bi.center, apply_point(g, bj.center)), bi.radius2, lam2 * bj.radius2):
                raise PreconditionViolated("N̄ ∩ gN̄ = ∅", f"{bi.center!r} vs g{bj.center!r}")


def _n_disjoint_ok(balls, g, lam2):
    return all(sqrt_gt_sum(dist2_points(bi.center, apply_point(g, bj.center)), bi.radius2, lam2 * bj.radius2)
               for bi in balls for bj in balls)


def _small_points(n: int, bound: int):
    seen = set()
    for b in range(1, bound + 1):
        for x in itertools.product(range(-b, b + 1), repeat=n):
            if max(abs(c) for c in x) != b:
                continue
            prim = primitive(x)
            if prim not in seen:
                seen.add(prim)
                yield ProjPoint(prim)


def quad_start(g: Matrix, p: ProjPoint, k: Matrix, config: BuildConfig = DEFAULT_CONFIG):
    """A quadruple around p1, k p1, k^2 p1 with <S> ∩ k<S>k^-1 nontrivial
    and <S, k> = SL(n, Z), N = open del-balls about the three points."""
    g, k = tuple(map(tuple, g)), tuple(map(tuple, k))
    n = p.n
    I = identity(n)
    if g == I:
        raise PreconditionViolated("g is not the identity")
    if apply_point(g, p) != p:
        raise PreconditionViolated("g p = p", f"g p = {apply_point(g, p)!r}")
    k2 = matmul(k, k)
    six = [I, k, k2, g, matmul(g, k), matmul(g, k2)]
    if len(set(six)) != 6:
        raise PreconditionViolated("id, k, k^2, g, gk, gk^2 pairwise distinct")
    lam2 = lipschitz_bound(g) ** 2
    bound = max(2, min(config.depth, 3))
    for p1 in _small_points(n, bound):
        ps = [p1, apply_point(k, p1), apply_point(k2, p1)]
        allp = ps + [apply_point(g, x) for x in ps]
        if len(set(allp)) != 6 or p in allp:
            continue
        for L1 in hyperplanes_through(p1, bound):
            L2 = apply_hyperplane(k, L1)
            kL = apply_hyperplane(k2, L1)
            for L3 in hyperplanes_through(ps[2], bound):
                if L3 == kL:
                    continue
                Ls = [L1, L2, L3]
                if any(L.contains(p) for L in Ls):
                    continue
                if any(Ls[j].contains(ps[i]) for i in range(3) for j in range(3) if i != j):
                    continue

                def ok(r2):
                    balls = [Ball(x, r2) for x in ps]
                    return (all(disjoint_ball_tube(ps[i], r2, Ls[j], r2)
                                for i in range(3) for j in range(3) if i != j)
                            and _n_disjoint_ok(balls, g, lam2)
                            and all(disjoint_balls(p, 0, x, r2) for x in ps)
                            and all(disjoint_ball_tube(p, 0, L, r2) for L in Ls))
                try:
                    del2 = _first_radius(ok, 1, 30, "quad_start radii")
                except SearchExhausted:
                    continue
                eps2 = del2 / 4
                sys, cert = starting_system(k, list(zip(ps, Ls)), eps2, del2, config)
                N = Region(tuple(Ball(x, del2) for x in ps))
                quad = SchottkyQuadruple(sys, N)
                check_quad_assumption1(quad, g, p)
                if not verify_quadruple(quad).ok:
                    raise AssertionError("quad_start produced an invalid quadruple")
                return quad, cert
    raise SearchExhausted("quad_start: anchors", bound)


def quad_extend(quad: SchottkyQuadruple, g: Matrix, p: ProjPoint, h: Matrix,
                config: BuildConfig = DEFAULT_CONFIG):
    """Extend quad so that <S+, h> or <S+, g^-1 h g> is SL(n, Z).

    Returns (new quadruple, certificate, branch) with branch "h" or
    "g^-1 h g".
    """
    g, h = tuple(map(tuple, g)), tuple(map(tuple, h))
    sys = quad.base
    n = sys.n
    if h == identity(n):
        raise PreconditionViolated("h is not the identity")
    check_quad_assumption1(quad, g, p)
    if not verify_quadruple(quad).ok:
        raise PreconditionViolated("input is a Schottky quadruple")
    budget = config.depth
    if budget <= 0:
        raise SearchExhausted("quad_extend: witness L_y", budget)
    N = quad.open_nbhd
    lam2 = lipschitz_bound(g) ** 2
    branch, hb = "h", h
    y = apply_point(h, p)
    if _in_open_balls(y, N.balls):
        branch, hb = "g^-1 h g", matmul(matmul(inverse(g), h), g)
        y = apply_point(hb, p)
        assert not _in_open_balls(y, N.balls)
    A, R = sys.attracting, sys.repelling
    bound = max(2, min(budget, 5))

    def outside_nbar(x, balls):
        return all(disjoint_balls(x, 0, b.center, b.radius2) for b in balls)

    # (p_y, L_y): helper unipotent with y ∈ L_y
    found = None
    for Ly in hyperplanes_through(y, bound):
        if Ly.contains(p) or not _misses_balls(Ly, A.balls):
            continue
        for py in points_on(Ly, bound):
            gpy = apply_point(g, py)
            if gpy == py or not outside_nbar(py, N.balls) or not _outside_closed(py, R):
                continue
            if not outside_nbar(gpy, N.balls):
                continue

            def ok(r2, py=py, Ly=Ly):
                balls = N.balls + (Ball(py, r2),)
                return (ball_misses_region(py, r2, R) and _misses_balls(Ly, A.balls, r2)
                        and _n_disjoint_ok(balls, g, lam2)
                        and disjoint_balls(p, 0, py, r2) and disjoint_ball_tube(p, 0, Ly, r2))
            try:
                found = (Ly, py, _first_radius(ok, 1, 60, "quad_extend: helper radius"))
            except SearchExhausted:
                continue
            break
        if found:
            break
    if not found:
        raise SearchExhausted("quad_extend: witness L_y", budget)
    Ly, py, del2 = found
    s0 = add_generator(sys, py, Ly, del2 / 4, del2)
    N0 = N.with_ball(py, del2)
    iu = len(s0.generators) - 1
    u = s0.generators[iu].u
    hinv = inverse(hb)
    mm = 1
    while True:
        f = matmul(matmul(hinv, power(u, mm).matrix), hb)
        if f != g and matmul(g, f) != identity(n):
            break
        mm += 1
    assert apply_point(f, p) == p
    A0, R0 = s0.attracting, s0.repelling

    # p1 near p with p2 = f p1, g p1, g f p1 distinct; hyperplanes near
    # directions through p that miss A0
    phis = [H.covector for H in hyperplanes_through(p, bound) if _misses_balls(H, A0.balls)][:6]
    if len(phis) < 1:
        raise SearchExhausted("quad_extend: directions through p", budget)
    # small perturbation directions, shortest first; unit vectors alone can
    # be fixed by g or f (e.g. for shears)
    units = [tuple(s * int(r == i) for r in range(n)) for i in range(n) for s in (1, -1)]
    extra = sorted((e for e in itertools.product(range(-2, 3), repeat=n)
                    if sum(x * x for x in e) > 1 and dist2_points(ProjPoint(e), p) != 0),
                   key=lambda e: (sum(x * x for x in e), e))
    trials = [(2 ** j, e) for dirs in (units, extra) for j in range(1, budget + 1) for e in dirs]
    result = None
    for M, e in trials:
        q1 = ProjPoint(tuple(M * x + y_ for x, y_ in zip(p.coords, e)))
        q2 = apply_point(f, q1)
        four = [q1, q2, apply_point(g, q1), apply_point(matmul(g, f), q1)]
        if len(set(four)) != 4 or p in four:
            continue
        if not all(outside_nbar(x, N0.balls) and _outside_closed(x, R0) for x in (q1, q2)):
            continue

        def points_ok(r2, q1=q1, q2=q2):
            balls = N0.balls + (Ball(q1, r2), Ball(q2, r2))
            return (_n_disjoint_ok(balls, g, lam2)
                    and all(disjoint_balls(p, 0, x, r2) for x in (q1, q2)))
        try:
            r_pts = _first_radius(points_ok, 1, 80, "quad_extend: radii")
        except SearchExhausted:
            continue
        start = round(math.log(1 / r_pts, 4))
        for phi1, phi2 in itertools.product(phis, repeat=2):
            M1, M2 = hyperplane_near(q1, phi1), hyperplane_near(q2, phi2)
            if M1 is None or M2 is None or apply_hyperplane(f, M1) == M2:
                continue
            if M1.contains(p) or M2.contains(p):
                continue
            if any(Mi.contains(x) for Mi, qi in ((M1, q1), (M2, q2)) for x in four if x != qi):
                continue
            if not (_misses_balls(M1, A0.balls) and _misses_balls(M2, A0.balls)):
                continue
            out = None
            for r2 in _halvings(start, start + 40):
                if not all(disjoint_ball_tube(p, 0, Mi, r2) for Mi in (M1, M2)):
                    continue
                try:
                    out = throw(s0, f, q2, q1, M2, M1, r2 / 4, r2)
                except PreconditionViolated:
                    continue
                break
            if out is None:
                continue
            result = (out[0], r2, q1, q2)
            break
        if result:
            break
    if not result:
        raise SearchExhausted("quad_extend: points near p", budget)
    s_plus, r2, q1, q2 = result
    N_plus = N0.with_ball(q1, r2).with_ball(q2, r2)
    quad_plus = SchottkyQuadruple(s_plus, N_plus)
    i_v2 = len(s_plus.generators) - 1      # at q1
    i_v1 = len(s_plus.generators) - 2      # at q2 = f q1
    H = len(s_plus.generators)
    f_word = [(H, -1), (iu, mm), (H, 1)]
    f_inv = [(H, -1), (iu, -mm), (H, 1)]
    word = f_inv + [(i_v1, 1)] + f_word
    cert = full_group_cert(s_plus, [hb], (i_v2, 1), word, density=sys.density,
                           density_indices=range(sys.dense_prefix),
                           notes=(f"branch {branch}; f = b^-1 u^{mm} b with b the last group generator",
                                  "pair = (v at q1, f^-1 v' f) with v' at f q1"))
    check_quad_assumption1(quad_plus, g, p)
    if not verify_quadruple(quad_plus).ok:
        raise AssertionError("quad_extend produced an invalid quadruple")
    return quad_plus, cert, branch


def drive_quadruples(quad: SchottkyQuadruple, g: Matrix, p: ProjPoint, hs, config: BuildConfig = DEFAULT_CONFIG):
    """Apply quad_extend for each non-identity h in a finite list."""
    out = []
    for h in hs:
        quad, cert, branch = quad_extend(quad, g, p, h, config)
        out.append((cert, branch))
    return quad, out
