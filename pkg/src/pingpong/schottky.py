"""Schottky systems of rank-1 unipotents and their certificates.

A system is a list of generators u, each with radii eps_u <= del_u, plus
an attracting region A and a repelling region R.  verify_system checks
the four ping-pong conditions exactly; add_generator and throw extend a
system; z2_pair_cert and FullGroupCert package the commuting-unipotent
hypothesis of Venkataramana's finite-index criterion.
"""

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from . import congruence
from .congruence import DensityWitness, density_witness
from .errors import IndexOutOfRange, InvalidRadii, PreconditionViolated, SearchExhausted
from .exact_core import (Matrix, ProjHyperplane, ProjPoint, Region, apply_hyperplane, apply_point,
                         ball_inside_region, ball_misses_region, det, disjoint_ball_tube,
                         dist2_hyperplanes, dist2_point_hyperplane, dist2_points, identity,
                         inverse, matmul, matpow, region_inside_region, sqrt_gt_sum, tube_inside_region,
                         tube_misses_region)
from .lattice import lift_pair_stabilizer, transporter
from .unipotent import (Rank1Unipotent, certify_contraction, contraction_power, from_pair,
                        is_rank1_unipotent_matrix, is_unipotent, power)

DEFAULT_MODULI = (3, 4)


@dataclass(frozen=True)
class Generator:
    u: Rank1Unipotent
    eps2: Fraction
    del2: Fraction

    def __post_init__(self):
        object.__setattr__(self, "eps2", Fraction(self.eps2))
        object.__setattr__(self, "del2", Fraction(self.del2))


@dataclass(frozen=True)
class SchottkySystem:
    generators: Tuple[Generator, ...]
    attracting: Region
    repelling: Region
    density: Optional[DensityWitness] = None
    dense_prefix: int = 0    # the density witness covers generators[:dense_prefix]

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if not self.generators:
            raise ValueError("a Schottky system needs at least one generator")
        if self.density is not None and not self.dense_prefix:
            object.__setattr__(self, "dense_prefix", len(self.generators))

    def extend(self, gens, attracting: Region, repelling: Region) -> "SchottkySystem":
        """Append generators and replace the regions, keeping the density witness."""
        return SchottkySystem(self.generators + tuple(gens), attracting, repelling,
                              self.density, self.dense_prefix)

    @property
    def n(self) -> int:
        return self.generators[0].u.n

    @property
    def matrices(self) -> List[Matrix]:
        return [gen.u.matrix for gen in self.generators]

    def contains(self, other: "SchottkySystem") -> bool:
        """S ⊇ S', A ⊇ A', R ⊇ R' (structurally)."""
        mine = set(g.u for g in self.generators)
        return (all(g.u in mine for g in other.generators)
                and self.attracting.contains_region(other.attracting)
                and self.repelling.contains_region(other.repelling))

    def index_of(self, u: Rank1Unipotent) -> int:
        for i, gen in enumerate(self.generators):
            if gen.u == u:
                return i
        raise KeyError(u)


@dataclass(frozen=True)
class SchottkyQuadruple:
    base: SchottkySystem
    open_nbhd: Region

    def nbhd_contains_attracting(self) -> bool:
        return all(
            any(sqrt_gt_sum(b.radius2, dist2_points(a.center, b.center), a.radius2)
                for b in self.open_nbhd.balls)
            for a in self.base.attracting.balls) and not self.base.attracting.tubes


# --------------------------------------------------------------------------
# verification

@dataclass(frozen=True)
class Violation:
    condition: str
    generator: int
    other: Optional[int]
    detail: str


@dataclass(frozen=True)
class ViolationReport:
    violations: Tuple[Violation, ...]
    ok: bool = False


@dataclass(frozen=True)
class PingPongCert:
    """All four conditions held; lists what was checked."""

    generators: int
    contraction_checks: int
    separation_checks: int
    attracting_containment_checks: int
    repelling_containment_checks: int
    a_inside_r: bool = True
    ok: bool = True
    conclusion: str = "free product of the cyclic groups <u> (ping-pong)"


def verify_system(sys: SchottkySystem):
    """PingPongCert if every condition holds, else a ViolationReport."""
    bad = []
    gens = sys.generators
    for i, g in enumerate(gens):
        if not (0 < g.eps2 <= g.del2):
            bad.append(Violation("1", i, None, f"radii need 0 < eps <= del (eps2={g.eps2}, del2={g.del2})"))
        elif not certify_contraction(g.u, g.eps2, g.del2):
            bad.append(Violation(
                "1", i, None,
                f"contraction certificate fails: |m|^2 |v|^2 |f|^2 eps2 del2 = "
                f"{g.u.m ** 2 * g.u.norm2() * g.eps2 * g.del2} below (1 + eps)^2 with eps2={g.eps2}"))
    seps = 0
    for i, g in enumerate(gens):
        for j, h in enumerate(gens):
            if i == j:
                continue
            seps += 1
            if not disjoint_ball_tube(g.u.point, g.eps2, h.u.hyperplane, h.del2):
                d2 = dist2_point_hyperplane(g.u.point, h.u.hyperplane)
                bad.append(Violation(
                    "2", i, j,
                    f"need sqrt({d2}) > sqrt({g.eps2}) + sqrt({h.del2}) between p_{i} and L_{j}"))
    for i, g in enumerate(gens):
        if not ball_inside_region(g.u.point, g.eps2, sys.attracting):
            bad.append(Violation("3", i, None,
                                 f"ball about {g.u.point!r} of radius^2 {g.eps2} is not inside A"))
    for i, g in enumerate(gens):
        if not tube_inside_region(g.u.hyperplane, g.del2, sys.repelling):
            bad.append(Violation("4", i, None,
                                 f"tube about {g.u.hyperplane!r} of radius^2 {g.del2} is not inside R"))
    if not region_inside_region(sys.attracting, sys.repelling):
        bad.append(Violation("A⊆R", -1, None, "attracting region is not inside repelling region"))
    if bad:
        return ViolationReport(tuple(bad))
    k = len(gens)
    return PingPongCert(k, k, seps, k, k)


def verify_quadruple(quad: SchottkyQuadruple):
    result = verify_system(quad.base)
    if not result.ok:
        return result
    if not quad.nbhd_contains_attracting():
        return ViolationReport((Violation("A⊆N", -1, None, "attracting balls not strictly inside N"),))
    return result


# --------------------------------------------------------------------------
# words

Word = Tuple[Tuple[int, int], ...]


def reduce_word(letters: Sequence[Tuple[int, int]]) -> Word:
    out: List[List[int]] = []
    for idx, e in letters:
        if e == 0:
            continue
        if out and out[-1][0] == idx:
            out[-1][1] += e
            if out[-1][1] == 0:
                out.pop()
        else:
            out.append([idx, e])
    return tuple((i, e) for i, e in out)


def invert_word(w: Word) -> Word:
    return tuple((i, -e) for i, e in reversed(w))


def random_reduced_word(num_gens: int, max_len: int, rng: random.Random, max_exp: int = 3) -> Word:
    length = rng.randint(1, max_len)
    letters = []
    prev = None
    for _ in range(length):
        choices = [i for i in range(num_gens) if i != prev]
        if not choices:
            break
        idx = rng.choice(choices)
        e = rng.randint(1, max_exp) * rng.choice((-1, 1))
        letters.append((idx, e))
        prev = idx
    return tuple(letters)


def evaluate_word(sys: SchottkySystem, word: Word) -> Matrix:
    """Product of generator powers, left to right."""
    result = identity(sys.n)
    for idx, e in word:
        if not 0 <= idx < len(sys.generators):
            raise IndexOutOfRange(f"generator index {idx} out of range")
        result = matmul(result, power(sys.generators[idx].u, e).matrix)
    return result


def evaluate_matrix_word(mats: Sequence[Matrix], word: Word) -> Matrix:
    n = len(mats[0])
    result = identity(n)
    for idx, e in word:
        if not 0 <= idx < len(mats):
            raise IndexOutOfRange(f"generator index {idx} out of range")
        result = matmul(result, matpow(mats[idx], e))
    return result


# --------------------------------------------------------------------------
# adding a generator

def _radii(eps2, del2):
    eps2, del2 = Fraction(eps2), Fraction(del2)
    if not (0 < eps2 <= del2):
        raise InvalidRadii(f"need 0 < eps <= del (eps2={eps2}, del2={del2})")
    return eps2, del2


def check_new_pair(sys: SchottkySystem, p: ProjPoint, L: ProjHyperplane, eps2, del2, label=""):
    """[p]_eps misses R and [L]_del misses A."""
    if not ball_misses_region(p, eps2, sys.repelling):
        raise PreconditionViolated(f"{label}[p]_eps ∩ R = ∅",
                                   f"ball about {p!r} of radius^2 {eps2} meets R")
    if not tube_misses_region(L, del2, sys.attracting):
        raise PreconditionViolated(f"{label}[L]_del ∩ A = ∅",
                                   f"tube about {L!r} of radius^2 {del2} meets A")


def add_generator(sys: SchottkySystem, p: ProjPoint, L: ProjHyperplane, eps2, del2) -> SchottkySystem:
    """Append a power of the rank-1 unipotent with data (p, L).

    Requires [p]_eps ∩ R = ∅ and [L]_del ∩ A = ∅; the ball and tube are
    added to A and R.
    """
    u = from_pair(p, L)
    eps2, del2 = _radii(eps2, del2)
    check_new_pair(sys, p, L, eps2, del2)
    v = power(u, contraction_power(u, eps2, del2))
    out = sys.extend([Generator(v, eps2, del2)],
                     sys.attracting.with_ball(p, eps2),
                     sys.repelling.with_tube(L, del2))
    result = verify_system(out)
    if not result.ok:
        raise AssertionError(f"add_generator produced an invalid system: {result}")
    return out


# --------------------------------------------------------------------------
# commuting unipotent pairs and full-group certificates

@dataclass(frozen=True)
class Z2PairCert:
    u: Matrix
    w: Matrix
    u_rank1: bool = True
    w_unipotent: bool = True
    commute: bool = True
    independent: bool = True
    ok: bool = True


@dataclass(frozen=True)
class Rejection:
    reason: str
    ok: bool = False


def _logs_proportional(u: Matrix, w: Matrix) -> bool:
    n = len(u)
    a = [u[i][j] - int(i == j) for i in range(n) for j in range(n)]
    b = [w[i][j] - int(i == j) for i in range(n) for j in range(n)]
    # a and b proportional (including b = 0) iff all 2x2 minors of [a; b] vanish
    return all(a[i] * b[j] == a[j] * b[i] for i in range(len(a)) for j in range(i + 1, len(a)))


def z2_pair_cert(u, w: Matrix):
    """Certify <u, w> ≅ Z^2 for a rank-1 unipotent u and a unipotent w."""
    um = u.matrix if isinstance(u, Rank1Unipotent) else tuple(map(tuple, u))
    w = tuple(map(tuple, w))
    if not is_rank1_unipotent_matrix(um):
        return Rejection("u is not a rank-1 unipotent")
    if not is_unipotent(w) or det(w) != 1:
        return Rejection("w is not unipotent")
    if matmul(um, w) != matmul(w, um):
        return Rejection("u and w do not commute")
    if _logs_proportional(um, w):
        return Rejection("u - I and w - I are proportional")
    return Z2PairCert(um, w)


@dataclass(frozen=True)
class FullGroupCert:
    """Hypotheses of the finite-index criterion for Γ = <group_generators>.

    pair_words express the two members of the Z^2 pair as words in the
    group generators; density is a witness for the subgroup generated by
    the generators listed in density_indices.  The conclusion Γ = SL(n, Z)
    is cited, not derived here.
    """

    group_generators: Tuple[Matrix, ...]
    pair: Z2PairCert
    pair_words: Tuple[Word, Word]
    density: DensityWitness
    density_indices: Tuple[int, ...]
    notes: Tuple[str, ...] = ()
    conclusion_basis: str = "CITED: Venkataramana finite-index criterion (Zariski-dense, rank-1 u, <u,v> ≅ Z^2) plus profinite density"

    @property
    def ok(self) -> bool:
        return self.pair.ok and self.density.valid

    def revalidate(self, cap: int = congruence.DEFAULT_CAP) -> Tuple[bool, List[str]]:
        """Recompute every checkable claim from raw matrices."""
        problems = []
        mats = [tuple(map(tuple, g)) for g in self.group_generators]
        for g in mats:
            if det(g) != 1:
                problems.append("a group generator has determinant != 1")
        for name, word, expect in (("u", self.pair_words[0], self.pair.u),
                                   ("w", self.pair_words[1], self.pair.w)):
            if evaluate_matrix_word(mats, word) != expect:
                problems.append(f"pair element {name} does not match its word")
        again = z2_pair_cert(self.pair.u, self.pair.w)
        if not again.ok:
            problems.append(f"Z^2 pair rejected: {again.reason}")
        sub = [mats[i] for i in self.density_indices]
        for d, claimed in zip(self.density.moduli_checked, self.density.surjective):
            if congruence.is_surjective(sub, d, cap) != claimed:
                problems.append(f"surjectivity mod {d} does not recompute")
        if not self.density.valid:
            problems.append("density witness is not valid (needs 4 and an odd prime, all surjective)")
        return (not problems, problems)


def throw(sys: SchottkySystem, g: Matrix, p1: ProjPoint, p2: ProjPoint, L1: ProjHyperplane,
          L2: ProjHyperplane, eps2, del2, cap: int = congruence.DEFAULT_CAP):
    """Add powers of u_i = from_pair(p_i, L_i) so that <S+, g> = SL(n, Z).

    Requires p1 = g p2 and L1 != g L2, plus separation of the new balls
    and tubes from each other and from A, R.  The Z^2 pair is
    (v2, g^-1 v1 g): both have attracting point p2.
    """
    eps2, del2 = _radii(eps2, del2)
    for i, (p, L) in enumerate(((p1, L1), (p2, L2)), start=1):
        if not L.contains(p):
            raise PreconditionViolated(f"p{i} ∈ L{i}", f"{p!r} not on {L!r}")
    for i, p in enumerate((p1, p2), start=1):
        if not ball_misses_region(p, eps2, sys.repelling):
            raise PreconditionViolated("condition 1: ([p1]_eps ∪ [p2]_eps) ∩ R = ∅",
                                       f"ball about p{i}={p!r} of radius^2 {eps2} meets R")
    for i, L in enumerate((L1, L2), start=1):
        if not tube_misses_region(L, del2, sys.attracting):
            raise PreconditionViolated("condition 1: ([L1]_del ∪ [L2]_del) ∩ A = ∅",
                                       f"tube about L{i}={L!r} of radius^2 {del2} meets A")
    if not disjoint_ball_tube(p1, eps2, L2, del2):
        raise PreconditionViolated("condition 2: [p1]_eps ∩ [L2]_del = ∅", f"{p1!r} vs {L2!r}")
    if not disjoint_ball_tube(p2, eps2, L1, del2):
        raise PreconditionViolated("condition 2: [p2]_eps ∩ [L1]_del = ∅", f"{p2!r} vs {L1!r}")
    if apply_point(g, p2) != p1:
        raise PreconditionViolated("condition 3: p1 = g p2", f"g p2 = {apply_point(g, p2)!r} != {p1!r}")
    if apply_hyperplane(g, L2) == L1:
        raise PreconditionViolated("condition 3: L1 != g L2", f"g L2 = {L1!r}")
    u1, u2 = from_pair(p1, L1), from_pair(p2, L2)
    m = max(contraction_power(u1, eps2, del2), contraction_power(u2, eps2, del2))
    v1, v2 = power(u1, m), power(u2, m)
    out = sys.extend([Generator(v1, eps2, del2), Generator(v2, eps2, del2)],
                     sys.attracting.with_ball(p1, eps2).with_ball(p2, eps2),
                     sys.repelling.with_tube(L1, del2).with_tube(L2, del2))
    result = verify_system(out)
    if not result.ok:
        raise AssertionError(f"throw produced an invalid system: {result}")
    if sys.density is not None:
        density, indices = sys.density, tuple(range(sys.dense_prefix))
    else:
        mats = tuple(out.matrices) + (tuple(map(tuple, g)),)
        density, indices = density_witness(mats, DEFAULT_MODULI, cap), tuple(range(len(mats)))
    cert = full_group_cert(out, [g], (out.index_of(v2), 1),
                           [(len(out.generators), -1), (out.index_of(v1), 1), (len(out.generators), 1)],
                           density=density, density_indices=indices,
                           notes=("pair = (v2, g^-1 v1 g); last group generator is g",))
    return out, cert


def full_group_cert(sys: SchottkySystem, extra: Sequence[Matrix], u_letter, w_word,
                    density: DensityWitness, density_indices=None, notes=()) -> FullGroupCert:
    """Assemble a FullGroupCert for <S, extra>.  Extra elements are
    appended after the system generators in the group generator list;
    density_indices defaults to the system generators."""
    mats = tuple(sys.matrices) + tuple(tuple(map(tuple, x)) for x in extra)
    u_word = (tuple(u_letter),)
    w_word = reduce_word(w_word)
    u = evaluate_matrix_word(mats, u_word)
    w = evaluate_matrix_word(mats, w_word)
    pair = z2_pair_cert(u, w)
    if not pair.ok:
        raise AssertionError(f"expected a Z^2 pair, got rejection: {pair.reason}")
    if density_indices is None:
        density_indices = range(len(sys.generators))
    return FullGroupCert(mats, pair, (u_word, w_word), density,
                         tuple(density_indices), tuple(notes))


# --------------------------------------------------------------------------
# conjugator search

@dataclass(frozen=True)
class SearchBudget:
    depth: int = 6
    samples: int = 20000
    seed: int = 0


def _signed_permutations(n: int) -> List[Matrix]:
    from itertools import permutations, product
    out = []
    for perm in permutations(range(n)):
        for signs in product((1, -1), repeat=n):
            m = tuple(tuple(signs[i] if perm[i] == j else 0 for j in range(n)) for i in range(n))
            if det(m) == 1:
                out.append(m)
    return out


def _word_generators(n: int, kernel: Optional[int]) -> List[Matrix]:
    gens = []
    step = kernel or 1
    for i in range(n):
        for j in range(n):
            if i != j:
                for s in (step, -step):
                    rows = [list(r) for r in identity(n)]
                    rows[i][j] = s
                    gens.append(tuple(map(tuple, rows)))
    if kernel is None:
        gens += [m for m in _signed_permutations(n) if m != identity(n)]
    return gens


def _hits(g: Matrix, src, dst, eps2, del2) -> bool:
    return (dist2_points(apply_point(g, src[0]), dst[0]) < eps2
            and dist2_hyperplanes(apply_hyperplane(g, src[1]), dst[1]) < del2)


def exact_transporter(src, dst, kernel: Optional[int] = None) -> Optional[Matrix]:
    """g with g p1 = p2 and g L1 = L2 exactly (and g = I mod kernel), if
    the unimodular completion finds one."""
    (p1, L1), (p2, L2) = src, dst
    n = p1.n
    t_src = transporter(p1.coords, L1.covector, 0, 1)
    t_dst = transporter(p2.coords, L2.covector, 0, 1)
    g0 = matmul(t_dst, inverse(t_src))
    if kernel is None:
        return g0
    h = matmul(matmul(inverse(t_src), inverse(g0)), t_src)
    for sign in (1, -1):
        hs = tuple(tuple(sign * x for x in row) for row in h) if n % 2 == 0 or sign == 1 else None
        if hs is None:
            continue
        try:
            s_e = lift_pair_stabilizer(hs, 0, 1, kernel)
        except ValueError:
            continue
        g = matmul(g0, matmul(matmul(t_src, s_e), inverse(t_src)))
        if congruence.in_kernel(g, kernel):
            return g
    return None


def conjugator_search(src, dst, eps2, del2, kernel: Optional[int] = None,
                      budget: SearchBudget = SearchBudget()) -> Matrix:
    """Find g (in K_kernel if given) with d(g p1, p2) < eps and
    d(g L1, L2) < del.

    Order: identity, then words of length 1, then an exact transporter,
    then seeded random words up to budget.depth.  A depth of 0 allows the
    identity only.
    """
    (p1, L1), (p2, L2) = src, dst
    if not (L1.contains(p1) and L2.contains(p2)):
        raise PreconditionViolated("src/dst points lie on their hyperplanes")
    eps2, del2 = Fraction(eps2), Fraction(del2)
    n = p1.n
    if _hits(identity(n), src, dst, eps2, del2):
        return identity(n)
    if budget.depth <= 0:
        raise SearchExhausted("conjugator_search", budget)
    gens = _word_generators(n, kernel)
    for g in gens:
        if _hits(g, src, dst, eps2, del2):
            return g
    g = exact_transporter(src, dst, kernel)
    if g is not None and _hits(g, src, dst, eps2, del2):
        return g
    rng = random.Random(budget.seed)
    for _ in range(budget.samples):
        g = identity(n)
        for _ in range(rng.randint(2, budget.depth) if budget.depth >= 2 else 1):
            g = matmul(g, rng.choice(gens))
        if _hits(g, src, dst, eps2, del2):
            return g
    raise SearchExhausted("conjugator_search", budget)
