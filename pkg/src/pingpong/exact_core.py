"""Exact projective geometry over the rationals.

Points of P^{n-1} are stored as primitive integer vectors, hyperplanes as
primitive integer covectors.  Distances use the sine-of-angle metric and
are always handled through their squares, so every comparison made here
is a comparison of rationals (or of sums of square roots of rationals,
reduced to rationals by squaring).
"""

from dataclasses import dataclass, field
from fractions import Fraction
from math import gcd
from typing import Sequence, Tuple

from .errors import ZeroVector

IntVec = Tuple[int, ...]
Matrix = Tuple[Tuple[int, ...], ...]


# --------------------------------------------------------------------------
# integer vectors and matrices

def dot(a: Sequence, b: Sequence):
    return sum(x * y for x, y in zip(a, b))


def primitive(raw: Sequence[int]) -> IntVec:
    """Divide by the gcd and make the first nonzero entry positive."""
    entries = tuple(int(x) for x in raw)
    g = 0
    for x in entries:
        g = gcd(g, x)
    if g == 0:
        raise ZeroVector(f"zero vector {entries!r} has no projective class")
    lead = next(x for x in entries if x != 0)
    if lead < 0:
        g = -g
    return tuple(x // g for x in entries)


def identity(n: int) -> Matrix:
    return tuple(tuple(int(i == j) for j in range(n)) for i in range(n))


def matmul(a: Matrix, b: Matrix) -> Matrix:
    cols = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a)


def matvec(a: Matrix, v: Sequence[int]) -> IntVec:
    return tuple(sum(x * y for x, y in zip(row, v)) for row in a)


def vecmat(f: Sequence[int], a: Matrix) -> IntVec:
    """Row vector times matrix."""
    return tuple(sum(f[i] * a[i][j] for i in range(len(f))) for j in range(len(a[0])))


def transpose(a: Matrix) -> Matrix:
    return tuple(zip(*a))


def matpow(a: Matrix, k: int) -> Matrix:
    if k < 0:
        a = inverse(a)
        k = -k
    result = identity(len(a))
    while k:
        if k & 1:
            result = matmul(result, a)
        a = matmul(a, a)
        k >>= 1
    return result


def as_matrix(rows) -> Matrix:
    return tuple(tuple(int(x) for x in row) for row in rows)


def det(a: Matrix) -> int:
    """Determinant by fraction-free (Bareiss) elimination."""
    m = [list(row) for row in a]
    n = len(m)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for r in range(k + 1, n):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def inverse(a: Matrix) -> Matrix:
    """Inverse of an integer matrix of determinant +-1."""
    n = len(a)
    m = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(a)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular matrix")
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [x / p for x in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                c = m[r][col]
                m[r] = [x - c * y for x, y in zip(m[r], m[col])]
    out = []
    for row in m:
        entries = row[n:]
        if any(x.denominator != 1 for x in entries):
            raise ValueError("matrix is not unimodular")
        out.append(tuple(int(x) for x in entries))
    return tuple(out)


def frobenius2(a: Matrix) -> int:
    return sum(x * x for row in a for x in row)


def lipschitz_bound(g: Matrix) -> int:
    """Integer upper bound for the Lipschitz constant of x -> gx on P^{n-1}
    in the sine metric.

    sin(gx, gy) <= s1*s2/sn^2 * sin(x, y) <= (|g|_F |g^-1|_F)^2 * sin(x, y).
    """
    return frobenius2(g) * frobenius2(inverse(g))


# --------------------------------------------------------------------------
# exact comparison of sums of square roots

def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def sqrt_gt_sum(a, b, c) -> bool:
    """sqrt(a) > sqrt(b) + sqrt(c) for nonnegative rationals."""
    a, b, c = _as_fraction(a), _as_fraction(b), _as_fraction(c)
    t = a - b - c
    return t > 0 and t * t > 4 * b * c


def sqrt_ge_sum(a, b, c) -> bool:
    """sqrt(a) >= sqrt(b) + sqrt(c) for nonnegative rationals."""
    a, b, c = _as_fraction(a), _as_fraction(b), _as_fraction(c)
    t = a - b - c
    return t >= 0 and t * t >= 4 * b * c


# --------------------------------------------------------------------------
# projective points and hyperplanes

@dataclass(frozen=True, order=True)
class ProjPoint:
    coords: IntVec

    def __post_init__(self):
        object.__setattr__(self, "coords", primitive(self.coords))

    @property
    def n(self) -> int:
        return len(self.coords)

    def __iter__(self):
        return iter(self.coords)

    def __repr__(self):
        return "[" + ":".join(str(x) for x in self.coords) + "]"


@dataclass(frozen=True, order=True)
class ProjHyperplane:
    """The projective hyperplane P(ker f) for a primitive covector f."""

    covector: IntVec

    def __post_init__(self):
        object.__setattr__(self, "covector", primitive(self.covector))

    @property
    def n(self) -> int:
        return len(self.covector)

    def contains(self, x: ProjPoint) -> bool:
        return dot(self.covector, x.coords) == 0

    def __repr__(self):
        return "ker(" + ",".join(str(x) for x in self.covector) + ")"


def normalize(raw: Sequence[int]) -> ProjPoint:
    return ProjPoint(tuple(raw))


def hyperplane(raw: Sequence[int]) -> ProjHyperplane:
    return ProjHyperplane(tuple(raw))


def apply_point(g: Matrix, x: ProjPoint) -> ProjPoint:
    return ProjPoint(matvec(g, x.coords))


def apply_hyperplane(g: Matrix, L: ProjHyperplane) -> ProjHyperplane:
    """Image g(L): the covector transforms as f -> f g^{-1}."""
    return ProjHyperplane(vecmat(L.covector, inverse(g)))


# --------------------------------------------------------------------------
# squared sine distances

def dist2_vectors(x: Sequence[int], y: Sequence[int]) -> Fraction:
    xy = dot(x, y)
    return 1 - Fraction(xy * xy, dot(x, x) * dot(y, y))


def dist2_points(x: ProjPoint, y: ProjPoint) -> Fraction:
    """Squared sine of the angle between the lines x and y."""
    return dist2_vectors(x.coords, y.coords)


def dist2_point_hyperplane(x: ProjPoint, L: ProjHyperplane) -> Fraction:
    fx = dot(L.covector, x.coords)
    return Fraction(fx * fx, dot(L.covector, L.covector) * dot(x.coords, x.coords))


def dist2_hyperplanes(L1: ProjHyperplane, L2: ProjHyperplane) -> Fraction:
    """Squared Hausdorff distance between two hyperplanes.

    For hyperplanes this equals the sine distance between the normal
    lines, so it is computed on the covectors.
    """
    return dist2_vectors(L1.covector, L2.covector)


# --------------------------------------------------------------------------
# balls, tubes and regions

@dataclass(frozen=True)
class Ball:
    center: ProjPoint
    radius2: Fraction

    def contains(self, x: ProjPoint) -> bool:
        return dist2_points(self.center, x) <= self.radius2

    def contains_open(self, x: ProjPoint) -> bool:
        return dist2_points(self.center, x) < self.radius2


@dataclass(frozen=True)
class Tube:
    hyperplane: ProjHyperplane
    radius2: Fraction

    def contains(self, x: ProjPoint) -> bool:
        return dist2_point_hyperplane(x, self.hyperplane) <= self.radius2


@dataclass(frozen=True)
class Region:
    """A finite union of closed balls and closed tubes."""

    balls: Tuple[Ball, ...] = field(default_factory=tuple)
    tubes: Tuple[Tube, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        object.__setattr__(self, "tubes", tuple(self.tubes))
        for piece in self.balls + self.tubes:
            if not piece.radius2 > 0:
                raise ValueError("region radii must be positive")

    def union(self, other: "Region") -> "Region":
        balls = self.balls + tuple(b for b in other.balls if b not in self.balls)
        tubes = self.tubes + tuple(t for t in other.tubes if t not in self.tubes)
        return Region(balls, tubes)

    def with_ball(self, center: ProjPoint, radius2) -> "Region":
        return self.union(Region((Ball(center, Fraction(radius2)),)))

    def with_tube(self, L: ProjHyperplane, radius2) -> "Region":
        return self.union(Region((), (Tube(L, Fraction(radius2)),)))

    def is_empty(self) -> bool:
        return not self.balls and not self.tubes

    def contains_region(self, other: "Region") -> bool:
        """Structural containment: every piece of other is a piece of self."""
        return set(other.balls) <= set(self.balls) and set(other.tubes) <= set(self.tubes)


def region_contains(R: Region, x: ProjPoint) -> bool:
    return any(b.contains(x) for b in R.balls) or any(t.contains(x) for t in R.tubes)


def min_dist2_to_region(R: Region, x: ProjPoint) -> Fraction:
    """Squared distance from x to the nearest ball center or tube
    hyperplane of R (radii are ignored)."""
    ds = [dist2_points(b.center, x) for b in R.balls]
    ds += [dist2_point_hyperplane(x, t.hyperplane) for t in R.tubes]
    return min(ds) if ds else Fraction(1)


# --------------------------------------------------------------------------
# certified disjointness and containment (triangle inequality, exact)

def disjoint_ball_tube(p: ProjPoint, eps2, L: ProjHyperplane, del2) -> bool:
    """Closed eps-ball about p misses the closed del-tube about L.

    Certified by sqrt(d2(p, L)) > eps + del.  A radius of zero is allowed
    and stands for the bare point or hyperplane.
    """
    return sqrt_gt_sum(dist2_point_hyperplane(p, L), eps2, del2)


def disjoint_balls(p: ProjPoint, eps2, q: ProjPoint, r2) -> bool:
    return sqrt_gt_sum(dist2_points(p, q), eps2, r2)


def ball_inside_tube(p: ProjPoint, eps2, L: ProjHyperplane, del2) -> bool:
    """Closed eps-ball about p lies in the closed del-tube about L:
    sqrt(d2(p, L)) + eps <= del."""
    return sqrt_ge_sum(del2, dist2_point_hyperplane(p, L), eps2)


def ball_inside_ball(p: ProjPoint, eps2, q: ProjPoint, r2) -> bool:
    return sqrt_ge_sum(r2, dist2_points(p, q), eps2)


def tube_inside_tube(L: ProjHyperplane, del2, M: ProjHyperplane, r2) -> bool:
    return sqrt_ge_sum(r2, dist2_hyperplanes(L, M), del2)


def ball_inside_region(p: ProjPoint, eps2, R: Region) -> bool:
    return (any(ball_inside_ball(p, eps2, b.center, b.radius2) for b in R.balls)
            or any(ball_inside_tube(p, eps2, t.hyperplane, t.radius2) for t in R.tubes))


def tube_inside_region(L: ProjHyperplane, del2, R: Region) -> bool:
    return any(tube_inside_tube(L, del2, t.hyperplane, t.radius2) for t in R.tubes)


def ball_misses_region(p: ProjPoint, eps2, R: Region) -> bool:
    return (all(disjoint_balls(p, eps2, b.center, b.radius2) for b in R.balls)
            and all(disjoint_ball_tube(p, eps2, t.hyperplane, t.radius2) for t in R.tubes))


def tube_misses_region(L: ProjHyperplane, del2, R: Region) -> bool:
    """Tube about L misses R.  Two hyperplanes of P^{n-1} always meet when
    n >= 3, so any tube in R makes this false."""
    if R.tubes:
        return False
    return all(disjoint_ball_tube(b.center, b.radius2, L, del2) for b in R.balls)


def region_inside_region(inner: Region, outer: Region) -> bool:
    return (all(ball_inside_region(b.center, b.radius2, outer) for b in inner.balls)
            and all(tube_inside_region(t.hyperplane, t.radius2, outer) for t in inner.tubes))
