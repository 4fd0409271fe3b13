"""Rank-1 unipotent elements u = I + m v f^T of SL(n, Z) and their
projective dynamics.

A pair (v, f) of primitive integer vectors with f.v = 0 determines the
attracting point p_u = [v] and the fixed hyperplane L_u = ker f; the
integer m records which power of the primitive element is meant.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import InvalidRadii, PointNotOnHyperplane
from .exact_core import (Matrix, ProjHyperplane, ProjPoint, as_matrix, det, dot, identity,
                         inverse, matvec, primitive, sqrt_ge_sum, vecmat)


def _sign_and_scale(raw):
    prim = primitive(raw)
    idx = next(i for i, x in enumerate(raw) if x != 0)
    return prim, raw[idx] // prim[idx]


@dataclass(frozen=True)
class Rank1Unipotent:
    v: tuple
    f: tuple
    m: int = 1

    def __post_init__(self):
        v, sv = _sign_and_scale(tuple(int(x) for x in self.v))
        f, sf = _sign_and_scale(tuple(int(x) for x in self.f))
        m = int(self.m) * sv * sf
        if m == 0:
            raise ValueError("exponent must be nonzero")
        if dot(v, f) != 0:
            raise PointNotOnHyperplane(f"f.v = {dot(v, f)} for v={v}, f={f}")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "m", m)

    @property
    def n(self) -> int:
        return len(self.v)

    @property
    def point(self) -> ProjPoint:
        return ProjPoint(self.v)

    @property
    def hyperplane(self) -> ProjHyperplane:
        return ProjHyperplane(self.f)

    @property
    def matrix(self) -> Matrix:
        n = self.n
        return tuple(tuple(int(i == j) + self.m * self.v[i] * self.f[j] for j in range(n))
                     for i in range(n))

    def apply(self, x: Sequence[int], k: int = 1) -> tuple:
        """u^k x on integer vectors."""
        c = k * self.m * dot(self.f, x)
        return tuple(xi + c * vi for xi, vi in zip(x, self.v))

    def apply_point(self, x: ProjPoint, k: int = 1) -> ProjPoint:
        return ProjPoint(self.apply(x.coords, k))

    def inverse(self) -> "Rank1Unipotent":
        return Rank1Unipotent(self.v, self.f, -self.m)

    def norm2(self) -> int:
        """|v|^2 |f|^2 of the primitive data."""
        return dot(self.v, self.v) * dot(self.f, self.f)


def from_pair(p: ProjPoint, L: ProjHyperplane) -> Rank1Unipotent:
    """The primitive rank-1 unipotent with attracting point p and fixed
    hyperplane L."""
    if not L.contains(p):
        raise PointNotOnHyperplane(f"{p!r} is not on {L!r}: f.p = {dot(L.covector, p.coords)}")
    return Rank1Unipotent(p.coords, L.covector, 1)


def elementary(n: int, i: int, j: int, k: int = 1) -> Rank1Unipotent:
    """I + k E_{ij} (0-based indices)."""
    return Rank1Unipotent(tuple(int(r == i) for r in range(n)),
                          tuple(int(r == j) for r in range(n)), k)


def power(u: Rank1Unipotent, k: int) -> Optional[Rank1Unipotent]:
    """u^k; None stands for the identity (k == 0)."""
    if k == 0:
        return None
    return Rank1Unipotent(u.v, u.f, u.m * k)


def conjugate(u: Rank1Unipotent, g: Matrix) -> Rank1Unipotent:
    """g u g^{-1}, with data p -> g p and L -> g L."""
    return Rank1Unipotent(matvec(g, u.v), vecmat(u.f, inverse(g)), u.m)


def is_rank1_unipotent_matrix(a: Matrix) -> bool:
    n = len(a)
    x = [[a[i][j] - int(i == j) for j in range(n)] for i in range(n)]
    if not any(any(row) for row in x):
        return False
    sq = [[sum(x[i][k] * x[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    if any(any(row) for row in sq):
        return False
    # rank 1: all 2x2 minors vanish
    for i in range(n):
        for k in range(i + 1, n):
            for j in range(n):
                for l in range(j + 1, n):
                    if x[i][j] * x[k][l] - x[i][l] * x[k][j]:
                        return False
    return det(a) == 1


def from_matrix(a: Matrix) -> Rank1Unipotent:
    """Recover (v, f, m) from a rank-1 unipotent integer matrix."""
    if not is_rank1_unipotent_matrix(a):
        raise ValueError("not a rank-1 unipotent matrix")
    n = len(a)
    x = [[a[i][j] - int(i == j) for j in range(n)] for i in range(n)]
    col = next(j for j in range(n) if any(x[i][j] for i in range(n)))
    v = primitive([x[i][col] for i in range(n)])
    row = next(i for i in range(n) if any(x[i]))
    f_raw = x[row]
    f = primitive(f_raw)
    m = Fraction(x[row][col], v[row] * f[col])
    assert m.denominator == 1
    out = Rank1Unipotent(v, f, int(m))
    assert out.matrix == as_matrix(a)
    return out


# --------------------------------------------------------------------------
# contraction certificate
#
# For x outside the del-tube of L_u, u^k x = x + k m (f.x) v with
# |f.x| >= del |f| |x|; |u^k x ^ v| = |x ^ v| <= |x| |v| and
# |u^k x| > |k m| del |f||v||x| - |x|, hence
#     d(u^k x, p_u) < 1 / (|k m| del |f||v| - 1).
# The certificate for all k != 0 is the k = 1 case: 1/(|m| del s - 1) <= eps
# with s = |f||v|, i.e.  |m| s del eps >= 1 + eps, compared exactly on squares.

def _check_radii(eps2, del2):
    eps2, del2 = Fraction(eps2), Fraction(del2)
    if eps2 <= 0 or del2 <= 0:
        raise InvalidRadii(f"radii must be positive (eps2={eps2}, del2={del2})")
    if eps2 > del2:
        raise InvalidRadii(f"need del >= eps (eps2={eps2} > del2={del2})")
    return eps2, del2


def _certified(mult: int, norm2: int, eps2: Fraction, del2: Fraction) -> bool:
    return sqrt_ge_sum(Fraction(mult * mult * norm2) * eps2 * del2, 1, eps2)


def certify_contraction(u: Rank1Unipotent, eps2, del2) -> bool:
    """True if the certificate shows u^k x in the open eps-ball about p_u
    for every x outside the open del-tube about L_u and every k != 0."""
    eps2, del2 = Fraction(eps2), Fraction(del2)
    if eps2 <= 0 or del2 <= 0:
        return False
    return _certified(u.m, u.norm2(), eps2, del2)


def contraction_power(u: Rank1Unipotent, eps2, del2) -> int:
    """Smallest c >= 1 such that u^c passes certify_contraction."""
    eps2, del2 = _check_radii(eps2, del2)
    base = abs(u.m)
    norm2 = u.norm2()
    eps, dl = math.sqrt(eps2), math.sqrt(del2)
    est = max(1, int((1 / eps + 1) / (dl * math.sqrt(norm2) * base)) - 2)
    while est > 1 and _certified(base * (est - 1), norm2, eps2, del2):
        est -= 1
    while not _certified(base * est, norm2, eps2, del2):
        est += 1
    return est


def contraction_bound(u: Rank1Unipotent, del2, k: int = 1) -> float:
    """Numeric value of the bound 1/(|k m| del s - 1), for reporting only."""
    denom = abs(k * u.m) * math.sqrt(float(del2)) * math.sqrt(u.norm2()) - 1
    return math.inf if denom <= 0 else 1 / denom


def group_element(rows) -> Matrix:
    g = as_matrix(rows)
    if len(g) < 1 or any(len(r) != len(g) for r in g):
        raise ValueError("group element must be a square matrix")
    if det(g) != 1:
        raise ValueError(f"determinant {det(g)} != 1")
    return g


def is_unipotent(a: Matrix) -> bool:
    n = len(a)
    x = tuple(tuple(a[i][j] - int(i == j) for j in range(n)) for i in range(n))
    p = x
    for _ in range(n - 1):
        p = tuple(tuple(sum(p[i][k] * x[k][j] for k in range(n)) for j in range(n))
                  for i in range(n))
    return not any(any(row) for row in p)


__all__ = [
    "Rank1Unipotent", "from_pair", "elementary", "power", "conjugate", "from_matrix",
    "certify_contraction", "contraction_power", "contraction_bound", "group_element",
    "is_unipotent", "is_rank1_unipotent_matrix", "identity",
]
