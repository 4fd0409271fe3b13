"""Integer lattice helpers: unimodular completion, exact transporters,
lifting from SL(m, Z/d) to SL(m, Z), and small-dimension LLL.

These back the exact branch of the conjugator search and the
congruence-constrained conjugators of the dense construction.
"""

from fractions import Fraction
from math import gcd
from typing import List, Sequence

from .exact_core import Matrix, as_matrix, det, dot, identity, inverse, matmul, matvec, vecmat


def reducer(a: Sequence[int]) -> Matrix:
    """Unimodular M with M a = gcd(a) * e_1 (Euclid on rows)."""
    n = len(a)
    a = [int(x) for x in a]
    m = [list(row) for row in identity(n)]
    while True:
        nz = [i for i in range(n) if a[i] != 0]
        if len(nz) <= 1:
            break
        k = min(nz, key=lambda i: abs(a[i]))
        for r in nz:
            if r != k:
                q = a[r] // a[k]
                a[r] -= q * a[k]
                m[r] = [x - q * y for x, y in zip(m[r], m[k])]
    nz = [i for i in range(n) if a[i] != 0]
    if nz and nz[0] != 0:
        k = nz[0]
        a[0], a[k] = a[k], a[0]
        m[0], m[k] = m[k], m[0]
    if a[0] < 0:
        a[0] = -a[0]
        m[0] = [-x for x in m[0]]
    return as_matrix(m)


def complete_basis(v: Sequence[int]) -> Matrix:
    """A matrix in SL(n, Z) whose first column is the primitive vector v."""
    n = len(v)
    b = inverse(reducer(v))
    if tuple(row[0] for row in b) != tuple(v):
        raise ValueError(f"{tuple(v)!r} is not primitive")
    if det(b) < 0:
        b = tuple(tuple(-x if j == 1 else x for j, x in enumerate(row)) for row in b)
    assert n < 2 or det(b) == 1
    return b


def transporter(v: Sequence[int], f: Sequence[int], i: int, j: int) -> Matrix:
    """g in SL(n, Z) with g e_i = v and f g = e_j^T.

    Requires i != j, v and f primitive, f.v = 0.  Then g maps the pair
    ([e_i], ker e_j) exactly onto ([v], ker f).
    """
    n = len(v)
    if i == j or dot(f, v) != 0:
        raise ValueError("transporter needs i != j and f.v = 0")
    u = tuple(zip(*reducer(f)))           # f . u[:,0] = 1, f . u[:,k] = 0
    uinv = inverse(u)
    w = matvec(uinv, v)
    assert w[0] == 0
    b = complete_basis(w[1:])
    kern = [tuple(u[r][c + 1] for r in range(n)) for c in range(n - 1)]
    kern_new = [tuple(sum(kern[c][r] * b[c][k] for c in range(n - 1)) for r in range(n))
                for k in range(n - 1)]
    assert kern_new[0] == tuple(v)
    cols = [None] * n
    cols[i] = tuple(v)
    cols[j] = tuple(u[r][0] for r in range(n))
    rest = iter(kern_new[1:])
    free = [c for c in range(n) if c not in (i, j)]
    for c in free:
        cols[c] = next(rest)
    g = tuple(tuple(cols[c][r] for c in range(n)) for r in range(n))
    if det(g) < 0:
        c = free[0]
        cols[c] = tuple(-x for x in cols[c])
        g = tuple(tuple(cols[c2][r] for c2 in range(n)) for r in range(n))
    return g


def lift_sl(a: Sequence[Sequence[int]], d: int) -> Matrix:
    """Lift a matrix of determinant 1 mod d to SL(m, Z), entrywise congruent.

    Row-reduces over Z/d with elementary operations only (Euclid on
    residues, then the standard unit-pivot trick), and returns the integer
    product of the inverse operations.
    """
    m = len(a)
    if m == 0:
        return ()
    if m == 1:
        if int(a[0][0]) % d != 1 % d:
            raise ValueError("determinant is not 1 mod d")
        return ((1,),)
    work = [[int(x) % d for x in row] for row in a]
    ops = []  # (target, source, multiplier): row_t += x * row_s

    def addrow(t, s, x):
        x %= d
        if x == 0:
            return
        work[t] = [(p + x * q) % d for p, q in zip(work[t], work[s])]
        ops.append((t, s, x))

    for c in range(m):
        while True:
            nz = [r for r in range(c, m) if work[r][c] != 0]
            if len(nz) <= 1:
                break
            k = min(nz, key=lambda r: work[r][c])
            for r in nz:
                if r != k:
                    addrow(r, k, -(work[r][c] // work[k][c]))
        nz = [r for r in range(c, m) if work[r][c] != 0]
        if not nz:
            raise ValueError("matrix is not invertible mod d")
        k = nz[0]
        if k != c:
            addrow(c, k, 1)
            addrow(k, c, -1)
        piv = work[c][c]
        if piv != 1 % d:
            if c == m - 1:
                raise ValueError("determinant is not 1 mod d")
            inv = pow(piv, -1, d)
            addrow(c + 1, c, inv - work[c + 1][c] * inv % d)
            addrow(c, c + 1, -(piv - 1))
            addrow(c + 1, c, -work[c + 1][c])
        for r in range(m):
            if r != c:
                addrow(r, c, -work[r][c])
    assert all(work[r][c] == int(r == c) % d for r in range(m) for c in range(m))
    lift = [list(row) for row in identity(m)]
    # a = E_1^{-1} ... E_k^{-1}; E^{-1} for row_t += x row_s is row_t -= x row_s
    for t, s, x in reversed(ops):
        lift[t] = [p - x * q for p, q in zip(lift[t], lift[s])]
    out = as_matrix(lift)
    assert det(out) == 1
    return out


def lift_pair_stabilizer(h: Sequence[Sequence[int]], i: int, j: int, d: int) -> Matrix:
    """Lift h (mod d) with h e_i = e_i and e_j^T h = e_j^T to an integer
    matrix of SL(n, Z) with the same two properties exactly."""
    n = len(h)
    s = [[int(x) % d for x in row] for row in h]
    for r in range(n):
        if s[r][i] != int(r == i) % d or s[j][r] != int(r == j) % d:
            raise ValueError("matrix does not stabilize the elementary pair mod d")
        s[r][i] = int(r == i)
        s[j][r] = int(r == j)
    block = [c for c in range(n) if c not in (i, j)]
    lifted = lift_sl([[s[r][c] for c in block] for r in block], d)
    for a_, r in enumerate(block):
        for b_, c in enumerate(block):
            s[r][c] = lifted[a_][b_]
    out = as_matrix(s)
    assert det(out) == 1
    return out


def kernel_transporter(v: Sequence[int], f: Sequence[int], i: int, j: int, d: int) -> Matrix:
    """g in SL(n, Z), g = I mod d, with g e_i = v and f g = e_j^T.

    Requires v = e_i and f = e_j mod d in addition to the transporter
    conditions.
    """
    n = len(v)
    for r in range(n):
        if (v[r] - int(r == i)) % d or (f[r] - int(r == j)) % d:
            raise ValueError("pair is not congruent to the elementary pair mod d")
    g0 = transporter(v, f, i, j)
    g = matmul(g0, lift_pair_stabilizer(inverse(g0), i, j, d))
    assert all((g[r][c] - int(r == c)) % d == 0 for r in range(n) for c in range(n))
    assert matvec(g, [int(r == i) for r in range(n)]) == tuple(v)
    assert vecmat(f, g) == tuple(int(r == j) for r in range(n))
    return g


# --------------------------------------------------------------------------
# lattice reduction and approximation

def lll_reduce(basis: Sequence[Sequence[int]], delta=Fraction(3, 4)) -> List[tuple]:
    """Exact LLL on a few integer row vectors."""
    b = [list(map(int, row)) for row in basis]
    k = len(b)
    if k <= 1:
        return [tuple(row) for row in b]

    def gram_schmidt():
        bstar, mu = [], [[Fraction(0)] * k for _ in range(k)]
        for i in range(k):
            v = [Fraction(x) for x in b[i]]
            for j in range(i):
                mu[i][j] = Fraction(dot(b[i], bstar[j])) / dot(bstar[j], bstar[j])
                v = [x - mu[i][j] * y for x, y in zip(v, bstar[j])]
            bstar.append(v)
        return bstar, mu

    bstar, mu = gram_schmidt()
    i = 1
    while i < k:
        for j in range(i - 1, -1, -1):
            q = round(mu[i][j])
            if q:
                b[i] = [x - q * y for x, y in zip(b[i], b[j])]
                bstar, mu = gram_schmidt()
        lhs = dot(bstar[i], bstar[i])
        rhs = (delta - mu[i][i - 1] ** 2) * dot(bstar[i - 1], bstar[i - 1])
        if lhs >= rhs:
            i += 1
        else:
            b[i], b[i - 1] = b[i - 1], b[i]
            bstar, mu = gram_schmidt()
            i = max(i - 1, 1)
    return [tuple(row) for row in b]


def nearest_in_coset(offset: Sequence[int], basis: Sequence[Sequence[int]], target: Sequence) -> tuple:
    """Babai nearest-plane: a point of offset + span_Z(basis) near target."""
    basis = lll_reduce(basis)
    bstar = []
    for row in basis:
        v = [Fraction(x) for x in row]
        for s in bstar:
            c = dot(v, s) / dot(s, s)
            v = [x - c * y for x, y in zip(v, s)]
        bstar.append(v)
    resid = [Fraction(t) - o for t, o in zip(target, offset)]
    point = list(offset)
    for row, s in reversed(list(zip(basis, bstar))):
        c = round(dot(resid, s) / dot(s, s))
        resid = [x - c * y for x, y in zip(resid, row)]
        point = [p + c * y for p, y in zip(point, row)]
    return tuple(point)


def congruent_vector(direction: Sequence, residue: Sequence[int], d: int, scale: int) -> tuple:
    """Primitive integer vector congruent to residue mod d, pointing close
    to scale * direction."""
    while True:
        v = tuple(r + d * round((Fraction(scale) * Fraction(t) - r) / d)
                  for t, r in zip(direction, residue))
        g = 0
        for x in v:
            g = gcd(g, x)
        if g == 1:
            return v
        scale += 1


def congruent_orthogonal_covector(v: Sequence[int], direction: Sequence, residue: Sequence[int],
                                  d: int, scale: int) -> tuple:
    """Primitive covector f = residue mod d with f.v = 0, close to
    scale * direction.  Requires residue.v = 0 mod d."""
    n = len(v)
    rv = dot(residue, v)
    if rv % d:
        raise ValueError("residue is not orthogonal to v mod d")
    c = -rv // d
    m = reducer(v)
    if matvec(m, v)[0] != 1:
        raise ValueError("v is not primitive")
    x = m[0]                                  # x.v = 1
    kern = [m[r] for r in range(1, n)]        # rows orthogonal to v
    target = [(Fraction(scale) * Fraction(t) - r) / d for t, r in zip(direction, residue)]
    y = nearest_in_coset([c * xi for xi in x], kern, target)
    short = lll_reduce(kern)
    for step in range(1, 1000):
        # walk along short kernel vectors until the covector is primitive
        shift = short[step % len(short)]
        f = tuple(r + d * yi for r, yi in zip(residue, y))
        g = 0
        for e in f:
            g = gcd(g, e)
        if g == 1:
            return f
        y = tuple(a + (step % 3 - 1 or 1) * b for a, b in zip(y, shift))
    raise ValueError("no primitive covector found near the target")
