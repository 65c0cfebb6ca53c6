"""Rational linear algebra for re-verifying floating-point certificates."""

from fractions import Fraction


def to_fractions(M):
    """Exact rational copy of a float matrix (lists of lists) or vector."""
    if len(M) and hasattr(M[0], "__len__"):
        return [[Fraction(float(x)) for x in row] for row in M]
    return [Fraction(float(x)) for x in M]


def rref(M):
    """Reduced row echelon form; returns ``(R, pivot_columns)``."""
    R = [row[:] for row in M]
    rows = len(R)
    cols = len(R[0]) if rows else 0
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        k = next((i for i in range(r, rows) if R[i][c] != 0), None)
        if k is None:
            continue
        R[r], R[k] = R[k], R[r]
        piv = R[r][c]
        R[r] = [x / piv for x in R[r]]
        for i in range(rows):
            if i != r and R[i][c] != 0:
                f = R[i][c]
                R[i] = [a - f * b for a, b in zip(R[i], R[r])]
        pivots.append(c)
        r += 1
    return R, pivots


def nullspace(M, cols=None):
    """Basis of ``{x : M x = 0}`` as a list of column vectors."""
    if not M:
        n = cols or 0
        return [[Fraction(int(i == j)) for i in range(n)] for j in range(n)]
    n = len(M[0])
    R, pivots = rref(M)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for i, p in enumerate(pivots):
            v[p] = -R[i][f]
        basis.append(v)
    return basis


def matvec(M, x):
    return [sum((a * b for a, b in zip(row, x)), Fraction(0)) for row in M]


def transpose(M):
    return [list(col) for col in zip(*M)]


def solve(M, b):
    """A solution of ``M x = b`` or ``None`` when inconsistent."""
    n = len(M[0])
    aug = [row[:] + [bi] for row, bi in zip(M, b)]
    R, pivots = rref(aug)
    if n in pivots:
        return None
    x = [Fraction(0)] * n
    for i, p in enumerate(pivots):
        x[p] = R[i][n]
    return x


def project_onto_span(basis, target):
    """Least-squares combination of ``basis`` vectors closest to ``target``."""
    if not basis:
        return [Fraction(0)] * len(target)
    k = len(basis)
    gram = [[sum((a * b for a, b in zip(basis[i], basis[j])), Fraction(0)) for j in range(k)] for i in range(k)]
    rhs = [sum((a * b for a, b in zip(basis[i], target)), Fraction(0)) for i in range(k)]
    coef = solve(gram, rhs)
    n = len(target)
    return [sum((coef[i] * basis[i][t] for i in range(k)), Fraction(0)) for t in range(n)]
