"""Independent reference computations used by the tests.

Nothing here calls into the package's solvers; only plain data (node lists,
probabilities) is read from package objects.
"""

from fractions import Fraction
import itertools

import numpy as np
from scipy.optimize import minimize


def frac(x):
    return Fraction(repr(float(x)))


def exact_gains(market, labels=False):
    """Leaf x (node, asset) increments in rationals, built from the node list.

    With ``labels`` the ``(node id, asset)`` of every column is returned too.
    """
    nodes = {nd.id: nd for nd in market.nodes}
    kids = {}
    for nd in market.nodes:
        if nd.parent is not None:
            kids.setdefault(nd.parent, []).append(nd.id)
    leaves = list(market.leaves)

    def path(leaf):
        out = [leaf]
        while nodes[out[-1]].parent is not None:
            out.append(nodes[out[-1]].parent)
        return out[::-1]

    internal = [nd.id for nd in market.nodes if nd.id in kids]
    cols, names = [], []
    for v in internal:
        for j in range(market.assets):
            col = []
            for leaf in leaves:
                pth = path(leaf)
                if v in pth:
                    child = pth[pth.index(v) + 1]
                    col.append(frac(nodes[child].prices[j]) - frac(nodes[v].prices[j]))
                else:
                    col.append(Fraction(0))
            cols.append(col)
            names.append((v, j))
    rows = [[cols[c][i] for c in range(len(cols))] for i in range(len(leaves))]
    return (rows, names) if labels else rows


def rank(rows):
    M = [list(r) for r in rows]
    if not M:
        return 0
    r = 0
    ncol = len(M[0])
    for c in range(ncol):
        piv = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if piv is None:
            continue
        M[r], M[piv] = M[piv], M[r]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c] / M[r][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        r += 1
        if r == len(M):
            break
    return r


def in_span_exact(B, f):
    """Is the rational vector ``f`` a combination of the columns of ``B``?"""
    if not B or not B[0]:
        return all(x == 0 for x in f)
    aug = [row + [fi] for row, fi in zip(B, f)]
    return rank(B) == rank(aug)


def martingale_exact(B, q):
    """``B^T q == 0`` in exact arithmetic."""
    if not B or not B[0]:
        return True
    return all(sum(B[i][c] * q[i] for i in range(len(B))) == 0 for c in range(len(B[0])))


def subsets(n):
    for r in range(n + 1):
        for idx in itertools.combinations(range(n), r):
            m = np.zeros(n, dtype=bool)
            m[list(idx)] = True
            yield m


def brute_knap(z, p, eps):
    """``min z.w`` over the vertices of ``{0 <= w <= 1, p.w >= eps}``."""
    n = len(z)
    best = np.inf
    for bits in itertools.product((0.0, 1.0), repeat=n):
        w = np.array(bits)
        if p @ w >= eps - 1e-12:
            best = min(best, z @ w)
        for i in range(n):
            rest = p @ w - p[i] * w[i]
            wi = (eps - rest) / p[i]
            if 0.0 <= wi <= 1.0:
                v = w.copy()
                v[i] = wi
                best = min(best, z @ v)
    return best


def primal_grid_1d(col, rho, w, F, lo=-2.0, hi=2.0, n=400001):
    """``max_xi -E_rho[F((w - xi col)^+)]`` for one strategy column, by dense grid."""
    xi = np.linspace(lo, hi, n)
    short = np.maximum(w[None, :] - xi[:, None] * col[None, :], 0.0)
    vals = -(F.value(short) @ rho)
    return float(vals.max())


def joint_worst_case(B, p, rho, eps, F, starts=6, seed=0):
    """``max over (xi, w in D^eps) of -E_rho[F((w - B xi)^+)]`` by SLSQP from several starts.

    The objective is jointly concave, so this is a direct route to the
    worst-case value that never exchanges max and min.
    """
    n, k = B.shape
    rng = np.random.default_rng(seed)

    def fun(x):
        xi, w = x[:k], x[k:]
        short = np.maximum(w - B @ xi, 0.0)
        d = F.deriv(short) * rho
        return float(rho @ F.value(short)), np.concatenate([-B.T @ d, d])

    cons = [{"type": "ineq", "fun": lambda x: float(p @ x[k:]) - eps,
             "jac": lambda x: np.concatenate([np.zeros(k), p])}]
    bounds = [(-50, 50)] * k + [(0.0, 1.0)] * n
    best = np.inf
    for s in range(starts):
        x0 = np.concatenate([rng.normal(size=k) if s else np.zeros(k),
                             np.clip(rng.uniform(size=n) if s else np.full(n, eps), 0, 1)])
        res = minimize(fun, x0, jac=True, method="SLSQP", bounds=bounds, constraints=cons,
                       options={"maxiter": 1000, "ftol": 1e-14})
        x = res.x
        w = np.clip(x[k:], 0, 1)
        if p @ w < eps - 1e-9:
            continue
        best = min(best, fun(np.concatenate([x[:k], w]))[0])
    return -best
