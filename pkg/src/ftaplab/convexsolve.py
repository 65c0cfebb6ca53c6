"""Small dense solvers: simplex LPs, 1-d convex search, knapsack over D^eps, cone minimization."""

from dataclasses import dataclass
import math
from typing import Callable, Optional

import numpy as np

from .spaces import probs_of

__all__ = [
    "LinearProgram", "LPResult", "lp_solve", "min_convex_1d", "Min1D",
    "ConstrainedClaimSet", "InfeasibleClaimSet", "knap_min",
    "ConeMinimum", "min_over_cone", "project_capped_orthant",
]

PIVOT_TOL = 1e-9
COST_TOL = 1e-10
FEAS_TOL = 1e-9
DEGENERATE_COND = 1e12


# --------------------------------------------------------------------------
# linear programming

@dataclass
class LinearProgram:
    """``min c.x`` (or max) s.t. ``A_eq x = b_eq``, ``A_ub x <= b_ub``, ``lb <= x <= ub``.

    Bounds default to ``x >= 0``; use ``-np.inf``/``np.inf`` for free sides.
    """

    c: np.ndarray
    A_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    A_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    maximize: bool = False

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        self.A_eq, self.b_eq = _rows(self.A_eq, self.b_eq, n, "equality")
        self.A_ub, self.b_ub = _rows(self.A_ub, self.b_ub, n, "inequality")
        self.lb = np.zeros(n) if self.lb is None else np.broadcast_to(np.asarray(self.lb, float), (n,)).copy()
        self.ub = np.full(n, np.inf) if self.ub is None else np.broadcast_to(np.asarray(self.ub, float), (n,)).copy()
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise ValueError("bounds must not exclude every real value")

    @property
    def n(self):
        return self.c.size


def _rows(A, b, n, what):
    if A is None or (hasattr(A, "__len__") and len(A) == 0):
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float)).ravel()
    if A.shape != (b.size, n):
        raise ValueError("%s block has shape %s, expected (%d, %d)" % (what, A.shape, b.size, n))
    if not np.all(np.isfinite(b)) or not np.all(np.isfinite(A)):
        raise ValueError("%s data must be finite" % what)
    return A, b


@dataclass
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: Optional[np.ndarray] = None
    value: float = math.nan
    eq_duals: Optional[np.ndarray] = None
    ub_duals: Optional[np.ndarray] = None
    basis_cond: float = math.nan
    iterations: int = 0

    @property
    def ok(self):
        return self.status == "optimal"

    @property
    def degenerate(self):
        """True when the final basis is too ill-conditioned to trust."""
        return bool(self.basis_cond > DEGENERATE_COND)


class _Tableau:
    """Standard form ``min c.y, A y = b, y >= 0`` solved in place."""

    def __init__(self, A, b, c):
        m, n = A.shape
        self.A, self.b, self.c = A, b, c
        self.T = np.zeros((m + 1, n + 1))
        self.T[:m, :n] = A
        self.T[:m, n] = b
        self.basis = np.full(m, -1)
        self.iterations = 0

    def set_costs(self, c):
        m, n = self.A.shape
        self.T[m, :n] = c
        self.T[m, n] = 0.0
        for i, j in enumerate(self.basis):
            if self.T[m, j] != 0.0:
                self.T[m] -= self.T[m, j] * self.T[i]

    def pivot(self, r, j):
        T = self.T
        T[r] /= T[r, j]
        col = T[:, j].copy()
        col[r] = 0.0
        T -= np.outer(col, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, allowed, max_iter):
        """Primal simplex; Dantzig pricing, Bland's rule while stalled on a degenerate vertex."""
        T = self.T
        m = T.shape[0] - 1
        bland = False
        for _ in range(max_iter):
            red = T[m, :-1]
            cand = np.flatnonzero((red < -COST_TOL) & allowed)
            if cand.size == 0:
                return "optimal"
            j = cand[0] if bland else cand[np.argmin(red[cand])]
            col = T[:m, j]
            pos = np.flatnonzero(col > PIVOT_TOL)
            if pos.size == 0:
                return "unbounded"
            ratios = T[pos, -1] / col[pos]
            best = ratios.min()
            ties = pos[ratios <= best + 1e-12 * max(1.0, abs(best))]
            r = ties[np.argmin(self.basis[ties])]
            bland = best <= 1e-12
            self.pivot(r, j)
        raise RuntimeError("simplex iteration limit reached")


def _standard_form(lp):
    """Rewrite ``lp`` as ``min c.y, A y = b, y >= 0`` and return the back-map."""
    n = lp.n
    cols = []  # (kind, var, offset): x_var = offset + sign * y
    shift = np.zeros(n)
    extra_ub_rows = []
    for j in range(n):
        lo, hi = lp.lb[j], lp.ub[j]
        if np.isfinite(lo):
            cols.append((1.0, j))
            shift[j] = lo
            if np.isfinite(hi):
                extra_ub_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            cols.append((-1.0, j))
            shift[j] = hi
        else:
            cols.append((1.0, j))
            cols.append((-1.0, j))
    ny = len(cols)
    M = np.zeros((n, ny))  # x = shift + M y
    for k, (s, j) in enumerate(cols):
        M[j, k] = s
    c = lp.c * (-1.0 if lp.maximize else 1.0)
    cy = c @ M
    const = float(c @ shift)
    A_eq = lp.A_eq @ M
    b_eq = lp.b_eq - lp.A_eq @ shift
    A_ub = lp.A_ub @ M
    b_ub = lp.b_ub - lp.A_ub @ shift
    if extra_ub_rows:
        E = np.zeros((len(extra_ub_rows), ny))
        for r, (k, width) in enumerate(extra_ub_rows):
            E[r, k] = 1.0
        A_ub = np.vstack([A_ub, E])
        b_ub = np.concatenate([b_ub, [w for _, w in extra_ub_rows]])
    m_eq, m_ub = A_eq.shape[0], A_ub.shape[0]
    A = np.zeros((m_eq + m_ub, ny + m_ub))
    A[:m_eq, :ny] = A_eq
    A[m_eq:, :ny] = A_ub
    A[m_eq:, ny:] = np.eye(m_ub)
    b = np.concatenate([b_eq, b_ub])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b *= sign
    cfull = np.concatenate([cy, np.zeros(m_ub)])
    return A, b, cfull, M, shift, const, sign, m_eq, lp.A_ub.shape[0]


def lp_solve(lp: LinearProgram, max_iter=50_000) -> LPResult:
    """Two-phase dense simplex.

    Returns the optimal vertex with constraint multipliers (sensitivity of the
    optimal value to each right-hand side) and the condition number of the
    final basis.
    """
    A, b, c, M, shift, const, sign, m_eq, m_ub0 = _standard_form(lp)
    m, ny = A.shape
    if m == 0:
        if np.any(c < -COST_TOL):
            return LPResult("unbounded")
        x = shift.copy()
        val = float(lp.c @ x)
        return LPResult("optimal", x, val, np.zeros(0), np.zeros(0), 1.0, 0)
    # initial basis: slack columns whose row was not flipped, artificials elsewhere
    slack0 = M.shape[1]
    need_art = []
    basis = np.full(m, -1)
    for i in range(m):
        k = i - m_eq
        if k >= 0 and sign[i] > 0:
            basis[i] = slack0 + k
        else:
            need_art.append(i)
    na = len(need_art)
    A1 = np.hstack([A, np.zeros((m, na))])
    for a, i in enumerate(need_art):
        A1[i, ny + a] = 1.0
        basis[i] = ny + a
    tab = _Tableau(A1, b, None)
    tab.basis = basis.copy()
    allowed = np.ones(ny + na, dtype=bool)
    if na:
        c1 = np.zeros(ny + na)
        c1[ny:] = 1.0
        tab.set_costs(c1)
        tab.run(allowed, max_iter)
        if -tab.T[m, -1] > FEAS_TOL * max(1.0, np.abs(b).max()):
            return LPResult("infeasible", iterations=tab.iterations)
        # drive zero-level artificials out; rows where that is impossible are redundant
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if tab.basis[r] >= ny:
                row = tab.T[r, :ny]
                nz = np.flatnonzero(np.abs(row) > PIVOT_TOL)
                if nz.size:
                    tab.pivot(r, nz[np.argmax(np.abs(row[nz]))])
                else:
                    keep[r] = False
        allowed[ny:] = False
    else:
        keep = np.ones(m, dtype=bool)
    tab.set_costs(np.concatenate([c, np.zeros(na)]))
    status = tab.run(allowed, max_iter)
    if status == "unbounded":
        return LPResult("unbounded", iterations=tab.iterations)
    # recompute the basic solution from the original data for accuracy
    rows = np.flatnonzero(keep)
    bcols = tab.basis[rows]
    B = A[np.ix_(rows, bcols)]
    y = np.zeros(ny)
    try:
        yb = np.linalg.solve(B, b[rows])
        duals_std = np.linalg.solve(B.T, c[bcols])
        cond = float(np.linalg.cond(B))
    except np.linalg.LinAlgError:
        yb = tab.T[rows, -1]
        duals_std = np.zeros(rows.size)
        cond = math.inf
    y[bcols] = np.maximum(yb, 0.0)
    x = shift + M @ y[:M.shape[1]]
    value = float(lp.c @ x)
    full = np.zeros(m)
    full[rows] = duals_std * sign[rows]
    if lp.maximize:
        full = -full
    return LPResult("optimal", x, value, full[:m_eq], full[m_eq:m_eq + m_ub0], cond, tab.iterations)


# --------------------------------------------------------------------------
# one-dimensional convex minimization

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class Min1D:
    x: float
    value: float
    lo: float = math.nan
    hi: float = math.nan

    def __iter__(self):
        return iter((self.x, self.value))


def min_convex_1d(phi, lo, hi, tol=1e-10):
    """Golden-section search for a convex ``phi`` on ``[lo, hi]``.

    Returns ``Min1D(x, value, lo, hi)``; unpacks as ``(argmin, value)``. The
    final bracket ``[lo, hi]`` contains a minimizer.
    """
    if not lo < hi:
        raise ValueError("need lo < hi, got [%r, %r]" % (lo, hi))
    a, b = float(lo), float(hi)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = phi(c), phi(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = phi(d)
        if c >= d:
            break
    cands = [(fc, c), (fd, d), (phi(0.5 * (a + b)), 0.5 * (a + b))]
    for edge in (float(lo), float(hi)):
        if abs(edge - a) <= tol or abs(edge - b) <= tol:
            cands.append((phi(edge), edge))
    fx, x = min(cands)
    return Min1D(x, float(fx), a, b)


# --------------------------------------------------------------------------
# linear minimization over D^eps

class InfeasibleClaimSet(ValueError):
    pass


@dataclass(frozen=True)
class ConstrainedClaimSet:
    """``D^eps = {w : 0 <= w <= 1, E_P[w] >= eps}`` on a finite space."""

    eps: float
    space: object

    @property
    def probs(self):
        return probs_of(self.space)

    @property
    def is_empty(self):
        return self.eps > 1.0 + 1e-12

    def contains(self, w, tol=1e-12):
        w = np.asarray(w, dtype=float)
        return bool(np.all(w >= -tol) and np.all(w <= 1 + tol) and self.probs @ w >= self.eps - tol)


def knap_min(z, claims):
    """Minimize ``sum z_i w_i`` over ``D^eps``.

    Greedy in increasing ``z_i / p_i`` (stable in the atom index), with one
    fractional atom at the end. Returns ``(w, value)``.
    """
    p = claims.probs
    z = np.asarray(z, dtype=float)
    if z.shape != p.shape:
        raise ValueError("cost vector length does not match the space")
    if np.any(z < 0):
        raise ValueError("costs must be nonnegative")
    if claims.is_empty:
        raise InfeasibleClaimSet("eps=%r exceeds 1; D^eps is empty" % claims.eps)
    w = np.zeros_like(p)
    need = claims.eps
    for i in np.argsort(z / p, kind="stable"):
        if need <= 0.0:
            break
        take = min(1.0, need / p[i])
        w[i] = take
        need -= take * p[i]
    if claims.eps >= 1.0:
        w[:] = 1.0
    return w, float(z @ w)


# --------------------------------------------------------------------------
# convex minimization over a finitely generated cone

@dataclass
class ConeMinimum:
    point: np.ndarray
    weights: np.ndarray
    value: float
    lower_bound: float
    attained: bool
    status: str  # "optimal", "iteration-limit" or "unbounded"
    iterations: int = 0
    radius: float = math.nan

    @property
    def gap(self):
        return self.value - self.lower_bound


def project_capped_orthant(mu, radius):
    """Euclidean projection onto ``{mu >= 0, sum mu <= radius}``."""
    x = np.maximum(mu, 0.0)
    if x.sum() <= radius:
        return x
    # project onto the simplex of mass radius
    s = np.sort(mu)[::-1]
    css = np.cumsum(s) - radius
    k = np.arange(1, mu.size + 1)
    rho = np.flatnonzero(s - css / k > 0)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(mu - theta, 0.0)


def _fw_gap(g, mu, radius):
    return float(g @ mu - radius * min(0.0, g.min()))


def min_over_cone(objective: Callable, gradient: Callable, basis, *, smooth=True,
                  radius=None, tol=1e-7, max_iter=10_000, max_radius=1e12):
    """Minimize a convex function over ``{sum_k mu_k b_k : mu >= 0}``.

    Parameters
    ----------
    objective, gradient : callables on a point ``z`` (same shape as a basis row)
        ``gradient`` returns a (sub)gradient in ``z``-coordinates.
    basis : array (K, n) or list of vectors
        Generators of the cone.
    smooth : bool
        Use spectral projected gradient (``True``) or a cutting-plane model
        (``False``, for piecewise-linear terms).
    radius : float, optional
        Initial cap on ``sum mu``; doubled while the minimizer sits on the cap.

    Returns
    -------
    ConeMinimum
        ``lower_bound`` is certified over the final capped set; ``attained`` is
        False when the best point is the cone apex (an infimum approached as
        the scale tends to zero).
    """
    V = np.atleast_2d(np.array([np.asarray(getattr(b, "values", b), dtype=float) for b in basis]))
    K = V.shape[0]
    f_mu = lambda mu: float(objective(mu @ V))
    g_mu = lambda mu: V @ np.asarray(gradient(mu @ V), dtype=float)
    R = 1.0 if radius is None else float(radius)
    total_iter = 0
    while True:
        if K == 1:
            res = _cone_1d(f_mu, g_mu, R, tol)
        elif smooth:
            res = _cone_spg(f_mu, g_mu, K, R, tol, max_iter)
        else:
            res = _cone_kelley(f_mu, g_mu, K, R, tol, max_iter)
        mu, val, lb, status, it = res
        total_iter += it
        on_cap = mu.sum() >= R * (1.0 - 1e-6)
        if not on_cap:
            break
        if R >= max_radius:
            return ConeMinimum(mu @ V, mu, val, -math.inf, True, "unbounded", total_iter, R)
        R *= 4.0
    attained = bool(mu.sum() > 1e-9 * max(1.0, R))
    return ConeMinimum(mu @ V, mu, val, min(lb, val), attained, status, total_iter, R)


def _cone_1d(f_mu, g_mu, R, tol):
    phi = lambda t: f_mu(np.array([t]))
    dphi = lambda t: float(g_mu(np.array([t]))[0])
    # a convex function is minimized where its (sub)derivative changes sign
    a, b = 0.0, R
    if dphi(0.0) >= 0.0:
        b = 0.0
    elif dphi(R) <= 0.0:
        a = R
    else:
        for _ in range(200):
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if dphi(mid) < 0.0:
                a = mid
            else:
                b = mid
    fa, fb = phi(a), phi(b)
    x, fx = (a, fa) if fa <= fb else (b, fb)
    ga, gb = dphi(a), dphi(b)
    # the tangent lines at the bracket ends bound phi from below on [a, b]
    if gb - ga > 1e-300:
        t = ((fb - gb * b) - (fa - ga * a)) / (ga - gb)
        t = min(max(t, a), b)
        lb = max(fa + ga * (t - a), fb + gb * (t - b))
    else:
        lb = min(fa, fb)
    return np.array([x]), fx, min(lb, fx), "optimal", 1


def _cone_spg(f_mu, g_mu, K, R, tol, max_iter):
    mu = np.full(K, min(1.0, R) / K)
    f = f_mu(mu)
    g = g_mu(mu)
    step = 1.0
    history = [f]
    # the Frank-Wolfe bound f - gap is valid at every iterate, so keep the best of each
    best_mu, best_f, best_lb = mu, f, -math.inf
    for it in range(1, max_iter + 1):
        gap = _fw_gap(g, mu, R)
        best_lb = max(best_lb, f - gap)
        if f < best_f:
            best_mu, best_f = mu, f
        if gap <= tol:
            return mu, f, f - gap, "optimal", it
        d = project_capped_orthant(mu - step * g, R) - mu
        # nonmonotone Armijo backtracking
        fref = max(history[-10:])
        t = 1.0
        gd = float(g @ d)
        while True:
            cand = mu + t * d
            fc = f_mu(cand)
            if fc <= fref + 1e-4 * t * gd or t < 1e-14:
                break
            t *= 0.5
        gc = g_mu(cand)
        s, y = cand - mu, gc - g
        sy = float(s @ y)
        step = float(s @ s) / sy if sy > 1e-300 else 1e6
        step = min(max(step, 1e-12), 1e12)
        mu, f, g = cand, fc, gc
        history.append(f)
    best_lb = max(best_lb, f - _fw_gap(g, mu, R))
    if f < best_f:
        best_mu, best_f = mu, f
    return best_mu, best_f, best_lb, "iteration-limit", max_iter


def _cone_kelley(f_mu, g_mu, K, R, tol, max_iter):
    """Cutting-plane model ``t >= f(mu_i) + g_i.(mu - mu_i)`` over the capped orthant."""
    from_lp = lambda cuts_mu, cuts_f, cuts_g: _kelley_lp(cuts_mu, cuts_f, cuts_g, K, R)
    mu = np.full(K, min(1.0, R) / K)
    cuts_mu, cuts_f, cuts_g = [], [], []
    best_mu, best_f = mu, math.inf
    lb = -math.inf
    for it in range(1, min(max_iter, 2000) + 1):
        f, g = f_mu(mu), g_mu(mu)
        cuts_mu.append(mu)
        cuts_f.append(f)
        cuts_g.append(g)
        if f < best_f:
            best_mu, best_f = mu, f
        nxt, model = from_lp(cuts_mu, cuts_f, cuts_g)
        lb = max(lb, model)
        if best_f - lb <= tol:
            return best_mu, best_f, lb, "optimal", it
        mu = nxt
    return best_mu, best_f, lb, "iteration-limit", it


def _kelley_lp(cuts_mu, cuts_f, cuts_g, K, R):
    # variables (mu_1..mu_K, t); minimize t
    G = np.array(cuts_g)
    rhs = np.array([g @ m - f for m, f, g in zip(cuts_mu, cuts_f, cuts_g)])
    A_ub = np.hstack([G, -np.ones((len(cuts_g), 1))])
    A_ub = np.vstack([A_ub, np.concatenate([np.ones(K), [0.0]])])
    b_ub = np.concatenate([rhs, [R]])
    c = np.zeros(K + 1)
    c[-1] = 1.0
    lb = np.concatenate([np.zeros(K), [-np.inf]])
    res = lp_solve(LinearProgram(c, A_ub=A_ub, b_ub=b_ub, lb=lb))
    if not res.ok:
        raise RuntimeError("cutting-plane model LP failed: %s" % res.status)
    return res.x[:K], float(res.x[-1])
