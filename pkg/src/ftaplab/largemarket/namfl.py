"""Worst-case market-free-lunch value and the free-lunch separation check for one market."""

from dataclasses import dataclass
import math
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from ..convexsolve import ConstrainedClaimSet, LinearProgram, knap_min, lp_solve, min_over_cone
from ..duality import UtilityProblem, _jensen_radius, sup_utility_primal
from ..market import SeparatingSet, gains_basis
from ..orlicz import YoungUtility, complementary, luxemburg_norm, polar_gauge
from ..spaces import DensityVector

__all__ = ["NamflResult", "namfl_worstcase", "NaflResult", "nafl_check", "WITNESS", "NO_WITNESS", "INCONCLUSIVE"]

WITNESS = "witness"
NO_WITNESS = "no-witness"
INCONCLUSIVE = "inconclusive"


@dataclass
class NamflResult:
    """``max_{w in D^eps} sup_{f in C} E_R[u_F(f - w)]`` with a two-sided certificate.

    ``value`` is the min-form objective at the dual point found, an upper
    bound; ``primal_at_worst`` is the primal value at ``worst_w``, a lower
    bound. ``lam`` and ``Q`` describe the dual point (``Q`` is ``None`` when
    the infimum is only approached as ``lam -> 0``).
    """

    value: float
    lower_bound: float
    primal_at_worst: float
    worst_w: np.ndarray
    Q: Optional[DensityVector]
    lam: float
    attained: bool
    eps: float

    @property
    def gap(self):
        return self.value - self.primal_at_worst

    @property
    def free_lunch(self):
        """Nonnegative worst case: some ``w`` in ``D^eps`` is reachable at no expected loss."""
        return self.value >= -1e-12


def namfl_worstcase(market, R, eps, F, tol=1e-9):
    """Worst case over ``D^eps`` of the ``u_F`` utility problem, by the minimax exchange.

    With ``v = complementary(F)``, ``rho`` the leaf masses of ``R`` and ``m``
    ranging over the cone of separating measures,

        WCV = min_m [ -knap_min(m; D^eps) + sum_i rho_i v(m_i / rho_i) ],

    where ``D^eps`` is taken under the market measure. The objective is convex
    and piecewise smooth; it is minimized with a cutting-plane model.
    """
    p = market.probs
    rho = _masses(market, R)
    if eps > 1.0 + 1e-12:
        raise ValueError("eps > 1: D^eps is empty")
    claims = ConstrainedClaimSet(eps, p)
    v = complementary(F)
    V = SeparatingSet(market).vertices()
    if V.shape[0] == 0:
        # no separating measure: some strategy is positive everywhere and every w is reached
        w, _ = knap_min(np.zeros_like(p), claims)
        return NamflResult(0.0, 0.0, _primal(market, rho, F, w), w, None, 0.0, False, eps)

    def obj(m):
        m = np.maximum(m, 0.0)
        return float(-knap_min(m, claims)[1] + rho @ v.value(m / rho))

    def sub(m):
        m = np.maximum(m, 0.0)
        w, _ = knap_min(m, claims)
        return -w + v.deriv(m / rho)

    radius = _jensen_radius(v, 1.0)
    res = min_over_cone(obj, sub, V, smooth=False, radius=1.05 * radius, tol=tol)
    lam = float(res.weights.sum())
    if res.attained and lam > 0:
        w, _ = knap_min(np.maximum(res.point, 0.0), claims)
        Q = DensityVector(res.point / lam / p, market.space)
    else:
        # the infimum sits at the apex; the steepest vertex direction picks the worst claim
        scores = [knap_min(vk, claims)[1] for vk in V]
        w, _ = knap_min(V[int(np.argmax(scores))], claims)
        Q = None
    primal = _primal(market, rho, F, w)
    return NamflResult(res.value, max(res.lower_bound, primal), primal, w, Q, lam,
                       bool(res.attained), eps)


def _masses(market, R):
    if R is None:
        return market.probs.copy()
    if isinstance(R, DensityVector):
        return R.measure
    return np.asarray(R, dtype=float)


def _primal(market, rho, F, w):
    return sup_utility_primal(UtilityProblem(market, YoungUtility(F), rho, w)).value


# --------------------------------------------------------------------------
# separation check  C  vs  D^eps + V^F

@dataclass
class NaflResult:
    """Outcome of the ``C cap (D^eps + V^F)`` emptiness check.

    ``distance`` brackets ``min ||f - w||_G`` over ``f in C``, ``w in D^eps``
    (``G`` the complement of ``F``); ``gauge`` brackets the same minimum of
    the exact ``V^F`` gauge. A witness ``g = f - w`` has gauge at most 1.
    """

    status: str
    distance: tuple
    gauge: tuple
    f: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    g: Optional[np.ndarray] = None
    q: Optional[np.ndarray] = None
    note: str = ""


def nafl_check(market, eps, F, exact=True):
    """Is some ``f in C`` within the ``V^F`` gauge ball of ``D^eps``?

    The primal side minimizes ``||B xi - s - w||_G`` directly (an upper
    bound together with an explicit ``g``); the dual side takes separating
    measures ``q`` and uses ``E_q[w - f] >= knap_min(q)`` (a lower bound).
    With ``exact`` the polar gauge replaces the norm sandwich where it decides.
    """
    p = market.probs
    if eps > 1.0 + 1e-12:
        return NaflResult(NO_WITNESS, (math.inf, math.inf), (math.inf, math.inf), note="D^eps is empty")
    G = complementary(F)
    B = gains_basis(market).matrix
    claims = ConstrainedClaimSet(min(eps, 1.0), p)
    hit = _reach_exactly(B, p, eps)
    if hit is not None:
        f, w = hit
        zero = np.zeros_like(p)
        return NaflResult(WITNESS, (0.0, 0.0), (0.0, 0.0), f, w, zero, note="D^eps meets C")
    up, f, w = _primal_distance(B, p, eps, G)
    g = f - w
    V = SeparatingSet(market).vertices()
    lo_norm, q_norm = _dual_bound(V, p, claims, lambda h: polar_gauge(h, p, G))
    lo_gauge, q_gauge = _dual_bound(V, p, claims, lambda h: luxemburg_norm(h, p, F))
    distance = (lo_norm, up)
    gauge_up = polar_gauge(g, p, F)
    gauge = (max(lo_gauge, lo_norm), min(gauge_up, 2 * up))
    if exact:
        if gauge_up <= 1.0:
            return NaflResult(WITNESS, distance, gauge, f, w, g, q_gauge, "explicit g with gauge <= 1")
        if lo_gauge > 1.0:
            return NaflResult(NO_WITNESS, distance, gauge, f, w, g, q_gauge, "separating q bounds the gauge above 1")
    if lo_norm > 1.0:
        return NaflResult(NO_WITNESS, distance, gauge, f, w, g, q_norm, "norm distance above 1")
    if 2.0 * up <= 1.0:
        return NaflResult(WITNESS, distance, gauge, f, w, g, q_norm, "norm distance at most 1/2")
    return NaflResult(INCONCLUSIVE, distance, gauge, f, w, g, q_norm,
                      "gauge in [%.6g, %.6g]" % (gauge[0], gauge[1]))


def _reach_exactly(B, p, eps):
    """LP for ``w in D^eps`` and ``xi`` with ``B xi >= w``; returns ``(B xi, w)`` or ``None``."""
    n, k = B.shape
    # variables (xi, w): -B xi + w <= 0, -p.w <= -eps, 0 <= w <= 1
    A_ub = np.vstack([np.hstack([-B, np.eye(n)]), np.concatenate([np.zeros(k), -p])[None, :]])
    b_ub = np.concatenate([np.zeros(n), [-eps]])
    lb = np.concatenate([np.full(k, -np.inf), np.zeros(n)])
    ub = np.concatenate([np.full(k, np.inf), np.ones(n)])
    res = lp_solve(LinearProgram(np.zeros(k + n), A_ub=A_ub, b_ub=b_ub, lb=lb, ub=ub))
    if not res.ok:
        return None
    xi, w = res.x[:k], res.x[k:]
    return B @ xi, w


def _norm_and_grad(g, p, G):
    a = luxemburg_norm(g, p, G)
    if a == 0.0:
        return 0.0, np.zeros_like(g)
    t = np.abs(g) / a
    d = G.deriv(t)
    denom = float(p @ (d * t))
    return a, p * d * np.sign(g) / denom


def _primal_distance(B, p, eps, G):
    """``min ||B xi - s - w||_G`` over ``s >= 0``, ``w in D^eps`` by SLSQP; returns ``(value, f, w)``."""
    n, k = B.shape

    def split(x):
        return x[:k], x[k:k + n], x[k + n:]

    def fun(x):
        xi, s, w = split(x)
        val, grad_g = _norm_and_grad(B @ xi - s - w, p, G)
        return val, np.concatenate([B.T @ grad_g, -grad_g, -grad_g])

    w0 = np.full(n, min(1.0, eps))
    x0 = np.concatenate([np.zeros(k), np.zeros(n), w0])
    bounds = [(None, None)] * k + [(0.0, None)] * n + [(0.0, 1.0)] * n
    cons = [{"type": "ineq", "fun": lambda x: float(p @ x[k + n:]) - eps,
             "jac": lambda x: np.concatenate([np.zeros(k + n), p])}]
    best = None
    for start in (x0, np.concatenate([np.zeros(k + n), np.ones(n)])):
        res = minimize(fun, start, jac=True, method="SLSQP", bounds=bounds, constraints=cons,
                       options={"maxiter": 500, "ftol": 1e-12})
        x = res.x.copy()
        xi, s, w = split(x)
        s = np.maximum(s, 0.0)
        w = np.clip(w, 0.0, 1.0)
        short = eps - float(p @ w)
        if short > 0:  # repair tiny constraint violations so the point stays feasible
            w = np.minimum(1.0, w + short / p.sum())
            w = np.clip(w, 0.0, 1.0)
        f = B @ xi - s
        val = luxemburg_norm(f - w, p, G)
        if best is None or val < best[0]:
            best = (val, f, w)
    return best


def _dual_bound(V, p, claims, dual_norm):
    """Best ``knap_min(q) / dual_norm(q / p)`` over the vertices, the barycentre and a local ascent."""
    if V.shape[0] == 0:
        return 0.0, None

    def ratio(q):
        nq = dual_norm(q / p)
        return knap_min(np.maximum(q, 0.0), claims)[1] / nq if nq > 0 else 0.0

    cands = list(V) + [V.mean(axis=0)]
    vals = [ratio(q) for q in cands]
    best = int(np.argmax(vals))
    best_q, best_val = cands[best], vals[best]
    if V.shape[0] > 1:
        def neg(z):
            mu = np.exp(z - z.max())
            return -ratio((mu / mu.sum()) @ V)

        z0 = np.zeros(V.shape[0])
        if best < V.shape[0]:
            z0[best] = 3.0
        res = minimize(neg, z0, method="Nelder-Mead", options={"maxiter": 400, "xatol": 1e-6, "fatol": 1e-10})
        mu = np.exp(res.x - res.x.max())
        q = (mu / mu.sum()) @ V
        val = ratio(q)
        if val > best_val:
            best_q, best_val = q, val
    return float(best_val), best_q
