"""Expected utility over the superreplication cone and its convex dual.

For ``u = u_F`` and a belief ``R`` the primal value is

    sup_{f in C} E_R[u(f - w)]

and the dual minimizes, over ``z = lam * dQ/dR`` with ``Q`` separating,

    E_R[-z w + v(z)],    v = complementary(F).

Both sides are computed independently so that their gap certifies each.
"""

from dataclasses import dataclass
import math
from typing import Optional
import warnings

import numpy as np
from scipy.optimize import minimize

from ._numerics import bisect_decreasing
from .convexsolve import LinearProgram, lp_solve, min_over_cone
from .market import SeparatingSet, gains_basis
from .orlicz import PiecewiseConcaveUtility, YoungUtility, complementary
from .spaces import DensityVector

__all__ = [
    "UtilityProblem", "PrimalResult", "DualSolution", "sup_utility_primal", "sup_utility_dual",
    "dual_objective", "lambda_bracket", "LambdaBracket", "separating_from_set",
    "SeparationCertificate", "FreeLunchAtSet", "arbitrage_support",
]

DUAL_TOL = 1e-11


class FreeLunchAtSet(ValueError):
    """The utility problem with ``w = 1_A`` does not stay below ``-delta``."""

    def __init__(self, leaves, primal_value, delta):
        self.leaves = tuple(leaves)
        self.primal_value = primal_value
        self.delta = delta
        super().__init__("market free lunch at A=%s: sup utility %.6g is not below -delta=%.6g"
                         % (list(self.leaves), primal_value, -delta))


@dataclass
class UtilityProblem:
    """``sup_{f in C} E_R[u(f - w)]`` on ``market``.

    ``R`` may be a DensityVector, a vector of leaf masses, or ``None`` for the
    market's own measure; ``w`` defaults to zero.
    """

    market: object
    u: object
    R: object = None
    w: object = None

    def __post_init__(self):
        m = self.market
        if self.R is None:
            rho = m.probs.copy()
        elif isinstance(self.R, DensityVector):
            rho = self.R.measure
        else:
            rho = np.asarray(self.R, dtype=float)
        if rho.shape != (m.n_leaves,) or np.any(rho <= 0) or abs(rho.sum() - 1) > 1e-10:
            raise ValueError("belief R must be a strictly positive probability on the leaves")
        self.rho = rho / rho.sum()
        self.w = np.zeros(m.n_leaves) if self.w is None else m.leaf_vector(self.w)

    @property
    def B(self):
        return gains_basis(self.market).matrix


@dataclass
class PrimalResult:
    value: float
    strategy: np.ndarray
    payoff: np.ndarray
    arbitrage_support: np.ndarray
    attained: bool
    status: str = "optimal"

    @property
    def unbounded(self):
        return self.value == math.inf


def arbitrage_support(B, tol=1e-9):
    """Leaves on which some ``f = B xi >= 0`` is strictly positive (one LP per leaf)."""
    n, k = B.shape
    Z = np.zeros(n, dtype=bool)
    if k == 0 or not np.any(B):
        return Z
    A_ub = np.vstack([B, -B])
    b_ub = np.concatenate([np.ones(n), np.zeros(n)])
    for i in range(n):
        if Z[i]:
            continue
        res = lp_solve(LinearProgram(B[i], A_ub=A_ub, b_ub=b_ub, lb=-np.inf, maximize=True))
        if res.ok and res.value > tol:
            Z |= (B @ res.x) > tol
    return Z


def sup_utility_primal(prob: UtilityProblem, restarts=3, seed=0) -> PrimalResult:
    """Primal value in strategy coordinates.

    For ``u_F`` the shortfall ``(w - B xi)^+`` is minimized in expected
    ``F``-loss by quasi-Newton steps; leaves reachable by an arbitrage are
    dropped first since scaling that arbitrage sends their utility to ``0``
    (the sup is then approached, not attained). Piecewise-linear utilities
    are solved exactly as an LP.
    """
    if isinstance(prob.u, PiecewiseConcaveUtility):
        return _primal_piecewise(prob)
    if not isinstance(prob.u, YoungUtility):
        raise TypeError("unsupported utility")
    F = prob.u.F
    B = prob.B
    n, k = B.shape
    Z = arbitrage_support(B)
    keep = ~Z
    rho, w = prob.rho[keep], prob.w[keep]
    Bk = B[keep]
    if k == 0 or not np.any(Bk) or not keep.any():
        xi = np.zeros(k)
        short = np.maximum(w, 0.0)
        val = -float(rho @ F.value(short)) if keep.any() else 0.0
        return PrimalResult(val, xi, B @ xi, Z, not Z.any())

    def loss(xi):
        short = np.maximum(w - Bk @ xi, 0.0)
        val = float(rho @ F.value(short))
        grad = -Bk.T @ (rho * F.deriv(short))
        return val, grad

    rng = np.random.default_rng(seed)
    starts = [np.zeros(k)] + [rng.normal(size=k) for _ in range(restarts - 1)]
    best = None
    for x0 in starts:
        res = minimize(loss, x0, jac=True, method="BFGS", options={"gtol": 1e-13, "maxiter": 5000})
        res = minimize(loss, res.x, jac=True, method="L-BFGS-B",
                       options={"ftol": 1e-16, "gtol": 1e-14, "maxiter": 5000})
        if best is None or res.fun < best.fun:
            best = res
    xi = best.x
    return PrimalResult(-float(best.fun), xi, B @ xi, Z, not Z.any())


def _primal_piecewise(prob):
    # max sum rho t  s.t.  t_i <= c_k + s_k (B xi - w)_i  for every piece k
    B, rho, w = prob.B, prob.rho, prob.w
    n, k = B.shape
    pieces = prob.u.pieces()
    rows, rhs = [], []
    for c, s in pieces:
        # t_i - s (B xi)_i <= c - s w_i
        rows.append(np.hstack([-s * B, np.eye(n)]))
        rhs.append(c - s * w)
    A_ub = np.vstack(rows)
    b_ub = np.concatenate(rhs)
    obj = np.concatenate([np.zeros(k), rho])
    res = lp_solve(LinearProgram(obj, A_ub=A_ub, b_ub=b_ub, lb=-np.inf, maximize=True))
    Z = arbitrage_support(B)
    if res.status == "unbounded":
        return PrimalResult(math.inf, np.zeros(k), np.zeros(n), Z, False, "unbounded")
    xi = res.x[:k]
    return PrimalResult(res.value, xi, B @ xi, Z, not Z.any())


@dataclass
class DualSolution:
    """Dual optimizer: ``Q`` (density w.r.t. the market measure), multiplier ``lam``.

    ``value`` is the dual objective at ``(Q, lam)``; ``lower_bound`` is the
    solver's certified bound on the dual infimum.
    """

    Q: Optional[DensityVector]
    lam: float
    value: float
    attained: bool
    lower_bound: float = -math.inf
    primal_value: float = math.nan
    status: str = "optimal"

    @property
    def gap(self):
        return self.value - self.primal_value

    @property
    def q(self):
        return None if self.Q is None else self.Q.measure


def dual_objective(prob, q, lam):
    """``E_R[-lam (dQ/dR) w + v(lam dQ/dR)]`` for leaf masses ``q`` of ``Q``."""
    v = complementary(prob.u.F)
    z = lam * np.asarray(q, dtype=float) / prob.rho
    return float(prob.rho @ (-z * prob.w + v.value(z)))


def _jensen_radius(v, wmax):
    # v(lam) - lam * wmax > 0 rules out every lam beyond the root
    if wmax <= 0:
        return 1.0
    h = lambda lam: lam * wmax - v.value(lam)  # concave, positive then negative
    hi = 1.0
    while h(hi) > 0:
        hi *= 2.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0 or mid == 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    return hi


def sup_utility_dual(prob: UtilityProblem, primal: Optional[PrimalResult] = None, tol=DUAL_TOL) -> DualSolution:
    """Minimize the dual over the cone spanned by the separating vertices.

    Requires the primal value to be strictly negative; otherwise the infimum
    is approached only as ``lam -> 0`` and the result is flagged
    ``attained=False`` with a warning.
    """
    if not isinstance(prob.u, YoungUtility):
        raise TypeError("the dual is implemented for u_F utilities; apply young_minorant first")
    v = complementary(prob.u.F)
    if primal is None:
        primal = sup_utility_primal(prob)
    V = SeparatingSet(prob.market).vertices()
    if V.shape[0] == 0:
        raise ValueError("no separating measure: the dual cone is empty")
    rho, w = prob.rho, prob.w
    if primal.value >= -1e-12:
        warnings.warn("sup utility %.3g is not below u(0)=0; the dual minimum is not attained"
                      % primal.value, RuntimeWarning, stacklevel=2)
        return DualSolution(None, 0.0, 0.0, False, 0.0, primal.value, "not-attained")

    def phi(m):
        return float(-m @ w + rho @ v.value(np.maximum(m, 0.0) / rho))

    def grad(m):
        return -w + v.deriv(np.maximum(m, 0.0) / rho)

    radius = _jensen_radius(v, float(np.max(np.maximum(w, 0.0))))
    res = min_over_cone(phi, grad, V, smooth=True, radius=1.05 * radius, tol=tol)
    lam = float(res.weights.sum())
    if not res.attained or lam <= 0:
        return DualSolution(None, 0.0, res.value, False, res.lower_bound, primal.value, res.status)
    q = res.point / lam
    Q = DensityVector(q / prob.market.probs, prob.market.space)
    return DualSolution(Q, lam, res.value, True, res.lower_bound, primal.value, res.status)


@dataclass
class LambdaBracket:
    lo: float
    hi: float
    delta: float
    v: object

    def __iter__(self):
        return iter((self.lo, self.hi))

    def __contains__(self, lam):
        return self.lo <= lam <= self.hi

    def ball_function(self, y):
        """``v(delta y) / (hi - delta)``: densities of the dual optimizers have mean at most 1 under it."""
        return self.v.value(self.delta * np.asarray(y, dtype=float)) / (self.hi - self.delta)


def lambda_bracket(F, delta):
    """``(delta, lam1)`` with ``lam1`` the larger root of ``v(lam) - lam = -delta``.

    Any dual multiplier of a ``w = 1_A`` problem with value below ``-delta``
    lies in this interval.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    v = complementary(F)
    # v(lam) - lam is convex with its minimum where v'(lam) = 1, i.e. lam = F'(1)
    lam_min = float(F.deriv(1.0))
    floor = float(v.value(lam_min)) - lam_min
    if floor >= -delta:
        raise ValueError("v(lam) - lam never drops below -delta=%g (minimum %g)" % (delta, floor))
    h = lambda lam: -(float(v.value(lam)) - lam)  # decreasing beyond lam_min
    hi = 2.0 * max(lam_min, 1.0)
    while h(hi) > delta:
        hi *= 2.0
    lam1 = bisect_decreasing(h, delta, lam_min, hi, atol=1e-14)
    return LambdaBracket(float(delta), lam1, float(delta), v)


@dataclass
class SeparationCertificate:
    Q: DensityVector
    gamma: float
    mass_on_set: float
    lam: float
    bracket: LambdaBracket
    ball_value: float
    primal_value: float
    dual_value: float

    @property
    def certified(self):
        return (self.mass_on_set > self.gamma and self.lam in self.bracket
                and self.ball_value <= 1.0 + 1e-9)


def separating_from_set(market, R, A, F, delta):
    """Separating measure heavy on ``A`` from the dual of the ``w = 1_A`` problem.

    Certifies ``Q(A) > gamma = delta / lam1`` and ``E_R[v(delta dQ/dR)] <= lam1 - delta``.
    Raises ``FreeLunchAtSet`` when the primal value is not below ``-delta``.
    """
    w = np.zeros(market.n_leaves)
    idx = [market.leaf_index[a] if isinstance(a, str) else int(a) for a in A]
    w[idx] = 1.0
    prob = UtilityProblem(market, YoungUtility(F), R, w)
    primal = sup_utility_primal(prob)
    if not primal.value < -delta:
        raise FreeLunchAtSet([market.leaves[i] for i in idx], primal.value, delta)
    bracket = lambda_bracket(F, delta)
    dual = sup_utility_dual(prob, primal)
    q = dual.q
    mass = float(q[idx].sum())
    ball = float(prob.rho @ bracket.ball_function(q / prob.rho))
    return SeparationCertificate(dual.Q, delta / bracket.hi, mass, dual.lam, bracket, ball,
                                 primal.value, dual.value)
