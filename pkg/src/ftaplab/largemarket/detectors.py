"""Asymptotic arbitrage detectors (first kind, second kind, strong, free lunch with bounded risk).

Each detector reduces to the per-market profile

    psi_n(r, floor) = max {P^n(A) : xi in K^n, xi >= -floor, xi >= r on A},

computed by exhaustive event search with LP feasibility. Stationary families
(one market repeated) get verdicts that hold for the whole sequence.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from ..convexsolve import LinearProgram, lp_solve
from ..market import arbitrage_lp, gains_basis, in_C

__all__ = [
    "Verdict", "FOUND", "NOT_FOUND", "ABSENT", "gain_profile", "detect_aa1", "detect_aa2",
    "detect_saa", "detect_aflbr", "detect_all", "lift_to_C", "Schedule",
]

FOUND = "found"
NOT_FOUND = "not-found-on-prefix"
ABSENT = "certified-absent"
ENUM_LIMIT = 15


@dataclass
class Schedule:
    """``c_k = c0 / k`` and ``L_k = L0 * k`` by default; ``alpha`` for the bounded-risk kinds."""

    c0: float = 1.0
    L0: float = 1.0
    alpha: float = 0.5

    def c(self, k):
        return self.c0 / k

    def L(self, k):
        return self.L0 * k


@dataclass
class Verdict:
    condition: str
    status: str
    certificate: dict = field(default_factory=dict)
    per_n: list = field(default_factory=list)  # (n, value) pairs
    note: str = ""

    @property
    def found(self):
        return self.status == FOUND


# --------------------------------------------------------------------------
# per-market profile

def _feasible(B, mask, r, floor):
    """Strategy with ``B xi >= -floor`` everywhere and ``>= r`` on ``mask``; ``None`` if none."""
    n, k = B.shape
    lower = np.where(mask, r, -floor)
    if k == 0:
        return np.zeros(0) if np.all(lower <= 0) else None
    res = lp_solve(LinearProgram(np.zeros(k), A_ub=-B, b_ub=-lower, lb=-np.inf))
    if not res.ok:
        return None
    if np.min(B @ res.x - lower) < -1e-9:
        return None
    return res.x


def gain_profile(market, r, floor=1.0):
    """``(P(A), A, xi)`` maximizing ``P(A)`` among events where ``xi >= r`` is reachable.

    Branch and bound over atoms in decreasing probability; an event is kept
    only if an LP confirms a strategy with ``xi >= -floor`` everywhere and
    ``xi >= r`` on it. Exact for at most 15 leaves; larger markets use a single
    LP relaxation and return a feasible (not necessarily optimal) event.
    """
    B = gains_basis(market).matrix
    p = market.probs
    n = p.size
    if n > ENUM_LIMIT:
        return _relaxed_profile(B, p, r, floor)
    order = np.argsort(-p, kind="stable")
    suffix = np.concatenate([np.cumsum(p[order][::-1])[::-1], [0.0]])
    best = [0.0, np.zeros(n, dtype=bool), _feasible(B, np.zeros(n, dtype=bool), r, floor)]
    if best[2] is None:
        return 0.0, best[1], None
    mask = np.zeros(n, dtype=bool)

    def search(pos, mass):
        if mass > best[0] + 1e-15:
            best[0], best[1] = mass, mask.copy()
            best[2] = _feasible(B, mask, r, floor)
        if pos == n or mass + suffix[pos] <= best[0] + 1e-15:
            return
        i = order[pos]
        mask[i] = True
        if _feasible(B, mask, r, floor) is not None:
            search(pos + 1, mass + p[i])
        mask[i] = False
        search(pos + 1, mass)

    search(0, 0.0)
    return float(best[0]), best[1], best[2]


def _relaxed_profile(B, p, r, floor):
    # max sum p y  s.t.  r y <= B xi + floor (1 - y) ... linearized as r*y - B xi <= 0 with y in [0,1]
    n, k = B.shape
    A_ub = np.hstack([-B, (r + floor) * np.eye(n)])
    b_ub = np.full(n, floor)
    c = np.concatenate([np.zeros(k), p])
    lb = np.concatenate([np.full(k, -np.inf), np.zeros(n)])
    ub = np.concatenate([np.full(k, np.inf), np.ones(n)])
    res = lp_solve(LinearProgram(c, A_ub=A_ub, b_ub=b_ub, lb=lb, ub=ub, maximize=True))
    if not res.ok:
        return 0.0, np.zeros(n, dtype=bool), None
    xi = res.x[:k]
    pay = B @ xi
    if pay.min() < -floor - 1e-9:
        return 0.0, np.zeros(n, dtype=bool), None
    mask = pay >= r - 1e-9
    return float(p[mask].sum()), mask, xi


def lift_to_C(market, payoff, level):
    """Truncate ``payoff`` at ``level``; the result stays in ``C`` and keeps ``{payoff >= level}``."""
    f = np.minimum(np.asarray(payoff, dtype=float), level)
    return f, bool(in_C(market, f).member)


# --------------------------------------------------------------------------
# stationary families

def _positive_everywhere(market):
    """``xi`` with ``B xi >= 1`` on every leaf, or ``None``."""
    B = gains_basis(market).matrix
    n, k = B.shape
    if k == 0:
        return None
    return _feasible(B, np.ones(n, dtype=bool), 1.0, 0.0)


def _normalized_arbitrage(market):
    value, f, xi = arbitrage_lp(market)
    if value <= 1e-9:
        return None
    pos = f > 1e-9
    scale = 1.0 / f[pos].min()
    f = np.where(pos, f * scale, 0.0)
    return f, xi * scale, float(market.probs[pos].sum())


def _stationary(condition, family, N, sched):
    m = family.market(1)
    if condition in ("AA1", "AFLBR"):
        arb = _normalized_arbitrage(m)
        if arb is None:
            note = ("single market admits an equivalent martingale measure; "
                    "E_Q bounds rule out the asymptotic gains for every n")
            return Verdict(condition, ABSENT, {"reason": "no-arbitrage"}, note=note)
        f, xi, mass = arb
        if condition == "AA1":
            cert, per_n = [], []
            for k in range(1, N + 1):
                c, L = sched.c(k), sched.L(k)
                eta = (L / c) * f  # in K_1 since f >= 0
                payoff = c * eta  # xi^k in c_k K_1 with xi^k >= L_k on {f > 0}
                lifted, ok = lift_to_C(m, payoff, L)
                prob = float(m.probs[payoff >= L - 1e-9].sum())
                per_n.append((k, prob))
                cert.append({"k": k, "c": c, "L": L, "units": (L / c), "prob": prob, "in_C": ok})
            return Verdict("AA1", FOUND, {"strategy": xi.tolist(), "payoff": f.tolist(),
                                          "mass": mass, "steps": cert}, per_n,
                           note="scaled one-period arbitrage")
        alpha = min(sched.alpha, mass)
        payoff = alpha * f
        lifted, ok = lift_to_C(m, payoff, alpha)
        per_n = [(k, mass) for k in range(1, N + 1)]
        return Verdict("AFLBR", FOUND, {"alpha": alpha, "payoff": payoff.tolist(), "in_C": ok,
                                        "mass": mass}, per_n, note="arbitrage carries no downside")
    eta = _positive_everywhere(m)
    if eta is None:
        return Verdict(condition, ABSENT, {"reason": "no strategy is positive on every leaf"},
                       note="probabilities are frozen in n, so P(xi >= alpha) -> 1 needs xi > 0 everywhere")
    B = gains_basis(m).matrix
    scale = 1.0 / float((B @ eta).min())
    eta = eta * scale
    pay = B @ eta  # at least 1 on every leaf, so no scaling c_k can make it lose
    lifted, ok = lift_to_C(m, pay, 1.0)
    return Verdict(condition, FOUND, {"strategy": eta.tolist(), "payoff": pay.tolist(), "alpha": 1.0,
                                      "in_C": ok},
                   [(k, 1.0) for k in range(1, N + 1)], note="strategy positive on every leaf")


# --------------------------------------------------------------------------
# prefix rule for non-stationary families

def _prefix(condition, family, N, sched):
    per_n, certs = [], []
    for k in range(1, N + 1):
        m = family.market(k)
        if condition == "AA1":
            r, floor = sched.L(k) / sched.c(k), 1.0
        elif condition == "AA2":
            r, floor = sched.alpha, 1.0
        elif condition == "SAA":
            r, floor = sched.alpha / sched.c(k), 1.0
        else:  # AFLBR with losses at most 1/k
            r, floor = sched.alpha, 1.0 / k
        val, mask, xi = gain_profile(m, r, floor)
        per_n.append((k, val))
        certs.append({"k": k, "set": [m.leaves[i] for i in np.flatnonzero(mask)],
                      "strategy": None if xi is None else xi.tolist()})
    tail = [v for k, v in per_n if k >= math.ceil(N / 2)]
    need = {"AA1": 1e-12, "AA2": 1.0 - 1e-9, "SAA": 1.0 - 1e-9, "AFLBR": sched.alpha - 1e-12}[condition]
    found = bool(tail) and min(tail) >= need and (condition != "AA1" or min(tail) > 0)
    limited = any(family.market(k).n_leaves > ENUM_LIMIT for k in range(1, N + 1))
    note = "tail-half rule on n <= %d" % N + ("; LP relaxation used" if limited else "")
    return Verdict(condition, FOUND if found else NOT_FOUND, {"steps": certs, "threshold": need}, per_n, note)


def _detect(condition, family, N, sched):
    N = family.prefix if N is None else N
    sched = sched or Schedule()
    if family.stationary:
        return _stationary(condition, family, N, sched)
    return _prefix(condition, family, N, sched)


def detect_aa1(family, N=None, schedule=None):
    """Arbitrage of the first kind: ``xi^k in c_k K_1`` with ``P(xi^k >= L_k)`` bounded away from 0."""
    return _detect("AA1", family, N, schedule)


def detect_aa2(family, N=None, schedule=None):
    """Arbitrage of the second kind: ``xi^k in K_1`` with ``P(xi^k >= alpha) -> 1``."""
    return _detect("AA2", family, N, schedule)


def detect_saa(family, N=None, schedule=None):
    """Strong asymptotic arbitrage: ``xi^k in c_k K_1`` with ``P(xi^k >= alpha) -> 1``."""
    return _detect("SAA", family, N, schedule)


def detect_aflbr(family, N=None, schedule=None):
    """Free lunch with bounded risk: ``P(xi^k >= alpha) >= alpha`` with vanishing losses."""
    return _detect("AFLBR", family, N, schedule)


def detect_all(family, N=None, schedule=None):
    return [f(family, N, schedule) for f in (detect_aa1, detect_aa2, detect_saa, detect_aflbr)]
