"""Contiguity diagnostics for measure sequences on a family's prefix.

The forward direction asks whether ``(Q^n)`` is contiguous with respect to
``(P^n)``: ``delta(eps) = min {E_P[w] : 0 <= w <= 1, E_Q[w] >= eps}``
must stay away from zero. The backward direction swaps the roles. Randomized
sets ``w`` are used by default, which makes ``delta(eps) = eps`` exact when
``Q = P``; ``mode="sets"`` restricts to genuine events.
"""

from dataclasses import dataclass
import math
from typing import Optional

import numpy as np

from ..convexsolve import ConstrainedClaimSet, knap_min
from ..orlicz import Power
from .families import MeasureSeq

__all__ = [
    "ContiguityProfile", "contiguity_profile", "young_domination", "YoungWitness",
    "fractional_worst", "threshold_worst_set", "exact_worst_set", "subset_masks",
    "DEFAULT_EPS_GRID", "DEFAULT_KAPPAS", "POWER_GRID",
]

DEFAULT_EPS_GRID = tuple(2.0 ** -j for j in range(1, 9))
DEFAULT_KAPPAS = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
POWER_GRID = tuple([8.0 - 0.5 * i for i in range(13)] + [1.75, 1.5, 1.25, 1.1, 1.05, 1.01])
EXACT_SET_LIMIT = 16


def subset_masks(n):
    """Boolean matrix of all ``2**n`` subsets of ``n`` atoms (row ``k`` is the binary expansion of ``k``)."""
    k = np.arange(2 ** n, dtype=np.int64)
    return ((k[:, None] >> np.arange(n)) & 1).astype(bool)


def fractional_worst(q, p, eps):
    """``min E_p[w]`` over ``0 <= w <= 1`` with ``E_q[w] >= eps``; returns ``(w, value)``."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if eps > q.sum() + 1e-12:
        return None, math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        return knap_min(p, ConstrainedClaimSet(eps, q))


def threshold_worst_set(q, p, eps):
    """Smallest prefix of atoms sorted by decreasing ``q / p`` with ``Q(A) >= eps``.

    Returns ``(mask, P(A))``. This is optimal for the randomized problem up to
    its last atom, and a feasible upper bound on the set problem.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    order = np.argsort(-q / p, kind="stable")
    mask = np.zeros(q.size, dtype=bool)
    mass = 0.0
    for i in order:
        if mass >= eps - 1e-15:
            break
        mask[i] = True
        mass += q[i]
    if mass < eps - 1e-15:
        return None, math.inf
    return mask, float(p[mask].sum())


def exact_worst_set(q, p, eps, tol=1e-12):
    """``min {P(A) : Q(A) >= eps}`` by enumerating every event; returns ``(mask, value)``."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if q.size > EXACT_SET_LIMIT:
        raise ValueError("exhaustive search limited to %d atoms" % EXACT_SET_LIMIT)
    masks = subset_masks(q.size)
    qa = masks @ q
    pa = masks @ p
    ok = qa >= eps - tol
    if not ok.any():
        return None, math.inf
    pa = np.where(ok, pa, np.inf)
    k = int(np.argmin(pa))
    return masks[k], float(pa[k])


@dataclass
class YoungWitness:
    F: object
    moment: float
    all_n: bool  # True when the bound holds for every n, not just the prefix

    @property
    def p(self):
        return self.F.p


@dataclass
class ContiguityProfile:
    """Per-``eps`` worst cases and uniform-integrability tables in both directions.

    ``forward[eps]`` bounds ``P(A)`` from below over events with ``Q(A) >= eps``
    (small values signal that ``Q`` is not contiguous w.r.t. ``P``);
    ``backward`` is the mirror image.
    """

    eps_grid: tuple
    forward: dict
    backward: dict
    forward_by_n: dict
    backward_by_n: dict
    kappas: tuple
    ui_forward: dict
    ui_backward: dict
    young_forward: Optional[YoungWitness] = None
    young_backward: Optional[YoungWitness] = None
    N: int = 0
    mode: str = "fractional"
    closed_form: bool = False

    def rows(self):
        for e in self.eps_grid:
            yield e, self.forward[e], self.backward[e]

    def bicontiguous_on_prefix(self, floor=0.0):
        return (min(self.forward.values()) > floor and min(self.backward.values()) > floor)


def _worst(q, p, eps, mode):
    if mode == "fractional":
        return fractional_worst(q, p, eps)[1]
    if mode == "sets":
        if q.size <= EXACT_SET_LIMIT:
            return exact_worst_set(q, p, eps)[1]
        return threshold_worst_set(q, p, eps)[1]
    raise ValueError("mode must be 'fractional' or 'sets'")


def _ui(weight, ratio, kappa):
    # E_weight[ratio 1{ratio > kappa}]; an infinite ratio marks mass the weight does not see
    if np.any(np.isinf(ratio)):
        return math.inf
    big = ratio > kappa
    if not big.any():
        return 0.0
    return float(weight[big] @ ratio[big])


def _ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return r


def _indices(Q, N):
    fam = Q.family
    closed = Q.closed_form and fam.stationary
    return ([1] if closed else list(range(1, N + 1))), closed


def contiguity_profile(family, Q: MeasureSeq, N=None, eps_grid=DEFAULT_EPS_GRID,
                       kappas=DEFAULT_KAPPAS, mode="fractional", young=True):
    """Worst-case tables for ``Q`` against the family's measures on ``n <= N``.

    For stationary families with a closed-form sequence the single market
    determines every ``n`` and the profile is flagged ``closed_form``.
    """
    N = family.prefix if N is None else N
    idx, closed = _indices(Q, N)
    fwd_n, bwd_n = {}, {}
    uif = {k: 0.0 for k in kappas}
    uib = {k: 0.0 for k in kappas}
    for n in idx:
        p = family.market(n).probs
        q = Q.measure(n)
        fwd_n[n] = {e: _worst(q, p, e, mode) for e in eps_grid}
        bwd_n[n] = {e: _worst(p, q, e, mode) for e in eps_grid}
        h, g = _ratio(q, p), _ratio(p, q)
        for k in kappas:
            uif[k] = max(uif[k], _ui(p, h, k))
            uib[k] = max(uib[k], _ui(q, g, k))
    forward = {e: min(fwd_n[n][e] for n in idx) for e in eps_grid}
    backward = {e: min(bwd_n[n][e] for n in idx) for e in eps_grid}
    prof = ContiguityProfile(tuple(eps_grid), forward, backward, fwd_n, bwd_n, tuple(kappas),
                             uif, uib, N=N, mode=mode, closed_form=closed)
    if young:
        prof.young_forward = young_domination(family, Q, N, "forward")
        prof.young_backward = young_domination(family, Q, N, "backward")
    return prof


def _moment(family, Q, n, p_exp, direction):
    p = family.market(n).probs
    q = Q.measure(n)
    base, ratio = (p, _ratio(q, p)) if direction == "forward" else (q, _ratio(p, q))
    if np.any(np.isinf(ratio)):
        return math.inf  # no density: the other measure charges a null atom
    live = base > 0
    r = ratio[live]
    with np.errstate(over="ignore"):
        return float(base[live] @ (r ** p_exp / p_exp))


def young_domination(family, Q: MeasureSeq, N=None, direction="forward", grid=POWER_GRID):
    """Largest grid exponent ``p <= 8`` with ``sup_n E[h**p / p] <= 1``.

    ``h`` is ``dQ/dP`` under ``P`` (forward) or ``dP/dQ`` under ``Q``
    (backward). Returns a ``YoungWitness`` with ``F(x) = x**p / p`` or ``None``.
    """
    N = family.prefix if N is None else N
    idx, closed = _indices(Q, N)
    for p_exp in sorted(grid, reverse=True):
        worst = max(_moment(family, Q, n, p_exp, direction) for n in idx)
        if worst <= 1.0:
            return YoungWitness(Power(p_exp), worst, closed)
    return None
