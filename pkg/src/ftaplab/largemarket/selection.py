"""Quantitative Halmos-Savage selection and the dyadic mixture of measure sequences."""

from dataclasses import dataclass, field
import math
from typing import Optional

import numpy as np

from ..convexsolve import LinearProgram, lp_solve
from ..market import SeparatingSet
from ..spaces import probs_of
from .contiguity import subset_masks
from .families import MeasureSeq

__all__ = ["HSResult", "HypothesisViolated", "hs_select", "MixReport", "mix_sequences", "SELECT_LIMIT"]

SELECT_LIMIT = 15
STRICT = 1e-12


class HypothesisViolated(ValueError):
    def __init__(self, leaves, prob, best):
        self.leaves = tuple(leaves)
        self.prob = prob
        self.best = best
        super().__init__("no measure in the family charges A=%s (P(A)=%.6g) above delta; best is %.6g"
                         % (list(self.leaves), prob, best))


@dataclass
class HSResult:
    """Selected measure ``q`` (leaf masses) with weights on the input family.

    ``min_mass`` is ``min Q0(A)`` over every event with ``P(A) > 4 eps``,
    found by exhaustive enumeration; ``threshold`` is ``eps**2 delta / 2``.
    """

    q: np.ndarray
    weights: np.ndarray
    min_mass: float
    threshold: float
    worst_set: Optional[np.ndarray]
    cuts: int

    @property
    def certified(self):
        return self.min_mass > self.threshold


def _family_rows(Mset, n):
    if isinstance(Mset, SeparatingSet):
        V = Mset.vertices()
    else:
        V = np.atleast_2d(np.array([np.asarray(getattr(m, "measure", m), dtype=float) for m in Mset]))
    if V.shape[1] != n:
        raise ValueError("measures must live on the same %d atoms" % n)
    if np.any(V < -1e-12) or np.any(np.abs(V.sum(axis=1) - 1.0) > 1e-9):
        raise ValueError("family members must be probability vectors")
    return np.maximum(V, 0.0)


def hs_select(space, Mset, eps, delta, labels=None, max_cuts=500):
    """Member of ``conv(Mset)`` charging every event with ``P(A) > 4 eps`` by more than ``eps**2 delta / 2``.

    ``Mset`` is a ``SeparatingSet`` (its vertices are used) or a list of
    measures. Maximizes ``min_A Q0(A)`` with a cutting-plane LP: each round
    adds the currently lightest event. Raises ``HypothesisViolated`` when some
    event with ``P(A) > eps`` is charged at most ``delta`` by every member.
    """
    p = probs_of(space)
    n = p.size
    if n > SELECT_LIMIT:
        raise ValueError("exhaustive certification is limited to %d atoms" % SELECT_LIMIT)
    labels = labels or getattr(space, "labels", None) or tuple(str(i) for i in range(n))
    V = _family_rows(Mset, n)
    masks = subset_masks(n)
    PA = masks @ p
    QA = masks @ V.T  # events x members
    # the hypothesis: every event heavier than eps is charged above delta by some member
    heavy = PA > eps + STRICT
    best = QA[heavy].max(axis=1) if heavy.any() else np.zeros(0)
    bad = np.flatnonzero(best <= delta)
    if bad.size:
        k = np.flatnonzero(heavy)[bad[np.argmin(PA[heavy][bad])]]
        raise HypothesisViolated([labels[i] for i in np.flatnonzero(masks[k])], float(PA[k]), float(QA[k].max()))
    threshold = eps * eps * delta / 2.0
    target = PA > 4.0 * eps + STRICT
    K = V.shape[0]
    if not target.any():
        alpha = np.full(K, 1.0 / K)
        return HSResult(alpha @ V, alpha, math.inf, threshold, None, 0)
    T = QA[target]
    rows = [int(np.argmin(T.mean(axis=1)))]
    alpha = np.full(K, 1.0 / K)
    for cuts in range(1, max_cuts + 1):
        # max s  s.t.  s <= sum_k alpha_k Q_k(A) on the cut events, alpha in the simplex
        A_ub = np.hstack([-T[rows], np.ones((len(rows), 1))])
        res = lp_solve(LinearProgram(np.concatenate([np.zeros(K), [1.0]]),
                                     A_eq=np.concatenate([np.ones(K), [0.0]])[None, :], b_eq=[1.0],
                                     A_ub=A_ub, b_ub=np.zeros(len(rows)),
                                     lb=np.concatenate([np.zeros(K), [-np.inf]]), maximize=True))
        if not res.ok:
            raise RuntimeError("selection LP failed: %s" % res.status)
        alpha = np.maximum(res.x[:K], 0.0)
        alpha /= alpha.sum()
        s = res.x[-1]
        masses = T @ alpha
        worst = int(np.argmin(masses))
        if masses[worst] >= s - 1e-12 or worst in rows:
            break
        rows.append(worst)
    q = alpha @ V
    full = masks[target] @ q
    k = int(np.argmin(full))
    return HSResult(q, alpha, float(full[k]), threshold, masks[target][k], cuts)


@dataclass
class MixReport:
    J: int
    renormalization: float
    remainder: float
    positive: dict  # n -> bool
    separating: dict  # n -> bool
    covering: dict = field(default_factory=dict)  # (j, n) -> bool
    mixture_bound: dict = field(default_factory=dict)  # n -> bool

    @property
    def ok(self):
        return (all(self.positive.values()) and all(self.separating.values())
                and all(self.covering.values()) and all(self.mixture_bound.values()))


def mix_sequences(family, per_eps, J=None, N=None, covering=None, check_separating=True):
    """Truncated dyadic mixture ``Q^n = sum_{j<=J} 2^-j Q^{n,j} / (1 - 2^-J)``.

    Parameters
    ----------
    per_eps : dict
        ``j -> MeasureSeq`` for ``eps_j = 2**-j`` (keys may also be the eps values).
    covering : dict, optional
        ``j -> (t_j, mu_j)`` meaning ``P(A) > t_j`` forces ``Q^{n,j}(A) > mu_j``.
        When given, the property is checked on every event and the mixture
        is checked against ``P(A) <= t_j + Q(A) / (w_j mu_j)``.

    Returns
    -------
    (MeasureSeq, MixReport)
    """
    seqs = {}
    for key, seq in per_eps.items():
        j = int(key) if float(key) >= 1 else int(round(-math.log2(float(key))))
        seqs[j] = seq
    J = max(seqs) if J is None else int(J)
    if J < 1:
        raise ValueError("need J >= 1")
    missing = [j for j in range(1, J + 1) if j not in seqs]
    if missing:
        raise ValueError("no sequence for eps = 2^-%d" % missing[0])
    N = family.prefix if N is None else N
    norm = 1.0 - 2.0 ** -J
    weights = {j: 2.0 ** -j / norm for j in range(1, J + 1)}
    masses, positive, separating, cover_ok, bound_ok = {}, {}, {}, {}, {}
    for n in range(1, N + 1):
        m = family.market(n)
        parts = {j: seqs[j].measure(n) for j in range(1, J + 1)}
        if check_separating:
            S = SeparatingSet(m)
            for j, q in parts.items():
                if not S.contains(q):
                    raise ValueError("input for eps=2^-%d at n=%d is not a separating measure" % (j, n))
            separating[n] = True
        q = sum(weights[j] * parts[j] for j in parts)
        masses[n] = q
        positive[n] = bool(np.all(q > 0))
        if covering and m.n_leaves <= SELECT_LIMIT:
            masks = subset_masks(m.n_leaves)
            PA = masks @ m.probs
            QA = masks @ q
            ok_bound = True
            for j, (t, mu) in covering.items():
                if j > J:
                    continue
                heavy = PA > t + STRICT
                cover_ok[(j, n)] = bool(np.all(masks[heavy] @ parts[j] > mu))
                ok_bound &= bool(np.all(PA <= t + QA / (weights[j] * mu) + 1e-12))
            bound_ok[n] = ok_bound
    if family.stationary and all(seqs[j].closed_form for j in range(1, J + 1)):
        out = MeasureSeq.constant(family, masses[1])
    else:
        out = MeasureSeq(family, masses)
    return out, MixReport(J, norm, 2.0 ** -J, positive, separating, cover_ok, bound_ok)
