"""Constructive bicontiguous martingale measures for a market family prefix.

For each ``eps = 2**-j``: choose the Young function whose worst-case value is
most negative, set ``delta`` to half its size, pull a separating measure heavy
on every inclusion-minimal event of ``P``-mass ``>= eps`` out of the utility
dual, and merge them with the Halmos-Savage selection. The per-``eps``
sequences are then mixed dyadically.
"""

from dataclasses import dataclass, field

import numpy as np

from ..convexsolve import ConstrainedClaimSet, knap_min
from ..duality import FreeLunchAtSet, lambda_bracket, separating_from_set
from ..market import find_emm
from ..orlicz import ExpMinusLinear, Power
from ._parallel import pmap
from .contiguity import contiguity_profile, subset_masks
from .families import MeasureSeq
from .namfl import namfl_worstcase
from .selection import SELECT_LIMIT, hs_select, mix_sequences

__all__ = ["BuildError", "BuildResult", "EpsStage", "build_bicontiguous", "minimal_heavy_sets", "DEFAULT_F_GRID"]

DEFAULT_F_GRID = (Power(2.0), Power(3.0), ExpMinusLinear())


class BuildError(ValueError):
    """A precondition failed; ``stage`` is ``emm``, ``namfl``, ``separation`` or ``selection``."""

    def __init__(self, stage, message, n=None, eps=None, leaves=None):
        self.stage, self.n, self.eps, self.leaves = stage, n, eps, leaves
        where = []
        if eps is not None:
            where.append("eps=%g" % eps)
        if n is not None:
            where.append("n=%d" % n)
        if leaves is not None:
            where.append("A=%s" % list(leaves))
        super().__init__("%s failed at %s: %s" % (stage, ", ".join(where) or "start", message))


@dataclass
class EpsStage:
    eps: float
    F: object
    worst_value: float
    delta: float
    gamma: float
    lam1: float
    mu: float
    measures: dict  # n -> leaf masses of the selected measure
    sets_used: dict  # n -> number of minimal events
    certified: bool
    wcv_by_F: dict = field(default_factory=dict)


@dataclass
class BuildResult:
    Q: MeasureSeq
    profile: object
    stages: list
    mix: object
    round_trip: dict  # (eps, n) -> worst-case value under R = Q
    round_trip_linear: dict  # (eps, n) -> -min E_Q[w] over D^eps
    N: int

    @property
    def ok(self):
        rt = all(self.round_trip[(s.eps, n)] < -s.delta for s in self.stages for n in range(1, self.N + 1))
        return (self.mix.ok and all(s.certified for s in self.stages) and rt
                and self.profile.young_forward is not None and self.profile.young_backward is not None)


def minimal_heavy_sets(p, eps, tol=1e-12):
    """Inclusion-minimal events with ``P(A) >= eps`` (boolean rows)."""
    p = np.asarray(p, dtype=float)
    if p.size > SELECT_LIMIT:
        raise ValueError("event enumeration is limited to %d leaves" % SELECT_LIMIT)
    masks = subset_masks(p.size)
    PA = masks @ p
    heavy = PA >= eps - tol
    # minimal: dropping any member atom falls below eps
    drop = PA[:, None] - p[None, :]
    minimal = heavy & np.all(~masks | (drop < eps - tol), axis=1)
    return masks[minimal]


class _PerMarket:
    """Cache of per-market results; stationary families reuse the single market."""

    def __init__(self, family, N):
        self.family = family
        self.N = N
        self.keys = {}
        for n in range(1, N + 1):
            self.keys[n] = id(family.market(n))
        self.unique = sorted(set(self.keys.values()), key=lambda k: min(n for n, v in self.keys.items() if v == k))

    def first_index(self, key):
        return min(n for n, v in self.keys.items() if v == key)

    def run(self, fn):
        """``{n: fn(n)}``, evaluating once per distinct market."""
        reps = [self.first_index(k) for k in self.unique]
        vals = dict(zip(reps, pmap(fn, reps)))
        return {n: vals[self.first_index(self.keys[n])] for n in range(1, self.N + 1)}


def _R(R, n, market):
    if R is None:
        return market.probs
    return R.measure(n)


def build_bicontiguous(family, N=None, F_grid=DEFAULT_F_GRID, J=6, R=None):
    """Run the construction on ``n <= N``; raises ``BuildError`` naming the failing stage."""
    N = family.prefix if N is None else N
    cache = _PerMarket(family, N)
    emm = cache.run(lambda n: find_emm(family.market(n)) is not None)
    for n in range(1, N + 1):
        if not emm[n]:
            raise BuildError("emm", "no equivalent martingale measure", n=n)
    stages = []
    per_eps = {}
    for j in range(1, J + 1):
        eps = 2.0 ** -j
        stage = _eps_stage(family, cache, eps, F_grid, R, N)
        stages.append(stage)
        per_eps[j] = (MeasureSeq.constant(family, stage.measures[1]) if family.stationary and R is None
                      else MeasureSeq(family, stage.measures))
    covering = {j: (4.0 * s.eps, s.mu) for j, s in zip(range(1, J + 1), stages)}
    Q, mix = mix_sequences(family, per_eps, J, N, covering=covering)
    for n in range(1, N + 1):
        if not mix.positive[n]:
            raise BuildError("selection", "mixture is not strictly positive", n=n)
    profile = contiguity_profile(family, Q, N)
    round_trip, linear = {}, {}
    for s in stages:
        vals = cache.run(lambda n, s=s: namfl_worstcase(family.market(n), Q.measure(n), s.eps, s.F).value)
        for n in range(1, N + 1):
            round_trip[(s.eps, n)] = vals[n]
            m = family.market(n)
            linear[(s.eps, n)] = -knap_min(Q.measure(n), ConstrainedClaimSet(s.eps, m.probs))[1]
    return BuildResult(Q, profile, stages, mix, round_trip, linear, N)


def _eps_stage(family, cache, eps, F_grid, R, N):
    wcv_by_F = {}
    for F in F_grid:
        vals = cache.run(lambda n, F=F: namfl_worstcase(family.market(n), _R(R, n, family.market(n)), eps, F).value)
        wcv_by_F[F.record()] = vals
    worst = {rec: max(vals.values()) for rec, vals in wcv_by_F.items()}
    rec = min(worst, key=lambda r: (worst[r], list(worst).index(r)))
    if not worst[rec] < 0.0:
        vals = wcv_by_F[rec]
        n_bad = max(vals, key=lambda n: (vals[n], -n))
        raise BuildError("namfl", "worst-case value %.6g is not negative for any F on the grid"
                         % worst[rec], n=n_bad, eps=eps)
    F = next(F for F in F_grid if F.record() == rec)
    delta = abs(worst[rec]) / 2.0
    bracket = lambda_bracket(F, delta)
    gamma = delta / bracket.hi
    mu = eps * eps * gamma / 2.0

    def select(n):
        m = family.market(n)
        rho = _R(R, n, m)
        measures = []
        for A in minimal_heavy_sets(m.probs, eps):
            idx = np.flatnonzero(A)
            try:
                cert = separating_from_set(m, rho, idx, F, delta)
            except FreeLunchAtSet as exc:
                raise BuildError("separation", str(exc), n=n, eps=eps, leaves=exc.leaves) from None
            if not cert.certified:
                raise BuildError("separation", "Q(A)=%.6g vs gamma=%.6g, ball %.6g"
                                 % (cert.mass_on_set, cert.gamma, cert.ball_value),
                                 n=n, eps=eps, leaves=[m.leaves[i] for i in idx])
            measures.append(cert.Q.measure)
        hs = hs_select(m.space, measures, eps, gamma)
        if not hs.certified:
            raise BuildError("selection", "min mass %.6g does not exceed %.6g" % (hs.min_mass, hs.threshold),
                             n=n, eps=eps)
        return hs.q, len(measures)

    out = cache.run(select)
    return EpsStage(eps, F, worst[rec], delta, gamma, bracket.hi, mu,
                    {n: out[n][0] for n in out}, {n: out[n][1] for n in out}, True, wcv_by_F)
