import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ftaplab.largemarket import (MarketFamily, MeasureSeq, contiguity_profile, exact_worst_set, fractional_worst,
                                 threshold_worst_set, young_domination)
from ftaplab.largemarket.families import constant_market

from oracles import subsets
from strategies import spaces

EPS = (0.5, 0.25, 0.125)


def _small_atom_family():
    # market n: an atom of mass 1/(n+1) next to the rest
    return MarketFamily("custom", prefix=10, rule=lambda n: constant_market((1.0 / (n + 1), n / (n + 1.0))))


# ---- families and measure sequences

def test_klein_family_keeps_alpha():
    fam = MarketFamily("klein", {"alpha": 0.3}, prefix=5)
    for m in fam.markets():
        assert m.probs[m.leaf_index["A"]] == 0.3


def test_explicit_family_prefix_and_index():
    fam = MarketFamily("explicit", prefix=10, explicit=(constant_market(), constant_market((0.2, 0.8))))
    assert fam.prefix == 2
    with pytest.raises(IndexError):
        fam.market(3)
    with pytest.raises(IndexError):
        fam.market(0)
    back = MarketFamily.from_dict(fam.to_dict())
    assert np.allclose(back.market(2).probs, [0.2, 0.8])


def test_measure_seq_validation():
    fam = MarketFamily("constant", prefix=3)
    with pytest.raises(ValueError):
        MeasureSeq(fam, {1: [0.7, 0.7]}).measure(1)
    with pytest.raises(KeyError):
        MeasureSeq(fam, {1: [0.5, 0.5]}).measure(2)


# ---- profiles

def test_identity_profile():
    fam = MarketFamily("binomial", {"T": 2}, prefix=4)
    prof = contiguity_profile(fam, MeasureSeq.reference(fam), eps_grid=EPS)
    for e, fwd, bwd in prof.rows():
        assert abs(fwd - e) <= 1e-12 and abs(bwd - e) <= 1e-12
    assert all(prof.ui_forward[k] == 0.0 for k in prof.kappas if k > 1)
    assert prof.closed_form and prof.bicontiguous_on_prefix()


def test_small_atom_family_is_not_contiguous():
    fam = _small_atom_family()
    Q = MeasureSeq(fam, rule=lambda n, m: np.array([1.0, 0.0]))
    prof = contiguity_profile(fam, Q, eps_grid=EPS, kappas=(1.0, 2.0, 4.0, 8.0))
    for e in EPS:
        # a fraction e of the small atom carries Q-mass e and P-mass e / (N + 1)
        assert abs(prof.forward[e] - e / 11) <= 1e-12
        assert prof.forward_by_n[1][e] > prof.forward_by_n[10][e]
    for k in prof.kappas:
        assert prof.ui_forward[k] >= 1.0 - 1e-12
    assert prof.young_forward is None
    assert young_domination(fam, Q) is None


def test_klein_backward_signal():
    fam = MarketFamily("klein", {"alpha": 0.3}, prefix=3)
    Q = MeasureSeq.constant(fam, [0.0, 1.0])  # conditional on B
    prof = contiguity_profile(fam, Q, eps_grid=(0.3, 0.25, 0.125), mode="sets")
    # P(A) = 0.3 while Q(A) = 0
    for e in (0.3, 0.25, 0.125):
        assert prof.backward[e] == 0.0
        assert abs(prof.forward[e] - 0.7) <= 1e-12
    assert prof.young_backward is None


def test_profile_monotone_in_eps():
    fam = MarketFamily("binomial", {"T": 2, "p": 0.3}, prefix=2)
    Q = MeasureSeq.constant(fam, [0.1, 0.2, 0.3, 0.4])
    prof = contiguity_profile(fam, Q)
    vals = [prof.forward[e] for e in sorted(prof.eps_grid)]
    assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))
    sets = contiguity_profile(fam, Q, mode="sets")
    # restricting to events can only raise the worst case
    assert all(sets.forward[e] >= prof.forward[e] - 1e-15 for e in prof.eps_grid)


# ---- Young domination

def test_young_identity():
    fam = MarketFamily("constant", prefix=2)
    Q = MeasureSeq.reference(fam)
    wit = young_domination(fam, Q)
    assert wit.p == 8.0 and abs(wit.moment - 1 / 8) <= 1e-15 and wit.all_n
    # the quadratic exponent is on the grid with moment 1/2
    wit2 = young_domination(fam, Q, grid=(2.0,))
    assert wit2.p == 2.0 and abs(wit2.moment - 0.5) <= 1e-15


def test_young_bounded_density():
    fam = MarketFamily("constant", prefix=2)
    Q = MeasureSeq.constant(fam, [0.7, 0.3])  # densities 1.4 and 0.6
    wit = young_domination(fam, Q)
    assert wit is not None
    # any p with M**p / p <= 1 is sufficient, so the returned exponent is at least that large
    M = 1.4
    suff = max(p for p in np.arange(1.05, 8.0, 0.05) if M ** p / p <= 1.0)
    assert wit.p >= suff - 0.5
    direct = 0.5 * (1.4 ** wit.p + 0.6 ** wit.p) / wit.p
    assert abs(wit.moment - direct) <= 1e-12 and direct <= 1.0


# ---- extremal sets

def _brute(q, p, eps):
    best = math.inf
    for mask in subsets(q.size):
        if q[mask].sum() >= eps - 1e-12:
            best = min(best, p[mask].sum())
    return best


@given(st.data())
def test_extremal_sets(data):
    p = data.draw(spaces(max_atoms=10))
    q = np.asarray(data.draw(st.lists(st.floats(0.0, 1.0), min_size=p.size, max_size=p.size))) + 1e-3
    q = q / q.sum()
    eps = data.draw(st.floats(0.01, 1.0))
    mask, val = exact_worst_set(q, p, eps)
    assert abs(val - _brute(q, p, eps)) <= 1e-12
    _, frac = fractional_worst(q, p, eps)
    tmask, tval = threshold_worst_set(q, p, eps)
    assert frac <= val + 1e-12 <= tval + 2e-12
    # the threshold set is optimal at its own level
    level = q[tmask].sum()
    assert abs(tval - _brute(q, p, level)) <= 1e-12
