import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ftaplab.duality import (FreeLunchAtSet, UtilityProblem, dual_objective, lambda_bracket, separating_from_set,
                             sup_utility_dual, sup_utility_primal)
from ftaplab.largemarket import klein_market
from ftaplab.market import SeparatingSet, find_emm, gains_basis, one_period
from ftaplab.orlicz import ExpMinusLinear, PiecewiseConcaveUtility, Power, YoungUtility, complementary

from oracles import primal_grid_1d
from strategies import markets

HALF_SQUARE = Power(2.0)


def sym_market():
    return one_period(0.0, [1.0, -1.0], [0.5, 0.5])


# ---- primal

def test_primal_zero_endowment_is_zero():
    for m in (sym_market(), one_period(0.0, [2.0, -1.0, 0.5], [0.2, 0.5, 0.3])):
        res = sup_utility_primal(UtilityProblem(m, YoungUtility(HALF_SQUARE)))
        assert abs(res.value) <= 1e-12


def test_primal_symmetric_indicator():
    m = sym_market()
    prob = UtilityProblem(m, YoungUtility(HALF_SQUARE), w="leaf1")
    res = sup_utility_primal(prob)
    assert abs(res.value + 0.125) <= 1e-9
    assert abs(res.strategy[0] - 0.5) <= 1e-6
    grid = primal_grid_1d(gains_basis(m).matrix[:, 0], m.probs, prob.w, HALF_SQUARE)
    assert abs(res.value - grid) <= 1e-8


def test_primal_klein_own_payoff_reaches_zero():
    m = klein_market(0.3)
    res = sup_utility_primal(UtilityProblem(m, YoungUtility(HALF_SQUARE), w=[1.0, 0.0]))
    assert res.value >= 0.0


def test_primal_piecewise_kink():
    u = PiecewiseConcaveUtility([0.0], [1.0, 0.0])  # min(x, 0)
    res = sup_utility_primal(UtilityProblem(sym_market(), u, w="leaf1"))
    assert abs(res.value + 0.5) <= 1e-9


def test_primal_rejects_bad_belief():
    with pytest.raises(ValueError):
        UtilityProblem(sym_market(), YoungUtility(HALF_SQUARE), R=[1.0, 0.0])


# ---- dual

def test_dual_symmetric_indicator():
    prob = UtilityProblem(sym_market(), YoungUtility(HALF_SQUARE), w="leaf1")
    d = sup_utility_dual(prob)
    assert d.attained
    assert np.allclose(d.q, [0.5, 0.5], atol=1e-9)
    assert abs(d.lam - 0.5) <= 1e-6
    assert abs(d.value + 0.125) <= 1e-9
    assert abs(d.gap) <= 1e-6
    # the dual objective reduces to -lam/2 + lam^2/2 on the unique martingale density
    for lam in (0.1, 0.5, 1.3):
        assert abs(dual_objective(prob, [0.5, 0.5], lam) - (-lam / 2 + lam ** 2 / 2)) <= 1e-15


def test_dual_zero_endowment_not_attained():
    prob = UtilityProblem(sym_market(), YoungUtility(HALF_SQUARE))
    with pytest.warns(RuntimeWarning):
        d = sup_utility_dual(prob)
    assert not d.attained and d.Q is None and d.value == 0.0


def test_dual_refuses_piecewise_utility():
    with pytest.raises(TypeError):
        sup_utility_dual(UtilityProblem(sym_market(), PiecewiseConcaveUtility([0.0], [1.0, 0.0])))


def test_dual_three_leaf_example_against_joint_oracle():
    m = one_period(0.0, [2.0, -1.0, 0.5], [0.2, 0.5, 0.3])
    w = np.array([1.0, 0.0, 1.0])
    for F in (HALF_SQUARE, Power(3.0), ExpMinusLinear()):
        prob = UtilityProblem(m, YoungUtility(F), w=w)
        d = sup_utility_dual(prob)
        grid = primal_grid_1d(gains_basis(m).matrix[:, 0], m.probs, w, F, lo=-3.0, hi=3.0)
        assert abs(d.value - grid) <= 1e-6
        assert abs(d.gap) <= 1e-6


# ---- bracket and separation

def test_lambda_bracket_quadratic():
    lo, hi = lambda_bracket(HALF_SQUARE, 0.1)
    assert lo == 0.1
    assert abs(hi - (1 + math.sqrt(0.8))) <= 1e-12
    assert 0.5 in lambda_bracket(HALF_SQUARE, 0.1)
    for F in (Power(3.0), ExpMinusLinear()):
        assert lambda_bracket(F, 0.05).lo == 0.05
    with pytest.raises(ValueError):
        lambda_bracket(HALF_SQUARE, 0.0)


def test_lambda_bracket_root_property():
    for F in (HALF_SQUARE, Power(3.0), ExpMinusLinear()):
        br = lambda_bracket(F, 0.1)
        v = complementary(F)
        assert abs(v.value(br.hi) - br.hi + 0.1) <= 1e-10
        # beyond the root the inequality v(lam) - lam < -delta fails
        assert v.value(1.01 * br.hi) - 1.01 * br.hi > -0.1


def test_separating_from_set_symmetric():
    cert = separating_from_set(sym_market(), None, ["leaf1"], HALF_SQUARE, 0.1)
    assert abs(cert.mass_on_set - 0.5) <= 1e-9
    assert abs(cert.gamma - 0.1 / (1 + math.sqrt(0.8))) <= 1e-12
    assert abs(cert.gamma - 0.0528) <= 1e-4
    assert abs(cert.ball_value - 0.005 / (1 + math.sqrt(0.8) - 0.1)) <= 1e-9
    assert abs(cert.ball_value - 0.002786) <= 1e-6
    assert cert.certified


def test_separating_from_empty_set_is_free_lunch():
    with pytest.raises(FreeLunchAtSet) as err:
        separating_from_set(sym_market(), None, [], HALF_SQUARE, 0.1)
    assert err.value.primal_value == pytest.approx(0.0, abs=1e-12)


# ---- properties

def _random_separating(m, rng):
    V = SeparatingSet(m).vertices()
    if V.shape[0] == 0:
        return None
    return rng.dirichlet(np.ones(V.shape[0])) @ V


@settings(max_examples=40)
@given(markets(max_periods=2, max_leaves=6, arbitrage_bias=0.2), st.integers(0, 10 ** 6),
       st.sampled_from([HALF_SQUARE, Power(3.0), ExpMinusLinear()]))
def test_weak_duality_and_jensen_step(m, seed, F):
    rng = np.random.default_rng(seed)
    A = rng.random(m.n_leaves) < 0.5
    prob = UtilityProblem(m, YoungUtility(F), w=A.astype(float))
    primal = sup_utility_primal(prob).value
    v = complementary(F)
    for _ in range(10):
        q = _random_separating(m, rng)
        if q is None:
            return
        lam = float(rng.exponential())
        dual = dual_objective(prob, q, lam)
        assert primal <= dual + 1e-7
        # E[dQ/dR] = 1 and v convex give -lam + v(lam) <= dual objective when w is an indicator
        assert -lam * float(q @ prob.w) + float(v.value(lam)) <= dual + 1e-9


@settings(max_examples=25)
@given(markets(max_periods=2, max_leaves=6, arbitrage_bias=0.0), st.integers(0, 10 ** 6),
       st.sampled_from([HALF_SQUARE, Power(3.0), ExpMinusLinear()]))
def test_strong_duality_random_markets(m, seed, F):
    rng = np.random.default_rng(seed)
    if find_emm(m) is None:
        return
    A = rng.random(m.n_leaves) < 0.5
    if not A.any():
        A[0] = True
    prob = UtilityProblem(m, YoungUtility(F), w=A.astype(float))
    primal = sup_utility_primal(prob)
    if primal.value >= -1e-9:
        return
    d = sup_utility_dual(prob, primal)
    assert d.attained
    assert abs(d.value - primal.value) <= 1e-6
    # unconstrained quasi-Newton over strategies is an independent primal route
    direct = _direct_primal(gains_basis(m).matrix, prob.rho, prob.w, F)
    assert abs(direct - primal.value) <= 1e-6


def _direct_primal(B, rho, w, F):
    from scipy.optimize import minimize
    best = -np.inf
    rng = np.random.default_rng(0)
    for s in range(4):
        x0 = rng.normal(size=B.shape[1]) if s else np.zeros(B.shape[1])

        def fun(xi):
            short = np.maximum(w - B @ xi, 0.0)
            return float(rho @ F.value(short)), -B.T @ (F.deriv(short) * rho)

        res = minimize(fun, x0, jac=True, method="BFGS", options={"gtol": 1e-12, "maxiter": 5000})
        best = max(best, -res.fun)
    return best


@given(st.sampled_from([HALF_SQUARE, Power(3.0), Power(1.5), ExpMinusLinear()]), st.floats(0.0, 50.0))
def test_conjugate_is_nonnegative(F, y):
    assert complementary(F).value(y) >= 0.0
