"""Young functions, Orlicz norms and the utility/Young-function bridge.

A Young function here is a continuously differentiable convex
``F: [0, inf) -> [0, inf)`` with ``F(0) = F'(0) = 0`` and ``F'`` strictly
increasing to infinity. Each family exposes its value, derivative and inverse
derivative so that conjugation, Luxemburg norms and polar gauges can all be
computed from scalar monotone root finding.
"""

import math
import re

import numpy as np

from ._numerics import adaptive_simpson, bisect_decreasing
from .spaces import probs_of

__all__ = [
    "YoungFunction", "Power", "ExpMinusLinear", "Entropy", "Tabulated", "Scaled",
    "InvalidYoungFunction", "UtilityFunction", "YoungUtility", "PiecewiseConcaveUtility",
    "complementary", "numeric_complementary", "luxemburg_norm", "luxemburg_norm_many", "polar_gauge",
    "ui_tail_bound", "utility_from_young", "conjugate_utility", "young_minorant",
    "minorant_violation", "check_young", "parse_young",
]


class InvalidYoungFunction(ValueError):
    pass


class YoungFunction:
    """Base class; subclasses supply ``value``, ``deriv`` and ideally ``deriv_inv``."""

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        raise NotImplementedError

    def deriv(self, x):
        raise NotImplementedError

    def deriv_inv(self, t):
        """Inverse of ``deriv``, by bisection unless a subclass knows better."""
        t = np.asarray(t, dtype=float)
        out = np.array([self._invert_scalar(ti) for ti in t.ravel()])
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def _invert_scalar(self, t):
        if t <= 0.0:
            return 0.0
        hi = 1.0
        while self.deriv(hi) < t:
            hi *= 2.0
        lo = 0.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if self.deriv(mid) < t:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def complementary(self):
        return _NumericConjugate(self)

    def record(self):
        raise NotImplementedError("%s has no text record" % type(self).__name__)

    def __repr__(self):
        try:
            return "<%s>" % self.record()
        except NotImplementedError:
            return "<%s>" % type(self).__name__


class Power(YoungFunction):
    """``F(x) = scale * x**p / p`` with ``p > 1``."""

    def __init__(self, p, scale=1.0):
        if not p > 1.0:
            raise InvalidYoungFunction("power exponent must exceed 1, got %r" % p)
        if not scale > 0.0:
            raise InvalidYoungFunction("power scale must be positive")
        self.p = float(p)
        self.scale = float(scale)

    def value(self, x):
        return self.scale * np.power(x, self.p) / self.p

    def deriv(self, x):
        return self.scale * np.power(x, self.p - 1.0)

    def deriv_inv(self, t):
        return np.power(np.asarray(t, dtype=float) / self.scale, 1.0 / (self.p - 1.0))

    @property
    def conjugate_exponent(self):
        return self.p / (self.p - 1.0)

    def complementary(self):
        q = self.conjugate_exponent
        return Power(q, self.scale ** (1.0 - q))

    def record(self):
        if self.scale == 1.0:
            return "power p=%s" % _fmt(self.p)
        return "power p=%s scale=%s" % (_fmt(self.p), _fmt(self.scale))

    def __eq__(self, other):
        return isinstance(other, Power) and (self.p, self.scale) == (other.p, other.scale)

    def __hash__(self):
        return hash(("power", self.p, self.scale))


class ExpMinusLinear(YoungFunction):
    """``F(x) = exp(x) - x - 1``."""

    def value(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            return np.expm1(x) - x

    def deriv(self, x):
        with np.errstate(over="ignore"):
            return np.expm1(x)

    def deriv_inv(self, t):
        return np.log1p(t)

    def complementary(self):
        return Entropy()

    def record(self):
        return "expml"

    def __eq__(self, other):
        return isinstance(other, ExpMinusLinear)

    def __hash__(self):
        return hash("expml")


class Entropy(YoungFunction):
    """``F(y) = (1 + y) log(1 + y) - y``, the conjugate of ``exp(x) - x - 1``."""

    def value(self, y):
        y = np.asarray(y, dtype=float)
        return (1.0 + y) * np.log1p(y) - y

    def deriv(self, y):
        return np.log1p(y)

    def deriv_inv(self, t):
        with np.errstate(over="ignore"):
            return np.expm1(t)

    def complementary(self):
        return ExpMinusLinear()

    def record(self):
        return "entropy"

    def __eq__(self, other):
        return isinstance(other, Entropy)

    def __hash__(self):
        return hash("entropy")


class Tabulated(YoungFunction):
    """Young function with a piecewise-linear derivative and a power tail.

    ``knots`` and ``slopes`` sample ``F'`` (both strictly increasing, starting
    at ``(0, 0)``); beyond the last knot ``F'(x) = s_K (x / x_K)**(tail - 1)``.
    """

    def __init__(self, knots, slopes, tail):
        x = np.asarray(knots, dtype=float)
        s = np.asarray(slopes, dtype=float)
        if x.ndim != 1 or x.shape != s.shape or x.size < 2:
            raise InvalidYoungFunction("need at least two (knot, slope) samples")
        if x[0] != 0.0 or s[0] != 0.0:
            raise InvalidYoungFunction("first sample must be (0, 0)")
        if np.any(np.diff(x) <= 0.0):
            raise InvalidYoungFunction("knots must be strictly increasing")
        if np.any(np.diff(s) <= 0.0):
            raise InvalidYoungFunction("derivative samples must be strictly increasing")
        if not tail > 1.0:
            raise InvalidYoungFunction("tail growth exponent must exceed 1")
        self.knots, self.slopes, self.tail = x, s, float(tail)
        self._cum = np.concatenate([[0.0], np.cumsum(0.5 * (s[1:] + s[:-1]) * np.diff(x))])

    def value(self, x):
        x = np.asarray(x, dtype=float)
        xk, sk = self.knots[-1], self.slopes[-1]
        inside = np.minimum(x, xk)
        i = np.clip(np.searchsorted(self.knots, inside, side="right") - 1, 0, self.knots.size - 2)
        dx = inside - self.knots[i]
        width = self.knots[i + 1] - self.knots[i]
        gain = (self.slopes[i + 1] - self.slopes[i]) / width
        body = self._cum[i] + self.slopes[i] * dx + 0.5 * gain * dx * dx
        ratio = np.maximum(x, xk) / xk
        tail = self._cum[-1] + sk * xk / self.tail * (np.power(ratio, self.tail) - 1.0)
        return np.where(x <= xk, body, tail)

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        xk, sk = self.knots[-1], self.slopes[-1]
        body = np.interp(np.minimum(x, xk), self.knots, self.slopes)
        tail = sk * np.power(np.maximum(x, xk) / xk, self.tail - 1.0)
        return np.where(x <= xk, body, tail)

    def deriv_inv(self, t):
        t = np.asarray(t, dtype=float)
        xk, sk = self.knots[-1], self.slopes[-1]
        body = np.interp(np.minimum(t, sk), self.slopes, self.knots)
        tail = xk * np.power(np.maximum(t, sk) / sk, 1.0 / (self.tail - 1.0))
        return np.where(t <= sk, body, tail)

    def complementary(self):
        # (F')^{-1} is piecewise linear through the swapped samples, with the conjugate tail.
        return Tabulated(self.slopes, self.knots, self.tail / (self.tail - 1.0))

    def record(self):
        pairs = ",".join("(%s,%s)" % (_fmt(a), _fmt(b)) for a, b in zip(self.knots, self.slopes))
        return "tab knots=[%s] tail=%s" % (pairs, _fmt(self.tail))


class Scaled(YoungFunction):
    """``x -> outer * base(inner * x)``."""

    def __init__(self, base, outer=1.0, inner=1.0):
        if not (outer > 0.0 and inner > 0.0):
            raise InvalidYoungFunction("scale factors must be positive")
        self.base, self.outer, self.inner = base, float(outer), float(inner)

    def value(self, x):
        return self.outer * self.base.value(self.inner * np.asarray(x, dtype=float))

    def deriv(self, x):
        return self.outer * self.inner * self.base.deriv(self.inner * np.asarray(x, dtype=float))

    def deriv_inv(self, t):
        return self.base.deriv_inv(np.asarray(t, dtype=float) / (self.outer * self.inner)) / self.inner

    def complementary(self):
        return Scaled(self.base.complementary(), self.outer, 1.0 / (self.outer * self.inner))

    def record(self):
        return "scaled outer=%s inner=%s base=%s" % (_fmt(self.outer), _fmt(self.inner), self.base.record())


class _NumericConjugate(YoungFunction):
    """Complementary function ``G(y) = int_0^y (F')^{-1}(t) dt`` by quadrature."""

    def __init__(self, base, tol=1e-8):
        self.base = base
        self.tol = tol

    def value(self, y):
        y = np.asarray(y, dtype=float)
        inv = lambda t: float(self.base.deriv_inv(t))
        out = np.array([adaptive_simpson(inv, 0.0, float(yi), self.tol) for yi in y.ravel()])
        return out.reshape(y.shape) if y.ndim else float(out[0])

    def deriv(self, y):
        return self.base.deriv_inv(y)

    def deriv_inv(self, t):
        return self.base.deriv(t)

    def complementary(self):
        return self.base


def _fmt(x):
    return repr(float(x)).rstrip("0").rstrip(".") if float(x) != int(x) else str(int(x))


def complementary(F):
    """Complementary Young function ``G(y) = max_x (x y - F(x))``."""
    return F.complementary()


def numeric_complementary(F, tol=1e-8):
    """Complementary function through inverse-derivative quadrature only."""
    return _NumericConjugate(F, tol)


def check_young(F, grid=None, rng=None, pairs=200):
    """Raise ``InvalidYoungFunction`` if ``F`` fails the defining properties on a grid."""
    grid = np.linspace(0.0, 10.0, 201) if grid is None else np.asarray(grid, dtype=float)
    if abs(float(F.value(0.0))) > 1e-12 or abs(float(F.deriv(0.0))) > 1e-9:
        raise InvalidYoungFunction("F(0) and F'(0) must vanish")
    d = np.asarray(F.deriv(grid))
    if np.any(np.diff(d) <= 0.0):
        raise InvalidYoungFunction("F' is not strictly increasing on the grid")
    rng = np.random.default_rng(0) if rng is None else rng
    a, b = rng.uniform(0, grid[-1], size=(2, pairs))
    mid = F.value(0.5 * (a + b))
    if np.any(mid > 0.5 * (F.value(a) + F.value(b)) + 1e-9):
        raise InvalidYoungFunction("midpoint convexity fails")


def _expect(probs, values):
    return float(np.dot(probs, values))


def luxemburg_norm(f, space, F):
    """``inf {a > 0 : E[F(|f| / a)] <= 1}`` by bisection on ``a``."""
    p = probs_of(space)
    a_abs = np.abs(np.asarray(f, dtype=float))
    if a_abs.shape != p.shape:
        raise ValueError("claim length does not match the space")
    if not np.all(np.isfinite(a_abs)):
        raise ValueError("claim must be finite")
    if np.all(a_abs == 0.0):
        return 0.0
    mass = lambda a: _expect(p, F.value(a_abs / a))
    return _decreasing_root(mass, float(a_abs.max()))


def luxemburg_norm_many(f, probs, F, iters=64):
    """Row-wise Luxemburg norms of a batch of claims, by simultaneous bisection.

    ``f`` and ``probs`` have shape ``(m, n)``; rows of ``probs`` may be
    zero-padded to mix space sizes.
    """
    a_abs = np.abs(np.atleast_2d(np.asarray(f, dtype=float)))
    p = np.atleast_2d(np.asarray(probs, dtype=float))
    if a_abs.shape != p.shape:
        raise ValueError("claims and probabilities must have the same shape")
    top = a_abs.max(axis=1)
    live = top > 0
    out = np.zeros(a_abs.shape[0])
    if not live.any():
        return out
    a_abs, p, top = a_abs[live], p[live], top[live]
    mass = lambda a: np.sum(p * F.value(a_abs / a[:, None]), axis=1)
    hi = top.copy()
    while True:
        over = mass(hi) > 1.0
        if not over.any():
            break
        hi[over] *= 2.0
    lo = 0.5 * hi
    while True:
        under = mass(lo) <= 1.0
        if not under.any():
            break
        hi[under], lo[under] = lo[under], 0.5 * lo[under]
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        big = mass(mid) > 1.0
        lo = np.where(big, mid, lo)
        hi = np.where(big, hi, mid)
    out[live] = hi
    return out


def _decreasing_root(mass, start):
    # mass is nonincreasing on (0, inf), tends to +inf at 0 and to 0 at inf
    hi = start
    while mass(hi) > 1.0:
        hi *= 2.0
    lo = 0.5 * hi
    while mass(lo) <= 1.0:
        hi, lo = lo, 0.5 * lo
    return bisect_decreasing(mass, 1.0, lo, hi)


def polar_gauge(g, space, F):
    """``sup {|E[g h]| : E[F(|h|)] <= 1}``, the gauge of the polar of the ``F``-ball.

    The maximizer is ``|h| = (F')^{-1}(|g| / lam)`` with the multiplier ``lam``
    fixed by ``E[F(|h|)] = 1``.
    """
    p = probs_of(space)
    a = np.abs(np.asarray(g, dtype=float))
    if np.all(a == 0.0):
        return 0.0
    h_of = lambda lam: F.deriv_inv(a / lam)
    mass = lambda lam: _expect(p, F.value(h_of(lam)))
    lam = _decreasing_root(mass, float(a.max()))
    return _expect(p, a * h_of(lam))


def ui_tail_bound(F, kappa):
    """``kappa / F(kappa)``, bounding ``E[|h| 1{|h| >= kappa}]`` over the ``F``-ball."""
    fk = float(F.value(kappa)) if kappa > 0 else 0.0
    if fk <= 0.0:
        raise ValueError("F(kappa) must be positive, got kappa=%r" % kappa)
    return kappa / fk


class UtilityFunction:
    """Nondecreasing concave utility normalized by ``u(0) = 0``."""

    def __call__(self, x):
        return self.value(x)


class YoungUtility(UtilityFunction):
    """``u_F(x) = -F(-x)`` for ``x <= 0`` and ``0`` for ``x > 0``."""

    def __init__(self, F):
        self.F = F

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return -self.F.value(np.maximum(-x, 0.0))

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        return self.F.deriv(np.maximum(-x, 0.0))

    def __repr__(self):
        return "YoungUtility(%r)" % (self.F,)


class PiecewiseConcaveUtility(UtilityFunction):
    """Piecewise-linear concave utility.

    ``slopes[k]`` applies between ``knots[k-1]`` and ``knots[k]``, so there is
    one more slope than knots. Slopes must be nonnegative and nonincreasing.
    """

    def __init__(self, knots, slopes):
        b = np.atleast_1d(np.asarray(knots, dtype=float))
        s = np.atleast_1d(np.asarray(slopes, dtype=float))
        if s.size != b.size + 1:
            raise ValueError("need len(slopes) == len(knots) + 1")
        if np.any(np.diff(b) <= 0):
            raise ValueError("knots must be strictly increasing")
        if np.any(s < 0):
            raise ValueError("utility must be nondecreasing")
        if np.any(np.diff(s) > 0):
            raise ValueError("utility must be concave (slopes nonincreasing)")
        self.knots, self.slopes = b, s
        k0 = int(np.searchsorted(b, 0.0, side="right"))
        c = np.zeros(s.size)
        for k in range(k0 + 1, s.size):
            c[k] = c[k - 1] + (s[k - 1] - s[k]) * b[k - 1]
        for k in range(k0 - 1, -1, -1):
            c[k] = c[k + 1] - (s[k] - s[k + 1]) * b[k]
        self.intercepts = c

    def pieces(self):
        """Affine pieces ``(intercept, slope)`` with ``u = min`` over them."""
        return list(zip(self.intercepts, self.slopes))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return np.min(self.intercepts[:, None] + self.slopes[:, None] * x.ravel()[None, :], axis=0).reshape(x.shape)

    def __repr__(self):
        return "PiecewiseConcaveUtility(knots=%s, slopes=%s)" % (list(self.knots), list(self.slopes))


def utility_from_young(F):
    return YoungUtility(F)


def conjugate_utility(u):
    """``v(y) = sup_x (u(x) - x y)``; for ``u = u_F`` this is the complementary of ``F``."""
    if not isinstance(u, YoungUtility):
        raise TypeError("conjugate_utility needs a u_F utility; apply young_minorant first")
    return u.F.complementary()


def young_minorant(u, eps, p=2.0):
    """A power function ``F`` with ``u_F(x) - eps <= u(x)`` for every ``x``.

    For a piecewise-linear ``u`` the smallest admissible coefficient of
    ``y**p`` is found piece by piece: ``sup_y (a + b y) / y**p`` is attained
    at ``y = p (-a) / (b (p - 1))``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    if isinstance(u, YoungUtility):
        return u.F
    if not isinstance(u, PiecewiseConcaveUtility):
        raise TypeError("unsupported utility representation")
    coef = 0.0
    for c, s in u.pieces():
        a, b = -c - eps, s  # piece of -u(-y) - eps in y
        if b <= 0.0:
            continue
        if a >= 0.0:
            raise ValueError("utility is not normalized by u(0) = 0")
        y = p * (-a) / (b * (p - 1.0))
        coef = max(coef, (a + b * y) / y ** p)
    coef = max(coef, 1e-300) * (1.0 + 1e-9)
    return Power(p, coef * p)


def minorant_violation(u, F, eps, lo=-10.0, n=2001):
    """Largest ``u_F(x) - eps - u(x)`` over a grid refined near zero."""
    x = -np.unique(np.concatenate([np.geomspace(1e-8, -lo, n), np.linspace(0, -lo, n)]))
    uf = YoungUtility(F).value(x)
    return float(np.max(uf - eps - u.value(x)))


_RECORD = re.compile(r"^\s*(\w+)\s*(.*)$")


def parse_young(text):
    """Parse ``power p=2``, ``expml``, ``entropy``, ``tab knots=[...] tail=p``.

    Also accepts the shorthand ``power:2`` and ``scaled outer=a inner=b base=...``.
    """
    text = text.strip()
    if ":" in text and "=" not in text:
        kind, arg = text.split(":", 1)
        if kind == "power":
            return Power(float(arg))
        raise InvalidYoungFunction("unknown shorthand %r" % text)
    m = _RECORD.match(text)
    if not m:
        raise InvalidYoungFunction("empty Young function record")
    kind, rest = m.group(1), m.group(2)
    if kind == "power":
        fields = dict(re.findall(r"(\w+)=([^\s]+)", rest))
        return Power(float(fields["p"]), float(fields.get("scale", 1.0)))
    if kind == "expml":
        return ExpMinusLinear()
    if kind == "entropy":
        return Entropy()
    if kind == "tab":
        km = re.search(r"knots=\[(.*)\]", rest)
        tm = re.search(r"tail=([^\s]+)", rest)
        if not km or not tm:
            raise InvalidYoungFunction("tab record needs knots=[...] and tail=")
        pairs = re.findall(r"\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)", km.group(1))
        xs = [float(a) for a, _ in pairs]
        ss = [float(b) for _, b in pairs]
        return Tabulated(xs, ss, float(tm.group(1)))
    if kind == "scaled":
        sm = re.match(r"outer=([^\s]+)\s+inner=([^\s]+)\s+base=(.*)$", rest)
        if not sm:
            raise InvalidYoungFunction("scaled record needs outer=, inner=, base=")
        return Scaled(parse_young(sm.group(3)), float(sm.group(1)), float(sm.group(2)))
    raise InvalidYoungFunction("unknown Young function kind %r" % kind)


def golden_ratio_grid(n):
    # deterministic quasi-random points in (0, 1)
    return np.mod(np.arange(1, n + 1) * (math.sqrt(5) - 1) / 2, 1.0)
