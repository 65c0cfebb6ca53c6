"""Scalar root finding and quadrature shared by the numeric modules."""

ROOT_TOL = 1e-10
MAX_BISECT = 200


def bisect_decreasing(fn, target, lo, hi, *, rtol=1e-15, atol=ROOT_TOL, max_iter=MAX_BISECT):
    """Solve ``fn(x) == target`` for a nonincreasing ``fn`` on ``(lo, hi)``.

    The bracket must satisfy ``fn(lo) >= target >= fn(hi)``. Returns the upper
    end of the final bracket, i.e. the smallest point found with
    ``fn(x) <= target``.
    """
    for _ in range(max_iter):
        if hi - lo <= max(atol * 1e-5, rtol * hi):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


def bracket_up(fn, target, start=1.0, *, factor=2.0, limit=1e300):
    """Grow ``start`` geometrically until the nonincreasing ``fn`` drops to ``target``."""
    x = start
    while fn(x) > target:
        x *= factor
        if x > limit:
            raise OverflowError("no bracket found below %g" % limit)
    return x


def bracket_down(fn, target, start=1.0, *, factor=2.0, limit=1e-300):
    """Shrink ``start`` until the nonincreasing ``fn`` rises above ``target``."""
    x = start
    while fn(x) <= target:
        x /= factor
        if x < limit:
            return 0.0
    return x


def adaptive_simpson(fn, a, b, tol=1e-8, max_depth=60):
    """Adaptive Simpson quadrature of a scalar function on ``[a, b]``."""
    if b == a:
        return 0.0
    fa, fb = fn(a), fn(b)
    m = 0.5 * (a + b)
    fm = fn(m)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    return _simpson_step(fn, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_step(fn, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = fn(lm), fn(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_simpson_step(fn, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson_step(fn, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))
