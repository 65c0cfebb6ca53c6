"""Constructing a bicontiguous sequence of martingale measures for a binomial family.

Each market is a two-step symmetric random walk. The script checks the
worst-case utility hypothesis, runs the construction stage by stage, and then
re-evaluates the worst case under the measures it produced.

Run with ``python3 demos/binomial_build.py``.
"""

import numpy as np

from ftaplab.largemarket import MarketFamily, build_bicontiguous


def main():
    fam = MarketFamily("binomial", {"p": 0.5, "u": 1.0, "d": -1.0, "T": 2}, prefix=10)
    res = build_bicontiguous(fam, N=10, J=4)

    print("Per-level stages (eps = 2^-j)")
    print("  %-8s %-24s %10s %10s %10s %10s" % ("eps", "F", "worst", "delta", "gamma", "mu"))
    for s in res.stages:
        print("  %-8g %-24s %10.5f %10.5f %10.5f %10.2e" % (s.eps, s.F.record(), s.worst_value, s.delta,
                                                          s.gamma, s.mu))
    print()

    q = res.Q.measure(1)
    print("Mixture on market 1: %s (strictly positive: %s)" % (np.round(q, 12).tolist(), bool(np.all(q > 0))))
    print("Truncation remainder 2^-J = %g" % res.mix.remainder)
    print()

    print("Contiguity profile of the result against the market measures")
    for e, fwd, bwd in res.profile.rows():
        print("  eps=%-10g forward %.6f   backward %.6f" % (e, fwd, bwd))
    print("  Young witnesses: forward p=%s, backward p=%s"
          % (res.profile.young_forward.p, res.profile.young_backward.p))
    print()

    worst_gap = min(-res.round_trip[(s.eps, n)] - s.delta for s in res.stages for n in range(1, res.N + 1))
    print("Worst case re-evaluated with the new measures stays below -delta by at least %.5f" % worst_gap)
    print("All checks passed: %s" % res.ok)


if __name__ == "__main__":
    main()
