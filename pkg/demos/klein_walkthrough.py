"""A market family with an arbitrage of the first kind but no strong arbitrage.

Every market in the family has one risky asset that moves from 0 to 1 on an
event of probability ``alpha`` and stays at 0 otherwise. Buying the asset never
loses, so each market has an arbitrage; yet no strategy pays off with
probability close to one. The script runs the detectors, evaluates the
worst-case utility value, and shows the bicontiguous construction refusing.

Run with ``python3 demos/klein_walkthrough.py``.
"""

from ftaplab.largemarket import BuildError, MarketFamily, build_bicontiguous, detect_all, nafl_check, namfl_worstcase
from ftaplab.market import check_na
from ftaplab.orlicz import Power

ALPHA = 0.3


def main():
    fam = MarketFamily("klein", {"alpha": ALPHA}, prefix=10)
    m = fam.market(1)

    na = check_na(m)
    print("Single market: no-arbitrage holds = %s, arbitrage payoff %s (exact %s)"
          % (na.holds, na.payoff.tolist(), [str(x) for x in na.exact_payoff]))
    print()

    print("Asymptotic verdicts on the whole family")
    for v in detect_all(fam):
        print("  %-6s %-18s %s" % (v.condition, v.status, v.note))
    print()

    print("Worst case of sup_f E[u(f - w)] over claims w with E[w] >= eps, F(x) = x^2/2")
    for eps in (0.3, 0.2, 0.1, 0.5):
        r = namfl_worstcase(m, None, eps, Power(2.0))
        print("  eps=%-4g value %+.6f  worst claim %s  free lunch: %s"
              % (eps, r.value, [round(float(x), 6) for x in r.worst_w], r.free_lunch))
    print("  Up to eps = alpha the claim 1_A is itself hedged, so the value is 0.")
    print("  Above alpha the claim must charge B, where no strategy helps.")
    print()

    r = nafl_check(m, ALPHA, Power(2.0))
    print("Separation check at eps = alpha: %s (%s)" % (r.status, r.note))
    print()

    try:
        build_bicontiguous(fam, J=2)
    except BuildError as exc:
        print("Bicontiguous construction refused: %s" % exc)


if __name__ == "__main__":
    main()
