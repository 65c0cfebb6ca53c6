"""Young functions, their complements, and the norms they induce on a finite space.

Run with ``python3 demos/orlicz_tour.py``.
"""

import numpy as np

from ftaplab.orlicz import (ExpMinusLinear, Power, Tabulated, complementary, luxemburg_norm, numeric_complementary,
                            polar_gauge)


def show_pairs():
    print("Complementary pairs, closed form against numerical Legendre transform")
    y = np.linspace(0.0, 4.0, 9)
    for F in (Power(2.0), Power(3.0), ExpMinusLinear(), Tabulated([0.0, 1.0, 2.0], [0.0, 1.0, 3.0], 2.0)):
        G = complementary(F)
        err = np.max(np.abs(G.value(y) - numeric_complementary(F).value(y)))
        print("  F = %-40s  G = %-40s  max gap %.1e" % (F.record(), G.record(), err))
    print()


def show_norms():
    print("Luxemburg norm of f and polar gauge of g on three atoms")
    p = np.array([0.2, 0.3, 0.5])
    f = np.array([1.0, -2.0, 0.5])
    for F in (Power(2.0), Power(3.0), ExpMinusLinear()):
        G = complementary(F)
        norm_g = luxemburg_norm(f, p, G)
        gauge = polar_gauge(f, p, F)
        print("  %-22s ||f||_F = %.6f   ||f||_G = %.6f   gauge = %.6f   ratio %.4f"
              % (F.record(), luxemburg_norm(f, p, F), norm_g, gauge, gauge / norm_g))
    print("  The gauge always sits between the complementary norm and twice that norm.")
    print()


def show_holder():
    print("Hoelder with constant 2 on random claims")
    rng = np.random.default_rng(0)
    F = Power(3.0)
    G = complementary(F)
    worst = 0.0
    for _ in range(2000):
        p = rng.dirichlet(np.ones(5))
        f, g = rng.normal(size=5), rng.normal(size=5)
        lhs = p @ np.abs(f * g)
        worst = max(worst, lhs / (luxemburg_norm(f, p, F) * luxemburg_norm(g, p, G)))
    print("  largest E|fg| / (||f||_F ||g||_G) over 2000 draws: %.4f (bound 2)" % worst)


if __name__ == "__main__":
    show_pairs()
    show_norms()
    show_holder()
