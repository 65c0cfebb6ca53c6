"""Finite probability spaces and densities on them."""

from dataclasses import dataclass, field

import numpy as np

PROB_SUM_TOL = 1e-12
DENSITY_MEAN_TOL = 1e-10


@dataclass(frozen=True)
class FiniteProbSpace:
    """Atoms with strictly positive probabilities summing to one."""

    probs: np.ndarray
    labels: tuple = field(default=())

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a nonempty vector")
        if np.any(~np.isfinite(p)) or np.any(p <= 0.0):
            raise ValueError("atom probabilities must be finite and strictly positive")
        if abs(p.sum() - 1.0) > PROB_SUM_TOL * max(1, p.size):
            raise ValueError("atom probabilities sum to %r, not 1" % p.sum())
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        labels = tuple(self.labels) if self.labels else tuple(str(i) for i in range(p.size))
        if len(labels) != p.size:
            raise ValueError("label count does not match atom count")
        object.__setattr__(self, "labels", labels)

    @classmethod
    def uniform(cls, n):
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def normalized(cls, weights, labels=()):
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), labels)

    @property
    def size(self):
        return self.probs.size

    def expect(self, values):
        return float(np.dot(self.probs, values))

    def prob(self, mask):
        return float(self.probs[np.asarray(mask, dtype=bool)].sum())


def probs_of(space):
    """Probability vector of a space given as ``FiniteProbSpace`` or array."""
    if isinstance(space, FiniteProbSpace):
        return space.probs
    p = np.asarray(space, dtype=float)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ValueError("not a probability vector")
    return p


@dataclass(frozen=True)
class DensityVector:
    """Values per atom of ``space``; as a density, ``dQ/dP`` with ``P = space``."""

    values: np.ndarray
    space: FiniteProbSpace

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.size,):
            raise ValueError("density length %d does not match %d atoms" % (v.size, self.space.size))
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_measure(cls, q, space):
        q = np.asarray(q, dtype=float)
        return cls(q / space.probs, space)

    @property
    def measure(self):
        """Atom masses of the measure with this density."""
        return self.values * self.space.probs

    def is_probability_density(self, tol=DENSITY_MEAN_TOL):
        return bool(np.all(self.values >= -tol) and abs(self.space.expect(self.values) - 1.0) <= tol)

    def expect(self, f):
        return self.space.expect(self.values * np.asarray(f, dtype=float))
