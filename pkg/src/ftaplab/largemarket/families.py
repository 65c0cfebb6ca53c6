"""Sequences of finite markets and of measures on them."""

from dataclasses import dataclass, field
import json
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..market import FiniteMarket, Node, load_market, one_period
from ..spaces import DensityVector

__all__ = ["MarketFamily", "MeasureSeq", "klein_market", "binomial_market", "constant_market"]

STATIONARY_KINDS = ("klein", "binomial", "constant")


def klein_market(alpha):
    """``S_0 = 0``, ``S_1 = 1`` on ``A`` (mass ``alpha``) and ``0`` on ``B``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return one_period(0.0, [1.0, 0.0], [alpha, 1.0 - alpha], labels=["A", "B"])


def binomial_market(p=0.5, u=1.0, d=-1.0, T=1, s0=0.0):
    """Additive recombining-free binomial tree: each step adds ``u`` (prob ``p``) or ``d``."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    T = int(T)
    nodes = [Node("s", None, 1.0, (float(s0),))]
    frontier = [("s", float(s0))]
    for _ in range(T):
        nxt = []
        for nid, price in frontier:
            for tag, step, prob in (("u", u, p), ("d", d, 1.0 - p)):
                cid = nid + tag
                nodes.append(Node(cid, nid, prob, (price + step,)))
                nxt.append((cid, price + step))
        frontier = nxt
    return FiniteMarket(nodes, T, 1)


def constant_market(probs=(0.5, 0.5)):
    """One-period market whose single price never moves, so ``K = {0}``."""
    return one_period(1.0, [1.0] * len(probs), list(probs))


@dataclass
class MarketFamily:
    """Rule ``n -> FiniteMarket`` (``n >= 1``) with a default prefix length.

    ``kind`` is ``explicit``, ``klein``, ``binomial``, ``constant`` or
    ``custom``. The built-in parametric kinds repeat one market for every
    ``n``; that is what lets detectors reason about the whole sequence.
    """

    kind: str
    params: dict = field(default_factory=dict)
    prefix: int = 10
    explicit: tuple = ()
    rule: Optional[Callable] = None

    def __post_init__(self):
        self._cache = {}
        if self.kind == "explicit":
            if not self.explicit:
                raise ValueError("explicit family needs at least one market")
            self.explicit = tuple(m if isinstance(m, FiniteMarket) else load_market(m) for m in self.explicit)
            self.prefix = min(self.prefix, len(self.explicit)) if self.prefix else len(self.explicit)
        elif self.kind == "custom":
            if self.rule is None:
                raise ValueError("custom family needs a rule")
        elif self.kind not in STATIONARY_KINDS:
            raise ValueError("unknown family kind %r" % self.kind)
        if self.kind in STATIONARY_KINDS:
            self._base = self._build_stationary()

    def _build_stationary(self):
        p = self.params
        if self.kind == "klein":
            return klein_market(float(p.get("alpha", 0.3)))
        if self.kind == "binomial":
            return binomial_market(float(p.get("p", 0.5)), float(p.get("u", 1.0)),
                                   float(p.get("d", -1.0)), int(p.get("T", 1)), float(p.get("s0", 0.0)))
        return constant_market(tuple(p.get("probs", (0.5, 0.5))))

    @property
    def stationary(self):
        return self.kind in STATIONARY_KINDS

    def market(self, n):
        if n < 1:
            raise IndexError("families are indexed from n = 1")
        if self.stationary:
            return self._base
        if self.kind == "explicit":
            if n > len(self.explicit):
                raise IndexError("explicit family has only %d markets" % len(self.explicit))
            return self.explicit[n - 1]
        if n not in self._cache:
            self._cache[n] = self.rule(n)
        return self._cache[n]

    def markets(self, N=None):
        N = self.prefix if N is None else N
        return [self.market(n) for n in range(1, N + 1)]

    # ---- serialization

    @classmethod
    def from_dict(cls, doc, base_dir="."):
        kind = doc.get("kind")
        if kind is None:
            raise ValueError("family document needs a 'kind'")
        # entries are market-file paths (relative to the family file) or inline market documents
        explicit = tuple(load_market(p if isinstance(p, dict) else str(Path(base_dir, p)))
                         for p in doc.get("explicit", []))
        if kind == "explicit" and not explicit:
            raise ValueError("explicit family lists no market files")
        return cls(kind, dict(doc.get("params", {})), int(doc.get("prefix", len(explicit) or 10)), explicit)

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def to_dict(self):
        doc = {"kind": self.kind, "params": self.params, "prefix": self.prefix}
        if self.kind == "explicit":
            doc["explicit"] = [m.to_dict() for m in self.explicit]
        return doc


class MeasureSeq:
    """Per-index measures on the leaves of ``family.market(n)``.

    Either an explicit map ``n -> leaf masses`` or a ``rule(n, market)``
    returning leaf masses. ``closed_form`` marks sequences that are the same
    for every ``n`` on a stationary family.
    """

    def __init__(self, family, masses=None, rule=None, closed_form=False):
        self.family = family
        self._masses = {int(k): np.asarray(v, dtype=float) for k, v in (masses or {}).items()}
        self.rule = rule
        self.closed_form = closed_form

    @classmethod
    def reference(cls, family):
        """The family's own measures ``P^n``."""
        return cls(family, rule=lambda n, m: m.probs, closed_form=family.stationary)

    @classmethod
    def constant(cls, family, masses):
        masses = np.asarray(masses, dtype=float)
        return cls(family, rule=lambda n, m: masses, closed_form=family.stationary)

    def measure(self, n):
        if n in self._masses:
            q = self._masses[n]
        elif self.rule is not None:
            q = np.asarray(self.rule(n, self.family.market(n)), dtype=float)
        else:
            raise KeyError("no measure for n=%d" % n)
        if np.any(q < -1e-12) or abs(q.sum() - 1.0) > 1e-9:
            raise ValueError("measure at n=%d is not a probability" % n)
        return np.maximum(q, 0.0)

    def density(self, n):
        m = self.family.market(n)
        return DensityVector(self.measure(n) / m.probs, m.space)

    def indices(self, N=None):
        N = self.family.prefix if N is None else N
        return range(1, N + 1)

    def with_measures(self, masses):
        return MeasureSeq(self.family, masses)
