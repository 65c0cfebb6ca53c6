"""Finite discrete-time markets on event trees.

Leaves are ordered by a depth-first walk that visits children in file order.
The gains matrix ``B`` has one row per leaf and one column per (non-terminal
node, asset); ``K`` is its column span and ``C = K - L0_+``.
"""

from dataclasses import dataclass
from fractions import Fraction
import itertools
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from . import _exact
from .convexsolve import LinearProgram, lp_solve
from .spaces import DensityVector, FiniteProbSpace

__all__ = [
    "Node", "FiniteMarket", "MarketValidationError", "GainsBasis", "gains_basis",
    "SeparatingSet", "find_emm", "check_na", "NAResult", "in_C", "InCResult",
    "k1_membership", "load_market", "one_period", "random_market",
]

PROB_TOL = 1e-12
EMM_TOL = 1e-10
ARB_TOL = 1e-9
EXACT_LEAF_LIMIT = 12


class MarketValidationError(ValueError):
    def __init__(self, message, node_id=None):
        self.node_id = node_id
        prefix = "node %r: " % (node_id,) if node_id is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class Node:
    id: str
    parent: Optional[str]
    prob: float
    prices: tuple


class FiniteMarket:
    """Event tree with conditional branch probabilities and ``d`` asset prices per node."""

    def __init__(self, nodes, horizon, assets, name=""):
        self.horizon = int(horizon)
        self.assets = int(assets)
        self.name = name
        self.nodes = tuple(Node(str(n.id), None if n.parent is None else str(n.parent),
                                float(n.prob), tuple(float(x) for x in n.prices)) for n in nodes)
        self._validate()
        self._freeze()

    # ---- construction helpers

    def _validate(self):
        if self.horizon < 1:
            raise MarketValidationError("horizon must be at least 1")
        if self.assets < 1:
            raise MarketValidationError("need at least one asset")
        by_id = {}
        for n in self.nodes:
            if n.id in by_id:
                raise MarketValidationError("duplicate node id", n.id)
            by_id[n.id] = n
        roots = [n for n in self.nodes if n.parent is None]
        if len(roots) != 1:
            raise MarketValidationError("expected exactly one root, found %d" % len(roots),
                                        roots[1].id if len(roots) > 1 else None)
        children = {n.id: [] for n in self.nodes}
        for n in self.nodes:
            if len(n.prices) != self.assets:
                raise MarketValidationError("has %d prices, expected %d" % (len(n.prices), self.assets), n.id)
            if not all(math.isfinite(x) for x in n.prices):
                raise MarketValidationError("prices must be finite", n.id)
            if n.parent is None:
                continue
            if n.parent not in by_id:
                raise MarketValidationError("unknown parent %r" % n.parent, n.id)
            if not (0.0 < n.prob <= 1.0) or not math.isfinite(n.prob):
                raise MarketValidationError("branch probability %r not in (0, 1]" % n.prob, n.id)
            children[n.parent].append(n.id)
        root = roots[0]
        depth = {root.id: 0}
        stack = [root.id]
        while stack:
            v = stack.pop()
            for c in children[v]:
                depth[c] = depth[v] + 1
                stack.append(c)
        for n in self.nodes:
            if n.id not in depth:
                raise MarketValidationError("not reachable from the root (cycle?)", n.id)
        for n in self.nodes:
            kids = children[n.id]
            if kids:
                total = sum(by_id[c].prob for c in kids)
                if abs(total - 1.0) > PROB_TOL * max(1, len(kids)):
                    raise MarketValidationError("branch probabilities sum to %r" % total, n.id)
            elif depth[n.id] != self.horizon:
                raise MarketValidationError("leaf at depth %d, horizon is %d" % (depth[n.id], self.horizon), n.id)
            if depth[n.id] > self.horizon:
                raise MarketValidationError("deeper than the horizon", n.id)
        self.root = root.id
        self._by_id = by_id
        self._children = children
        self._depth = depth

    def _freeze(self):
        order, leaves = [], []
        mass = {self.root: 1.0}

        def walk(v):
            order.append(v)
            kids = self._children[v]
            if not kids:
                leaves.append(v)
            for c in kids:
                mass[c] = mass[v] * self._by_id[c].prob
                walk(c)

        walk(self.root)
        self.order = tuple(order)
        self.leaves = tuple(leaves)
        self.internal = tuple(v for v in order if self._children[v])
        self.leaf_index = {v: i for i, v in enumerate(leaves)}
        p = np.array([mass[v] for v in leaves])
        self.space = FiniteProbSpace(p / p.sum(), labels=self.leaves)
        self._mass = mass
        # leaves below each node, as index arrays
        below = {}
        for v in reversed(order):
            kids = self._children[v]
            below[v] = (np.array([self.leaf_index[v]]) if not kids
                        else np.concatenate([below[c] for c in kids]))
        self._below = below

    # ---- accessors

    def children(self, v):
        return tuple(self._children[v])

    def node(self, v):
        return self._by_id[v]

    def depth(self, v):
        return self._depth[v]

    def prices(self, v):
        return np.array(self._by_id[v].prices)

    def leaves_below(self, v):
        return self._below[v]

    @property
    def n_leaves(self):
        return len(self.leaves)

    @property
    def probs(self):
        return self.space.probs

    def leaf_vector(self, spec):
        """Leaf vector from a dict ``{leaf_id: value}``, a leaf id (indicator) or a sequence."""
        if isinstance(spec, str):
            spec = {spec: 1.0}
        if isinstance(spec, dict):
            out = np.zeros(self.n_leaves)
            for k, x in spec.items():
                if k not in self.leaf_index:
                    raise KeyError("unknown leaf %r" % k)
                out[self.leaf_index[k]] = x
            return out
        out = np.asarray(spec, dtype=float)
        if out.shape != (self.n_leaves,):
            raise ValueError("leaf vector must have %d entries" % self.n_leaves)
        return out

    # ---- derived markets and serialization

    def reweight(self, leaf_probs):
        """Same tree and prices under the measure with the given (positive) leaf masses."""
        q = np.asarray(leaf_probs, dtype=float)
        if q.shape != (self.n_leaves,) or np.any(q <= 0):
            raise ValueError("leaf masses must be strictly positive, one per leaf")
        q = q / q.sum()
        mass = {v: float(q[self.leaf_index[v]]) for v in self.leaves}
        for v in reversed(self.order):
            if self._children[v]:
                mass[v] = sum(mass[c] for c in self._children[v])
        nodes = [Node(n.id, n.parent, 1.0 if n.parent is None else mass[n.id] / mass[n.parent], n.prices)
                 for n in self.nodes]
        return FiniteMarket(_renormalize_siblings(nodes), self.horizon, self.assets, self.name)

    def to_dict(self):
        return {
            "horizon": self.horizon,
            "assets": self.assets,
            "nodes": [{"id": n.id, "parent": n.parent, "prob": n.prob, "prices": list(n.prices)}
                      for n in self.nodes],
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_dict(cls, doc, name=""):
        for key in ("horizon", "assets", "nodes"):
            if key not in doc:
                raise MarketValidationError("missing field %r" % key)
        nodes = []
        for raw in doc["nodes"]:
            if "id" not in raw:
                raise MarketValidationError("node without an id")
            nid = raw["id"]
            for key in ("prices",):
                if key not in raw:
                    raise MarketValidationError("missing field %r" % key, nid)
            parent = raw.get("parent")
            prob = raw.get("prob", 1.0 if parent is None else None)
            if prob is None:
                raise MarketValidationError("missing field 'prob'", nid)
            try:
                prices = tuple(float(x) for x in raw["prices"])
                prob = float(prob)
            except (TypeError, ValueError):
                raise MarketValidationError("non-numeric prob or prices", nid) from None
            nodes.append(Node(str(nid), parent, prob, prices))
        return cls(nodes, doc["horizon"], doc["assets"], name)

    def __repr__(self):
        return "FiniteMarket(T=%d, d=%d, leaves=%d)" % (self.horizon, self.assets, self.n_leaves)


def _renormalize_siblings(nodes):
    # float rounding can leave sibling probabilities off by an ulp; fix the sums exactly
    groups = {}
    for i, n in enumerate(nodes):
        if n.parent is not None:
            groups.setdefault(n.parent, []).append(i)
    out = list(nodes)
    for idx in groups.values():
        total = math.fsum(nodes[i].prob for i in idx)
        for i in idx:
            out[i] = Node(nodes[i].id, nodes[i].parent, nodes[i].prob / total, nodes[i].prices)
    return out


def load_market(source):
    """Load a market from a JSON path, JSON text or an already parsed dict."""
    if isinstance(source, dict):
        return FiniteMarket.from_dict(source)
    text = str(source)
    if text.lstrip().startswith("{"):
        return FiniteMarket.from_dict(json.loads(text))
    path = Path(text)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise MarketValidationError("%s is not valid JSON: %s" % (path, exc)) from None
    return FiniteMarket.from_dict(doc, name=path.stem)


def one_period(s0, s1, probs, labels=None):
    """One-period market with initial prices ``s0`` and leaf prices ``s1`` (rows)."""
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    s1 = np.asarray(s1, dtype=float)
    if s1.ndim == 1:
        s1 = s1[:, None]
    labels = labels or ["leaf%d" % (i + 1) for i in range(len(probs))]
    nodes = [Node("root", None, 1.0, tuple(s0))]
    nodes += [Node(lab, "root", float(p), tuple(row)) for lab, p, row in zip(labels, probs, s1)]
    return FiniteMarket(nodes, 1, s0.size)


# --------------------------------------------------------------------------
# gains cone

@dataclass(frozen=True)
class GainsBasis:
    matrix: np.ndarray
    columns: tuple  # (node id, asset index) per column

    @property
    def rank(self):
        return int(np.linalg.matrix_rank(self.matrix)) if self.matrix.size else 0


def gains_basis(market):
    """Terminal payoff of holding one unit of asset ``j`` over the step after node ``v``."""
    cols, labels = [], []
    for v in market.internal:
        sv = market.prices(v)
        for j in range(market.assets):
            col = np.zeros(market.n_leaves)
            for c in market.children(v):
                col[market.leaves_below(c)] = market.prices(c)[j] - sv[j]
            cols.append(col)
            labels.append((v, j))
    B = np.column_stack(cols) if cols else np.zeros((market.n_leaves, 0))
    return GainsBasis(B, tuple(labels))


def _decimal(x):
    # prices are read as the shortest decimal that round-trips, i.e. as written in the file
    return Fraction(repr(float(x)))


def _exact_gains(market):
    """Rational copy of the gains matrix, with increments taken between exact prices."""
    rows = [[Fraction(0)] * (len(market.internal) * market.assets) for _ in range(market.n_leaves)]
    k = 0
    for v in market.internal:
        sv = [_decimal(x) for x in market.node(v).prices]
        for j in range(market.assets):
            for c in market.children(v):
                inc = _decimal(market.node(c).prices[j]) - sv[j]
                for i in market.leaves_below(c):
                    rows[i][k] = inc
            k += 1
    return rows


# --------------------------------------------------------------------------
# separating measures

class SeparatingSet:
    """``M = {q >= 0, sum q = 1, B^T q = 0}`` on the leaves of ``market``."""

    def __init__(self, market):
        self.market = market
        self.B = gains_basis(market).matrix

    def contains(self, q, tol=1e-9):
        q = np.asarray(q, dtype=float)
        return bool(np.all(q >= -tol) and abs(q.sum() - 1) <= tol
                    and np.all(np.abs(self.B.T @ q) <= tol * max(1.0, np.abs(self.B).max(initial=0.0))))

    def vertices(self, limit=20000):
        """Extreme points, enumerated node by node on the tree.

        A vertex is a vertex of the one-step martingale simplex at the root
        (restricted to children whose own set is nonempty) combined with a
        vertex of each supported child's set.
        """
        m = self.market
        memo = {}

        def node_vertices(v):
            if v in memo:
                return memo[v]
            kids = m.children(v)
            if not kids:
                out = [{m.leaf_index[v]: 1.0}]
                memo[v] = out
                return out
            alive = [c for c in kids if node_vertices(c)]
            out = []
            if alive:
                inc = np.array([m.prices(c) - m.prices(v) for c in alive])
                for pi in _martingale_simplex_vertices(inc):
                    support = [(alive[i], w) for i, w in enumerate(pi) if w > 0]
                    for combo in itertools.product(*[node_vertices(c) for c, _ in support]):
                        vert = {}
                        for (c, w), sub in zip(support, combo):
                            for leaf, mass in sub.items():
                                vert[leaf] = vert.get(leaf, 0.0) + w * mass
                        out.append(vert)
                        if len(out) > limit:
                            raise RuntimeError("more than %d separating vertices" % limit)
            memo[v] = out
            return out

        verts = node_vertices(m.root)
        arr = np.zeros((len(verts), m.n_leaves))
        for r, vert in enumerate(verts):
            for leaf, mass in vert.items():
                arr[r, leaf] = mass
        return _unique_rows(arr)

    @property
    def is_empty(self):
        res = lp_solve(LinearProgram(np.zeros(self.market.n_leaves),
                                     A_eq=np.vstack([self.B.T, np.ones(self.market.n_leaves)]),
                                     b_eq=np.concatenate([np.zeros(self.B.shape[1]), [1.0]])))
        return not res.ok


def _martingale_simplex_vertices(inc, tol=1e-12):
    """Vertices of ``{pi >= 0, sum pi = 1, inc^T pi = 0}`` for an increment matrix (children x d)."""
    k, d = inc.shape
    A = np.vstack([inc.T, np.ones(k)])
    b = np.zeros(d + 1)
    b[-1] = 1.0
    out = []
    for size in range(1, min(k, d + 1) + 1):
        for supp in itertools.combinations(range(k), size):
            sub = A[:, supp]
            if np.linalg.matrix_rank(sub) < size:
                continue
            sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if np.max(np.abs(sub @ sol - b)) > 1e-10 or np.any(sol <= tol):
                continue
            pi = np.zeros(k)
            pi[list(supp)] = sol
            out.append(pi)
    return out


def _unique_rows(arr, decimals=12):
    if arr.shape[0] == 0:
        return arr
    seen, keep = set(), []
    for i, row in enumerate(np.round(arr, decimals)):
        key = row.tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return arr[keep]


def find_emm(market, exact=None):
    """Strictly positive member of ``M`` as a density ``q / p``, or ``None``.

    Maximizes the smallest leaf mass over ``M``; a positive optimum above
    ``1e-10`` yields an equivalent martingale measure. For small trees the
    returned measure is re-derived exactly in rational arithmetic and
    ``density.exact`` holds the rational leaf masses (``None`` if unverified).
    """
    B = gains_basis(market).matrix
    n = market.n_leaves
    c = np.zeros(n + 1)
    c[-1] = 1.0
    A_eq = np.hstack([np.vstack([B.T, np.ones(n)]), np.zeros((B.shape[1] + 1, 1))])
    b_eq = np.concatenate([np.zeros(B.shape[1]), [1.0]])
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])  # t <= q_i
    lb = np.concatenate([np.zeros(n), [-np.inf]])
    ub = np.concatenate([np.full(n, np.inf), [1.0]])
    res = lp_solve(LinearProgram(c, A_eq, b_eq, A_ub, np.zeros(n), lb, ub, maximize=True))
    if not res.ok or res.value <= EMM_TOL:
        return None
    q = res.x[:n]
    q = np.maximum(q, 0.0)
    q /= q.sum()
    dens = DensityVector.from_measure(q, market.space)
    if exact is None:
        exact = n <= EXACT_LEAF_LIMIT
    object.__setattr__(dens, "exact", _exact_emm(market, q) if exact else None)
    return dens


def _exact_emm(market, q):
    """Project ``q`` onto the exact affine hull of ``M``; return rational masses if all positive."""
    Bq = _exact.transpose(_exact_gains(market))
    n = market.n_leaves
    rows = [r for r in Bq if any(x != 0 for x in r)]
    basis = _exact.nullspace(rows, cols=n) if rows else _exact.nullspace([], cols=n)
    target = [Fraction(float(x)).limit_denominator(10 ** 12) for x in q]
    proj = _exact.project_onto_span(basis, target)
    total = sum(proj)
    if total <= 0:
        return None
    proj = [x / total for x in proj]
    if any(x <= 0 for x in proj):
        return None
    if rows and any(v != 0 for v in _exact.matvec(rows, proj)):
        return None
    return proj


@dataclass
class NAResult:
    """Outcome of the no-arbitrage check.

    ``holds`` is the verdict of the arbitrage LP. On failure ``payoff`` is an
    arbitrage ``f = B xi`` with ``0 <= f <= 1`` and ``strategy`` its ``xi``;
    ``exact_payoff`` is a rational re-derivation (``None`` if not attempted or
    not confirmed). On success ``emm`` carries an equivalent martingale density.
    """

    holds: bool
    value: float
    payoff: Optional[np.ndarray] = None
    strategy: Optional[np.ndarray] = None
    exact_payoff: Optional[list] = None
    emm: Optional[DensityVector] = None

    @property
    def certified(self):
        if self.holds:
            return self.emm is not None and getattr(self.emm, "exact", None) is not None
        return self.exact_payoff is not None


def arbitrage_lp(market):
    """``max E_P[f]`` over ``f = B xi`` with ``0 <= f <= 1``; returns ``(value, f, xi)``."""
    B = gains_basis(market).matrix
    n, k = B.shape
    if k == 0 or not np.any(B):
        return 0.0, np.zeros(n), np.zeros(k)
    p = market.probs
    A_ub = np.vstack([B, -B])
    b_ub = np.concatenate([np.ones(n), np.zeros(n)])
    res = lp_solve(LinearProgram(p @ B, A_ub=A_ub, b_ub=b_ub, lb=-np.inf, maximize=True))
    if not res.ok:
        raise RuntimeError("arbitrage LP failed: %s" % res.status)
    xi = res.x
    return float(res.value), B @ xi, xi


def check_na(market, exact=None):
    """No-arbitrage verdict from the arbitrage LP, with a certificate either way."""
    value, f, xi = arbitrage_lp(market)
    if exact is None:
        exact = market.n_leaves <= EXACT_LEAF_LIMIT
    if value <= ARB_TOL:
        return NAResult(True, value, emm=find_emm(market, exact=exact))
    cert = _exact_arbitrage(market, f, xi) if exact else None
    return NAResult(False, value, np.clip(f, 0.0, None), xi, cert)


def _exact_arbitrage(market, f, xi, tol=1e-7):
    """Rational payoff in ``K`` that is ``>= 0``, zero where ``f`` vanishes and positive somewhere."""
    B = _exact_gains(market)
    zero = [i for i, x in enumerate(f) if x <= tol * max(1.0, float(np.max(f)))]
    k = len(B[0])
    rows = [B[i] for i in zero]
    basis = _exact.nullspace(rows, cols=k) if rows else _exact.nullspace([], cols=k)
    target = [Fraction(float(x)).limit_denominator(10 ** 12) for x in xi]
    xi_exact = _exact.project_onto_span(basis, target)
    payoff = _exact.matvec(B, xi_exact)
    if any(x < 0 for x in payoff) or not any(x > 0 for x in payoff):
        return None
    return payoff


@dataclass
class InCResult:
    member: bool
    k: Optional[np.ndarray] = None
    slack: Optional[np.ndarray] = None
    strategy: Optional[np.ndarray] = None

    def __bool__(self):
        return self.member


def in_C(market, f):
    """Is ``f`` dominated by some ``k = B xi`` in ``K``? Witness ``k`` and slack ``k - f``."""
    f = market.leaf_vector(f)
    B = gains_basis(market).matrix
    n, kdim = B.shape
    if kdim == 0:
        ok = bool(np.all(f <= 1e-12))
        return InCResult(ok, np.zeros(n) if ok else None, -f if ok else None, np.zeros(0) if ok else None)
    res = lp_solve(LinearProgram(np.zeros(kdim), A_ub=-B, b_ub=-f, lb=-np.inf))
    if not res.ok:
        return InCResult(False)
    k = B @ res.x
    slack = k - f
    if slack.min() < -1e-9 * max(1.0, np.abs(f).max()):
        return InCResult(False)
    return InCResult(True, k, np.maximum(slack, 0.0), res.x)


def k1_membership(market, f, tol=1e-9):
    """``f`` lies in ``K`` (least-squares residual within ``tol``) and ``f >= -1``."""
    f = market.leaf_vector(f)
    if f.min() < -1.0 - 1e-12:
        return False
    B = gains_basis(market).matrix
    if B.shape[1] == 0 or not np.any(B):
        return bool(np.max(np.abs(f)) <= tol)
    xi, *_ = np.linalg.lstsq(B, f, rcond=None)
    return bool(np.max(np.abs(B @ xi - f)) <= tol)


def random_market(rng, max_periods=3, max_leaves=12, max_assets=2, arbitrage_bias=0.3):
    """Random tree market for property tests; roughly ``arbitrage_bias`` of nodes are one-sided."""
    T = int(rng.integers(1, max_periods + 1))
    d = int(rng.integers(1, max_assets + 1))
    nodes = [Node("n0", None, 1.0, tuple(rng.integers(-8, 9, size=d) / 4.0))]
    frontier = ["n0"]
    counter = 1
    for t in range(T):
        remaining = T - t
        nxt = []
        for i, v in enumerate(frontier):
            # keep room so the final leaf count stays under the cap
            others = len(frontier) - i - 1 + len(nxt)
            budget = max_leaves // (2 ** (remaining - 1)) - others
            kmax = max(1, min(3, budget))
            k = int(rng.integers(1, kmax + 1)) if kmax > 1 else 1
            probs = rng.dirichlet(np.ones(k))
            probs = np.maximum(np.round(probs, 3), 0.001)
            probs /= probs.sum()
            parent_price = np.array(nodes[[n.id for n in nodes].index(v)].prices)
            one_sided = rng.random() < arbitrage_bias
            # dyadic steps; the last child balances the rest so uniform weights are a martingale
            steps = rng.integers(-8, 9, size=(k, d)) / 4.0
            if one_sided:
                steps = np.abs(steps)
                steps[0] = np.maximum(steps[0], 0.25)
            else:
                steps[-1] = -steps[:-1].sum(axis=0)
            for j in range(k):
                cid = "n%d" % counter
                counter += 1
                nodes.append(Node(cid, v, float(probs[j]), tuple(parent_price + steps[j])))
                nxt.append(cid)
        frontier = nxt
    nodes = _renormalize_siblings(nodes)
    return FiniteMarket(nodes, T, d)
