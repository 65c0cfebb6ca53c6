"""Command-line entry point.

Exit codes: 0 clean verdicts, 1 detected arbitrage or free lunch, 2 input errors.
"""

import argparse
from dataclasses import dataclass, field
import json
import os
from pathlib import Path
import sys
import warnings

import numpy as np

from .market import MarketValidationError, check_na, find_emm, in_C, load_market
from .orlicz import (InvalidYoungFunction, complementary, luxemburg_norm, numeric_complementary,
                     parse_young, polar_gauge, YoungUtility)
from .duality import UtilityProblem, sup_utility_dual, sup_utility_primal
from .report import AnalysisReport
from .largemarket import (BuildError, MarketFamily, MeasureSeq, build_bicontiguous, contiguity_profile,
                          detect_all, nafl_check, namfl_worstcase, Schedule)
from .largemarket.pipeline import DEFAULT_F_GRID, _PerMarket

EXIT_CLEAN, EXIT_FLAGGED, EXIT_INPUT = 0, 1, 2
FREE_LUNCH_TOL = 1e-12


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: list = field(default_factory=list)
    eps_grid: tuple = ()
    F: tuple = ()
    delta: float = None
    prefix: int = None
    out: str = None
    fmt: str = "text"
    tol: float = 1e-9

    def validate(self):
        if self.tol <= 0:
            raise InputError("tolerances must be positive")
        if self.prefix is not None and self.prefix < 1:
            raise InputError("prefix N must be at least 1")
        if self.delta is not None and self.delta <= 0:
            raise InputError("delta must be positive")
        for e in self.eps_grid:
            if not 0 < e <= 1:
                raise InputError("eps values must lie in (0, 1], got %g" % e)
        for path in self.inputs:
            if path not in (None, "-") and not str(path).lstrip().startswith("{") and not Path(path).exists():
                raise InputError("no such file: %s" % path)


# --------------------------------------------------------------------------
# input helpers

def _read_doc(source):
    if source in (None, "-"):
        text = sys.stdin.read()
        if not text.strip():
            raise InputError("expected a JSON document on standard input")
    else:
        text = Path(source).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError("%s is not valid JSON: %s" % (source or "stdin", exc)) from None


def _market(source):
    if source in (None, "-"):
        return load_market(_read_doc(source))
    return load_market(source)


def _family(source, prefix=None):
    doc = _read_doc(source)
    base = "." if source in (None, "-") else str(Path(source).parent)
    if "nodes" in doc:  # a bare market file is the one-market explicit family
        fam = MarketFamily("explicit", {}, 1, (load_market(doc),))
    else:
        fam = MarketFamily.from_dict(doc, base_dir=base)
    if prefix is not None:
        if fam.kind == "explicit" and prefix > len(fam.explicit):
            raise InputError("explicit family has only %d markets" % len(fam.explicit))
        fam.prefix = prefix
    return fam


def _floats(text):
    try:
        return [float(x) for x in str(text).replace("(", "").replace(")", "").split(",") if x.strip()]
    except ValueError:
        raise InputError("expected comma-separated numbers, got %r" % text) from None


def _leaf_vector(market, text):
    """A leaf id (indicator), a JSON list or object, or comma-separated numbers."""
    if text is None:
        return None
    text = text.strip()
    if text.startswith(("[", "{")):
        spec = json.loads(text)
    elif text in market.leaf_index:
        spec = text
    else:
        spec = _floats(text)
    try:
        return market.leaf_vector(spec)
    except KeyError as exc:
        raise InputError(str(exc).strip("'\"")) from None


def _young_list(values):
    return tuple(parse_young(v) for v in values) if values else DEFAULT_F_GRID


def _measures(path, family, N):
    """``MeasureSeq`` from a JSON file ``{"n": [masses], ...}`` or ``{"measures": {...}}``."""
    doc = _read_doc(path)
    doc = doc.get("measures", doc)
    if isinstance(doc, list):
        doc = {str(i + 1): v for i, v in enumerate(doc)}
    if "all" in doc:
        return MeasureSeq.constant(family, np.asarray(doc["all"], dtype=float))
    masses = {int(k): np.asarray(v, dtype=float) for k, v in doc.items()}
    missing = [n for n in range(1, N + 1) if n not in masses]
    if missing:
        raise InputError("measures file has no entry for n=%d" % missing[0])
    return MeasureSeq(family, masses)


# --------------------------------------------------------------------------
# subcommands

def cmd_orlicz(args, cfg):
    F = parse_young(args.F)
    rep = AnalysisReport("orlicz %s  F=%s" % (args.action, F.record()))
    if args.action == "conj":
        G = complementary(F)
        ys = np.asarray(_floats(args.at) if args.at else np.linspace(0.0, 4.0, 9))
        Gn = numeric_complementary(F)
        rep.add(None, "complement", G.record(), {"F": F.record(), "G": G.record()})
        for y in ys:
            rep.add(None, "G(%s)" % ("%g" % y), float(G.value(y)))
        rep.add(None, "max|G-numeric|", float(np.max(np.abs(G.value(ys) - Gn.value(ys)))))
        return rep
    g = np.asarray(_floats(args.values))
    probs = np.asarray(_floats(args.probs)) if args.probs else np.full(g.size, 1.0 / g.size)
    if probs.shape != g.shape:
        raise InputError("--values and --probs must have the same length")
    if np.any(probs <= 0) or abs(probs.sum() - 1.0) > 1e-9:
        raise InputError("--probs must be a strictly positive probability vector")
    if args.action == "norm":
        rep.add(None, "luxemburg_norm", luxemburg_norm(g, probs, F))
    else:
        rep.add(None, "polar_gauge", polar_gauge(g, probs, F))
        rep.add(None, "complement_norm", luxemburg_norm(g, probs, complementary(F)))
    return rep


def cmd_market(args, cfg):
    m = _market(args.market)
    rep = AnalysisReport("market %s  %s" % (args.action, m.name or args.market))
    if args.action == "emm":
        d = find_emm(m)
        if d is None:
            rep.add(None, "EMM", "none")
            rep.flagged = True
            rep.note("no equivalent martingale measure; run `market na` for an arbitrage certificate")
            return rep
        exact = getattr(d, "exact", None)
        rep.add(None, "q", d.measure, {"leaves": list(m.leaves), "q": d.measure,
                                       "exact": None if exact is None else [str(x) for x in exact]})
        return rep
    if args.action == "na":
        r = check_na(m)
        if r.holds:
            rep.add(None, "NA", "holds", {"leaves": list(m.leaves),
                                          "q": None if r.emm is None else r.emm.measure})
            return rep
        rep.flagged = True
        rep.add(None, "NA", "arbitrage", {"leaves": list(m.leaves), "payoff": r.payoff,
                                          "strategy": r.strategy,
                                          "exact": None if r.exact_payoff is None
                                          else [str(x) for x in r.exact_payoff]})
        rep.add(None, "arbitrage_value", r.value)
        return rep
    f = _leaf_vector(m, args.f)
    if f is None:
        raise InputError("market inC needs --f")
    res = in_C(m, f)
    rep.add(None, "in_C", bool(res.member),
            None if not res.member else {"dominating": res.k, "strategy": res.strategy})
    if res.member and np.all(f >= -1e-12) and np.any(f > 1e-12):
        rep.flagged = True
        rep.add(None, "arbitrage_witness", True)
    return rep


def _utility_problem(args):
    m = _market(args.market)
    F = parse_young(args.F)
    w = _leaf_vector(m, args.w)
    R = _leaf_vector(m, args.R)
    try:
        prob = UtilityProblem(m, YoungUtility(F), R, w)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    return m, F, prob


def _free_lunch(prob, value):
    return value >= -FREE_LUNCH_TOL and np.all(prob.w >= 0) and np.any(prob.w > 0)


def cmd_utility(args, cfg):
    m, F, prob = _utility_problem(args)
    rep = AnalysisReport("utility %s  %s  F=%s" % (args.action, m.name or args.market, F.record()))
    primal = sup_utility_primal(prob)
    if args.action == "sup":
        rep.add(None, "sup_value", primal.value, {"strategy": primal.strategy, "payoff": primal.payoff,
                                                   "attained": primal.attained})
        rep.flagged = bool(_free_lunch(prob, primal.value))
        return rep
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        dual = sup_utility_dual(prob, primal)
    rep.add(None, "value", dual.value)
    rep.add(None, "primal", primal.value)
    if not dual.attained:
        rep.add(None, "attained", False)
        rep.note("dual infimum approached only as lambda -> 0")
        rep.flagged = bool(_free_lunch(prob, primal.value))
        return rep
    rep.add(None, "Q", dual.q, {"leaves": list(m.leaves), "q": dual.q, "lam": dual.lam})
    rep.add(None, "lambda", dual.lam)
    rep.add(None, "gap", abs(dual.gap))
    return rep


def cmd_seq(args, cfg):
    fam = _family(args.family, args.prefix)
    N = fam.prefix
    rep = AnalysisReport("seq %s  %s family, n <= %d" % (args.action, fam.kind, N))
    if fam.kind == "klein":
        rep.note("one-period arbitrage: the standing no-arbitrage assumption fails for every n")
    if args.action == "detect":
        sched = Schedule(args.c0, args.L0, args.alpha)
        for v in detect_all(fam, N, sched):
            n = None
            rep.add(n, v.condition, v.status, dict(v.certificate, note=v.note))
            rep.flagged |= v.found
        return rep
    if args.action == "contiguity":
        if args.measures:
            Q = _measures(args.measures, fam, N)
        else:
            Q = _emm_seq(fam, N, rep)
            if Q is None:
                return rep
        prof = contiguity_profile(fam, Q, N, mode=args.mode)
        for e, fwd, bwd in prof.rows():
            rep.add(None, "forward eps=%g" % e, fwd)
            rep.add(None, "backward eps=%g" % e, bwd)
        for k in prof.kappas:
            rep.add(None, "ui_forward kappa=%g" % k, prof.ui_forward[k])
            rep.add(None, "ui_backward kappa=%g" % k, prof.ui_backward[k])
        for name, yw in (("young_forward", prof.young_forward), ("young_backward", prof.young_backward)):
            rep.add(None, name, "none" if yw is None else yw.F.record(),
                    None if yw is None else {"moment": yw.moment, "all_n": yw.all_n})
        if prof.closed_form:
            rep.note("stationary family: the profile holds for every n")
        return rep
    grid = tuple(cfg.eps_grid) or (0.5, 0.25, 0.125)
    Fs = _young_list(args.F)
    cache = _PerMarket(fam, N)
    if args.action == "namfl":
        R = _measures(args.R, fam, N) if args.R else None
        for eps in grid:
            for F in Fs:
                res = cache.run(lambda n: namfl_worstcase(fam.market(n), None if R is None else R.measure(n),
                                                          eps, F))
                for n in range(1, N + 1):
                    r = res[n]
                    rep.add(n, "WCV eps=%g F=%s" % (eps, F.record()), r.value,
                            {"worst_w": r.worst_w, "lam": r.lam, "primal_at_worst": r.primal_at_worst,
                             "q": None if r.Q is None else r.Q.measure})
                    rep.flagged |= r.free_lunch
                    if cfg.delta is not None:
                        rep.add(n, "NAMFL' eps=%g delta=%g" % (eps, cfg.delta), bool(r.value < -cfg.delta))
        return rep
    if args.action == "nafl":
        for eps in grid:
            for F in Fs:
                res = cache.run(lambda n: nafl_check(fam.market(n), eps, F))
                for n in range(1, N + 1):
                    r = res[n]
                    rep.add(n, "NAFL eps=%g F=%s" % (eps, F.record()), r.status,
                            {"distance": r.distance, "gauge": r.gauge, "g": r.g, "q": r.q, "note": r.note})
                    rep.flagged |= r.status == "witness"
        return rep
    # build
    try:
        R = _measures(args.R, fam, N) if args.R else None
        res = build_bicontiguous(fam, N, Fs, args.J, R)
    except BuildError as exc:
        rep.add(exc.n, "build", "refused", {"stage": exc.stage, "eps": exc.eps, "leaves": exc.leaves,
                                            "message": str(exc)})
        rep.flagged = exc.stage in ("emm", "namfl", "separation")
        return rep
    for s in res.stages:
        rep.add(None, "delta eps=%g" % s.eps, s.delta, {"F": s.F.record(), "worst_value": s.worst_value,
                                                       "gamma": s.gamma, "lam1": s.lam1, "mu": s.mu})
    for n in range(1, N + 1):
        rep.add(n, "Q", res.Q.measure(n), {"leaves": list(fam.market(n).leaves), "q": res.Q.measure(n)})
        for s in res.stages:
            rep.add(n, "round_trip eps=%g" % s.eps, res.round_trip[(s.eps, n)])
    rep.add(None, "remainder", res.mix.remainder)
    for name, yw in (("young_forward", res.profile.young_forward), ("young_backward", res.profile.young_backward)):
        rep.add(None, name, "none" if yw is None else yw.F.record())
    rep.add(None, "build", "ok" if res.ok else "unverified")
    if cfg.out:
        doc = {"measures": {str(n): res.Q.measure(n).tolist() for n in range(1, N + 1)}}
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        Path(cfg.out, "measures.json").write_text(json.dumps(doc, indent=1) + "\n")
    return rep


def _emm_seq(fam, N, rep):
    cache = _PerMarket(fam, N)
    dens = cache.run(lambda n: find_emm(fam.market(n)))
    bad = [n for n in range(1, N + 1) if dens[n] is None]
    if bad:
        rep.add(bad[0], "EMM", "none")
        rep.flagged = True
        return None
    if fam.stationary:
        return MeasureSeq.constant(fam, dens[1].measure)
    return MeasureSeq(fam, {n: dens[n].measure for n in range(1, N + 1)})


def cmd_example(args, cfg):
    if args.action == "klein":
        doc = {"kind": "klein", "params": {"alpha": args.alpha}, "prefix": args.prefix}
    else:
        doc = {"kind": "binomial", "params": {"p": args.p, "u": args.u, "d": args.d, "T": args.T},
               "prefix": args.prefix}
    MarketFamily.from_dict(doc)  # validate parameters
    return doc


# --------------------------------------------------------------------------
# argument parsing

def _common(p):
    p.add_argument("--format", dest="fmt", choices=("text", "csv", "both"), default="text")
    p.add_argument("--out", help="directory for report files (default: standard output)")
    p.add_argument("--threads", type=int, help="cap on worker threads (sets FTAPLAB_THREADS)")
    p.add_argument("--tol", type=float, default=1e-9)


def build_parser():
    ap = argparse.ArgumentParser(prog="ftaplab", description="Asymptotic arbitrage analysis for finite market families.")
    sub = ap.add_subparsers(dest="command", required=True)

    po = sub.add_parser("orlicz", help="Young-function conjugates, norms and gauges")
    po.add_argument("action", choices=("conj", "norm", "gauge"))
    po.add_argument("--F", default="power:2", help="e.g. power:2, 'power p=3', expml, entropy")
    po.add_argument("--at", help="points for conj, comma-separated")
    po.add_argument("--values", default="1,1", help="function values, comma-separated")
    po.add_argument("--probs", help="atom probabilities (default uniform)")
    _common(po)

    pm = sub.add_parser("market", help="single-market checks")
    pm.add_argument("action", choices=("emm", "na", "inC"))
    pm.add_argument("market", nargs="?", default="-")
    pm.add_argument("--f", help="claim: leaf id, JSON list/object or comma-separated values")
    _common(pm)

    pu = sub.add_parser("utility", help="expected-utility primal and dual")
    pu.add_argument("action", choices=("sup", "dual"))
    pu.add_argument("market", nargs="?", default="-")
    pu.add_argument("--w", help="endowment shift (leaf id, list or object)")
    pu.add_argument("--R", help="belief leaf masses (default: market measure)")
    pu.add_argument("--F", default="power:2")
    _common(pu)

    ps = sub.add_parser("seq", help="market-family analyses")
    ps.add_argument("action", choices=("contiguity", "detect", "namfl", "nafl", "build"))
    ps.add_argument("family", nargs="?", default="-")
    ps.add_argument("--prefix", type=int)
    ps.add_argument("--eps", help="eps grid, comma-separated")
    ps.add_argument("--F", action="append", help="Young function (repeatable); default power:2, power:3, expml")
    ps.add_argument("--delta", type=float)
    ps.add_argument("--J", type=int, default=6, help="mixture depth for build")
    ps.add_argument("--R", help="measures file used as beliefs")
    ps.add_argument("--measures", help="measures file for contiguity (default: the EMMs)")
    ps.add_argument("--mode", choices=("fractional", "sets"), default="fractional")
    ps.add_argument("--c0", type=float, default=1.0)
    ps.add_argument("--L0", type=float, default=1.0)
    ps.add_argument("--alpha", type=float, default=0.5)
    _common(ps)

    pe = sub.add_parser("example", help="print a built-in family as JSON")
    pe.add_argument("action", choices=("klein", "binomial"))
    pe.add_argument("--alpha", type=float, default=0.3)
    pe.add_argument("--p", type=float, default=0.5)
    pe.add_argument("--u", type=float, default=1.0)
    pe.add_argument("--d", type=float, default=-1.0)
    pe.add_argument("--T", type=int, default=2)
    pe.add_argument("--prefix", type=int, default=10)
    return ap


COMMANDS = {"orlicz": cmd_orlicz, "market": cmd_market, "utility": cmd_utility, "seq": cmd_seq}


def run(argv=None, stdout=None):
    """Parse ``argv``, run the analysis and return the exit code."""
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CLEAN if exc.code == 0 else EXIT_INPUT
    try:
        if args.command == "example":
            stdout.write(json.dumps(cmd_example(args, None), sort_keys=True) + "\n")
            return EXIT_CLEAN
        inputs = [getattr(args, k) for k in ("market", "family") if hasattr(args, k)]
        cfg = RunConfig(args.command, inputs, tuple(_floats(args.eps)) if getattr(args, "eps", None) else (),
                        tuple(getattr(args, "F", None) or ()), getattr(args, "delta", None),
                        getattr(args, "prefix", None), args.out, args.fmt, args.tol)
        cfg.validate()
        if args.threads is not None:
            if args.threads < 1:
                raise InputError("--threads must be positive")
            os.environ["FTAPLAB_THREADS"] = str(args.threads)
        rep = COMMANDS[args.command](args, cfg)
    except (InputError, MarketValidationError, InvalidYoungFunction, FileNotFoundError,
            json.JSONDecodeError, KeyError, ValueError, IndexError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        sys.stderr.write("error: %s\n" % msg)
        return EXIT_INPUT
    if cfg.out:
        rep.write(cfg.out, stem="%s-%s" % (args.command, args.action), fmt=cfg.fmt)
    else:
        if cfg.fmt in ("text", "both"):
            stdout.write(rep.to_text())
        if cfg.fmt in ("csv", "both"):
            stdout.write(rep.to_csv())
    return EXIT_FLAGGED if rep.flagged else EXIT_CLEAN


def main():
    sys.exit(run())
