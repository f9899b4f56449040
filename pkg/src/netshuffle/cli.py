"""Command-line front end.

    netshuffle graph info     --topology complete --n 5
    netshuffle bounds compute --model fmt --eps0 1 --n 10000 --delta 1e-6
    netshuffle bounds sweep   --model netshuffle,smpl_wlk --eps0 1 --n 1000:100000:log --p 0.1 --delta 1e-6
    netshuffle simulate       --protocol rnd_wlk --topology complete --n 3 --randomizer identity --T 0
    netshuffle verify all     --budget 1e6

Every command accepts ``--config FILE`` (a JSON object keyed by flag names,
dashes or underscores); explicit flags win over the file. The resolved
configuration is logged to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import warnings

import numpy as np

from netshuffle import analysis, bounds
from netshuffle.graph import (
    GraphError,
    NonErgodicError,
    TOPOLOGIES,
    generate_topology,
    graph_rounds,
    read_edge_list,
    spectral_gap,
    stationary_distribution,
    validate_ergodic,
    walk_distributions,
)
from netshuffle.protocol import PROTOCOLS, ProtocolConfig, simulate
from netshuffle.randomizer import binary_rr, identity, kary_rr

log = logging.getLogger("netshuffle")

SWEEP_COLUMNS = ["model", "eps0", "n", "delta", "p", "l", "eps", "delta_out", "valid"]
SUITES = ("lemma1", "empirical-dp", "mixing", "concentration", "ldp", "all")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

_GRAPH_DEFAULTS = {"topology": None, "edges": None, "n": None, "p": None, "edge_p": None, "d": None,
                   "seed": None}
_COMMON_DEFAULTS = {"out": None, "precision": 6, "config": None}

DEFAULTS = {
    "graph info": {**_GRAPH_DEFAULTS, "eps0": None},
    "bounds compute": {"model": None, "eps0": None, "n": None, "delta": None, "delta0": 0.0,
                       "p": None, "l": None, "eps": None, "T": None, "topology": None,
                       "edges": None, "edge_p": None, "d": None, "seed": None},
    "bounds sweep": {"model": None, "eps0": "1", "n": "1000:100000:log", "delta": "1e-6",
                     "delta0": "0", "p": None, "l": None},
    "simulate": {**_GRAPH_DEFAULTS, "protocol": "rnd_wlk", "randomizer": "binary_rr", "eps0": 1.0,
                 "k": None, "data": None, "T": "auto", "clients": None, "trials": 1,
                 "workers": 1, "summary": False},
    "verify": {**_GRAPH_DEFAULTS, "topology": "complete", "n": 4, "eps0": 1.0, "delta": 1e-6,
               "T": "auto", "budget": None, "strict": False, "position": 0, "values": "0,1",
               "sample_p": 0.5, "sample_n": 100, "conc_delta": 0.05, "trials": 10000, "k": 3,
               "workers": 1},
}


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", choices=TOPOLOGIES, default=None)
    p.add_argument("--edges", default=None, help="edge-list file ('u v' per line)")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=float, default=None, help="erdos_renyi edge probability")
    p.add_argument("--edge-p", dest="edge_p", type=float, default=None, help="alias of --p for graphs")
    p.add_argument("--d", type=int, default=None, help="random_regular degree")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="JSON file of flag values")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="write output here instead of stdout")
    p.add_argument("--precision", type=int, default=None, help="significant digits (default 6)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="netshuffle", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    graph = sub.add_parser("graph", help="graph analysis")
    gsub = graph.add_subparsers(dest="action", required=True)
    info = gsub.add_parser("info", help="ergodicity, spectral gap, stationary distribution")
    _add_graph_args(info)
    info.add_argument("--eps0", type=float, default=None, help="also report the recommended T")
    _add_common(info)

    bnd = sub.add_parser("bounds", help="closed-form privacy bounds")
    bsub = bnd.add_subparsers(dest="action", required=True)
    comp = bsub.add_parser("compute", help="one bound as JSON")
    comp.add_argument("--model", choices=bounds.MODELS, default=None)
    comp.add_argument("--eps0", type=float, default=None)
    comp.add_argument("--n", type=int, default=None)
    comp.add_argument("--delta", type=float, default=None)
    comp.add_argument("--delta0", type=float, default=None)
    comp.add_argument("--p", type=float, default=None, help="sampling probability (smpl_wlk)")
    comp.add_argument("--l", type=int, default=None, help="number of reporting clients")
    comp.add_argument("--eps", type=float, default=None, help="input eps (subsample_wor)")
    comp.add_argument("--T", type=float, default=None, help="walk length (liew_metric; omit for infinity)")
    comp.add_argument("--topology", choices=TOPOLOGIES, default=None)
    comp.add_argument("--edges", default=None)
    comp.add_argument("--edge-p", dest="edge_p", type=float, default=None)
    comp.add_argument("--d", type=int, default=None)
    _add_common(comp)
    sweep = bsub.add_parser("sweep", help="CSV over parameter grids")
    sweep.add_argument("--model", default=None, help="comma-separated model names")
    for name in ("eps0", "n", "delta", "delta0", "p", "l"):
        sweep.add_argument(f"--{name}", default=None,
                           help="value, a,b,c list, start:stop:log or start:stop:step")
    _add_common(sweep)

    sim = sub.add_parser("simulate", help="run a protocol; JSON line per trial")
    sim.add_argument("--protocol", choices=PROTOCOLS, default=None)
    _add_graph_args(sim)
    sim.add_argument("--randomizer", choices=("binary_rr", "kary_rr", "identity"), default=None)
    sim.add_argument("--eps0", type=float, default=None)
    sim.add_argument("--k", type=int, default=None)
    sim.add_argument("--data", default=None, help="comma-separated inputs (default u mod k)")
    sim.add_argument("--T", default=None, help="walk length or 'auto'")
    sim.add_argument("--sample-p", dest="sample_p", type=float, default=None,
                     help="sampling probability for smpl_wlk")
    sim.add_argument("--clients", default=None, help="comma-separated reporting clients (restricted)")
    sim.add_argument("--trials", type=int, default=None)
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--summary", action="store_true", default=None,
                     help="emit the destination frequency matrix instead of partitions")
    _add_common(sim)

    ver = sub.add_parser("verify", help="numeric verification suite")
    ver.add_argument("suite", choices=SUITES)
    _add_graph_args(ver)
    ver.add_argument("--eps0", type=float, default=None)
    ver.add_argument("--delta", type=float, default=None)
    ver.add_argument("--T", default=None)
    ver.add_argument("--budget", type=float, default=None, help="enumeration cap (atoms)")
    ver.add_argument("--strict", action="store_true", default=None, help="skipped checks fail")
    ver.add_argument("--position", type=int, default=None, help="index where the neighbours differ")
    ver.add_argument("--values", default=None, help="'a,b': value at that index in each dataset")
    ver.add_argument("--sample-p", dest="sample_p", type=float, default=None)
    ver.add_argument("--sample-n", dest="sample_n", type=int, default=None)
    ver.add_argument("--conc-delta", dest="conc_delta", type=float, default=None)
    ver.add_argument("--trials", type=int, default=None)
    ver.add_argument("--k", type=int, default=None, help="alphabet size for the k-ary LDP check")
    ver.add_argument("--workers", type=int, default=None)
    _add_common(ver)
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Hard defaults, then the config file, then explicit flags."""
    key = args.command if args.command in ("simulate", "verify") else f"{args.command} {args.action}"
    defaults = {**_COMMON_DEFAULTS, **DEFAULTS[key]}
    if args.command == "simulate":
        defaults["sample_p"] = None
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "action", "verbose")}
    cfg = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        for k, v in raw.items():
            name = k.replace("-", "_")
            if name not in defaults and name not in flags:
                raise UsageError(f"unknown config key {k!r}")
            cfg[name] = v
    out = dict(defaults)
    out.update(cfg)
    out.update({k: v for k, v in flags.items() if v is not None})
    if args.command == "verify":
        out["suite"] = args.suite
    return out


def _seed(cfg: dict) -> int:
    if cfg.get("seed") is None:
        cfg["seed"] = int(np.random.SeedSequence().entropy % 2**31)
        print(f"seed: {cfg['seed']}", file=sys.stderr)
    return int(cfg["seed"])


# ---------------------------------------------------------------------------
# output formatting
# ---------------------------------------------------------------------------


def _fmt_float(x: float, precision: int):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.{precision}g}")


def rounded(obj, precision: int):
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj), precision)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist(), precision)
    if isinstance(obj, dict):
        return {str(k): rounded(v, precision) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v, precision) for v in obj]
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _dump(obj, cfg: dict) -> str:
    return json.dumps(rounded(obj, int(cfg["precision"])), sort_keys=True)


def _emit(text: str, cfg: dict) -> None:
    if cfg.get("out"):
        with open(cfg["out"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# shared builders
# ---------------------------------------------------------------------------


def load_graph(cfg: dict):
    if cfg.get("edges"):
        return read_edge_list(cfg["edges"])
    kind = cfg.get("topology")
    if kind is None:
        raise UsageError("give --topology or --edges")
    if cfg.get("n") is None:
        raise UsageError("--topology needs --n")
    edge_p = cfg.get("edge_p")
    if edge_p is None and kind == "erdos_renyi":
        edge_p = cfg.get("p")
    seed = cfg.get("seed")
    if kind in ("erdos_renyi", "random_regular"):
        seed = _seed(cfg)
    return generate_topology(kind, int(cfg["n"]), seed or 0, p=edge_p, d=cfg.get("d"))


def _ints(text) -> list[int]:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(v) for v in str(text).replace(",", " ").split()]


def _rounds(value):
    if value is None or str(value) == "auto":
        return "auto"
    return int(value)


def parse_grid(spec, cast=float) -> list:
    """``v``, ``a,b,c``, ``start:stop:log`` (num=10 per decade, inclusive) or ``start:stop:step``."""
    if spec is None:
        return [None]
    s = str(spec)
    if ":" in s:
        parts = s.split(":")
        if len(parts) != 3:
            raise UsageError(f"bad range {s!r}; use start:stop:log or start:stop:step")
        start, stop = float(parts[0]), float(parts[1])
        if parts[2] == "log":
            if start <= 0 or stop <= start:
                raise UsageError(f"bad log range {s!r}")
            num = max(2, int(round(10 * math.log10(stop / start))) + 1)
            vals = np.geomspace(start, stop, num)
        else:
            step = float(parts[2])
            if step <= 0:
                raise UsageError(f"bad step in {s!r}")
            vals = np.arange(start, stop + step * 1e-9, step)
        if cast is int:
            return sorted({int(round(v)) for v in vals})
        return [float(v) for v in vals]
    return [cast(float(v)) if cast is int else cast(v) for v in s.split(",")]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_graph_info(cfg: dict) -> int:
    g = load_graph(cfg)
    rep = validate_ergodic(g)
    out = {"n": g.n, "m": g.m, "connected": rep.connected, "bipartite": rep.bipartite,
           "ergodic": rep.ergodic}
    out["spectral_gap"] = spectral_gap(g).gap if all(g.degrees) else None
    out["stationary_distribution"] = stationary_distribution(g).tolist() if g.m else None
    if cfg.get("eps0") is not None:
        out["recommended_T"] = graph_rounds(g, float(cfg["eps0"])) if rep.ergodic else None
    _emit(_dump(out, cfg) + "\n", cfg)
    return 0


def _bound_row(model, eps0, n, delta, delta0, p, l):  # noqa: E741
    kw = dict(eps0=eps0, n=n, delta=delta, delta0=delta0, p=p, l=l)
    if model == "subsample_wor":
        raise UsageError("subsample_wor is not sweepable; use bounds compute")
    if model == "smpl_wlk" and p is None:
        raise UsageError("smpl_wlk sweep needs --p")
    if model == "partial" and l is None:
        raise UsageError("partial sweep needs --l")
    if l is not None and l > n:
        return bounds.PrivacyBound(model, None, None, False, "l <= n")
    return bounds.compute(model, **kw)


def cmd_bounds_compute(cfg: dict) -> int:
    model = cfg.get("model")
    if model is None:
        raise UsageError("--model is required")
    graph = None
    if model == "liew_metric":
        graph = load_graph(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = bounds.compute(
            model, eps0=cfg.get("eps0"), n=cfg.get("n"), delta=cfg.get("delta"),
            delta0=cfg.get("delta0") or 0.0, p=cfg.get("p"), l=cfg.get("l"), eps=cfg.get("eps"),
            graph=graph, T=cfg.get("T"),
        )
    notes = dict(res.notes)
    if caught:
        notes["warnings"] = [str(w.message) for w in caught]
    inputs = {k: cfg.get(k) for k in ("eps0", "n", "delta", "delta0", "p", "l", "eps", "T")
              if cfg.get(k) is not None}
    out = {"model": model, "inputs": inputs, "eps": res.eps, "delta": res.delta, "valid": res.valid,
           "validity_condition": res.validity_condition, "notes": notes}
    _emit(_dump(out, cfg) + "\n", cfg)
    return 0


def cmd_bounds_sweep(cfg: dict) -> int:
    if not cfg.get("model"):
        raise UsageError("--model is required")
    models = [m.strip() for m in str(cfg["model"]).split(",")]
    for m in models:
        if m not in bounds.MODELS:
            raise UsageError(f"unknown model {m!r}")
    prec = int(cfg["precision"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)

    def cell(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return str(v).lower()
        if isinstance(v, float):
            return f"{v:.{prec}g}"
        return str(v)

    for model in models:
        for eps0 in parse_grid(cfg["eps0"]):
            for n in parse_grid(cfg["n"], int):
                for delta in parse_grid(cfg["delta"]):
                    for delta0 in parse_grid(cfg["delta0"]):
                        for p in parse_grid(cfg.get("p")):
                            for l in parse_grid(cfg.get("l"), int):  # noqa: E741
                                r = _bound_row(model, eps0, n, delta, delta0 or 0.0, p, l)
                                w.writerow([cell(x) for x in
                                            (model, eps0, n, delta, p, l, r.eps, r.delta, r.valid)])
    _emit(buf.getvalue(), cfg)
    return 0


def _randomizer(cfg: dict, n: int):
    kind = cfg["randomizer"]
    if kind == "identity":
        return identity(int(cfg.get("k") or max(2, n)))
    if kind == "kary_rr":
        return kary_rr(float(cfg["eps0"]), int(cfg.get("k") or 2))
    return binary_rr(float(cfg["eps0"]))


def cmd_simulate(cfg: dict) -> int:
    seed = _seed(cfg)
    g = load_graph(cfg)
    r = _randomizer(cfg, g.n)
    data = _ints(cfg.get("data")) or [u % r.input_size for u in range(g.n)]
    pcfg = ProtocolConfig(g, r, rounds=_rounds(cfg.get("T")), seed=seed)
    clients = _ints(cfg["clients"]) if cfg.get("clients") is not None else None
    sample_p = cfg.get("sample_p")
    if cfg["protocol"] == "smpl_wlk" and sample_p is None:
        sample_p = cfg.get("p")
    batch = simulate(cfg["protocol"], pcfg, data, int(cfg["trials"]), p=sample_p, clients=clients,
                     workers=int(cfg["workers"]))
    if cfg.get("summary"):
        out = {"seed": seed, "T": batch.rounds, "protocol": cfg["protocol"], "trials": batch.trials,
               "frequencies": batch.destination_frequencies()}
        if cfg["protocol"] != "infinite":
            out["expected"] = walk_distributions(g, batch.rounds).T
        else:
            out["expected"] = np.tile(stationary_distribution(g), (g.n, 1))
        _emit(_dump(out, cfg) + "\n", cfg)
    else:
        _emit("".join(line + "\n" for line in batch.json_lines()), cfg)
    return 0


def _check(name, instance, observed, bound, passed, status="ok"):
    return {"check": name, "instance": instance, "observed": observed, "bound": bound,
            "pass": None if passed is None else bool(passed), "status": status}


def _verify_lemma1(cfg, g, budget):
    eps0 = float(cfg["eps0"])
    T = graph_rounds(g, eps0) if _rounds(cfg.get("T")) == "auto" else int(cfg["T"])
    inst = {"n": g.n, "m": g.m, "T": T, "eps0": eps0}
    rep = analysis.lemma1_ratio_check(g, T, eps0, budget=budget)
    out = [
        _check("lemma1.assignment_ratio", inst, [rep.min_ratio, rep.max_ratio],
               [rep.lower, rep.upper], rep.ratio_ok),
        _check("lemma1.deviation", inst, rep.max_deviation, rep.deviation_bound, rep.deviation_ok),
    ]
    data = [u % 2 for u in range(g.n)]
    pcfg = ProtocolConfig(g, binary_rr(eps0), rounds=T, seed=int(cfg.get("seed") or 0))
    ev = analysis.event_ratio_check(pcfg, data, eps0, seed=int(cfg.get("seed") or 0), budget=budget)
    out.append(_check("lemma1.event_ratio", {**inst, "atoms": ev.atoms, "unions": ev.unions},
                      [ev.min_ratio, ev.max_ratio], [ev.lower, ev.upper], ev.passed))
    return out


def _verify_empirical_dp(cfg, g, budget):
    eps0, delta = float(cfg["eps0"]), float(cfg["delta"])
    T = _rounds(cfg.get("T"))
    pcfg = ProtocolConfig(g, binary_rr(eps0), rounds=T)
    a, b = _ints(cfg["values"])
    pos = int(cfg["position"])
    x = [a] * g.n
    xp = list(x)
    xp[pos] = b
    out = []
    for protocol in ("rnd_wlk", "infinite"):
        rep = analysis.empirical_dp_check(protocol, pcfg, x, xp, delta, budget=budget)
        inst = {"protocol": protocol, "n": g.n, "T": pcfg.resolve_rounds() if protocol != "infinite" else None,
                "eps0": eps0, "delta": delta, "pair": [list(rep.pair[0]), list(rep.pair[1])]}
        bound = rep.theory_eps if rep.theory_valid else eps0
        out.append(_check(f"empirical_dp.{protocol}", inst, rep.emp_eps, bound, rep.passed))
    return out


def _verify_mixing(cfg, g, budget):
    eps0 = float(cfg["eps0"])
    rep = analysis.mixing_check(g, eps0)
    inst = {"n": g.n, "m": g.m, "gap": rep.gap, "T": rep.rounds, "horizon": rep.horizon}
    return [
        _check("mixing.convergence_bound", {**inst, "worst_start_t": list(rep.worst)}, rep.max_excess,
               rep.tol, rep.bound_ok),
        _check("mixing.deviation_at_T", inst, rep.deviation_at_rounds, rep.deviation_bound,
               rep.deviation_ok),
    ]


def _verify_concentration(cfg, g, budget):
    p, n, d, trials = float(cfg["sample_p"]), int(cfg["sample_n"]), float(cfg["conc_delta"]), int(cfg["trials"])
    rng = np.random.default_rng([int(cfg["seed"]), 1])
    rep = analysis.sampling_concentration_check(p, n, d, trials, rng)
    inst = {"p": p, "n": n, "delta": d, "trials": trials, "interval": [rep.lower, rep.upper]}
    return [_check("concentration.bernstein", inst, rep.violations, rep.bound, rep.passed)]


def _verify_ldp(cfg, g, budget):
    eps0 = float(cfg["eps0"])
    out = []
    for r in (binary_rr(eps0), kary_rr(eps0, int(cfg["k"])), kary_rr(eps0, 8)):
        rep = analysis.ldp_check(r)
        ok = rep.passed and abs(rep.observed - rep.claimed) <= 1e-12
        out.append(_check(f"ldp.{r.name}", r.spec(), rep.observed, rep.claimed, ok))
    return out


_SUITES = {
    "lemma1": _verify_lemma1,
    "empirical-dp": _verify_empirical_dp,
    "mixing": _verify_mixing,
    "concentration": _verify_concentration,
    "ldp": _verify_ldp,
}


def cmd_verify(cfg: dict) -> int:
    _seed(cfg)
    budget = int(cfg["budget"]) if cfg.get("budget") is not None else analysis.enumeration_budget()
    g = load_graph(cfg)
    names = list(_SUITES) if cfg["suite"] == "all" else [cfg["suite"]]
    checks = []
    for name in names:
        try:
            checks.extend(_SUITES[name](cfg, g, budget))
        except analysis.EnumerationBudgetExceeded as exc:
            checks.append(_check(name, {"n": g.n}, None, budget, None, status=f"skipped: {exc}"))
        except NonErgodicError as exc:
            checks.append(_check(name, {"n": g.n}, None, None, False, status=f"error: {exc}"))
    strict = bool(cfg.get("strict"))
    ok = all(c["pass"] or (c["pass"] is None and not strict) for c in checks)
    report = {"suite": cfg["suite"], "seed": cfg["seed"], "checks": checks, "pass": ok}
    _emit(_dump(report, cfg) + "\n", cfg)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    log.handlers[:] = [handler]
    log.propagate = False
    log.setLevel(logging.DEBUG if args.verbose else logging.INFO)
    try:
        cfg = resolve(args)
        if args.command == "graph":
            fn = cmd_graph_info
        elif args.command == "bounds":
            fn = cmd_bounds_compute if args.action == "compute" else cmd_bounds_sweep
        elif args.command == "simulate":
            fn = cmd_simulate
        else:
            fn = cmd_verify
        if args.command in ("simulate", "verify"):
            _seed(cfg)
        log.info("config: %s", json.dumps(rounded(cfg, 17), sort_keys=True))
        return fn(cfg)
    except (UsageError, GraphError, ValueError, OverflowError) as exc:
        print(f"netshuffle: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
