"""Command-line front end: generate instances, solve, benchmark, convergence curves.

CSV formats (headers are fixed):

solve / bench rows::

    instance,kind,method,num_vertices,scenarios,alpha,beta,seed,status,objective,
    bound,gap_pct,time_s,nodes,cuts_subtour,cuts_capacity,cuts_connectivity,
    cuts_transferred,tight_ratio

bench appends a blank line and an aggregate block::

    group,method,runs,mean_time_s,mean_gap_pct,finite_gaps,optimal

converge rows::

    size,fast_forward,random_min,random_mean,random_max,repeats

Numbers carry 6 significant digits; ``inf`` marks a missing incumbent or
bound and ``na`` a field that does not apply (or a suppressed timing).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import scvrp, ssfp
from .core import ORIGINS, ParseError
from .driver import convergence_curve, solve_direct, tulip_solve

RUN_FIELDS = ("instance", "kind", "method", "num_vertices", "scenarios", "alpha", "beta", "seed",
              "status", "objective", "bound", "gap_pct", "time_s", "nodes", "cuts_subtour",
              "cuts_capacity", "cuts_connectivity", "cuts_transferred", "tight_ratio")
AGG_FIELDS = ("group", "method", "runs", "mean_time_s", "mean_gap_pct", "finite_gaps", "optimal")
CURVE_FIELDS = ("size", "fast_forward", "random_min", "random_mean", "random_max", "repeats")
METHODS = ("direct", "tulip", "flow_direct")
# graph-size groups used by the bench aggregate: (label, exclusive upper bound on |V|)
SIZE_GROUPS = (("small", 50), ("medium", 100), ("large", math.inf))
NA = "na"


def fmt(v) -> str:
    if v is None:
        return NA
    v = float(v)
    if math.isnan(v):
        return NA
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6g}"


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def _beta(args):
    return (args.beta1, args.beta2, args.beta3)


# -- instance files ------------------------------------------------------------

def _generator_tag(doc, **meta):
    doc = json.loads(doc)
    doc["generator"] = meta
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def generate_scvrp(base_text: str, alpha: float, scenarios: int, seed: int) -> str:
    base = scvrp.parse_tsplib_vrp(base_text)
    inst = scvrp.generate_demands(base, alpha, scenarios, seed)
    return _generator_tag(scvrp.instance_to_json(inst), alpha=alpha, seed=seed)


def generate_ssfp(base_text: str, beta, scenarios: int, seed: int) -> str:
    stp = ssfp.parse_stp(base_text)
    if stp.scenarios:
        if len(stp.scenarios) < scenarios:
            raise ValueError(f"base file has {len(stp.scenarios)} scenarios, {scenarios} requested")
        kept = stp.scenarios[:scenarios]
    else:
        # no scenario block: each scenario draws as many random terminals as the base lists
        rng = np.random.default_rng([seed, 1])
        size = max(2, min(len(stp.terminals), stp.num_vertices))
        kept = tuple((1.0, (tuple(int(v) for v in rng.choice(stp.num_vertices, size, replace=False)),))
                     for _ in range(scenarios))
    total = math.fsum(p for p, _ in kept)
    kept = tuple((p / total, g) for p, g in kept)
    stp = ssfp.StpData(stp.num_vertices, stp.edges, stp.costs, stp.terminals, kept, stp.name)
    inst = ssfp.adapt_sstp_instance(stp, seed)
    ssfp.ssfp_distance(inst, 0, 0, beta)
    return _generator_tag(ssfp.instance_to_json(inst), beta=list(beta), seed=seed)


def load_instance(path):
    """Return ``(kind, instance, generator_meta)`` for a JSON instance file."""
    text = Path(path).read_text()
    doc = json.loads(text)
    kind = doc.get("problem")
    if kind == "scvrp":
        return kind, scvrp.instance_from_json(text), doc.get("generator", {})
    if kind == "ssfp":
        return kind, ssfp.instance_from_json(text), doc.get("generator", {})
    raise ValueError(f"{path}: unknown problem kind {kind!r}")


def _problem(kind, inst, method, beta):
    if kind == "scvrp":
        if method == "flow_direct":
            raise ValueError("flow_direct applies to ssfp instances only")
        return scvrp.scvrp_problem(inst)
    return ssfp.ssfp_problem(inst, beta, flow=(method == "flow_direct"))


def _num_vertices(kind, inst):
    return inst.n_plus_1 if kind == "scvrp" else inst.num_vertices


def run_record(path, method, time_limit=120.0, fraction=0.1, timing=True, beta=None,
               log=None) -> dict:
    kind, inst, meta = load_instance(path)
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    beta = tuple(beta if beta is not None else meta.get("beta", (1.0, 0.0, 0.0)))
    problem = _problem(kind, inst, method, beta)
    if method == "tulip":
        rep = tulip_solve(problem, fraction, time_limit, log=log)
    else:
        rep = solve_direct(problem, time_limit, log=log)
    row = {
        "instance": Path(path).name, "kind": kind, "method": method,
        "num_vertices": str(_num_vertices(kind, inst)), "scenarios": str(len(inst.scenarios)),
        "alpha": fmt(meta.get("alpha")) if kind == "scvrp" else NA,
        "beta": "/".join(fmt(b) for b in beta) if kind == "ssfp" else NA,
        "seed": str(meta["seed"]) if "seed" in meta else NA,
        "status": rep.status, "objective": fmt(rep.objective), "bound": fmt(rep.bound),
        "gap_pct": fmt(100.0 * rep.gap), "time_s": fmt(rep.total_time) if timing else NA,
        "nodes": str(rep.nodes),
        "cuts_transferred": str(rep.cuts_transferred) if method == "tulip" else NA,
        "tight_ratio": fmt(rep.tight_ratio) if method == "tulip" else NA,
    }
    for origin in ORIGINS:
        row[f"cuts_{origin}"] = str(rep.cuts_added.get(origin, 0))
    return row


def _error_row(path, method, exc) -> dict:
    row = {f: NA for f in RUN_FIELDS}
    row.update(instance=Path(path).name, method=method, status=f"error: {exc}")
    return row


def _safe_record(job):
    path, method, time_limit, fraction, timing = job
    try:
        return run_record(path, method, time_limit, fraction, timing)
    except Exception as exc:       # one failed cell never aborts the batch
        return _error_row(path, method, exc)


def write_rows(rows, fields, handle, header=True):
    w = csv.DictWriter(handle, fieldnames=fields, lineterminator="\n")
    if header:
        w.writeheader()
    for r in rows:
        w.writerow(r)


def _num(text):
    try:
        return float(text)
    except (TypeError, ValueError):
        return math.nan


def size_group(num_vertices: int) -> str:
    return next(label for label, upper in SIZE_GROUPS if num_vertices < upper)


def aggregate(rows) -> list[dict]:
    """Per (size group, method) statistics, computed from the formatted rows."""
    cells = {}
    for r in rows:
        n = _num(r["num_vertices"])
        if math.isnan(n):
            continue
        cells.setdefault((size_group(int(n)), r["method"]), []).append(r)
    order = {label: i for i, (label, _) in enumerate(SIZE_GROUPS)}
    out = []
    for (group, method) in sorted(cells, key=lambda k: (order[k[0]], METHODS.index(k[1]))):
        rs = cells[group, method]
        times = [_num(r["time_s"]) for r in rs]
        gaps = [g for g in (_num(r["gap_pct"]) for r in rs) if math.isfinite(g)]
        out.append({
            "group": group, "method": method, "runs": str(len(rs)),
            "mean_time_s": fmt(math.fsum(times) / len(times)) if all(map(math.isfinite, times)) else NA,
            "mean_gap_pct": fmt(math.fsum(gaps) / len(gaps)) if gaps else NA,
            "finite_gaps": str(len(gaps)),
            "optimal": str(sum(r["status"] == "optimal" for r in rs)),
        })
    return out


def read_manifest(path):
    """JSON manifest: defaults plus a list of runs.

    ``{"time_limit": 120, "fraction": 0.1,
       "runs": [{"instance": "a.json", "methods": ["direct", "tulip"]}, ...]}``
    Instance paths are relative to the manifest.  Each run may override
    ``time_limit`` and ``fraction``.
    """
    doc = json.loads(Path(path).read_text())
    root = Path(path).parent
    jobs = []
    for run in doc["runs"]:
        inst = run["instance"]
        inst = str(root / inst) if not os.path.isabs(inst) else inst
        for method in run.get("methods", ["direct", "tulip"]):
            jobs.append((inst, method, float(run.get("time_limit", doc.get("time_limit", 120.0))),
                         float(run.get("fraction", doc.get("fraction", 0.1)))))
    return jobs


def bench(manifest, jobs=1, timing=True) -> str:
    cells = [job + (timing,) for job in read_manifest(manifest)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_safe_record, cells))
    else:
        rows = [_safe_record(c) for c in cells]
    buf = io.StringIO()
    write_rows(rows, RUN_FIELDS, buf)
    buf.write("\n")
    write_rows(aggregate(rows), AGG_FIELDS, buf)
    return buf.getvalue()


def converge(path, sizes=None, repeats=25, seed=0, time_limit=120.0, beta=None) -> str:
    kind, inst, meta = load_instance(path)
    beta = tuple(beta if beta is not None else meta.get("beta", (1.0, 0.0, 0.0)))
    problem = _problem(kind, inst, "direct", beta)
    S = problem.num_scenarios
    sizes = list(range(1, S + 1)) if sizes is None else list(sizes)
    ff = convergence_curve(problem, sizes, "fast_forward", 1, seed, time_limit)
    rnd = convergence_curve(problem, sizes, "random", repeats, seed, time_limit)
    rows = [{"size": str(a["size"]), "fast_forward": fmt(a["mean"]), "random_min": fmt(b["min"]),
             "random_mean": fmt(b["mean"]), "random_max": fmt(b["max"]), "repeats": str(b["runs"])}
            for a, b in zip(ff, rnd)]
    buf = io.StringIO()
    write_rows(rows, CURVE_FIELDS, buf)
    return buf.getvalue()


# -- argument handling -----------------------------------------------------------

def _add_beta(p):
    p.add_argument("--beta1", type=float, default=1.0, help="weight of the cost distance")
    p.add_argument("--beta2", type=float, default=0.0, help="weight of the terminal distance")
    p.add_argument("--beta3", type=float, default=0.0, help="weight of the type distance")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tulip", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a stochastic instance from a base file")
    g.add_argument("kind", choices=("scvrp", "ssfp"))
    g.add_argument("--base", required=True, help="TSPLIB .vrp (scvrp) or SteinLib .stp (ssfp)")
    g.add_argument("--alpha", type=float, default=0.25, help="demand variance factor (scvrp)")
    _add_beta(g)
    g.add_argument("--scenarios", type=_positive_int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output file (default stdout)")

    s = sub.add_parser("solve", help="solve one instance and append a CSV row")
    s.add_argument("instance")
    s.add_argument("--method", choices=METHODS, default="tulip")
    s.add_argument("--time-limit", type=float, default=120.0)
    s.add_argument("--fraction", type=float, default=0.1, help="share of scenarios kept by TULIP")
    s.add_argument("--beta1", type=float, default=None)
    s.add_argument("--beta2", type=float, default=None)
    s.add_argument("--beta3", type=float, default=None)
    s.add_argument("--out", help="CSV file to append to (default stdout)")
    s.add_argument("--log", help="write the per-node search log to this CSV file")
    s.add_argument("--no-timing", action="store_true", help="print na instead of wall times")

    b = sub.add_parser("bench", help="run a manifest of solves and aggregate")
    b.add_argument("manifest")
    b.add_argument("--jobs", type=_positive_int, default=1)
    b.add_argument("--out", help="output CSV (default stdout)")
    b.add_argument("--no-timing", action="store_true")

    c = sub.add_parser("converge", help="objective after fixing a reduced first stage")
    c.add_argument("instance")
    c.add_argument("--sizes", help="comma-separated reduced sizes (default 1..S)")
    c.add_argument("--repeats", type=_positive_int, default=25)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--time-limit", type=float, default=120.0)
    _add_beta(c)
    c.add_argument("--out", help="output CSV (default stdout)")
    return ap


def _emit(text, out, append=False):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, "a" if append else "w", newline="") as fh:
        fh.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            text = Path(args.base).read_text()
            try:
                if args.kind == "scvrp":
                    result = generate_scvrp(text, args.alpha, args.scenarios, args.seed)
                else:
                    result = generate_ssfp(text, _beta(args), args.scenarios, args.seed)
            except ParseError as exc:
                raise ParseError(f"{args.base}: {exc}", exc.line) from None
            _emit(result, args.out)
        elif args.command == "solve":
            beta = None if args.beta1 is None else (args.beta1, args.beta2 or 0.0, args.beta3 or 0.0)
            log = open(args.log, "w") if args.log else None
            try:
                row = run_record(args.instance, args.method, args.time_limit, args.fraction,
                                 not args.no_timing, beta, log)
            finally:
                if log is not None:
                    log.close()
            fresh = args.out is None or not os.path.exists(args.out) or os.path.getsize(args.out) == 0
            buf = io.StringIO()
            write_rows([row], RUN_FIELDS, buf, header=fresh)
            _emit(buf.getvalue(), args.out, append=True)
            return 0 if row["status"] in ("optimal", "time_limit") else 1
        elif args.command == "bench":
            _emit(bench(args.manifest, args.jobs, not args.no_timing), args.out)
        else:
            sizes = None if args.sizes is None else [int(t) for t in args.sizes.split(",")]
            _emit(converge(args.instance, sizes, args.repeats, args.seed, args.time_limit,
                           _beta(args)), args.out)
    except (OSError, ValueError, KeyError) as exc:
        print(f"tulip: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
