"""Command-line surface: calibrate plans, evaluate bounds, run experiments.

Exit codes: 0 on success, 1 when `selftest` or `--oracle` finds a mismatch,
2 for usage and domain errors (bad flags, horizon mismatch, unknown ids).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .bounds import js_bound, kji_bound, kr_bound
from .calibration import VFamily, VKPlan, build_pool, k_raw, k_raw_scan, two_step_k, v_family
from .closed_testing import (
    brute_force_ct,
    rank_spec,
    shortcut_bound,
    uniformly_improved_spec,
)
from .errors import KnockfdpError
from .sim_harness import (
    comparison_experiment,
    coverage_experiment,
    direct_w_generator,
    make_methods,
)
from .stats_core import nested_sets, prepare, read_w_csv, read_w_json, resolve_ids


def _load_stats(path, policy="stable_by_input_order", seed=None):
    raw = read_w_json(path) if path.endswith(".json") else read_w_csv(path)
    return prepare(raw, policy=policy, seed=seed)


def _read_set_file(path):
    with open(path) as fh:
        text = fh.read().strip()
    if not text:
        return []
    if text.startswith("["):
        return json.loads(text)
    return text.split()


def _emit(obj, out):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _parse_nulls(spec_text, p):
    text = (spec_text or "").strip().lower()
    if text in ("", "none"):
        return frozenset()
    if text == "all":
        return frozenset(range(1, p + 1))
    if ":" in text:
        lo, hi = text.split(":")
        return frozenset(range(int(lo), int(hi) + 1))
    return frozenset(int(tok) for tok in text.replace(",", " ").split())


# ------------------------------------------------------------- subcommands


def cmd_calibrate(args):
    v = v_family(VFamily(kind=args.family.upper(), cap=args.cap or args.p))
    pool = build_pool(args.nsim, args.p, args.seed)
    plan = two_step_k(
        v, args.alpha, delta=args.delta, p=args.p, pool=pool, family=args.family.upper()
    )
    _emit(plan.as_dict(), args.out)
    return 0


def _report_payload(stats, report, positions):
    ordered = sorted(positions)
    payload = report.as_dict()
    payload["set"] = {
        "ids": [stats.original_ids[i - 1] for i in ordered],
        "positions": ordered,
    }
    return payload


def cmd_bound(args):
    stats = _load_stats(args.stats)
    plan = None
    if args.plan:
        with open(args.plan) as fh:
            plan = VKPlan.from_dict(json.load(fh))
    reports = []
    for path in args.set:
        positions = resolve_ids(stats, _read_set_file(path), coerce=True)
        if args.method == "kji":
            if plan is None:
                raise KnockfdpError("--method kji requires --plan")
            report = kji_bound(stats, plan, positions)
        elif args.method == "kr":
            report = kr_bound(stats, args.alpha, positions)
        elif args.method == "js":
            report = js_bound(stats, args.k, args.alpha, positions)
        else:
            raise KnockfdpError(f"unknown method {args.method!r}")
        reports.append(_report_payload(stats, report, positions))
    _emit(reports if len(reports) > 1 else reports[0], args.out)
    return 0


def cmd_ct_bound(args):
    stats = _load_stats(args.stats)
    v = v_family(VFamily(kind=args.v_family.upper(), cap=args.cap or stats.p))
    pool = build_pool(args.nsim, stats.p, args.seed)
    if args.family == "indicator":
        spec = uniformly_improved_spec(v, args.alpha, pool, delta=args.delta)
    else:
        spec = rank_spec(v, args.alpha, pool)
    failures = 0
    reports = []
    for path in args.set:
        positions = resolve_ids(stats, _read_set_file(path), coerce=True)
        outcome = shortcut_bound(positions, stats, spec)
        payload = _report_payload(stats, outcome, positions)
        if args.oracle:
            brute = brute_force_ct(positions, stats, spec)
            payload["oracle_t"] = brute.t_bound
            if brute.t_bound != outcome.t_bound:
                failures += 1
                print(
                    f"ORACLE MISMATCH: shortcut t={outcome.t_bound} "
                    f"brute t={brute.t_bound} set={sorted(positions)}",
                    file=sys.stderr,
                )
        reports.append(payload)
    _emit(reports if len(reports) > 1 else reports[0], args.out)
    return 1 if failures else 0


def cmd_simulate(args):
    labels = [tok for tok in args.methods.split(",") if tok]
    nulls = _parse_nulls(args.nulls, args.p)
    pool = None
    if any(tok.split("-")[0] in ("kji", "kct") for tok in labels):
        pool = build_pool(args.nsim, args.p, args.pool_seed)
    methods = make_methods(labels, args.alpha, args.p, pool=pool, delta=args.delta)
    gen = direct_w_generator(args.p, nulls, args.seed)
    if args.coverage:
        results = coverage_experiment(
            gen, methods, args.reps, args.alpha, seed=args.seed
        )
        summary = {
            label: {
                "violations": res.violations,
                "rate": res.violation_rate,
                "ci95": list(res.violation_ci),
                "reps": res.reps,
            }
            for label, res in results.items()
        }
        _emit(summary, args.out)
        return 0
    fieldnames, rows = comparison_experiment(gen, methods, args.reps)
    sink = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(sink, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            sink.close()
    return 0


def cmd_serve(args):
    import uvicorn

    from . import service

    service.DATA_DIR = args.data_dir or os.environ.get("KNOCKFDP_DATA_DIR")
    uvicorn.run(service.app, host=args.host, port=args.port)
    return 0


def _selftest(args):
    """Oracle-equality suite at small p; exits nonzero on any mismatch."""
    rng = np.random.default_rng(args.seed)
    failures = 0

    def check(name, ok):
        nonlocal failures
        print(f"{'ok  ' if ok else 'FAIL'} {name}")
        failures += not ok

    # closed-form k against the critical-sequence scan, plus the dual identity
    for alpha in (0.01, 0.05, 0.1, 0.2):
        v = tuple(range(1, 201))
        check(
            f"allowance closed form == sequence scan (alpha={alpha})",
            k_raw(v, alpha) == k_raw_scan(v, alpha),
        )

    # prefix-sweep bound == joint bound under the full linear plan
    agree = True
    for _ in range(args.trials):
        p = int(rng.integers(4, 13))
        stats = _random_stats(rng, p)
        v = tuple(range(1, p + 1))
        plan = VKPlan(v=v, k=k_raw(v, 0.05), alpha=0.05, horizon_p=p)
        for r in _sample_queries(rng, stats, 40):
            if kr_bound(stats, 0.05, r).fdp_upper != kji_bound(stats, plan, r).fdp_upper:
                agree = False
    check("prefix sweep == joint interpolation at the full plan", agree)

    # shortcut == exhaustive closed testing on small problems
    pool = build_pool(4000, 12, 23)
    agree = True
    for _ in range(args.trials):
        p = int(rng.integers(4, 11))
        stats = _random_stats(rng, p)
        v = tuple(vi for vi in (1, 2, 4, 8) if vi <= p)
        spec = uniformly_improved_spec(v, 0.05, pool)
        for r in _sample_queries(rng, stats, 25):
            if shortcut_bound(r, stats, spec).t_bound != brute_force_ct(r, stats, spec).t_bound:
                agree = False
    check("shortcut == brute-force closed testing (uniformly improved)", agree)

    print("selftest:", "FAILED" if failures else "passed")
    return 1 if failures else 0


def _random_stats(rng, p):
    from .stats_core import RawStats

    magnitudes = rng.permutation(np.arange(1, p + 1))
    signs = rng.choice((-1, 1), size=p)
    return prepare(
        RawStats(tuple((i, int(m * s)) for i, (m, s) in enumerate(zip(magnitudes, signs), 1)))
    )


def _sample_queries(rng, stats, count):
    out = list(dict.fromkeys(nested_sets(stats)))
    p = stats.p
    for _ in range(count):
        size = int(rng.integers(0, p + 1))
        out.append(frozenset(int(i) for i in rng.choice(np.arange(1, p + 1), size, replace=False)))
    return out


# --------------------------------------------------------------- entrypoint


def build_parser():
    parser = argparse.ArgumentParser(
        prog="knockfdp",
        description="Simultaneous FDP bounds for knockoff statistics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    cal = sub.add_parser("calibrate", help="two-step Monte-Carlo allowance calibration")
    cal.add_argument("--family", default="B", choices=list("ABCDabcd"))
    cal.add_argument("--alpha", type=float, default=0.05)
    cal.add_argument("--p", type=int, required=True)
    cal.add_argument("--cap", type=int, default=None, help="v values stay below this")
    cal.add_argument("--delta", type=float, default=0.01)
    cal.add_argument("--nsim", type=int, default=100_000)
    cal.add_argument("--seed", type=int, default=7)
    cal.add_argument("--out", default=None)
    cal.set_defaults(fn=cmd_calibrate)

    bnd = sub.add_parser("bound", help="evaluate an FDP bound for candidate sets")
    bnd.add_argument("--method", required=True, choices=("kji", "kr", "js"))
    bnd.add_argument("--stats", required=True, help="w.csv (id,w) or .json")
    bnd.add_argument("--set", action="append", required=True,
                     help="file of ids (tokens or JSON array); repeat for batches")
    bnd.add_argument("--plan", default=None, help="plan JSON from `calibrate`")
    bnd.add_argument("--alpha", type=float, default=0.05)
    bnd.add_argument("--k", type=int, default=10, help="allowance for --method js")
    bnd.add_argument("--out", default=None)
    bnd.set_defaults(fn=cmd_bound)

    ctb = sub.add_parser("ct-bound", help="closed-testing FDP bound via the shortcut")
    ctb.add_argument("--family", default="indicator", choices=("indicator", "rank"))
    ctb.add_argument("--v-family", dest="v_family", default="B", choices=list("ABCDabcd"))
    ctb.add_argument("--alpha", type=float, default=0.05)
    ctb.add_argument("--stats", required=True)
    ctb.add_argument("--set", action="append", required=True)
    ctb.add_argument("--cap", type=int, default=None)
    ctb.add_argument("--nsim", type=int, default=20_000)
    ctb.add_argument("--seed", type=int, default=101)
    ctb.add_argument("--delta", type=float, default=0.01)
    ctb.add_argument("--oracle", action="store_true",
                     help="cross-check against exhaustive closed testing (p <= 14)")
    ctb.add_argument("--out", default=None)
    ctb.set_defaults(fn=cmd_ct_bound)

    sim = sub.add_parser("simulate", help="coin-flip-valid synthetic experiments")
    sim.add_argument("--scenario", default="direct", choices=("direct",))
    sim.add_argument("--p", type=int, default=50)
    sim.add_argument("--nulls", default="10:20",
                     help="'lo:hi', comma list, 'none', or 'all'")
    sim.add_argument("--methods", default="kji-b,kct-b,kr")
    sim.add_argument("--reps", type=int, default=200)
    sim.add_argument("--alpha", type=float, default=0.05)
    sim.add_argument("--seed", type=int, default=7)
    sim.add_argument("--nsim", type=int, default=20_000)
    sim.add_argument("--pool-seed", dest="pool_seed", type=int, default=101)
    sim.add_argument("--delta", type=float, default=0.01)
    sim.add_argument("--coverage", action="store_true",
                     help="emit violation-rate JSON instead of the bounds CSV")
    sim.add_argument("--out", default=None)
    sim.set_defaults(fn=cmd_simulate)

    srv = sub.add_parser("serve", help="run the local HTTP query service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--data-dir", dest="data_dir", default=None)
    srv.set_defaults(fn=cmd_serve)

    st = sub.add_parser("selftest", help="oracle-equality suite at small p")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--trials", type=int, default=5)
    st.set_defaults(fn=_selftest)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except KnockfdpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
