"""Command-line entry point: ``python -m dfso <subcommand>``.

Exit codes: 0 success, 1 usage or input error, 2 infeasible, 3 resource limit.
The default solver tolerance comes from the DFSO_TOL environment variable.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import DfsoError, DomainError
from .instance import DfsoInstance, GroupedPopulation, load_instance
from .measures import demographic_parity, ksd, ksd_wd_sandwich, wasserstein_q_pow

DEFAULT_TOL = 1e-6


class UsageError(DfsoError):
    exit_code = 1


class Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _tol_default() -> float:
    raw = os.environ.get("DFSO_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"DFSO_TOL={raw!r} is not a number") from None


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.integer):
        return int(v)
    return v


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(_jsonable(payload), indent=1, sort_keys=True))
    else:
        print(text)


# ------------------------------------------------------------ instance flags


def _instance_flags(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance", help="instance JSON file")
    src.add_argument("--pop", help="population CSV (f1..fk, group[, y])")
    p.add_argument(
        "--problem",
        choices=("regression-mae", "regression-mse", "knapsack"),
        help="adapter for --pop (default: regression-mae when y is present, else knapsack)",
    )
    p.add_argument("--eps", type=float, help="efficiency tolerance epsilon (inf drops the band)")
    p.add_argument("--q", type=float, help="Wasserstein order")
    p.add_argument("--eff-abs-slack", type=float, default=None, help="absolute band slack (default 1e-9)")


def _resolve_instance(args) -> DfsoInstance:
    from .apps.adapters import knapsack_adapter, regression_adapter
    from .instance import with_v_star

    eps = 0.1 if args.eps is None else args.eps
    q = 2.0 if args.q is None else args.q
    slack = 1e-9 if args.eff_abs_slack is None else args.eff_abs_slack
    if args.pop:
        pop = GroupedPopulation.from_csv(args.pop)
        problem = args.problem or ("regression-mae" if pop.responses is not None else "knapsack")
        if problem.startswith("regression"):
            return regression_adapter(pop, problem.split("-")[1], eps, q, abs_slack=slack)
        return knapsack_adapter(pop, eps, q, abs_slack=slack)
    inst = load_instance(args.instance)
    eff = inst.efficiency
    if args.eps is not None:
        eff = eff.with_epsilon(args.eps)
    if args.eff_abs_slack is not None:
        eff = dataclasses.replace(eff, abs_slack=args.eff_abs_slack)
    inst = inst.with_efficiency(eff)
    if args.q is not None:
        inst = inst.with_q(args.q)
    if inst.efficiency.v_star is None:
        inst = with_v_star(inst)
    return inst


# ------------------------------------------------------------ subcommands


def cmd_measure(args) -> int:
    pop = GroupedPopulation.from_csv(args.pop)
    col = args.column
    feats = [f"f{j + 1}" for j in range(pop.kappa)]
    if col not in feats:
        raise DomainError(f"column {col} not in {', '.join(feats)}")
    u = pop.scenarios[:, feats.index(col)]
    pairs = []
    lines = [f"{'pair':<24} {'WD_q^q':>14} {'KSD':>10} {'DP':>10}"]
    for a, b in pop.group_pairs():
        ua, ub = u[pop.indices(a)], u[pop.indices(b)]
        rec = {"a": str(pop.groups[a]), "b": str(pop.groups[b]), "wd": wasserstein_q_pow(ua, ub, args.q), "ksd": ksd(ua, ub)}
        binary = bool(np.all((u == 0) | (u == 1)))
        rec["dp"] = demographic_parity(ua, ub) if binary else None
        lo, hi, _ = ksd_wd_sandwich(ua, ub, args.q)
        rec["ksd_lower"], rec["ksd_upper"] = lo, hi
        pairs.append(rec)
        dp = f"{rec['dp']:.6g}" if binary else "-"
        lines.append(f"{rec['a'] + ' vs ' + rec['b']:<24} {rec['wd']:>14.8g} {rec['ksd']:>10.6g} {dp:>10}")
    _emit(args, {"q": args.q, "column": col, "pairs": pairs}, "\n".join(lines))
    return 0


def cmd_bound(args) -> int:
    from .solve.bounds import jensen_bound
    from .solve.pipeline import gelbrich_estimate, moment_bounds_apply

    inst = _resolve_instance(args)
    out = {"jensen": float(jensen_bound(inst)[0])}
    if inst.q == 2 and moment_bounds_apply(inst):
        g = gelbrich_estimate(inst, (), args.tol, args.max_iter)
        out["gelbrich"] = float(g.value)
        out["gelbrich_status"] = g.status
    text = "\n".join(f"{k}: {v}" for k, v in out.items())
    _emit(args, out, text)
    return 0


def cmd_solve(args) -> int:
    from .solve.pipeline import solve_dfso

    inst = _resolve_instance(args)
    rep = solve_dfso(inst, args.tol, args.max_iter, init=args.init)
    payload = rep.to_json()
    payload["efficiency"] = inst.efficiency.value(rep.x)
    text = (
        f"status: {rep.status}\nobjective (WD_q^q): {rep.objective!r}\niterations: {rep.iterations}\n"
        f"KSD: {rep.scores['ksd']!r}\nefficiency: {payload['efficiency']!r}\n"
        + "".join(f"{k}: {v}\n" for k, v in rep.bounds.items())
        + "x: " + " ".join(repr(float(v)) for v in rep.x)
    )
    _emit(args, payload, text)
    return 2 if rep.status == "infeasible" else 0


FORM_FLAGS = ("vanilla", "discretized", "complementary", "quantile", "aggregate-quantile")


def cmd_emit(args) -> int:
    from .micp.builders import build
    from .micp.lpformat import emit_lp, write_model

    form = args.formulation or next(f for f in FORM_FLAGS if getattr(args, f.replace("-", "_")))
    inst = _resolve_instance(args)
    if inst.q not in (1, 2):
        raise UsageError("emit-model needs q = 1 or q = 2")
    model = build(form, inst, cuts=args.cuts)
    payload = {"formulation": form, "counts": model.counts()}
    if args.out:
        lp, side = write_model(model, args.out)
        payload.update({"lp": str(lp), "sidecar": str(side)})
        _emit(args, payload, f"wrote {lp} and {side}")
    else:
        if args.json:
            payload["lp_text"] = emit_lp(model)
            _emit(args, payload, "")
        else:
            sys.stdout.write(emit_lp(model))
    return 0


def cmd_ksd_search(args) -> int:
    from .micp.search import ksd_search

    inst = _resolve_instance(args)
    res = ksd_search(inst, rule=args.rule)
    text = f"minimal feasible level: {res.delta} ({float(res.delta):.6g})\nKSD at x: {res.ksd!r}\nprobes: " + ", ".join(
        f"{d}:{'ok' if ok else 'infeasible'}" for d, ok in res.probes
    )
    _emit(args, res.to_json(), text)
    return 0


def cmd_experiment(args) -> int:
    from .apps.experiment import ExperimentConfig, run_experiment, write_outputs

    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    over = {
        "problem": args.problem,
        "epsilons": tuple(args.eps) if args.eps else None,
        "q": args.q,
        "seeds": tuple(args.seeds) if args.seeds else None,
        "m": args.m,
        "kappa": args.kappa,
        "population": args.pop,
        "methods": tuple(args.methods) if args.methods else None,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "abs_slack": args.eff_abs_slack,
        "out_dir": args.out,
    }
    base.update({k: v for k, v in over.items() if v is not None})
    cfg = ExperimentConfig(**base)
    rows = run_experiment(cfg, jobs=args.jobs)
    write_outputs(cfg, rows, args.out)
    failed = [r for r in rows if r.status.startswith("error")]
    payload = {"out": args.out, "rows": len(rows), "failed": len(failed)}
    _emit(args, payload, f"wrote {len(rows)} rows to {args.out}/tradeoff.csv ({len(failed)} failed)")
    return 0


def cmd_oracle(args) -> int:
    from .solve.oracle import exact_oracle

    inst = _resolve_instance(args)
    res = exact_oracle(inst, budget=args.budget)
    payload = {"value": res.value, "x": res.x, "certified": res.certified, "evaluated": res.evaluated}
    text = f"value: {res.value!r}\ncertified: {res.certified}\nevaluated: {res.evaluated}\nx: " + " ".join(
        repr(float(v)) for v in res.x
    )
    _emit(args, payload, text)
    return 0


# ------------------------------------------------------------ parser


def make_parser() -> Parser:
    tol = _tol_default()
    p = Parser(prog="dfso", description="Distributionally fair stochastic optimization with Wasserstein fairness.")
    p.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    def common(sp):
        sp.add_argument("--json", action="store_true", default=argparse.SUPPRESS, help="JSON output")

    s = sub.add_parser("measure", help="WD_q^q, KSD and DP between groups of one utility column")
    s.add_argument("--pop", required=True)
    s.add_argument("--column", default="f1")
    s.add_argument("--q", type=float, default=2.0)
    common(s)
    s.set_defaults(func=cmd_measure)

    s = sub.add_parser("bound", help="Jensen and Gelbrich lower bounds")
    _instance_flags(s)
    s.add_argument("--tol", type=float, default=tol)
    s.add_argument("--max-iter", type=int, default=200)
    common(s)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("solve", help="alternating minimization with bounds")
    _instance_flags(s)
    s.add_argument("--tol", type=float, default=tol)
    s.add_argument("--max-iter", type=int, default=200)
    s.add_argument("--init", choices=("best", "efficiency", "jensen", "gelbrich"), default="best")
    common(s)
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("emit-model", help="write a mixed-integer formulation as LP text")
    _instance_flags(s)
    forms = s.add_mutually_exclusive_group(required=True)
    forms.add_argument("--formulation", choices=FORM_FLAGS)
    for f in FORM_FLAGS:
        forms.add_argument(f"--{f}", action="store_true", help=f"shorthand for --formulation {f}")
    s.add_argument("--cuts", action=argparse.BooleanOptionalAction, default=False, help="add valid inequalities")
    s.add_argument("--out", help="LP path; a .json sidecar is written next to it")
    common(s)
    s.set_defaults(func=cmd_emit)

    s = sub.add_parser("ksd-search", help="least KSD level reachable within the band")
    _instance_flags(s)
    s.add_argument("--rule", choices=("exact", "literal"), default="exact")
    common(s)
    s.set_defaults(func=cmd_ksd_search)

    s = sub.add_parser("experiment", help="epsilon sweep writing tradeoff.csv and friends")
    s.add_argument("--config", help="JSON file with ExperimentConfig fields")
    s.add_argument("--problem", choices=("regression-mae", "regression-mse", "knapsack", "allocation"))
    s.add_argument("--eps", type=float, nargs="+")
    s.add_argument("--q", type=float)
    s.add_argument("--seeds", type=int, nargs="+")
    s.add_argument("--seed", type=int, dest="seeds", action="append", help="single seed (repeatable)")
    s.add_argument("--m", type=int)
    s.add_argument("--kappa", type=int)
    s.add_argument("--pop", help="population or county CSV")
    s.add_argument("--methods", nargs="+")
    s.add_argument("--tol", type=float, default=tol)
    s.add_argument("--max-iter", type=int)
    s.add_argument("--eff-abs-slack", type=float)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", required=True)
    common(s)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("oracle", help="exact optimum for tiny instances")
    _instance_flags(s)
    s.add_argument("--budget", type=int, default=2_000_000)
    common(s)
    s.set_defaults(func=cmd_oracle)
    return p


def main(argv=None) -> int:
    try:
        args = make_parser().parse_args(argv)
        return int(args.func(args))
    except DfsoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
