"""Epsilon sweeps: solve each (seed, epsilon) cell with every method and tabulate."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import DfsoError, DomainError
from ..instance import DfsoInstance, GroupedPopulation
from ..micp.builders import build
from ..micp.lpformat import write_model
from ..solve.am import fairness_scores
from ..solve.bounds import jensen_bound
from ..solve.oracle import exact_oracle
from ..solve.pipeline import gap_percent, gelbrich_estimate, solve_dfso
from .adapters import (
    allocation_adapter,
    knapsack_adapter,
    load_counties,
    max_min_allocation,
    regression_adapter,
)
from .synth import synth_knapsack, synth_regression

PROBLEMS = ("regression-mae", "regression-mse", "knapsack", "allocation")
METHODS = (
    "am",
    "jensen",
    "gelbrich",
    "max-min",
    "oracle",
    "emit-quantile",
    "emit-aggregate",
    "emit-discretized",
    "emit-complementary",
)
EMIT = {
    "emit-quantile": "quantile",
    "emit-aggregate": "aggregate-quantile",
    "emit-discretized": "discretized",
    "emit-complementary": "complementary",
}
COLUMNS = ("epsilon", "method", "seed", "efficiency", "wd", "ksd", "bound", "gap_pct", "iterations", "status", "wall_ms")


@dataclass
class ExperimentConfig:
    problem: str = "regression-mae"
    epsilons: tuple = (0.1,)
    q: float = 2.0
    seeds: tuple = (0,)
    m: int = 40
    kappa: int = 10
    population: str | None = None
    methods: tuple = ("am", "jensen", "gelbrich")
    tol: float = 1e-6
    max_iter: int = 200
    abs_slack: float = 1e-9
    cuts: bool = True
    out_dir: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise DomainError(f"unknown problem {self.problem!r}; choose from {', '.join(PROBLEMS)}")
        self.epsilons = tuple(float(e) for e in self.epsilons)
        if any(not e >= 0 for e in self.epsilons):
            raise DomainError("epsilon values must be nonnegative")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise DomainError(f"unknown methods {bad}")
        self.methods = tuple(self.methods)
        self.seeds = tuple(int(s) for s in self.seeds)


@dataclass
class TradeoffRow:
    epsilon: float
    method: str
    seed: int
    efficiency: float | None = None
    wd: float | None = None
    ksd: float | None = None
    bound: float | None = None
    gap_pct: float | None = None
    iterations: int | None = None
    status: str = ""
    wall_ms: float | None = None
    x: list = field(default_factory=list, repr=False)
    trace: list = field(default_factory=list, repr=False)
    utilities: list = field(default_factory=list, repr=False)


def build_instance(config: ExperimentConfig, seed: int, epsilon: float) -> DfsoInstance:
    p = config.problem
    if p.startswith("regression"):
        loss = p.split("-")[1]
        if config.population:
            pop = GroupedPopulation.from_csv(config.population, require_y=True)
        else:
            pop = synth_regression(config.m, config.kappa, seed)[0]
        return regression_adapter(pop, loss, epsilon, config.q, abs_slack=config.abs_slack)
    if p == "knapsack":
        pop = GroupedPopulation.from_csv(config.population) if config.population else synth_knapsack(config.m, seed)
        return knapsack_adapter(pop, epsilon, config.q, abs_slack=config.abs_slack)
    return allocation_adapter(load_counties(config.population), epsilon, config.q, abs_slack=config.abs_slack)


def _scored(row: TradeoffRow, instance: DfsoInstance, x) -> TradeoffRow:
    x = np.asarray(x, dtype=float)
    s = fairness_scores(instance, x)
    row.x = [float(v) for v in x]
    row.efficiency = instance.efficiency.value(x)
    row.wd, row.ksd = float(s["wd"]), float(s["ksd"])
    row.utilities = [float(v) for v in instance.utilities(x)]
    return row


def _method(config: ExperimentConfig, instance: DfsoInstance, method: str, seed: int, eps: float, cache: dict):
    row = TradeoffRow(eps, method, seed)
    if method == "am":
        rep = solve_dfso(instance, config.tol, config.max_iter, bounds=False)
        cache["am"] = rep
        _scored(row, instance, rep.x)
        row.iterations, row.status, row.trace = rep.iterations, rep.status, [float(v) for v in rep.trace]
    elif method == "jensen":
        value, x = jensen_bound(instance)
        _scored(row, instance, x)
        row.bound, row.status = float(value), "bound"
    elif method == "gelbrich":
        starts = [cache["am"].x] if "am" in cache else []
        g = gelbrich_estimate(instance, starts, config.tol, config.max_iter)
        _scored(row, instance, g.x)
        row.bound, row.iterations, row.status = float(g.value), g.iterations, g.status
    elif method == "max-min":
        if config.problem != "allocation":
            row.status = "skipped: allocation only"
            return row
        _scored(row, instance, max_min_allocation(instance))
        row.status = "comparator"
    elif method == "oracle":
        res = exact_oracle(instance)
        _scored(row, instance, res.x)
        row.bound = float(res.value)
        row.status = "certified" if res.certified else "grid"
    else:
        model = build(EMIT[method], instance, cuts=config.cuts)
        if config.out_dir:
            path = Path(config.out_dir) / "models" / f"{EMIT[method]}_s{seed}_e{eps!r}.lp"
            path.parent.mkdir(parents=True, exist_ok=True)
            write_model(model, path)
        row.status = "emitted"
    return row


def run_cell(config: ExperimentConfig, seed: int, eps: float) -> list[TradeoffRow]:
    """All methods on one (seed, epsilon); failures are recorded, not raised."""
    try:
        instance = build_instance(config, seed, eps)
    except DfsoError as exc:
        return [TradeoffRow(eps, m, seed, status=f"error: {exc}") for m in config.methods]
    order = sorted(config.methods, key=lambda m: m != "am")
    cache: dict = {}
    rows = []
    for method in order:
        t0 = time.perf_counter()
        try:
            row = _method(config, instance, method, seed, eps, cache)
        except DfsoError as exc:
            row = TradeoffRow(eps, method, seed, status=f"error: {exc}")
        row.wall_ms = (time.perf_counter() - t0) * 1e3
        rows.append(row)
    upper = cache["am"].objective if "am" in cache else None
    for row in rows:
        if upper is not None and row.bound is not None and row.method in ("jensen", "gelbrich"):
            row.gap_pct = gap_percent(upper, row.bound)
    return rows


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[TradeoffRow]:
    cells = [(s, e) for s in config.seeds for e in config.epsilons]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, [config] * len(cells), *zip(*cells)))
    else:
        results = [run_cell(config, s, e) for s, e in cells]
    rows = [r for cell in results for r in cell]
    rows.sort(key=lambda r: (r.epsilon, r.method, r.seed))
    return rows


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def write_outputs(config: ExperimentConfig, rows: list[TradeoffRow], out_dir) -> dict:
    """tradeoff.csv, trace.csv, histogram.csv and report.json under out_dir.

    tradeoff.csv leaves wall_ms blank so repeated runs are byte-identical;
    timings go to report.json.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "tradeoff.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) if c != "wall_ms" else "" for c in COLUMNS])
    with open(out / "trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epsilon", "seed", "iteration", "objective"))
        for r in rows:
            for k, v in enumerate(r.trace):
                w.writerow((_fmt(r.epsilon), r.seed, k, _fmt(v)))
    instances = {}
    with open(out / "histogram.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("epsilon", "method", "seed", "value", "group", "weight"))
        for r in rows:
            if not r.utilities:
                continue
            key = (r.seed, r.epsilon)
            if key not in instances:
                instances[key] = build_instance(config, r.seed, r.epsilon).population
            pop = instances[key]
            sizes = {g: len(idx) for g, idx in pop.group_indices.items()}
            for u, g in zip(r.utilities, pop.labels):
                w.writerow((_fmt(r.epsilon), r.method, r.seed, _fmt(u), g, _fmt(1.0 / sizes[g])))
    report = {
        "config": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config).items()},
        "rows": [
            {c: getattr(r, c) for c in COLUMNS} | {"x": r.x, "trace": r.trace}
            for r in rows
        ],
    }
    (out / "report.json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    return report
