"""Turn raw experiment data into DFSO instances."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import DomainError, InfeasibleError
from ..instance import DfsoInstance, EfficiencyModel, FeasibleSet, GroupedPopulation, Linear, with_v_star
from ..solve.kernel import Program, add_decision, convex_kernel

REGRESSION_BOX = 100.0
URBAN_THRESHOLD = 50_000


def regression_adapter(
    pop: GroupedPopulation,
    loss: str = "mae",
    epsilon: float = 0.1,
    q: float = 2.0,
    box: float = REGRESSION_BOX,
    abs_slack: float = 1e-9,
) -> DfsoInstance:
    """Linear predictor f = xi @ x with MAE or MSE loss over a symmetric box."""
    if pop.responses is None:
        raise DomainError("regression needs a response column y")
    if loss not in ("mae", "mse"):
        raise DomainError(f"unknown regression loss {loss!r}")
    k = pop.kappa
    eff = EfficiencyModel(loss, {"D": pop.scenarios, "y": pop.responses}, epsilon, abs_slack=abs_slack)
    fs = FeasibleSet(np.full(k, -box), np.full(k, box))
    return with_v_star(DfsoInstance(pop, Linear.identity(k), eff, fs, q))


def knapsack_adapter(
    pop: GroupedPopulation,
    epsilon: float = 0.1,
    q: float = 2.0,
    capacity: float | None = None,
    abs_slack: float = 1e-9,
) -> DfsoInstance:
    """Binary item selection with utility value_i * x_i; columns f1 = value, f2 = weight."""
    v, w = pop.scenarios[:, 0], pop.scenarios[:, 1]
    if np.any(v != np.round(v)) or np.any(w != np.round(w)):
        raise DomainError("knapsack weights and values must be integers")
    m = pop.m
    cap = 0.5 * float(w.sum()) if capacity is None else float(capacity)
    if cap < 0:
        raise InfeasibleError("negative knapsack capacity")
    scen = GroupedPopulation(np.diag(v), pop.labels)
    eff = EfficiencyModel("neg_value", {"v": v, "w": w, "capacity": cap}, epsilon, abs_slack=abs_slack)
    fs = FeasibleSet(np.zeros(m), np.ones(m), G=w[None, :], h=[cap], integer=np.ones(m, bool))
    return with_v_star(DfsoInstance(scen, Linear.identity(m), eff, fs, q))


@dataclass(frozen=True)
class Counties:
    names: tuple
    population: np.ndarray
    seniors: np.ndarray
    groups: tuple


def load_counties(path=None) -> Counties:
    """County table with columns county, population, seniors[, group].

    Without a group column counties are urban at 50,000 residents or more.
    """
    if path is None:
        fh = resources.files("dfso.apps").joinpath("data/counties.csv").open("r", newline="")
    else:
        fh = open(path, newline="")
    with fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"county", "population", "seniors"} <= set(rows[0]):
        raise DomainError("county table needs columns county, population, seniors")
    p = np.array([float(r["population"]) for r in rows])
    s = np.array([float(r["seniors"]) for r in rows])
    if "group" in rows[0]:
        g = tuple(r["group"] for r in rows)
    else:
        g = tuple("urban" if pi >= URBAN_THRESHOLD else "rural" for pi in p)
    return Counties(tuple(r["county"] for r in rows), p, s, g)


def allocation_bounds(c: Counties, supply_fraction: float = 0.2):
    """Budget and coverage bounds proportional to each county's senior share."""
    T = supply_fraction * float(c.population.sum())
    share = c.seniors / c.seniors.sum()
    lb = 0.8 * share * T / c.population
    ub = np.minimum(2.0 * share * T / c.population, 1.0)
    return T, lb, ub


def allocation_adapter(
    c: Counties,
    epsilon: float = 0.1,
    q: float = 2.0,
    supply_fraction: float = 0.2,
    abs_slack: float = 1e-9,
) -> DfsoInstance:
    """Coverage rates x with utility x_i and a geometric-mean efficiency band."""
    T, lb, ub = allocation_bounds(c, supply_fraction)
    if c.population @ lb > T:
        raise InfeasibleError("lower coverage bounds exceed the vaccine supply")
    m = len(c.names)
    pop = GroupedPopulation(np.eye(m), c.groups)
    eff = EfficiencyModel("neg_geo_mean_log", {}, epsilon, abs_slack=abs_slack)
    fs = FeasibleSet(lb, ub, G=c.population[None, :], h=[T])
    return with_v_star(DfsoInstance(pop, Linear.identity(m), eff, fs, q))


def max_min_allocation(instance: DfsoInstance) -> np.ndarray:
    """Maximize the smallest group geometric mean inside the efficiency band."""
    eff = instance.efficiency
    if eff.kind != "neg_geo_mean_log":
        raise DomainError("max-min comparator applies to allocation instances")
    prog = Program()
    x = add_decision(prog, instance.feasible)
    t = prog.add_var()
    pop = instance.population
    for p in range(len(pop.groups)):
        idx = x[pop.indices(p)]
        prog.add_log(idx, np.full(idx.size, 1.0 / idx.size), 0.0, [t], [-1.0])
    lim = eff.limit()
    if eff.has_band and lim > 0:
        prog.add_log(x, np.ones(x.size), x.size * math.log(lim))
    prog.set_objective([t], [-1.0])
    xs, _ = convex_kernel(prog)
    out = np.clip(xs[x], instance.feasible.lb, instance.feasible.ub)
    return out


def write_counties(c: Counties, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["county", "population", "seniors", "group"])
        for row in zip(c.names, c.population, c.seniors, c.groups):
            w.writerow([row[0], int(row[1]), int(row[2]), row[3]])


def synth_counties(m: int = 60, seed: int = 7) -> Counties:
    """Synthetic county table: log-normal populations, 10-25% seniors."""
    rng = np.random.default_rng(seed)
    p = np.round(np.exp(rng.normal(10.6, 1.1, m))).astype(int) + 1000
    s = np.round(p * rng.uniform(0.10, 0.25, m)).astype(int)
    names = tuple(f"county_{i + 1:03d}" for i in range(m))
    groups = tuple("urban" if pi >= URBAN_THRESHOLD else "rural" for pi in p)
    return Counties(names, p.astype(float), s.astype(float), groups)
