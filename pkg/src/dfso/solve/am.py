"""Alternating minimization: fix the comonotonic matching, re-optimize x, repeat."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import DomainError, InfeasibleError, UnsupportedError
from ..instance import DfsoInstance, Linear, piece_ranges, utility_kind
from ..measures import EmpiricalDist, demographic_parity, ksd_fairness, merged_grid, wd_fairness
from .kernel import KernelResult, Program, add_decision, add_efficiency_band, efficiency_optimum


@dataclass(frozen=True)
class PairMatching:
    """Matched scenario indices per merged-grid cell of one group pair."""

    pair: tuple[int, int]
    widths: tuple[Fraction, ...]
    width_f: np.ndarray
    sa: np.ndarray
    sb: np.ndarray


@dataclass(frozen=True)
class MatchingPlan:
    pairs: tuple[PairMatching, ...]

    def cost(self, u: np.ndarray, q: float) -> dict:
        return {p.pair: math.fsum(p.width_f * np.abs(u[p.sa] - u[p.sb]) ** q) for p in self.pairs}


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    status: str
    trace: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    scores: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)
    iterations: int = 0
    flag: str = ""

    def to_json(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "objective": self.objective,
            "status": self.status,
            "iterations": self.iterations,
            "trace": [float(v) for v in self.trace],
            "scores": self.scores,
            "bounds": self.bounds,
            "flag": self.flag,
        }


def fairness_scores(instance: DfsoInstance, x) -> dict:
    """WD_q^q, KSD and, on 0/1 utilities, demographic parity at x."""
    u = instance.utilities(x)
    pop = instance.population
    wd, pair = wd_fairness(pop, u, instance.q)
    out = {"wd": wd, "wd_pair": [str(pair[0]), str(pair[1])], "ksd": ksd_fairness(pop, u)}
    if np.all((u == 0) | (u == 1)):
        out["dp"] = max(
            demographic_parity(u[pop.indices(a)], u[pop.indices(b)]) for a, b in pop.group_pairs()
        )
    return out


def wd_value(instance: DfsoInstance, x) -> float:
    return wd_fairness(instance.population, instance.utilities(x), instance.q)[0]


def comonotonic_matching(instance: DfsoInstance, x) -> MatchingPlan:
    """Pair order statistics of each group pair cell by cell on the merged grid."""
    u = instance.utilities(x)
    pop = instance.population
    pairs = []
    for a, b in pop.group_pairs():
        ia, ib = pop.indices(a), pop.indices(b)
        da, db = EmpiricalDist.from_values(u[ia]), EmpiricalDist.from_values(u[ib])
        g = merged_grid(ia.size, ib.size)
        pairs.append(PairMatching((a, b), g.widths, g.width_f, ia[da.order[g.idx_a]], ib[db.order[g.idx_b]]))
    return MatchingPlan(tuple(pairs))


# ---------------------------------------------------------------- utility rows


def add_utility_rows(prog: Program, instance: DfsoInstance, x: np.ndarray, scen: np.ndarray):
    """Linear expressions for f(x, xi_i), i in scen, over program variables.

    Returns (basis, E, c) with f_i = E[k] @ v[basis] + c[k] for the k-th
    requested scenario. Piecewise utilities get one variable per scenario
    plus a binary selector per piece.
    """
    u = instance.utility
    xi = instance.population.scenarios[scen]
    if isinstance(u, Linear):
        G, h = u.affine(xi)
        return x, G, h
    pieces = u.as_pieces()
    fs = instance.feasible
    lo_p, hi_p = piece_ranges(u, xi, fs.lb, fs.ub)
    kind = utility_kind(u)
    lo_u, hi_u = (lo_p.max(0), hi_p.max(0)) if kind == "max" else (lo_p.min(0), hi_p.min(0))
    w = prog.add_vars(len(scen), lo_u, hi_u)
    for k in range(len(scen)):
        z = prog.add_vars(len(pieces), 0.0, 1.0, True)
        prog.add_row(z, np.ones(len(pieces)), "=", 1.0)
        for t, p in enumerate(pieces):
            g, h = p.affine(xi[k])
            g, h = g[0], float(h[0])
            idx = np.concatenate([x, [w[k]]])
            if kind == "max":
                bigm = hi_u[k] - lo_p[t, k]
                prog.add_row(idx, np.concatenate([g, [-1.0]]), "<=", -h)
                prog.add_row(np.concatenate([idx, [z[t]]]), np.concatenate([-g, [1.0], [bigm]]), "<=", h + bigm)
            else:
                bigm = hi_p[t, k] - lo_u[k]
                prog.add_row(idx, np.concatenate([-g, [1.0]]), "<=", h)
                prog.add_row(np.concatenate([idx, [z[t]]]), np.concatenate([g, [-1.0], [bigm]]), "<=", -h + bigm)
    return w, np.eye(len(scen)), np.zeros(len(scen))


def _anchor(instance: DfsoInstance, x_new, x_prev) -> np.ndarray:
    """Clean solver noise; fall back toward the previous feasible point."""
    fs = instance.feasible
    x = np.clip(np.asarray(x_new, dtype=float), fs.lb, fs.ub)
    x[fs.integer] = np.round(x[fs.integer])
    if instance.is_feasible(x):
        return x
    if fs.integer.any():
        return np.asarray(x_prev, dtype=float)
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if instance.is_feasible(x_prev + mid * (x - x_prev)):
            lo = mid
        else:
            hi = mid
    return x_prev + lo * (x - x_prev)


def am_subproblem(instance: DfsoInstance, plan: MatchingPlan, node_limit: int = 100_000) -> KernelResult:
    """Minimize the fixed-matching objective over X and the efficiency band.

    Returns a kernel result whose ``x`` is the decision vector and whose
    ``objective`` is the subproblem value nu.
    """
    q = float(instance.q)
    if q not in (1.0, 2.0):
        raise UnsupportedError("the matching subproblem supports q in {1, 2}")
    prog = Program()
    x = add_decision(prog, instance.feasible)
    add_efficiency_band(prog, instance, x)
    nu = prog.add_var(0.0)
    used = np.unique(np.concatenate([np.concatenate([p.sa, p.sb]) for p in plan.pairs]))
    basis, E, c = add_utility_rows(prog, instance, x, used)
    pos = {int(s): k for k, s in enumerate(used)}
    for p in plan.pairs:
        ka = np.array([pos[int(s)] for s in p.sa])
        kb = np.array([pos[int(s)] for s in p.sb])
        D = E[ka] - E[kb]
        d = c[ka] - c[kb]
        if q == 1.0:
            e = prog.add_vars(D.shape[0], 0.0)
            for r in range(D.shape[0]):
                idx = np.concatenate([basis, [e[r]]])
                prog.add_row(idx, np.concatenate([D[r], [-1.0]]), "<=", -d[r])
                prog.add_row(idx, np.concatenate([-D[r], [-1.0]]), "<=", d[r])
            prog.add_row(np.concatenate([e, [nu]]), np.concatenate([p.width_f, [-1.0]]), "<=", 0.0)
        else:
            sw = np.sqrt(p.width_f)
            prog.add_sumsq(basis, sw[:, None] * D, sw * d, 0.0, [nu], [-1.0])
    prog.set_objective([nu], [1.0])
    res = prog.solve(node_limit)
    if res.ok:
        res = KernelResult(res.status, res.x[x], res.objective, res.nodes, res.flag)
    return res


def default_start(instance: DfsoInstance) -> np.ndarray:
    """Efficiency-optimal decision, the standard AM starting point."""
    return efficiency_optimum(instance)[1]


def am_solve(
    instance: DfsoInstance,
    x0=None,
    tol: float = 1e-6,
    max_iter: int = 200,
    node_limit: int = 100_000,
) -> SolveReport:
    """Alternate matching and subproblem until the objective stalls.

    The trace records WD_q^q at each accepted iterate, so it never increases;
    a step that would increase it ends the run.
    """
    if instance.efficiency.v_star is None:
        raise DomainError("V* must be set before solving")
    x = default_start(instance) if x0 is None else np.asarray(x0, dtype=float)
    if not instance.is_feasible(x, 1e-7):
        raise InfeasibleError("starting point is outside X or the efficiency band")
    t0 = time.perf_counter()
    v = wd_value(instance, x)
    trace, wall = [v], [0.0]
    status, flag = "iteration-limit", ""
    it = 0
    for it in range(1, max_iter + 1):
        plan = comonotonic_matching(instance, x)
        res = am_subproblem(instance, plan, node_limit)
        if not res.ok:
            status = "converged" if res.status != "infeasible" else "infeasible"
            flag = f"subproblem {res.status} {res.flag}".strip()
            break
        flag = res.flag or flag
        x_new = _anchor(instance, res.x, x)
        v_new = wd_value(instance, x_new)
        if v_new > v:
            status = "converged"
            break
        step = v - v_new
        x, v = x_new, v_new
        trace.append(v)
        wall.append((time.perf_counter() - t0) * 1e3)
        if step <= tol * max(abs(v), 1e-12):
            status = "converged"
            break
    rep = SolveReport(x, v, status, trace, wall, fairness_scores(instance, x), iterations=it, flag=flag)
    return rep
