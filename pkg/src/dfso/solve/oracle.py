"""Desk-scale reference solvers: exhaustive enumeration and grid-plus-AM multistart."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, InfeasibleError, ResourceError
from ..instance import DfsoInstance, Linear, utilities
from ..measures import merged_grid
from .am import am_solve
from .kernel import efficiency_optimum

BINARY_MAX_N = 20
CONTINUOUS_MAX_N = 3
GRID_POINTS = 50
BATCH = 4096


@dataclass
class OracleResult:
    value: float
    x: np.ndarray
    certified: bool
    evaluated: int


def batch_wd(instance: DfsoInstance, U: np.ndarray) -> np.ndarray:
    """WD_q^q for each row of a (B, m) utility matrix."""
    pop = instance.population
    q = float(instance.q)
    best = np.full(U.shape[0], -np.inf)
    sorted_groups = [np.sort(U[:, pop.indices(p)], axis=1, kind="stable") for p in range(len(pop.groups))]
    for a, b in pop.group_pairs():
        g = merged_grid(sorted_groups[a].shape[1], sorted_groups[b].shape[1])
        gap = np.abs(sorted_groups[a][:, g.idx_a] - sorted_groups[b][:, g.idx_b])
        best = np.maximum(best, (gap**q) @ g.width_f)
    return best


def _feasible_mask(instance: DfsoInstance, X: np.ndarray) -> np.ndarray:
    fs = instance.feasible
    ok = np.ones(X.shape[0], bool)
    if fs.G.shape[0]:
        ok &= np.all(X @ fs.G.T <= fs.h + 1e-9, axis=1)
    if fs.E.shape[0]:
        ok &= np.all(np.abs(X @ fs.E.T - fs.e) <= 1e-9, axis=1)
    idx = np.flatnonzero(ok)
    for k in idx:
        ok[k] = instance.efficiency.ok(X[k])
    return ok


def _scan(instance: DfsoInstance, points, budget: int):
    best_v, best_x, count = np.inf, None, 0
    top = []
    for chunk in points:
        count += chunk.shape[0]
        if count > budget:
            raise ResourceError(f"oracle budget of {budget} evaluations exceeded")
        X = chunk[_feasible_mask(instance, chunk)]
        if X.shape[0] == 0:
            continue
        if isinstance(instance.utility, Linear):
            G, h = instance.affine_utilities()
            U = X @ G.T + h
        else:
            U = np.stack([utilities(instance.utility, x, instance.population.scenarios) for x in X])
        vals = batch_wd(instance, U)
        k = int(np.argmin(vals))
        if vals[k] < best_v:
            best_v, best_x = float(vals[k]), X[k].copy()
        order = np.argsort(vals, kind="stable")[:8]
        top.extend((float(vals[j]), X[j].copy()) for j in order)
        top.sort(key=lambda t: t[0])
        del top[8:]
    return best_v, best_x, count, top


def _binary_points(n: int):
    combos = itertools.product((0.0, 1.0), repeat=n)
    while True:
        chunk = list(itertools.islice(combos, BATCH))
        if not chunk:
            return
        yield np.array(chunk)


def exact_oracle(instance: DfsoInstance, budget: int = 2_000_000, grid: int = GRID_POINTS) -> OracleResult:
    """Optimal WD_q^q by enumeration (binary x) or grid search plus AM polish.

    Binary instances are certified. Continuous instances with n <= 3 are
    searched on a grid with ``grid`` points per axis and the best points are
    polished by AM; the result is not certified.
    """
    if instance.efficiency.v_star is None:
        raise DomainError("V* must be set before calling the oracle")
    fs = instance.feasible
    n = fs.n
    if fs.is_binary:
        if n > BINARY_MAX_N:
            raise ResourceError(f"binary enumeration limited to n <= {BINARY_MAX_N}")
        v, x, count, _ = _scan(instance, _binary_points(n), budget)
        if x is None:
            raise InfeasibleError("no feasible binary assignment")
        return OracleResult(v, x, True, count)
    if fs.integer.any() or n > CONTINUOUS_MAX_N:
        raise DomainError(f"the oracle handles binary x or continuous x with n <= {CONTINUOUS_MAX_N}")
    axes = [np.linspace(lo, hi, grid) for lo, hi in zip(fs.lb, fs.ub)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    chunks = (mesh[i : i + BATCH] for i in range(0, mesh.shape[0], BATCH))
    v, x, count, top = _scan(instance, chunks, budget)
    starts = [efficiency_optimum(instance)[1]] + [t[1] for t in top[:4]]
    for s in starts:
        if not instance.is_feasible(s):
            continue
        rep = am_solve(instance, s)
        if rep.objective < v:
            v, x = rep.objective, rep.x
    if x is None:
        raise InfeasibleError("no feasible grid point")
    return OracleResult(float(v), x, False, count)


def feasible_starts(instance: DfsoInstance, k: int, seed: int) -> list[np.ndarray]:
    """Efficiency optimum plus k random points pulled into the feasible region."""
    rng = np.random.default_rng(seed)
    fs = instance.feasible
    x_eff = efficiency_optimum(instance)[1]
    out = [x_eff]
    for _ in range(k):
        z = rng.uniform(fs.lb, fs.ub)
        lo, hi = 0.0, 1.0
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if instance.is_feasible(x_eff + mid * (z - x_eff)):
                lo = mid
            else:
                hi = mid
        out.append(x_eff + lo * (z - x_eff))
    return out


def multistart_am(instance: DfsoInstance, starts: int = 8, seed: int = 0, tol: float = 1e-9, max_iter: int = 200):
    """Best AM objective over several feasible starting points."""
    best = None
    for s in feasible_starts(instance, starts, seed):
        rep = am_solve(instance, s, tol=tol, max_iter=max_iter)
        if best is None or rep.objective < best.objective:
            best = rep
    return best
