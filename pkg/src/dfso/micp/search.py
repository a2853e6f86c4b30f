"""Smallest KSD level reachable inside the efficiency band, by bisection on the level grid."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import InfeasibleError, ResourceError
from ..instance import DfsoInstance
from ..measures import ksd_fairness
from .builders import build_ksd_sublevel, instance_ksd_grid
from .model import solve_model


@dataclass
class KsdSearchResult:
    delta: Fraction
    x: np.ndarray
    ksd: float
    ksd_raw: float
    probes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "delta": str(self.delta),
            "delta_float": float(self.delta),
            "ksd": self.ksd,
            "ksd_raw": self.ksd_raw,
            "x": [float(v) for v in self.x],
            "probes": [{"delta": str(d), "feasible": ok} for d, ok in self.probes],
        }


def snap_ties(u, rel_tol: float = 1e-7) -> np.ndarray:
    """Merge utilities closer than rel_tol * scale into one value.

    The sublevel rows are closed, so an optimal vertex often sits on a tie
    between groups that solver round-off tips either way.
    """
    u = np.asarray(u, dtype=float)
    order = np.argsort(u, kind="stable")
    tol = rel_tol * max(1.0, float(np.abs(u).max(initial=0.0)))
    out = u.copy()
    anchor = u[order[0]] if u.size else 0.0
    for k in order:
        if u[k] - anchor > tol:
            anchor = u[k]
        out[k] = anchor
    return out


def ksd_search(instance: DfsoInstance, node_limit: int = 100_000, rule: str = "exact") -> KsdSearchResult:
    """Binary search over the level grid for the least feasible KSD sublevel."""
    grid = instance_ksd_grid(instance)
    n = instance.feasible.n
    probes = []

    def probe(k: int):
        model = build_ksd_sublevel(instance, grid[k], rule=rule)
        res, vals = solve_model(model, node_limit=node_limit)
        if res.status not in ("optimal", "infeasible"):
            raise ResourceError(f"KSD probe at level {grid[k]} not solved: {res.status} {res.flag}")
        ok = vals is not None
        probes.append((grid[k], ok))
        return np.array([vals[f"x_{j}"] for j in range(n)]) if ok else None

    lo, hi = 0, len(grid) - 1
    best = probe(hi)
    if best is None:
        raise InfeasibleError("no decision satisfies the efficiency band")
    while lo < hi:
        mid = (lo + hi) // 2
        x = probe(mid)
        if x is None:
            lo = mid + 1
        else:
            hi, best = mid, x
    fs = instance.feasible
    best = np.clip(best, fs.lb, fs.ub)
    best[fs.integer] = np.round(best[fs.integer])
    u = instance.utilities(best)
    raw = ksd_fairness(instance.population, u)
    snapped = ksd_fairness(instance.population, snap_ties(u))
    return KsdSearchResult(grid[hi], best, float(snapped), float(raw), probes)
