"""Constructive completions: given x, fill every auxiliary variable of a model.

The completions follow the equivalence arguments of each formulation: the
comonotonic plan for plan-based models, sorted order statistics for the
quantile models. A completion that violates no row certifies that x with
nu = WD_q^q(x) lies in the formulated set.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..instance import DfsoInstance, Linear, compute_big_m, utility_kind
from ..measures import merged_grid, wasserstein_q_pow
from .model import ModelIR


def wd_pow(instance: DfsoInstance, u: np.ndarray) -> float:
    pop = instance.population
    return max(
        wasserstein_q_pow(u[pop.indices(a)], u[pop.indices(b)], instance.q) for a, b in pop.group_pairs()
    )


def comonotonic_plan(ua: np.ndarray, ub: np.ndarray) -> np.ndarray:
    """Integral staircase plan (entries sum to m_a m_b per unit mass), original index order."""
    ma, mb = ua.size, ub.size
    g = merged_grid(ma, mb)
    oa, ob = np.argsort(ua, kind="stable"), np.argsort(ub, kind="stable")
    plan = np.zeros((ma, mb), dtype=np.int64)
    for c in range(g.n_cells):
        plan[oa[g.idx_a[c]], ob[g.idx_b[c]]] += int(g.widths[c] * ma * mb)
    return plan


def staircase_duals(ua: np.ndarray, ub: np.ndarray, q: float):
    """Transportation duals from the north-west-corner basis on sorted utilities.

    Returns (mu, lam, basis) in original index order; mu_i + lam_j equals the
    cost on every basis cell. With a convex cost of the difference the
    basis is optimal, so the duals are feasible.
    """
    ma, mb = ua.size, ub.size
    oa, ob = np.argsort(ua, kind="stable"), np.argsort(ub, kind="stable")
    sa, sb = ua[oa], ub[ob]
    cost = lambda r, s: abs(sa[r] - sb[s]) ** q  # noqa: E731
    mu_s, lam_s = np.zeros(ma), np.zeros(mb)
    supply, demand = [mb] * ma, [ma] * mb
    r = s = 0
    basis = [(0, 0)]
    mu_s[0] = 0.0
    lam_s[0] = cost(0, 0)
    while True:
        f = min(supply[r], demand[s])
        supply[r] -= f
        demand[s] -= f
        if r == ma - 1 and s == mb - 1:
            break
        # advance the row when it is exhausted (also on a tie), otherwise the column
        if supply[r] == 0 and r < ma - 1:
            r += 1
            mu_s[r] = cost(r, s) - lam_s[s]
        else:
            s += 1
            lam_s[s] = cost(r, s) - mu_s[r]
        basis.append((r, s))
    mu, lam = np.empty(ma), np.empty(mb)
    mu[oa], lam[ob] = mu_s, lam_s
    return mu, lam, [(int(oa[r]), int(ob[s])) for r, s in basis]


def _base_values(model: ModelIR, instance: DfsoInstance, x) -> tuple[dict, np.ndarray]:
    x = np.asarray(x, dtype=float)
    vals = {f"x_{j}": float(v) for j, v in enumerate(x)}
    u = instance.utility
    scen = instance.population.scenarios
    if isinstance(u, Linear):
        G, h = u.affine(scen)
        w = G @ x + h
    else:
        pieces = u.as_pieces()
        P = np.stack([pc.affine(scen)[0] @ x + pc.affine(scen)[1] for pc in pieces])
        pick = P.argmax(axis=0) if utility_kind(u) == "max" else P.argmin(axis=0)
        w = P[pick, np.arange(P.shape[1])]
        for i, t in enumerate(pick):
            for s in range(len(pieces)):
                vals[f"sel_{i}_{s}"] = 1.0 if s == t else 0.0
    vals.update({f"w_{i}": float(v) for i, v in enumerate(w)})
    eff = instance.efficiency
    p = eff.params
    if eff.kind in ("mae", "mse"):
        r = np.atleast_2d(p["D"]) @ x - np.asarray(p["y"], dtype=float)
        for i, v in enumerate(r):
            if f"dev_{i}" in model.variables:
                vals[f"dev_{i}"] = float(abs(v))
            if f"res_{i}" in model.variables:
                vals[f"res_{i}"] = float(v)
    if "cost" in model.variables:
        vals["cost"] = -eff.value(x) if eff.maximize else eff.value(x)
    return vals, w


def _order_values(vals: dict, instance: DfsoInstance, w: np.ndarray, aggregate: bool) -> None:
    pop = instance.population
    for p in range(len(pop.groups)):
        idx = pop.indices(p)
        order = idx[np.argsort(w[idx], kind="stable")]
        run = 0.0
        for k in range(1, idx.size + 1):
            kth = order[k - 1]
            small = set(int(i) for i in order[:k])
            run += float(w[kth])
            vals[f"t_{k}_{p}"] = float(w[kth])
            for i in idx:
                z = 1.0 if int(i) in small else 0.0
                vals[f"z_{i}_{k}_{p}"] = z
                if aggregate:
                    vals[f"s_{i}_{k}_{p}"] = z * float(w[i])
                    vals[f"rho_{i}_{k}_{p}"] = max(0.0, float(w[kth] - w[i]))
                else:
                    pi = 1.0 if i == kth else 0.0
                    vals[f"pi_{i}_{k}_{p}"] = pi
                    vals[f"th_{i}_{k}_{p}"] = pi * float(w[i])
            if aggregate:
                vals[f"tb_{k}_{p}"] = run
                vals[f"pk_{k}_{p}"] = float(w[kth])


def _grid_values(vals: dict, instance: DfsoInstance) -> None:
    pop = instance.population
    for a, b in pop.group_pairs():
        g = merged_grid(pop.indices(a).size, pop.indices(b).size)
        for c in range(g.n_cells):
            ta = vals[f"t_{g.idx_a[c] + 1}_{a}"]
            tb = vals[f"t_{g.idx_b[c] + 1}_{b}"]
            vals[f"eta_{c}_{a}_{b}"] = abs(ta - tb)


def complete(model: ModelIR, instance: DfsoInstance, x) -> dict:
    """Full assignment of ``model``'s variables at decision ``x``."""
    vals, w = _base_values(model, instance, x)
    pop = instance.population
    q = float(instance.q)
    form = model.formulation
    if "nu" in model.variables:
        vals["nu"] = wd_pow(instance, w)
    if form in ("quantile", "aggregate-quantile", "ksd-sublevel"):
        _order_values(vals, instance, w, form == "aggregate-quantile")
        if form != "ksd-sublevel":
            _grid_values(vals, instance)
        return vals
    for a, b in pop.group_pairs():
        ia, ib = pop.indices(a), pop.indices(b)
        ma, mb = ia.size, ib.size
        plan = comonotonic_plan(w[ia], w[ib])
        if form == "vanilla":
            for r, i in enumerate(ia):
                for s, j in enumerate(ib):
                    d = abs(w[i] - w[j])
                    vals[f"pi_{i}_{j}"] = plan[r, s] / (ma * mb)
                    vals[f"d_{i}_{j}"] = d
                    if q == 2:
                        vals[f"gap_{i}_{j}"] = d * d
        elif form == "discretized":
            om = model.meta["bit_planes"][f"{a}_{b}"]
            for r, i in enumerate(ia):
                for s, j in enumerate(ib):
                    n = int(plan[r, s])
                    for k in range(1, om + 1):
                        z = float((n >> (k - 1)) & 1)
                        vals[f"z_{i}_{j}_{k}"] = z
                        vals[f"zb1_{i}_{j}_{k}"] = z * w[i]
                        vals[f"zb2_{i}_{j}_{k}"] = z * w[j]
                        vals[f"what_{i}_{j}_{k}"] = z * abs(w[i] - w[j])
                    if f"zhat_{i}_{j}" in model.variables:
                        vals[f"zhat_{i}_{j}"] = 1.0 if n > 0 else 0.0
        elif form == "complementary":
            mu, lam, basis = staircase_duals(w[ia], w[ib], q)
            on = set(basis)
            for r, i in enumerate(ia):
                vals[f"mu_{a}_{b}_{i}"] = float(mu[r])
            for s, j in enumerate(ib):
                vals[f"lam_{a}_{b}_{j}"] = float(lam[s])
            for r, i in enumerate(ia):
                for s, j in enumerate(ib):
                    d = abs(w[i] - w[j])
                    vals[f"pi_{i}_{j}"] = plan[r, s] / (ma * mb)
                    vals[f"z_{i}_{j}"] = 1.0 if (r, s) in on or plan[r, s] > 0 else 0.0
                    vals[f"what_{i}_{j}"] = d
                    vals[f"wq_{i}_{j}"] = d**q
        else:
            raise DomainError(f"no completion for formulation {form!r}")
    return vals


def certify(model: ModelIR, instance: DfsoInstance, x, tol: float = 1e-7) -> tuple[dict, list]:
    """Completion at x plus the list of violated rows (empty when certified)."""
    vals = complete(model, instance, x)
    return vals, model.violations(vals, tol)
