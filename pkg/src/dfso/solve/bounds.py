"""Moment-based lower bounds: Jensen (group means) and Gelbrich (means and covariances)."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack

from ..errors import DomainError, InfeasibleError, UnsupportedError
from ..instance import DfsoInstance, Linear
from .kernel import Program, add_decision, add_efficiency_band, efficiency_optimum

NORM_FLOOR = 1e-14


def _linear(instance: DfsoInstance) -> Linear:
    if not isinstance(instance.utility, Linear):
        raise UnsupportedError("moment bounds need a linear utility")
    return instance.utility


def jensen_bound(instance: DfsoInstance) -> tuple[float, np.ndarray]:
    """min over X and the band of max_pairs |mean_a f - mean_b f|, raised to q."""
    _linear(instance)
    G, h = instance.affine_utilities()
    pop = instance.population
    prog = Program()
    x = add_decision(prog, instance.feasible)
    add_efficiency_band(prog, instance, x)
    t = prog.add_var(0.0)
    for a, b in pop.group_pairs():
        ia, ib = pop.indices(a), pop.indices(b)
        g = G[ia].mean(axis=0) - G[ib].mean(axis=0)
        c = h[ia].mean() - h[ib].mean()
        idx = np.concatenate([x, [t]])
        prog.add_row(idx, np.concatenate([g, [-1.0]]), "<=", -c)
        prog.add_row(idx, np.concatenate([-g, [-1.0]]), "<=", c)
    prog.set_objective([t], [1.0])
    res = prog.solve()
    if res.status == "infeasible":
        raise InfeasibleError("Jensen program infeasible")
    if not res.ok:
        raise InfeasibleError(f"Jensen program not solved: {res.status}")
    return max(res.objective, 0.0) ** instance.q, res.x[x]


@dataclass(frozen=True)
class GroupMoments:
    """Per-group mean, population covariance and a pivoted factor L L^T = cov."""

    means: tuple
    covs: tuple
    factors: tuple


def pivoted_factor(S: np.ndarray, tol: float = 1e-13) -> np.ndarray:
    """Rank-revealing Cholesky factor of a PSD matrix (LAPACK pstrf)."""
    k = S.shape[0]
    if k == 0 or not np.any(S):
        return np.zeros((k, 0 if k == 0 else 1))
    scale = float(np.max(np.abs(np.diag(S))))
    U, piv, rank, info = lapack.dpstrf(S, lower=1, tol=tol * scale)
    if info < 0:
        raise DomainError("covariance factorization failed")
    L = np.tril(U)[:, :rank]
    P = np.zeros((k, k))
    P[piv - 1, np.arange(k)] = 1.0
    return P @ L


def group_moments(population, utility=None) -> GroupMoments:
    means, covs, facs = [], [], []
    for p in range(len(population.groups)):
        X = population.scenarios[population.indices(p)]
        mu = X.mean(axis=0)
        R = X - mu
        S = R.T @ R / X.shape[0]
        S = 0.5 * (S + S.T)
        means.append(mu)
        covs.append(S)
        facs.append(pivoted_factor(S))
    return GroupMoments(tuple(means), tuple(covs), tuple(facs))


def _r(instance: DfsoInstance, x) -> np.ndarray:
    u = _linear(instance)
    return u.A @ np.asarray(x, dtype=float) + u.a0


def gelbrich_pairs(instance: DfsoInstance, moments: GroupMoments, x) -> dict:
    """Mean-gap squared plus std-gap squared for every group pair."""
    r = _r(instance, x)
    out = {}
    for a, b in instance.population.group_pairs():
        mg = float((moments.means[a] - moments.means[b]) @ r)
        sa = math.sqrt(max(float(r @ moments.covs[a] @ r), 0.0))
        sb = math.sqrt(max(float(r @ moments.covs[b] @ r), 0.0))
        sa = 0.0 if sa < NORM_FLOOR else sa
        sb = 0.0 if sb < NORM_FLOOR else sb
        out[(a, b)] = mg * mg + (sa - sb) ** 2
    return out


def gelbrich_value(instance: DfsoInstance, moments: GroupMoments, x) -> float:
    if instance.q != 2:
        raise UnsupportedError("the Gelbrich bound is defined for q = 2")
    return max(gelbrich_pairs(instance, moments, x).values())


@dataclass
class GelbrichResult:
    value: float
    x: np.ndarray
    trace: list
    status: str
    iterations: int


def gelbrich_am(
    instance: DfsoInstance,
    moments: GroupMoments | None = None,
    tol: float = 1e-6,
    max_iter: int = 200,
    x0=None,
) -> GelbrichResult:
    """Minimize the Gelbrich value by majorize-minimize steps.

    At the current x each pair's std-gap term is replaced by its conjugate
    majorant with (w, alpha) fixed; the majorant touches the true value at x,
    so accepted steps never increase it.
    """
    if instance.q != 2:
        raise UnsupportedError("the Gelbrich bound is defined for q = 2")
    u = _linear(instance)
    moments = moments or group_moments(instance.population)
    pop = instance.population
    x = efficiency_optimum(instance)[1] if x0 is None else np.asarray(x0, dtype=float)
    v = gelbrich_value(instance, moments, x)
    trace = [v]
    status = "iteration-limit"
    it = 0
    for it in range(1, max_iter + 1):
        r = _r(instance, x)
        prog = Program()
        xv = add_decision(prog, instance.feasible)
        add_efficiency_band(prog, instance, xv)
        nu = prog.add_var(0.0)
        for a, b in pop.group_pairs():
            La, Lb = moments.factors[a], moments.factors[b]
            za, zb = La.T @ r, Lb.T @ r
            na, nb = float(np.linalg.norm(za)), float(np.linalg.norm(zb))
            w = na + nb
            al_a = w * za / na if na > NORM_FLOOR else np.zeros_like(za)
            al_b = w * zb / nb if nb > NORM_FLOOR else np.zeros_like(zb)
            dmu = moments.means[a] - moments.means[b]
            F = np.vstack([dmu @ u.A, math.sqrt(2) * La.T @ u.A, math.sqrt(2) * Lb.T @ u.A])
            g = np.concatenate([[dmu @ u.a0], math.sqrt(2) * La.T @ u.a0, math.sqrt(2) * Lb.T @ u.a0])
            lin = -2.0 * (al_a @ La.T @ u.A + al_b @ Lb.T @ u.A)
            const = -2.0 * (al_a @ La.T @ u.a0 + al_b @ Lb.T @ u.a0) + w * w
            prog.add_sumsq(xv, F, g, -const, np.concatenate([xv, [nu]]), np.concatenate([lin, [-1.0]]))
        prog.set_objective([nu], [1.0])
        res = prog.solve()
        if not res.ok:
            status = "converged" if res.status != "infeasible" else "infeasible"
            break
        x_new = np.clip(res.x[xv], instance.feasible.lb, instance.feasible.ub)
        if not instance.is_feasible(x_new):
            x_new = _blend(instance, x_new, x)
        v_new = gelbrich_value(instance, moments, x_new)
        if v_new > v:
            status = "converged"
            break
        step = v - v_new
        x, v = x_new, v_new
        trace.append(v)
        if step <= tol * max(abs(v), 1e-12):
            status = "converged"
            break
    return GelbrichResult(v, x, trace, status, it)


def _blend(instance, x, x_prev):
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if instance.is_feasible(x_prev + mid * (x - x_prev)):
            lo = mid
        else:
            hi = mid
    return x_prev + lo * (x - x_prev)
