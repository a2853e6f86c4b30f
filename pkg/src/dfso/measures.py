"""Fairness measures on one-dimensional empirical utility distributions.

Every group is an equally weighted sample. Distances are computed from
quantile functions on a merged grid of probability levels, which is exact for
empirical distributions. `ot_bruteforce` solves the transportation problem
directly and serves as an independent check of the quantile route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from typing import Hashable, Mapping, Sequence

import networkx as nx
import numpy as np

from .errors import DomainError, ResourceError

OT_SIZE_GUARD = 10_000
# network simplex needs integer arc costs to avoid cycling; costs are scaled
# so the largest becomes 2**COST_BITS before rounding
COST_BITS = 44
ATTAIN_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EmpiricalDist:
    """Equally weighted sample, stored sorted.

    ``order[k]`` is the original position of the k-th smallest value; ties
    keep their original order.
    """

    values: np.ndarray
    order: np.ndarray

    @classmethod
    def from_values(cls, values) -> "EmpiricalDist":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            raise DomainError("empirical distribution needs at least one value")
        if not np.all(np.isfinite(v)):
            raise DomainError("empirical distribution values must be finite")
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sv.setflags(write=False)
        order.setflags(write=False)
        return cls(sv, order)

    @property
    def m(self) -> int:
        return int(self.values.size)

    def cdf(self, t) -> np.ndarray:
        """Right-continuous CDF evaluated at ``t``."""
        return np.searchsorted(self.values, t, side="right") / self.m


def _as_dist(d) -> EmpiricalDist:
    return d if isinstance(d, EmpiricalDist) else EmpiricalDist.from_values(d)


def quantile(dist, y) -> float:
    """Left-continuous inverse CDF, ``inf{t : F(t) >= y}`` for y in (0, 1]."""
    dist = _as_dist(dist)
    y = Fraction(y)
    if y <= 0 or y > 1:
        raise DomainError(f"quantile level must lie in (0, 1], got {y}")
    k = math.ceil(y * dist.m)
    return float(dist.values[k - 1])


@dataclass(frozen=True)
class MergedGrid:
    """Union of the probability grids of two sample sizes.

    Cell ``i`` is ``(breakpoints[i], breakpoints[i+1]]``; on it both quantile
    functions are constant and equal to order statistic ``idx_a[i]`` and
    ``idx_b[i]`` (0-based) of the respective group.
    """

    m_a: int
    m_b: int
    breakpoints: tuple[Fraction, ...]
    widths: tuple[Fraction, ...]
    idx_a: np.ndarray
    idx_b: np.ndarray
    width_f: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.widths)


def _containing_index(lo: Fraction, hi: Fraction, m: int) -> int:
    # the unique j with (lo, hi] inside ((j-1)/m, j/m]
    j = math.ceil(hi * m)
    if not (Fraction(j - 1, m) <= lo and hi <= Fraction(j, m)):
        raise AssertionError("cell straddles a grid point")  # pragma: no cover
    return j


@lru_cache(maxsize=256)
def merged_grid(m_a: int, m_b: int) -> MergedGrid:
    if m_a < 1 or m_b < 1:
        raise DomainError("group sizes must be at least one")
    pts = {Fraction(0)}
    pts.update(Fraction(i, m_a) for i in range(1, m_a + 1))
    pts.update(Fraction(i, m_b) for i in range(1, m_b + 1))
    bp = tuple(sorted(pts))
    widths = tuple(hi - lo for lo, hi in zip(bp[:-1], bp[1:]))
    ja = [_containing_index(lo, hi, m_a) - 1 for lo, hi in zip(bp[:-1], bp[1:])]
    jb = [_containing_index(lo, hi, m_b) - 1 for lo, hi in zip(bp[:-1], bp[1:])]
    idx_a = np.array(ja, dtype=np.intp)
    idx_b = np.array(jb, dtype=np.intp)
    width_f = np.array([float(w) for w in widths])
    for arr in (idx_a, idx_b, width_f):
        arr.setflags(write=False)
    return MergedGrid(m_a, m_b, bp, widths, idx_a, idx_b, width_f)


def _check_q(q: float) -> float:
    q = float(q)
    if not q >= 1.0:
        raise DomainError(f"order q must be >= 1, got {q}")
    return q


def wasserstein_q_pow(a, b, q: float) -> float:
    """q-th power of the type-q Wasserstein distance between two samples."""
    a, b = _as_dist(a), _as_dist(b)
    q = _check_q(q)
    g = merged_grid(a.m, b.m)
    gap = np.abs(a.values[g.idx_a] - b.values[g.idx_b])
    return math.fsum(g.width_f * gap**q)


def wasserstein1_via_cdf(a, b) -> float:
    """Type-1 distance as the area between the two CDFs."""
    a, b = _as_dist(a), _as_dist(b)
    t = np.union1d(a.values, b.values)
    if t.size < 2:
        return 0.0
    diff = np.abs(a.cdf(t[:-1]) - b.cdf(t[:-1]))
    return math.fsum(diff * np.diff(t))


def _cdf_gaps(a: EmpiricalDist, b: EmpiricalDist):
    t = np.union1d(a.values, b.values)
    return t, np.abs(a.cdf(t) - b.cdf(t))


def ksd(a, b) -> float:
    """Kolmogorov-Smirnov distance between two samples.

    The CDF gap is constant on [t_k, t_{k+1}) between consecutive support
    points, so the right-continuous values at the support points (together
    with the zero gap to the left of the support) cover every level.
    """
    a, b = _as_dist(a), _as_dist(b)
    _, gaps = _cdf_gaps(a, b)
    return float(gaps.max())


def demographic_parity(a, b) -> float:
    """Absolute difference of the mass at zero for two {0,1}-valued samples."""
    a, b = _as_dist(a), _as_dist(b)
    for d in (a, b):
        if not np.all((d.values == 0.0) | (d.values == 1.0)):
            raise DomainError("demographic parity needs values in {0, 1}")
    pa = Fraction(int(np.sum(a.values == 0.0)), a.m)
    pb = Fraction(int(np.sum(b.values == 0.0)), b.m)
    return float(abs(pa - pb))


def transport_plan(a, b, q: float) -> tuple[float, np.ndarray]:
    """Optimal coupling of two samples by network simplex.

    Supplies are scaled to integers (``m_b`` per source atom, ``m_a`` per sink
    atom) so the flow is exact; the returned plan is ``flow / (m_a m_b)`` in the
    sorted order of each sample. Arc costs are rounded to integers at relative
    resolution ``2**-COST_BITS``; the value is then re-evaluated with the
    unrounded costs.
    """
    a, b = _as_dist(a), _as_dist(b)
    q = _check_q(q)
    ma, mb = a.m, b.m
    if ma * mb > OT_SIZE_GUARD:
        raise ResourceError(f"transport problem of size {ma}x{mb} exceeds the guard {OT_SIZE_GUARD}")
    cost = np.abs(a.values[:, None] - b.values[None, :]) ** q
    top = float(cost.max())
    scale = 2.0**COST_BITS / top if top > 0 else 0.0
    icost = [[int(round(c * scale)) for c in row] for row in cost]
    g = nx.DiGraph()
    for i in range(ma):
        g.add_node(("s", i), demand=-mb)
    for j in range(mb):
        g.add_node(("t", j), demand=ma)
    for i in range(ma):
        for j in range(mb):
            g.add_edge(("s", i), ("t", j), weight=icost[i][j], capacity=ma * mb)
    _, flow = nx.network_simplex(g)
    plan = np.zeros((ma, mb))
    for i in range(ma):
        for (_, j), f in flow[("s", i)].items():
            plan[i, j] = f
    value = math.fsum((plan * cost).ravel()) / (ma * mb)
    return value, plan / (ma * mb)


def ot_bruteforce(a, b, q: float) -> float:
    return transport_plan(a, b, q)[0]


def is_staircase(plan: np.ndarray, tol: float = 0.0) -> bool:
    """True if no two support cells (i, j), (i', j') have i < i' and j > j'."""
    rows, cols = np.nonzero(plan > tol)
    order = np.lexsort((cols, rows))
    cols = cols[order]
    return bool(np.all(np.diff(cols) >= 0))


@dataclass(frozen=True)
class KsdBoundCoeffs:
    t1: float
    t2: float
    delta_measure: float
    eta: float


def quantile_gap_pieces(a, b) -> tuple[np.ndarray, np.ndarray]:
    """Widths and values of the maximal constant pieces of F_a^{-1} - F_b^{-1}."""
    a, b = _as_dist(a), _as_dist(b)
    g = merged_grid(a.m, b.m)
    diff = a.values[g.idx_a] - b.values[g.idx_b]
    widths, vals = [], []
    for w, d in zip(g.widths, diff):
        if vals and d == vals[-1]:
            widths[-1] += w
        else:
            widths.append(w)
            vals.append(d)
    return np.array([float(w) for w in widths]), np.array(vals)


def ksd_wd_sandwich(a, b, q: float):
    """Lower and upper bounds on KSD in terms of the type-q distance.

    Returns ``(lower, upper, coeffs)`` with
    ``lower = W_q / (eta**((1-q)/q) * (t2 - t1))`` and ``upper = W_q / mu``,
    where ``eta`` is the widest constant piece of the quantile gap and ``mu``
    the length of the set on which the CDF gap attains its supremum.
    """
    a, b = _as_dist(a), _as_dist(b)
    q = _check_q(q)
    t1 = float(min(a.values[0], b.values[0]))
    t2 = float(max(a.values[-1], b.values[-1]))
    widths, _ = quantile_gap_pieces(a, b)
    eta = float(widths.max())
    t, gaps = _cdf_gaps(a, b)
    sup = float(gaps.max())
    if sup == 0.0:
        mu = math.inf
    else:
        # gap is constant on [t_k, t_{k+1}); after the last point it is zero
        hit = np.abs(gaps[:-1] - sup) <= ATTAIN_TOL
        mu = math.fsum(np.diff(t)[hit])
    coeffs = KsdBoundCoeffs(t1, t2, mu, eta)
    if t1 == t2:
        return 0.0, 0.0, coeffs
    wd = wasserstein_q_pow(a, b, q) ** (1.0 / q)
    lower = wd / (eta ** ((1.0 - q) / q) * (t2 - t1))
    upper = 0.0 if math.isinf(mu) else wd / mu
    return lower, upper, coeffs


def _group_index_map(population) -> Mapping[Hashable, np.ndarray]:
    if isinstance(population, Mapping):
        return population
    return population.group_indices


def pairwise_scores(population, utilities, q: float) -> dict:
    """WD_q^q and KSD for every unordered group pair, keyed by label pair."""
    groups = _group_index_map(population)
    u = np.asarray(utilities, dtype=float)
    dists = {g: EmpiricalDist.from_values(u[np.asarray(idx)]) for g, idx in groups.items()}
    out = {}
    for ga, gb in combinations(list(groups), 2):
        out[(ga, gb)] = {
            "wd": wasserstein_q_pow(dists[ga], dists[gb], q),
            "ksd": ksd(dists[ga], dists[gb]),
        }
    return out


def wd_fairness(population, utilities: Sequence[float], q: float):
    """Largest pairwise WD_q^q across groups and the pair attaining it."""
    groups = _group_index_map(population)
    if len(groups) < 2:
        raise DomainError("fairness needs at least two groups")
    q = _check_q(q)
    u = np.asarray(utilities, dtype=float)
    dists = {}
    for g, idx in groups.items():
        idx = np.asarray(idx)
        if idx.size == 0:
            raise DomainError(f"group {g!r} is empty")
        dists[g] = EmpiricalDist.from_values(u[idx])
    best, pair = -1.0, None
    for ga, gb in combinations(list(groups), 2):
        v = wasserstein_q_pow(dists[ga], dists[gb], q)
        if v > best:
            best, pair = v, (ga, gb)
    return best, pair


def ksd_fairness(population, utilities: Sequence[float]) -> float:
    groups = _group_index_map(population)
    u = np.asarray(utilities, dtype=float)
    labels = list(groups)
    return max(
        ksd(u[np.asarray(groups[ga])], u[np.asarray(groups[gb])])
        for ga, gb in combinations(labels, 2)
    )
