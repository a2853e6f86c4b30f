"""Problem data: grouped scenarios, utilities, efficiency band, decision box, big-M."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, InfeasibleError

DEFAULT_ABS_SLACK = 1e-9


# ---------------------------------------------------------------- population


@dataclass(frozen=True, eq=False)
class GroupedPopulation:
    """Scenario vectors with one group label each.

    Groups are ordered by first appearance; ``group_indices`` maps each label
    to the sorted scenario indices of that group.
    """

    scenarios: np.ndarray
    labels: tuple
    responses: np.ndarray | None = None
    group_indices: dict = field(init=False, repr=False)

    def __post_init__(self):
        xi = np.atleast_2d(np.asarray(self.scenarios, dtype=float))
        if xi.shape[0] != len(self.labels):
            raise DomainError("one group label per scenario is required")
        if not np.all(np.isfinite(xi)):
            raise DomainError("scenario features must be finite")
        object.__setattr__(self, "scenarios", xi)
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.responses is not None:
            y = np.asarray(self.responses, dtype=float).ravel()
            if y.size != xi.shape[0]:
                raise DomainError("one response per scenario is required")
            object.__setattr__(self, "responses", y)
        groups: dict = {}
        for i, g in enumerate(self.labels):
            groups.setdefault(g, []).append(i)
        object.__setattr__(
            self, "group_indices", {g: np.array(ix, dtype=np.intp) for g, ix in groups.items()}
        )

    @property
    def m(self) -> int:
        return self.scenarios.shape[0]

    @property
    def kappa(self) -> int:
        return self.scenarios.shape[1]

    @property
    def groups(self) -> list:
        return list(self.group_indices)

    def group_pairs(self) -> list[tuple[int, int]]:
        """Position pairs (a, b) with a < b."""
        k = len(self.group_indices)
        return [(a, b) for a in range(k) for b in range(a + 1, k)]

    def indices(self, pos: int) -> np.ndarray:
        return self.group_indices[self.groups[pos]]

    def group_position(self) -> np.ndarray:
        pos = np.empty(self.m, dtype=np.intp)
        for p, g in enumerate(self.groups):
            pos[self.group_indices[g]] = p
        return pos

    # CSV: f1..fk, group, optional y
    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            head = [f"f{j + 1}" for j in range(self.kappa)] + ["group"]
            if self.responses is not None:
                head.append("y")
            w.writerow(head)
            for i in range(self.m):
                row = [repr(float(v)) for v in self.scenarios[i]] + [str(self.labels[i])]
                if self.responses is not None:
                    row.append(repr(float(self.responses[i])))
                w.writerow(row)

    @classmethod
    def from_csv(cls, path, require_y: bool = False) -> "GroupedPopulation":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise DomainError(f"{path}: empty population file")
        head = [h.strip() for h in rows[0]]
        feats = [h for h in head if h.startswith("f") and h[1:].isdigit()]
        feats.sort(key=lambda h: int(h[1:]))
        if "group" not in head or not feats:
            raise DomainError(f"{path}: header needs f1..fk and group columns")
        if require_y and "y" not in head:
            raise DomainError(f"{path}: response column y is missing")
        col = {h: k for k, h in enumerate(head)}
        xi, labels, ys = [], [], []
        for ln, r in enumerate(rows[1:], start=2):
            if not r:
                continue
            try:
                xi.append([float(r[col[f]]) for f in feats])
                labels.append(r[col["group"]].strip())
                if "y" in col:
                    ys.append(float(r[col["y"]]))
            except (ValueError, IndexError) as exc:
                raise DomainError(f"{path}: line {ln}: {exc}") from exc
        return cls(np.array(xi), tuple(labels), np.array(ys) if "y" in col else None)


# ---------------------------------------------------------------- utilities


@dataclass(frozen=True, eq=False)
class Linear:
    """f(x, xi) = xi^T (A x + a0) + a1^T x + a2."""

    A: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    a2: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a0", np.asarray(self.a0, dtype=float).reshape(A.shape[0]))
        object.__setattr__(self, "a1", np.asarray(self.a1, dtype=float).reshape(A.shape[1]))
        object.__setattr__(self, "a2", float(self.a2))

    @classmethod
    def identity(cls, n: int) -> "Linear":
        return cls(np.eye(n), np.zeros(n), np.zeros(n), 0.0)

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def affine(self, xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Rows of G and h with f(x, xi_i) = G[i] @ x + h[i]."""
        xi = np.atleast_2d(xi)
        return xi @ self.A + self.a1, xi @ self.a0 + self.a2

    def scaled(self, c: float, shift: float) -> "Linear":
        return Linear(c * self.A, c * self.a0, c * self.a1, c * self.a2 + shift)


@dataclass(frozen=True, eq=False)
class PiecewiseMax:
    pieces: tuple

    def as_pieces(self) -> tuple:
        return tuple(self.pieces)


@dataclass(frozen=True, eq=False)
class PiecewiseMin:
    pieces: tuple

    def as_pieces(self) -> tuple:
        return tuple(self.pieces)


def _check_tangents(g) -> np.ndarray:
    g = np.asarray(g, dtype=float).ravel()
    if g.size == 0 or np.any(np.diff(g) <= 0):
        raise DomainError("tangent points must be nonempty and strictly increasing")
    return g


@dataclass(frozen=True, eq=False)
class ExpPwl:
    """Max of tangent lines of exp at points g, applied to a linear inner form."""

    inner: Linear
    tangents: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tangents", _check_tangents(self.tangents))

    def as_pieces(self) -> tuple:
        return tuple(self.inner.scaled(math.exp(g), math.exp(g) * (1.0 - g)) for g in self.tangents)


@dataclass(frozen=True, eq=False)
class LogPwl:
    """Min of tangent lines of log at points g > 0, applied to a linear inner form."""

    inner: Linear
    tangents: np.ndarray

    def __post_init__(self):
        g = _check_tangents(self.tangents)
        if g[0] <= 0:
            raise DomainError("log tangent points must be positive")
        object.__setattr__(self, "tangents", g)

    def as_pieces(self) -> tuple:
        return tuple(self.inner.scaled(1.0 / g, math.log(g) - 1.0) for g in self.tangents)


UtilityModel = Linear | PiecewiseMax | PiecewiseMin | ExpPwl | LogPwl


def utility_kind(u) -> str:
    if isinstance(u, Linear):
        return "linear"
    if isinstance(u, (PiecewiseMax, ExpPwl)):
        return "max"
    if isinstance(u, (PiecewiseMin, LogPwl)):
        return "min"
    raise DomainError(f"unknown utility model {type(u).__name__}")


def eval_utility(u, x, xi) -> float:
    """Utility of decision x for one scenario (surrogate value for exp/log)."""
    return float(utilities(u, np.asarray(x, dtype=float), np.atleast_2d(np.asarray(xi, dtype=float)))[0])


def utilities(u, x: np.ndarray, scenarios: np.ndarray) -> np.ndarray:
    """Utility of decision x for every scenario row."""
    x = np.asarray(x, dtype=float)
    if isinstance(u, Linear):
        G, h = u.affine(scenarios)
        return G @ x + h
    if isinstance(u, LogPwl):
        G, h = u.inner.affine(scenarios)
        if np.any(G @ x + h <= 0):
            raise DomainError("log utility needs a positive inner value")
    vals = np.stack([utilities(p, x, scenarios) for p in u.as_pieces()])
    return vals.max(axis=0) if utility_kind(u) == "max" else vals.min(axis=0)


def _interval(G: np.ndarray, h: np.ndarray, lb: np.ndarray, ub: np.ndarray):
    lo = h + np.minimum(G * lb, G * ub).sum(axis=1)
    hi = h + np.maximum(G * lb, G * ub).sum(axis=1)
    return lo, hi


def utility_range(u, scenarios: np.ndarray, lb: np.ndarray, ub: np.ndarray):
    """Interval bounds of f(x, xi_i) over the box, per scenario."""
    if isinstance(u, Linear):
        return _interval(*u.affine(scenarios), lb, ub)
    ranges = [utility_range(p, scenarios, lb, ub) for p in u.as_pieces()]
    los = np.stack([r[0] for r in ranges])
    his = np.stack([r[1] for r in ranges])
    if utility_kind(u) == "max":
        return los.max(axis=0), his.max(axis=0)
    return los.min(axis=0), his.min(axis=0)


def piece_ranges(u, scenarios, lb, ub):
    """Per-piece interval bounds, shape (T, m) each."""
    ranges = [utility_range(p, scenarios, lb, ub) for p in u.as_pieces()]
    return np.stack([r[0] for r in ranges]), np.stack([r[1] for r in ranges])


# ---------------------------------------------------------------- feasible set


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """Box lb <= x <= ub with G x <= h, E x = e and integrality flags."""

    lb: np.ndarray
    ub: np.ndarray
    G: np.ndarray | None = None
    h: np.ndarray | None = None
    E: np.ndarray | None = None
    e: np.ndarray | None = None
    integer: np.ndarray | None = None

    def __post_init__(self):
        lb = np.asarray(self.lb, dtype=float).ravel()
        ub = np.asarray(self.ub, dtype=float).ravel()
        if lb.shape != ub.shape:
            raise DomainError("bound vectors differ in length")
        if not (np.all(np.isfinite(lb)) and np.all(np.isfinite(ub))):
            raise DomainError("decision bounds must be finite")
        if np.any(lb > ub):
            raise DomainError("lower bound exceeds upper bound")
        n = lb.size
        object.__setattr__(self, "lb", lb)
        object.__setattr__(self, "ub", ub)
        G = np.zeros((0, n)) if self.G is None else np.atleast_2d(np.asarray(self.G, dtype=float))
        h = np.zeros(0) if self.h is None else np.asarray(self.h, dtype=float).ravel()
        E = np.zeros((0, n)) if self.E is None else np.atleast_2d(np.asarray(self.E, dtype=float))
        e = np.zeros(0) if self.e is None else np.asarray(self.e, dtype=float).ravel()
        if G.shape != (h.size, n) or E.shape != (e.size, n):
            raise DomainError("constraint matrix shapes do not match the decision size")
        integer = np.zeros(n, bool) if self.integer is None else np.asarray(self.integer, bool).ravel()
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "integer", integer)

    @classmethod
    def box(cls, lb, ub, integer=None) -> "FeasibleSet":
        return cls(lb, ub, integer=integer)

    @property
    def n(self) -> int:
        return self.lb.size

    @property
    def is_binary(self) -> bool:
        return bool(np.all(self.integer) and np.all(self.lb >= 0) and np.all(self.ub <= 1))

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        if self.G.size and np.any(self.G @ x > self.h + tol):
            return False
        if self.E.size and np.any(np.abs(self.E @ x - self.e) > tol):
            return False
        if np.any(np.abs(x[self.integer] - np.round(x[self.integer])) > tol):
            return False
        return True


# ---------------------------------------------------------------- efficiency

COST_KINDS = ("linear", "mae", "mse", "neg_value", "neg_geo_mean_log")
MAXIMIZE_KINDS = ("neg_value", "neg_geo_mean_log")


@dataclass(frozen=True, eq=False)
class EfficiencyModel:
    """Efficiency measure E(x) with its optimum V* and tolerance epsilon.

    kinds and their parameters:

    - ``linear``: mean of C[i] @ x + d[i]                      (C, d)
    - ``mae`` / ``mse``: mean |D x - y| or (D x - y)^2        (D, y)
    - ``neg_value``: total value v @ x, maximized; knapsack   (v, w, capacity)
    - ``neg_geo_mean_log``: geometric mean of x, maximized     ()

    For the two maximized kinds ``v_star`` is the best value and the band is
    E(x) >= V* - eps |V*|; otherwise E(x) <= V* + eps |V*|. ``epsilon = inf``
    drops the band.
    """

    kind: str
    params: dict
    epsilon: float = 0.1
    v_star: float | None = None
    abs_slack: float = DEFAULT_ABS_SLACK

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise DomainError(f"unknown cost kind {self.kind!r}")
        if not self.epsilon >= 0:
            raise DomainError("epsilon must be nonnegative")
        object.__setattr__(
            self, "params", {k: (np.asarray(v, dtype=float) if isinstance(v, (list, np.ndarray)) else v) for k, v in self.params.items()}
        )

    @property
    def maximize(self) -> bool:
        return self.kind in MAXIMIZE_KINDS

    @property
    def has_band(self) -> bool:
        return math.isfinite(self.epsilon)

    def with_v_star(self, v: float) -> "EfficiencyModel":
        return EfficiencyModel(self.kind, self.params, self.epsilon, float(v), self.abs_slack)

    def with_epsilon(self, eps: float) -> "EfficiencyModel":
        return EfficiencyModel(self.kind, self.params, eps, self.v_star, self.abs_slack)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        p = self.params
        if self.kind == "linear":
            return float(np.mean(p["C"] @ x + p["d"]))
        if self.kind == "mae":
            return float(np.mean(np.abs(p["D"] @ x - p["y"])))
        if self.kind == "mse":
            return float(np.mean((p["D"] @ x - p["y"]) ** 2))
        if self.kind == "neg_value":
            return float(p["v"] @ x)
        if np.any(x <= 0):
            return 0.0
        return float(np.exp(np.mean(np.log(x))))

    def limit(self) -> float:
        """Bound on E(x) defining the band, without the absolute slack."""
        if self.v_star is None:
            raise DomainError("V* must be computed before the band is used")
        if not self.has_band:
            return -math.inf if self.maximize else math.inf
        if self.maximize:
            return self.v_star - self.epsilon * abs(self.v_star)
        return self.v_star + self.epsilon * abs(self.v_star)

    def ok(self, x) -> bool:
        if not self.has_band:
            return True
        lim = self.limit()
        if self.kind == "neg_geo_mean_log":
            # compared in log space
            x = np.asarray(x, dtype=float)
            if lim <= 0:
                return True
            if np.any(x <= 0):
                return False
            return float(np.sum(np.log(x))) >= x.size * math.log(lim) - self.abs_slack
        val = self.value(x)
        if self.maximize:
            return val >= lim - self.abs_slack
        return val <= lim + self.abs_slack


# ---------------------------------------------------------------- instance


@dataclass(frozen=True, eq=False)
class DfsoInstance:
    population: GroupedPopulation
    utility: object
    efficiency: EfficiencyModel
    feasible: FeasibleSet
    q: float = 2.0

    def __post_init__(self):
        if self.q < 1:
            raise DomainError("q must be at least 1")
        if len(self.population.group_indices) < 2:
            raise DomainError("an instance needs at least two groups")
        n = self.feasible.n
        for p in (self.utility.as_pieces() if not isinstance(self.utility, Linear) else (self.utility,)):
            if p.n != n or p.A.shape[0] != self.population.kappa:
                raise DomainError("utility dimensions do not match population and decision sizes")
        if isinstance(self.utility, LogPwl):
            lo, _ = utility_range(self.utility.inner, self.population.scenarios, self.feasible.lb, self.feasible.ub)
            if np.any(lo <= 0):
                raise DomainError("log utility inner form is not positive over the box")

    @property
    def n(self) -> int:
        return self.feasible.n

    @property
    def m(self) -> int:
        return self.population.m

    def utilities(self, x) -> np.ndarray:
        return utilities(self.utility, x, self.population.scenarios)

    def affine_utilities(self):
        if not isinstance(self.utility, Linear):
            raise DomainError("operation needs a linear utility")
        return self.utility.affine(self.population.scenarios)

    def with_efficiency(self, eff: EfficiencyModel) -> "DfsoInstance":
        return DfsoInstance(self.population, self.utility, eff, self.feasible, self.q)

    def with_q(self, q: float) -> "DfsoInstance":
        return DfsoInstance(self.population, self.utility, self.efficiency, self.feasible, q)

    def efficiency_ok(self, x) -> bool:
        return efficiency_ok(self, x)

    def is_feasible(self, x, tol: float = 1e-7) -> bool:
        return self.feasible.contains(x, tol) and self.efficiency.ok(x)


def efficiency_ok(instance: DfsoInstance, x) -> bool:
    return instance.efficiency.ok(x)


# ---------------------------------------------------------------- big-M


@dataclass(frozen=True, eq=False)
class BigM:
    """Utility magnitude bounds and the derived model coefficients."""

    M: np.ndarray
    order_stats: np.ndarray
    complementary: dict
    overflow: bool
    q: float
    group_sorted: dict

    def quantile_coeffs(self, group_pos: int, i: int, k: int, literal: bool = False) -> tuple[float, float]:
        """Big-M for the two order rows of scenario i and level k.

        Returns the coefficient for the row that activates when i is *outside*
        the k smallest and for the row that activates when i is inside. The
        group's k-th smallest and k-th largest M bound the k-th order statistic
        from above and below. ``literal=True`` uses the k-th smallest M of the
        whole population in both rows.
        """
        if literal:
            c = self.M[i] + self.order_stats[k - 1]
            return c, c
        s = self.group_sorted[group_pos]
        return self.M[i] + s[len(s) - k], self.M[i] + s[k - 1]


def compute_big_m(instance: DfsoInstance) -> BigM:
    fs = instance.feasible
    if not (np.all(np.isfinite(fs.lb)) and np.all(np.isfinite(fs.ub))):
        raise DomainError("big-M needs a bounded box")
    lo, hi = utility_range(instance.utility, instance.population.scenarios, fs.lb, fs.ub)
    M = np.maximum(np.abs(lo), np.abs(hi))
    pop = instance.population
    q = float(instance.q)
    comp = {}
    overflow = False
    with np.errstate(over="ignore"):
        for a, b in pop.group_pairs():
            Ma, Mb = M[pop.indices(a)], M[pop.indices(b)]
            val = float(np.sum((Ma[:, None] + Mb[None, :]) ** q))
            if not math.isfinite(val):
                overflow = True
            comp[(a, b)] = val
    gs = {p: np.sort(M[pop.indices(p)]) for p in range(len(pop.groups))}
    return BigM(M, np.sort(M), comp, overflow, q, gs)


# ---------------------------------------------------------------- V*


def knapsack_dp(values, weights, capacity) -> tuple[float, np.ndarray]:
    """Exact 0/1 knapsack by dynamic programming over integer capacity."""
    w = np.asarray(weights)
    if np.any(w != np.round(w)) or np.any(w < 0):
        raise DomainError("knapsack weights must be nonnegative integers")
    w = w.astype(int)
    v = np.asarray(values, dtype=float)
    cap = int(math.floor(capacity))
    if cap < 0:
        raise InfeasibleError("negative knapsack capacity")
    n = w.size
    best = np.zeros((n + 1, cap + 1))
    for j in range(n):
        best[j + 1] = best[j]
        if w[j] <= cap:
            cand = best[j, : cap + 1 - w[j]] + v[j]
            best[j + 1, w[j]:] = np.maximum(best[j, w[j]:], cand)
    x = np.zeros(n)
    c = cap
    for j in range(n - 1, -1, -1):
        if best[j + 1, c] != best[j, c]:
            x[j] = 1.0
            c -= w[j]
    return float(best[n, cap]), x


def allocation_optimum(p, budget, lb, ub, tol: float = 1e-14) -> np.ndarray:
    """Maximizer of sum(log x) s.t. p @ x <= budget, lb <= x <= ub.

    KKT gives x_i = clip(1 / (theta p_i), lb_i, ub_i); theta is found by
    bisection on the budget row.
    """
    p, lb, ub = (np.asarray(v, dtype=float) for v in (p, lb, ub))
    if p @ lb > budget * (1 + 1e-12):
        raise InfeasibleError("lower coverage bounds exceed the budget")
    if p @ ub <= budget:
        return ub.copy()

    def spend(theta):
        return p @ np.clip(1.0 / (theta * p), lb, ub)

    lo, hi = 1e-300, 1.0
    while spend(hi) > budget:
        hi *= 2.0
    lo = hi / 2.0
    while spend(lo) <= budget and lo > 1e-300:
        lo /= 2.0
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if spend(mid) > budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return np.clip(1.0 / (hi * p), lb, ub)


def solve_v_star(instance: DfsoInstance) -> tuple[float, np.ndarray]:
    """Best efficiency value and a minimizer (maximizer for value kinds)."""
    from .solve.kernel import efficiency_optimum

    return efficiency_optimum(instance)


def with_v_star(instance: DfsoInstance) -> DfsoInstance:
    v, _ = solve_v_star(instance)
    return instance.with_efficiency(instance.efficiency.with_v_star(v))


# ---------------------------------------------------------------- JSON


def _utility_to_json(u) -> dict:
    if isinstance(u, Linear):
        return {"variant": "linear", "A": u.A.tolist(), "a0": u.a0.tolist(), "a1": u.a1.tolist(), "a2": u.a2}
    if isinstance(u, (PiecewiseMax, PiecewiseMin)):
        return {"variant": "max" if isinstance(u, PiecewiseMax) else "min", "pieces": [_utility_to_json(p) for p in u.pieces]}
    return {
        "variant": "exp_pwl" if isinstance(u, ExpPwl) else "log_pwl",
        "inner": _utility_to_json(u.inner),
        "tangents": np.asarray(u.tangents).tolist(),
    }


def utility_from_json(d: dict):
    v = d.get("variant")
    if v == "linear":
        return Linear(np.array(d["A"]), np.array(d["a0"]), np.array(d["a1"]), d.get("a2", 0.0))
    if v in ("max", "min"):
        cls = PiecewiseMax if v == "max" else PiecewiseMin
        return cls(tuple(utility_from_json(p) for p in d["pieces"]))
    if v in ("exp_pwl", "log_pwl"):
        cls = ExpPwl if v == "exp_pwl" else LogPwl
        return cls(utility_from_json(d["inner"]), np.array(d["tangents"]))
    raise DomainError(f"unknown utility variant {v!r}")


def instance_to_json(inst: DfsoInstance) -> dict:
    pop = inst.population
    fs = inst.feasible
    eff = inst.efficiency
    return {
        "population": {
            "scenarios": pop.scenarios.tolist(),
            "groups": [str(g) for g in pop.labels],
            "y": None if pop.responses is None else pop.responses.tolist(),
        },
        "utility": _utility_to_json(inst.utility),
        "efficiency": {
            "kind": eff.kind,
            "epsilon": eff.epsilon if math.isfinite(eff.epsilon) else "inf",
            "v_star": eff.v_star,
            "params": {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in eff.params.items()},
        },
        "feasible": {
            "lb": fs.lb.tolist(),
            "ub": fs.ub.tolist(),
            "G": fs.G.tolist(),
            "h": fs.h.tolist(),
            "E": fs.E.tolist(),
            "e": fs.e.tolist(),
            "integer": fs.integer.tolist(),
        },
        "q": inst.q,
    }


def instance_from_json(d: dict, base: Path | None = None) -> DfsoInstance:
    pd = d["population"]
    if isinstance(pd, str):
        path = Path(pd) if base is None else Path(base) / pd
        pop = GroupedPopulation.from_csv(path)
    else:
        pop = GroupedPopulation(np.array(pd["scenarios"]), tuple(pd["groups"]), None if pd.get("y") is None else np.array(pd["y"]))
    fd = d["feasible"]
    n = len(fd["lb"])

    def mat(key):
        v = fd.get(key)
        return None if not v else np.array(v, dtype=float).reshape(-1, n)

    fs = FeasibleSet(
        np.array(fd["lb"]), np.array(fd["ub"]), mat("G"), fd.get("h") or None, mat("E"), fd.get("e") or None,
        np.array(fd.get("integer", [False] * n), bool),
    )
    ed = d["efficiency"]
    eps = ed.get("epsilon", 0.1)
    eps = math.inf if eps in ("inf", None) else float(eps)
    params = {k: (np.array(v) if isinstance(v, list) else v) for k, v in ed.get("params", {}).items()}
    eff = EfficiencyModel(ed["kind"], params, eps, ed.get("v_star"))
    return DfsoInstance(pop, utility_from_json(d["utility"]), eff, fs, float(d.get("q", 2.0)))


def load_instance(path) -> DfsoInstance:
    path = Path(path)
    return instance_from_json(json.loads(path.read_text()), path.parent)


def save_instance(inst: DfsoInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_json(inst), indent=1, sort_keys=True) + "\n")


def make_instance(
    scenarios: np.ndarray,
    labels: Sequence,
    utility,
    efficiency: EfficiencyModel,
    feasible: FeasibleSet,
    q: float = 2.0,
    responses=None,
) -> DfsoInstance:
    pop = GroupedPopulation(np.asarray(scenarios, dtype=float), tuple(labels), responses)
    return DfsoInstance(pop, utility, efficiency, feasible, q)
