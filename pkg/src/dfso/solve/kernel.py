"""Convex kernel: LP, convex QCQP and log-sum programs, plus branch and bound.

Programs are assembled with :class:`Program`. Pure LPs go to HiGHS through
``scipy.optimize.linprog``; programs with sum-of-squares or log rows go to
Clarabel through cvxpy. Integer variables are handled by a best-bound
branch and bound over these relaxations.
"""

from __future__ import annotations

import heapq
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import DomainError, InfeasibleError, ResourceError

NODE_LIMIT = 100_000
INT_TOL = 1e-6
FEAS_TOL = 1e-9
# tight first; the looser pass rescues badly scaled programs
CLARABEL_SETTINGS = (
    {"tol_gap_abs": 1e-10, "tol_gap_rel": 1e-10, "tol_feas": 1e-10, "tol_ktratio": 1e-8, "max_iter": 400},
    {"max_iter": 400},
)


@dataclass
class SumSquaresRow:
    """||F v[idx] + g||^2 + lin_coef . v[lin_idx] <= rhs."""

    idx: np.ndarray
    F: np.ndarray
    g: np.ndarray
    lin_idx: np.ndarray
    lin_coef: np.ndarray
    rhs: float


@dataclass
class LogRow:
    """sum w * log v[idx] + lin_coef . v[lin_idx] >= rhs."""

    idx: np.ndarray
    w: np.ndarray
    rhs: float
    lin_idx: np.ndarray
    lin_coef: np.ndarray


@dataclass
class KernelResult:
    status: str
    x: np.ndarray | None = None
    objective: float = math.nan
    nodes: int = 0
    flag: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


@dataclass
class Program:
    """Minimize c . v subject to linear, sum-of-squares and log rows."""

    lb: list = field(default_factory=list)
    ub: list = field(default_factory=list)
    integer: list = field(default_factory=list)
    rows_i: list = field(default_factory=list)
    rows_j: list = field(default_factory=list)
    rows_v: list = field(default_factory=list)
    senses: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    sumsq: list = field(default_factory=list)
    logs: list = field(default_factory=list)
    obj: dict = field(default_factory=dict)
    obj_const: float = 0.0

    @property
    def n(self) -> int:
        return len(self.lb)

    def add_vars(self, k: int, lb=-math.inf, ub=math.inf, integer=False) -> np.ndarray:
        start = self.n
        lb = np.broadcast_to(np.asarray(lb, dtype=float), (k,))
        ub = np.broadcast_to(np.asarray(ub, dtype=float), (k,))
        self.lb.extend(lb.tolist())
        self.ub.extend(ub.tolist())
        self.integer.extend(np.broadcast_to(np.asarray(integer, bool), (k,)).tolist())
        return np.arange(start, start + k)

    def add_var(self, lb=-math.inf, ub=math.inf, integer=False) -> int:
        return int(self.add_vars(1, lb, ub, integer)[0])

    def add_row(self, idx, coef, sense: str, rhs: float) -> None:
        if sense not in ("<=", ">=", "="):
            raise DomainError(f"bad row sense {sense!r}")
        r = len(self.rhs)
        idx = np.asarray(idx, dtype=np.intp).ravel()
        coef = np.asarray(coef, dtype=float).ravel()
        self.rows_i.extend([r] * idx.size)
        self.rows_j.extend(idx.tolist())
        self.rows_v.extend(coef.tolist())
        self.senses.append(sense)
        self.rhs.append(float(rhs))

    def add_rows(self, idx, M, sense: str, rhs) -> None:
        """One row per line of the dense matrix M over variables idx."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        rhs = np.broadcast_to(np.asarray(rhs, dtype=float), (M.shape[0],))
        for r in range(M.shape[0]):
            nz = M[r] != 0
            self.add_row(np.asarray(idx)[nz], M[r, nz], sense, rhs[r])

    def add_sumsq(self, idx, F, g, rhs: float, lin_idx=(), lin_coef=()) -> None:
        F = np.atleast_2d(np.asarray(F, dtype=float))
        g = np.asarray(g, dtype=float).ravel()
        # rows beyond the column count carry no information after a QR fold
        if F.shape[0] > F.shape[1] + 1:
            Q, R = np.linalg.qr(F, mode="reduced")
            qg = Q.T @ g
            rhs = rhs - (float(g @ g) - float(qg @ qg))
            F, g = R, qg
        self.sumsq.append(
            SumSquaresRow(
                np.asarray(idx, dtype=np.intp), F, g,
                np.asarray(lin_idx, dtype=np.intp), np.asarray(lin_coef, dtype=float), float(rhs),
            )
        )

    def add_log(self, idx, w, rhs: float, lin_idx=(), lin_coef=()) -> None:
        self.logs.append(
            LogRow(
                np.asarray(idx, dtype=np.intp), np.asarray(w, dtype=float), float(rhs),
                np.asarray(lin_idx, dtype=np.intp), np.asarray(lin_coef, dtype=float),
            )
        )

    def set_objective(self, idx, coef, const: float = 0.0) -> None:
        self.obj = {}
        for j, c in zip(np.atleast_1d(idx), np.atleast_1d(coef)):
            self.obj[int(j)] = self.obj.get(int(j), 0.0) + float(c)
        self.obj_const = float(const)

    # ---------------------------------------------------------------- solving

    def _matrices(self):
        n = self.n
        A = sp.csr_matrix((self.rows_v, (self.rows_i, self.rows_j)), shape=(len(self.rhs), n))
        s = np.array(self.senses, dtype=object)
        b = np.array(self.rhs, dtype=float)
        le, ge, eq = s == "<=", s == ">=", s == "="
        A_ub = sp.vstack([A[le], -A[ge]]).tocsr()
        b_ub = np.concatenate([b[le], -b[ge]])
        return A_ub, b_ub, A[eq].tocsr(), b[eq]

    def objective_vector(self) -> np.ndarray:
        c = np.zeros(self.n)
        for j, v in self.obj.items():
            c[j] += v
        return c

    def relax(self, lb=None, ub=None) -> KernelResult:
        """Solve the continuous relaxation under optional bound overrides."""
        lb = np.array(self.lb) if lb is None else lb
        ub = np.array(self.ub) if ub is None else ub
        if np.any(lb > ub + FEAS_TOL):
            return KernelResult("infeasible")
        if self.sumsq or self.logs:
            return self._solve_conic(lb, ub)
        return self._solve_lp(lb, ub)

    def _solve_lp(self, lb, ub) -> KernelResult:
        A_ub, b_ub, A_eq, b_eq = self._matrices()
        res = linprog(
            self.objective_vector(),
            A_ub=A_ub if A_ub.shape[0] else None,
            b_ub=b_ub if A_ub.shape[0] else None,
            A_eq=A_eq if A_eq.shape[0] else None,
            b_eq=b_eq if A_eq.shape[0] else None,
            bounds=np.column_stack([np.where(np.isfinite(lb), lb, -np.inf), np.where(np.isfinite(ub), ub, np.inf)]),
            method="highs",
            options={"primal_feasibility_tolerance": FEAS_TOL, "dual_feasibility_tolerance": 1e-9},
        )
        if res.status == 0:
            return KernelResult("optimal", res.x, float(res.fun) + self.obj_const)
        if res.status == 2:
            return KernelResult("infeasible")
        if res.status == 3:
            return KernelResult("unbounded")
        return KernelResult("error", flag=res.message)

    def _solve_conic(self, lb, ub) -> KernelResult:
        import cvxpy as cp

        n = self.n
        v = cp.Variable(n)
        cons = []
        A_ub, b_ub, A_eq, b_eq = self._matrices()
        if A_ub.shape[0]:
            cons.append(A_ub @ v <= b_ub)
        if A_eq.shape[0]:
            cons.append(A_eq @ v == b_eq)
        fl, fu = np.isfinite(lb), np.isfinite(ub)
        if fl.any():
            cons.append(v[np.flatnonzero(fl)] >= lb[fl])
        if fu.any():
            cons.append(v[np.flatnonzero(fu)] <= ub[fu])
        for r in self.sumsq:
            expr = cp.sum_squares(r.F @ v[r.idx] + r.g)
            if r.lin_idx.size:
                expr = expr + r.lin_coef @ v[r.lin_idx]
            cons.append(expr <= r.rhs)
        for r in self.logs:
            expr = r.w @ cp.log(v[r.idx])
            if r.lin_idx.size:
                expr = expr + r.lin_coef @ v[r.lin_idx]
            cons.append(expr >= r.rhs)
        prob = cp.Problem(cp.Minimize(self.objective_vector() @ v), cons)
        st = None
        for opts in CLARABEL_SETTINGS:
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    prob.solve(solver=cp.CLARABEL, **opts)
            except cp.error.SolverError:
                continue
            st = prob.status
            if st in (cp.OPTIMAL, cp.INFEASIBLE, cp.UNBOUNDED):
                break
        if st is None:
            return KernelResult("error", flag="conic solver failed")
        st = prob.status
        if st in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            x = np.asarray(v.value, dtype=float)
            return KernelResult("optimal", x, float(self.objective_vector() @ x) + self.obj_const,
                                flag="" if st == cp.OPTIMAL else "inaccurate")
        if st in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return KernelResult("infeasible")
        if st in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            return KernelResult("unbounded")
        return KernelResult("error", flag=str(st))

    def solve(self, node_limit: int = NODE_LIMIT) -> KernelResult:
        if not any(self.integer):
            return self.relax()
        return branch_and_bound(self, node_limit)


def branch_and_bound(prog: Program, node_limit: int = NODE_LIMIT, gap: float = 1e-9) -> KernelResult:
    """Best-bound branch and bound on the most fractional integer variable.

    Returns the best incumbent with ``flag = "node-limit"`` when the node
    budget runs out, or ``status = "infeasible"`` without any incumbent.
    """
    ints = np.flatnonzero(np.array(prog.integer))
    lb0, ub0 = np.array(prog.lb), np.array(prog.ub)
    lb0[ints] = np.ceil(lb0[ints] - INT_TOL)
    ub0[ints] = np.floor(ub0[ints] + INT_TOL)
    best: KernelResult | None = None
    root = prog.relax(lb0, ub0)
    if root.status == "unbounded":
        return root
    if not root.ok:
        return KernelResult("infeasible" if root.status == "infeasible" else root.status, nodes=1)
    heap = [(root.objective, 0, lb0, ub0, root)]
    counter, nodes = 1, 1
    while heap:
        bound, _, lb, ub, res = heapq.heappop(heap)
        if best is not None and bound >= best.objective - gap * max(1.0, abs(best.objective)):
            continue
        xi = res.x[ints]
        frac = np.abs(xi - np.round(xi))
        if frac.max(initial=0.0) <= INT_TOL:
            x = res.x.copy()
            x[ints] = np.round(xi)
            if best is None or res.objective < best.objective:
                best = KernelResult("optimal", x, res.objective)
            continue
        k = int(ints[np.argmax(frac)])
        for side in (0, 1):
            clb, cub = lb.copy(), ub.copy()
            if side == 0:
                cub[k] = math.floor(res.x[k])
            else:
                clb[k] = math.ceil(res.x[k])
            if nodes >= node_limit:
                if best is None:
                    raise ResourceError(f"branch and bound hit the node limit {node_limit} without an incumbent")
                best.flag = "node-limit"
                best.nodes = nodes
                return best
            nodes += 1
            child = prog.relax(clb, cub)
            if child.ok:
                heapq.heappush(heap, (child.objective, counter, clb, cub, child))
                counter += 1
    if best is None:
        return KernelResult("infeasible", nodes=nodes)
    best.nodes = nodes
    return best


def convex_kernel(prog: Program) -> tuple[np.ndarray, float]:
    """Solve and return (x, objective); raise on infeasibility."""
    res = prog.solve()
    if res.status == "infeasible":
        raise InfeasibleError("program is infeasible")
    if not res.ok:
        raise InfeasibleError(f"program not solved: {res.status} {res.flag}")
    return res.x, res.objective


# ---------------------------------------------------------------- instance glue


def add_decision(prog: Program, feasible) -> np.ndarray:
    """Decision variables with their box, rows and integrality."""
    x = prog.add_vars(feasible.n, feasible.lb, feasible.ub, feasible.integer)
    if feasible.G.shape[0]:
        prog.add_rows(x, feasible.G, "<=", feasible.h)
    if feasible.E.shape[0]:
        prog.add_rows(x, feasible.E, "=", feasible.e)
    return x


def add_efficiency_band(prog: Program, instance, x: np.ndarray, limit: float | None = None) -> None:
    """Rows keeping E(x) within the band (or within ``limit`` when given)."""
    eff = instance.efficiency
    if limit is None:
        if not eff.has_band:
            return
        limit = eff.limit()
    p = eff.params
    if eff.kind == "linear":
        C, d = np.atleast_2d(p["C"]), np.asarray(p["d"], dtype=float)
        prog.add_row(x, C.mean(axis=0), "<=", limit - d.mean())
    elif eff.kind == "mae":
        D, y = np.atleast_2d(p["D"]), np.asarray(p["y"], dtype=float)
        m = D.shape[0]
        e = prog.add_vars(m, 0.0, math.inf)
        for i in range(m):
            idx = np.concatenate([x, [e[i]]])
            prog.add_row(idx, np.concatenate([D[i], [-1.0]]), "<=", y[i])
            prog.add_row(idx, np.concatenate([-D[i], [-1.0]]), "<=", -y[i])
        prog.add_row(e, np.full(m, 1.0 / m), "<=", limit)
    elif eff.kind == "mse":
        D, y = np.atleast_2d(p["D"]), np.asarray(p["y"], dtype=float)
        m = D.shape[0]
        prog.add_sumsq(x, D / math.sqrt(m), -y / math.sqrt(m), limit)
    elif eff.kind == "neg_value":
        prog.add_row(x, -np.asarray(p["v"], dtype=float), "<=", -limit)
    elif eff.kind == "neg_geo_mean_log":
        if limit > 0:
            prog.add_log(x, np.ones(x.size), x.size * math.log(limit))
    else:  # pragma: no cover - guarded by EfficiencyModel
        raise DomainError(eff.kind)


def _pure_box(feasible) -> bool:
    return feasible.G.shape[0] == 0 and feasible.E.shape[0] == 0 and not feasible.integer.any()


def efficiency_optimum(instance) -> tuple[float, np.ndarray]:
    """V* and an optimal decision for the instance's efficiency model."""
    from ..instance import allocation_optimum, knapsack_dp

    eff = instance.efficiency
    fs = instance.feasible
    p = eff.params
    if eff.kind == "neg_value" and "w" in p and "capacity" in p and fs.is_binary:
        w = np.asarray(p["w"], dtype=float)
        knap_rows = fs.G.shape[0] == 1 and np.allclose(fs.G[0], w) and fs.E.shape[0] == 0
        if knap_rows and np.all(fs.lb == 0) and np.all(fs.ub == 1):
            v, x = knapsack_dp(p["v"], w, float(fs.h[0]))
            return v, x
    if eff.kind == "neg_geo_mean_log" and fs.G.shape[0] == 1 and fs.E.shape[0] == 0 and np.all(fs.G[0] >= 0) \
            and not fs.integer.any() and np.all(fs.lb > 0):
        x = allocation_optimum(fs.G[0], float(fs.h[0]), fs.lb, fs.ub)
        return eff.value(x), x
    if eff.kind == "mse" and _pure_box(fs):
        D, y = np.atleast_2d(p["D"]), np.asarray(p["y"], dtype=float)
        H = D.T @ D
        if np.linalg.cond(H) > 1e12:
            H = H + 1e-10 * np.eye(H.shape[0])
        x = np.linalg.solve(H, D.T @ y)
        if np.all(x >= fs.lb) and np.all(x <= fs.ub):
            return eff.value(x), x

    prog = Program()
    x = add_decision(prog, fs)
    if eff.kind == "linear":
        C, d = np.atleast_2d(p["C"]), np.asarray(p["d"], dtype=float)
        prog.set_objective(x, C.mean(axis=0), d.mean())
    elif eff.kind == "mae":
        D, y = np.atleast_2d(p["D"]), np.asarray(p["y"], dtype=float)
        m = D.shape[0]
        e = prog.add_vars(m, 0.0, math.inf)
        for i in range(m):
            idx = np.concatenate([x, [e[i]]])
            prog.add_row(idx, np.concatenate([D[i], [-1.0]]), "<=", y[i])
            prog.add_row(idx, np.concatenate([-D[i], [-1.0]]), "<=", -y[i])
        prog.set_objective(e, np.full(m, 1.0 / m))
    elif eff.kind == "mse":
        D, y = np.atleast_2d(p["D"]), np.asarray(p["y"], dtype=float)
        m = D.shape[0]
        t = prog.add_var(0.0)
        prog.add_sumsq(x, D / math.sqrt(m), -y / math.sqrt(m), 0.0, [t], [-1.0])
        prog.set_objective([t], [1.0])
    elif eff.kind == "neg_value":
        prog.set_objective(x, -np.asarray(p["v"], dtype=float))
    else:
        # maximize t <= mean log x
        t = prog.add_var()
        prog.add_log(x, np.full(x.size, 1.0 / x.size), 0.0, [t], [-1.0])
        prog.set_objective([t], [-1.0])
    xs, _ = convex_kernel(prog)
    xv = xs[x]
    return eff.value(xv), xv

