"""Solver-agnostic mixed-integer model: variables, rows, objective."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConstructionError, DomainError, UnsupportedError

KINDS = ("continuous", "binary", "integer")
SENSES = ("<=", ">=", "=")


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = math.inf
    kind: str = "continuous"


@dataclass(frozen=True)
class Constraint:
    """sum(coef * var) + sum(coef * u * v) <sense> rhs.

    ``quad`` holds (u, v, coef); u == v is a square term, u != v a bilinear one.
    """

    name: str
    linear: tuple
    sense: str
    rhs: float
    quad: tuple = ()

    @property
    def bilinear(self) -> bool:
        return any(u != v for u, v, _ in self.quad)


@dataclass(eq=False)
class ModelIR:
    formulation: str
    variables: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    objective: tuple = ()
    meta: dict = field(default_factory=dict)
    sealed: bool = False

    # ------------------------------------------------------------ building

    def add_var(self, name: str, lb: float = 0.0, ub: float = math.inf, kind: str = "continuous") -> str:
        if self.sealed:
            raise ConstructionError("model is sealed")
        if name in self.variables:
            raise ConstructionError(f"duplicate variable {name}")
        if kind not in KINDS:
            raise ConstructionError(f"unknown variable kind {kind}")
        if kind == "binary":
            lb, ub = 0.0, 1.0
        self.variables[name] = Variable(name, float(lb), float(ub), kind)
        return name

    def add_row(self, name: str, linear, sense: str, rhs: float, quad=()) -> Constraint:
        if self.sealed:
            raise ConstructionError("model is sealed")
        if sense not in SENSES:
            raise ConstructionError(f"bad sense {sense}")
        lin = tuple((v, float(c)) for v, c in linear)
        qd = tuple((u, v, float(c)) for u, v, c in quad)
        row = Constraint(name, lin, sense, float(rhs), qd)
        self.constraints.append(row)
        return row

    def mccormick(self, tag: str, psi: str, kappa: str, nu: str, kl: float, ku: float, nl: float, nu_hi: float) -> None:
        """Four rows making psi = kappa * nu exact when kappa is at a bound.

        Zero coefficients are dropped so bounds at 0 leave no empty terms.
        """
        rows = (
            ([(psi, 1.0), (nu, -kl), (kappa, -nl)], ">=", -kl * nl),
            ([(psi, 1.0), (nu, -ku), (kappa, -nu_hi)], ">=", -ku * nu_hi),
            ([(psi, 1.0), (nu, -ku), (kappa, -nl)], "<=", -ku * nl),
            ([(psi, 1.0), (kappa, -nu_hi), (nu, -kl)], "<=", -kl * nu_hi),
        )
        for k, (terms, sense, rhs) in enumerate(rows, start=1):
            self.add_row(f"{tag}_{k}", [(v, c) for v, c in terms if c != 0.0], sense, rhs + 0.0)

    def set_objective(self, linear) -> None:
        self.objective = tuple((v, float(c)) for v, c in linear)

    def seal(self) -> "ModelIR":
        self.validate()
        self.sealed = True
        return self

    # ------------------------------------------------------------ checks

    def validate(self) -> None:
        names = set()
        for v in self.variables.values():
            if v.kind == "binary" and (v.lb != 0.0 or v.ub != 1.0):
                raise ConstructionError(f"binary {v.name} must have bounds [0, 1]")
            if v.lb > v.ub:
                raise ConstructionError(f"variable {v.name} has lb > ub")
        for r in self.constraints:
            if r.name in names:
                raise ConstructionError(f"duplicate row {r.name}")
            names.add(r.name)
            for v, c in r.linear:
                if v not in self.variables:
                    raise ConstructionError(f"row {r.name} references unknown {v}")
                if not math.isfinite(c):
                    raise ConstructionError(f"row {r.name} has a non-finite coefficient")
            for u, v, c in r.quad:
                if u not in self.variables or v not in self.variables:
                    raise ConstructionError(f"row {r.name} references unknown quadratic variable")
            if r.bilinear and self.formulation != "vanilla":
                raise ConstructionError(f"bilinear row {r.name} outside the vanilla formulation")
            if not math.isfinite(r.rhs):
                raise ConstructionError(f"row {r.name} has a non-finite right-hand side")
        for v, _ in self.objective:
            if v not in self.variables:
                raise ConstructionError(f"objective references unknown {v}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelIR):
            return NotImplemented
        return (
            self.formulation == other.formulation
            and self.variables == other.variables
            and self.constraints == other.constraints
            and self.objective == other.objective
        )

    def counts(self) -> dict:
        kinds = [v.kind for v in self.variables.values()]
        return {
            "variables": len(kinds),
            "binaries": kinds.count("binary"),
            "integers": kinds.count("integer"),
            "continuous": kinds.count("continuous"),
            "constraints": len(self.constraints),
            "quadratic_rows": sum(1 for r in self.constraints if r.quad),
            "bilinear_terms": sum(1 for r in self.constraints for u, v, _ in r.quad if u != v),
        }

    def violations(self, values: dict, tol: float = 1e-7) -> list[tuple[str, float]]:
        """Rows, bounds and integrality broken by a full assignment."""
        out = []
        for v in self.variables.values():
            if v.name not in values:
                out.append((f"missing:{v.name}", math.inf))
                continue
            x = values[v.name]
            if x < v.lb - tol or x > v.ub + tol:
                out.append((f"bound:{v.name}", max(v.lb - x, x - v.ub)))
            if v.kind != "continuous" and abs(x - round(x)) > tol:
                out.append((f"integrality:{v.name}", abs(x - round(x))))
        for r in self.constraints:
            lhs = math.fsum(c * values[v] for v, c in r.linear) + math.fsum(
                c * values[u] * values[v] for u, v, c in r.quad
            )
            scale = max(1.0, abs(r.rhs))
            if r.sense == "<=":
                bad = lhs - r.rhs
            elif r.sense == ">=":
                bad = r.rhs - lhs
            else:
                bad = abs(lhs - r.rhs)
            if bad > tol * scale:
                out.append((r.name, bad))
        return out

    def objective_value(self, values: dict) -> float:
        return math.fsum(c * values[v] for v, c in self.objective)


def to_program(model: ModelIR, fix: dict | None = None, relax: bool = False):
    """Convert to a kernel program; returns (program, name -> column index).

    ``fix`` pins variables to values; ``relax`` drops integrality. Square
    terms must appear with positive coefficients in <= rows.
    """
    from ..solve.kernel import Program

    prog = Program()
    col = {}
    for v in model.variables.values():
        lb, ub = v.lb, v.ub
        if fix and v.name in fix:
            lb = ub = float(fix[v.name])
        col[v.name] = prog.add_var(lb, ub, (v.kind != "continuous") and not relax)
    for r in model.constraints:
        idx = [col[v] for v, _ in r.linear]
        coef = [c for _, c in r.linear]
        if not r.quad:
            prog.add_row(idx, coef, r.sense, r.rhs)
            continue
        if r.bilinear:
            raise UnsupportedError(f"row {r.name} is bilinear; the convex kernel cannot solve it")
        sign = 1.0 if r.sense == "<=" else -1.0
        if r.sense == "=" or any(sign * c <= 0 for _, _, c in r.quad):
            raise UnsupportedError(f"row {r.name} is not a convex quadratic row")
        qi = np.array([col[u] for u, _, _ in r.quad])
        F = np.diag([math.sqrt(sign * c) for _, _, c in r.quad])
        prog.add_sumsq(qi, F, np.zeros(len(qi)), sign * r.rhs, idx, [sign * c for c in coef])
    prog.set_objective([col[v] for v, _ in model.objective], [c for _, c in model.objective])
    return prog, col


def solve_model(model: ModelIR, fix: dict | None = None, relax: bool = False, node_limit: int = 100_000):
    """Solve a convex mixed-integer model with the kernel's branch and bound."""
    prog, col = to_program(model, fix, relax)
    res = prog.solve(node_limit) if not relax else prog.relax()
    if not res.ok:
        return res, None
    return res, {name: float(res.x[j]) for name, j in col.items()}
