"""LP-format text for ModelIR, with a bracketed quadratic extension.

Grammar (one statement per line, ``\\`` starts a comment)::

    \\ formulation <name>
    Minimize
     obj: <expr>
    Subject To
     <row>: <expr> <= | >= | = <number>
    Bounds
     <lb> <= <var> <= <ub>      or      <var> free
    Binaries
     <var>
    Generals
     <var>
    End

``<expr>`` is a sequence of ``+ c name`` / ``- c name`` terms, optionally
followed by ``+ [ + c u ^ 2 + c u * v ]``. Numbers are written with ``repr``
so every float survives a round trip. Bounds list every non-binary variable
in declaration order; empty sections are omitted.
"""

from __future__ import annotations

import json
import math
import re
from pathlib import Path

from ..errors import ConstructionError, ParseError
from .model import ModelIR

NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_.]*$")
SECTIONS = {"minimize": "obj", "subject to": "rows", "bounds": "bounds", "binaries": "bin", "generals": "gen", "end": "end"}


def _num(c: float) -> str:
    return repr(float(c))


def _signed(c: float) -> str:
    sign = "-" if math.copysign(1.0, c) < 0 else "+"
    return f"{sign} {_num(abs(c))}"


def _expr(linear, quad=()) -> str:
    parts = [f"{_signed(c)} {v}" for v, c in linear]
    if quad:
        inner = [f"{_signed(c)} {u} ^ 2" if u == v else f"{_signed(c)} {u} * {v}" for u, v, c in quad]
        parts.append("+ [ " + " ".join(inner) + " ]")
    return " ".join(parts)


def emit_lp(model: ModelIR) -> str:
    model.validate()
    lines = [f"\\ formulation {model.formulation}", "Minimize", f" obj: {_expr(model.objective)}".rstrip()]
    if model.constraints:
        lines.append("Subject To")
        for r in model.constraints:
            lines.append(f" {r.name}: {_expr(r.linear, r.quad)} {r.sense} {_num(r.rhs)}")
    cont = [v for v in model.variables.values() if v.kind != "binary"]
    if cont:
        lines.append("Bounds")
        for v in cont:
            if v.lb == -math.inf and v.ub == math.inf:
                lines.append(f" {v.name} free")
            else:
                lines.append(f" {_num(v.lb)} <= {v.name} <= {_num(v.ub)}")
    binaries = [v.name for v in model.variables.values() if v.kind == "binary"]
    if binaries:
        lines.append("Binaries")
        lines.extend(f" {n}" for n in binaries)
    generals = [v.name for v in model.variables.values() if v.kind == "integer"]
    if generals:
        lines.append("Generals")
        lines.extend(f" {n}" for n in generals)
    lines.append("End")
    return "\n".join(lines) + "\n"


def _float(tok: str, line: int) -> float:
    t = tok.lower()
    if t in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    if t in ("-inf", "-infinity"):
        return -math.inf
    try:
        return float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", line) from None


def _name(tok: str, line: int) -> str:
    if not NAME.match(tok):
        raise ParseError(f"bad variable name {tok!r}", line)
    return tok


def _parse_expr(tokens: list[str], line: int):
    lin, quad = [], []
    k = 0
    while k < len(tokens):
        sign = tokens[k]
        if sign not in ("+", "-"):
            raise ParseError(f"expected '+' or '-', got {sign!r}", line)
        if k + 1 < len(tokens) and tokens[k + 1] == "[":
            if sign != "+":
                raise ParseError("a quadratic block must be added with '+'", line)
            try:
                end = tokens.index("]", k + 2)
            except ValueError:
                raise ParseError("unterminated quadratic block", line) from None
            quad.extend(_parse_quad(tokens[k + 2 : end], line))
            k = end + 1
            continue
        if k + 2 >= len(tokens):
            raise ParseError("incomplete term", line)
        c = _float(tokens[k + 1], line)
        lin.append((_name(tokens[k + 2], line), -c if sign == "-" else c))
        k += 3
    return lin, quad


def _parse_quad(tokens: list[str], line: int):
    out = []
    k = 0
    while k < len(tokens):
        if k + 5 > len(tokens):
            raise ParseError("incomplete quadratic term", line)
        sign, c, u, op, v = tokens[k : k + 5]
        if sign not in ("+", "-"):
            raise ParseError(f"expected '+' or '-', got {sign!r}", line)
        c = _float(c, line)
        c = -c if sign == "-" else c
        u = _name(u, line)
        if op == "^":
            if v != "2":
                raise ParseError("only squares are supported", line)
            out.append((u, u, c))
        elif op == "*":
            out.append((u, _name(v, line), c))
        else:
            raise ParseError(f"expected '^' or '*', got {op!r}", line)
        k += 5
    return out


def parse_lp(text: str) -> ModelIR:
    formulation = "unknown"
    section = None
    objective = None
    rows, bounds, binaries, generals = [], [], [], []
    ended = False
    for no, raw in enumerate(text.splitlines(), start=1):
        if raw.startswith("\\"):
            m = re.match(r"\\\s*formulation\s+(\S+)\s*$", raw)
            if m:
                formulation = m.group(1)
            continue
        body = raw.split("\\", 1)[0].strip()
        if not body:
            continue
        if ended:
            raise ParseError("content after End", no)
        key = " ".join(body.lower().split())
        if key in SECTIONS:
            section = SECTIONS[key]
            ended = section == "end"
            continue
        if section is None:
            raise ParseError("statement before the Minimize section", no)
        if section == "obj":
            if objective is not None:
                raise ParseError("objective given twice", no)
            name, sep, rest = body.partition(":")
            if not sep:
                raise ParseError("objective needs a 'name:' label", no)
            lin, quad = _parse_expr(rest.split(), no)
            if quad:
                raise ParseError("quadratic objectives are not supported", no)
            objective = lin
        elif section == "rows":
            name, sep, rest = body.partition(":")
            if not sep:
                raise ParseError("row needs a 'name:' label", no)
            toks = rest.split()
            if len(toks) < 2 or toks[-2] not in ("<=", ">=", "="):
                raise ParseError("row must end with '<sense> <rhs>'", no)
            lin, quad = _parse_expr(toks[:-2], no)
            rows.append((_name(name.strip(), no), lin, toks[-2], _float(toks[-1], no), quad))
        elif section == "bounds":
            toks = body.split()
            if len(toks) == 2 and toks[1].lower() == "free":
                bounds.append((_name(toks[0], no), -math.inf, math.inf))
            elif len(toks) == 5 and toks[1] == "<=" and toks[3] == "<=":
                bounds.append((_name(toks[2], no), _float(toks[0], no), _float(toks[4], no)))
            else:
                raise ParseError(f"unrecognized bound {body!r}", no)
        elif section == "bin":
            binaries.extend(_name(t, no) for t in body.split())
        elif section == "gen":
            generals.extend(_name(t, no) for t in body.split())
    if not ended:
        raise ParseError("missing End", len(text.splitlines()) or 1)
    if objective is None:
        raise ParseError("missing objective", 1)
    try:
        return _assemble(formulation, objective, rows, bounds, binaries, generals)
    except ConstructionError as exc:
        raise ParseError(str(exc)) from None


def _assemble(formulation, objective, rows, bounds, binaries, generals) -> ModelIR:
    model = ModelIR(formulation)
    general = set(generals)
    for name, lb, ub in bounds:
        model.add_var(name, lb, ub, "integer" if name in general else "continuous")
    for name in binaries:
        model.add_var(name, kind="binary")
    for name in generals:
        if name not in model.variables:
            model.add_var(name, 0.0, math.inf, "integer")
    referenced = {v for v, _ in objective}
    for r in rows:
        referenced.update(v for v, _ in r[1])
        referenced.update(u for u, _, _ in r[4])
        referenced.update(v for _, v, _ in r[4])
    for name in sorted(referenced - set(model.variables)):
        model.add_var(name)
    for name, lin, sense, rhs, quad in rows:
        model.add_row(name, lin, sense, rhs, quad)
    model.set_objective(objective)
    return model.seal()


def sidecar(model: ModelIR) -> dict:
    return {"formulation": model.formulation, "counts": model.counts(), "meta": model.meta}


def write_model(model: ModelIR, path) -> tuple[Path, Path]:
    """Write ``path`` (LP text) and ``path`` with suffix .json (metadata)."""
    path = Path(path)
    path.write_text(emit_lp(model))
    side = path.with_suffix(".json")
    side.write_text(json.dumps(sidecar(model), indent=1, sort_keys=True) + "\n")
    return path, side
