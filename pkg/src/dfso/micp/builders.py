"""Mixed-integer formulations of the fairness epigraph WD_q^q(x) <= nu.

Every builder shares a base block: decision variables x_j with the feasible
rows, the efficiency band, and one utility variable w_i per scenario tied to
x through its graph. Variables are named deterministically:

    x_j            decision                 w_i          utility of scenario i
    sel_i_t        piece selector           dev_i, res_i band auxiliaries
    nu             fairness epigraph        cost         efficiency value (KSD)
    pi_i_j, z_i_j  plan / support (i in group a, j in group abar)
    t_k_p          k-th order statistic of group p
    z_i_k_p        scenario i among the k smallest of group p
    eta_c_a_b      quantile gap on merged-grid cell c of pair (a, b)

Scenario indices are global and 0-based; levels k are 1-based.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction

import numpy as np

from ..errors import ConstructionError, DomainError, UnsupportedError
from ..instance import BigM, DfsoInstance, Linear, compute_big_m, piece_ranges, utilities, utility_kind
from ..measures import merged_grid
from .model import ModelIR

FORMULATIONS = ("vanilla", "discretized", "complementary", "quantile", "aggregate-quantile")


def _check_q(instance: DfsoInstance) -> int:
    q = instance.q
    if q not in (1, 2):
        raise UnsupportedError("model builders support q = 1 or q = 2 only")
    return int(q)


def _terms(names, coefs):
    return [(n, float(c)) for n, c in zip(names, coefs) if c != 0.0]


# ------------------------------------------------------------ base block


def _decision(model: ModelIR, instance: DfsoInstance) -> list[str]:
    fs = instance.feasible
    xs = []
    for j in range(fs.n):
        if fs.integer[j] and fs.lb[j] == 0.0 and fs.ub[j] == 1.0:
            kind = "binary"
        elif fs.integer[j]:
            kind = "integer"
        else:
            kind = "continuous"
        xs.append(model.add_var(f"x_{j}", fs.lb[j], fs.ub[j], kind))
    for r in range(fs.G.shape[0]):
        model.add_row(f"feas_g_{r}", _terms(xs, fs.G[r]), "<=", fs.h[r])
    for r in range(fs.E.shape[0]):
        model.add_row(f"feas_e_{r}", _terms(xs, fs.E[r]), "=", fs.e[r])
    return xs


def _efficiency_expr(model: ModelIR, instance: DfsoInstance, xs: list[str]):
    """Linear terms (and quadratic terms) whose value is E(x), minus a constant."""
    eff = instance.efficiency
    p = eff.params
    if eff.kind == "linear":
        C, d = np.atleast_2d(p["C"]), np.asarray(p["d"], dtype=float)
        return _terms(xs, C.mean(axis=0)), (), float(d.mean())
    if eff.kind == "mae":
        D, y = np.atleast_2d(p["D"]), np.asarray(p["y"], dtype=float)
        m = D.shape[0]
        if "dev_0" in model.variables:
            return [(f"dev_{i}", 1.0 / m) for i in range(m)], (), 0.0
        devs = []
        for i in range(m):
            dv = model.add_var(f"dev_{i}", 0.0)
            model.add_row(f"dev_pos_{i}", _terms(xs, D[i]) + [(dv, -1.0)], "<=", y[i])
            model.add_row(f"dev_neg_{i}", _terms(xs, -D[i]) + [(dv, -1.0)], "<=", -y[i])
            devs.append(dv)
        return [(dv, 1.0 / m) for dv in devs], (), 0.0
    if eff.kind == "mse":
        D, y = np.atleast_2d(p["D"]), np.asarray(p["y"], dtype=float)
        m = D.shape[0]
        if "res_0" in model.variables:
            return [], tuple((f"res_{i}", f"res_{i}", 1.0 / m) for i in range(m)), 0.0
        quad = []
        for i in range(m):
            rv = model.add_var(f"res_{i}", -math.inf, math.inf)
            model.add_row(f"res_def_{i}", [(rv, 1.0)] + _terms(xs, -D[i]), "=", -y[i])
            quad.append((rv, rv, 1.0 / m))
        return [], tuple(quad), 0.0
    if eff.kind == "neg_value":
        return _terms(xs, np.asarray(p["v"], dtype=float)), (), 0.0
    raise UnsupportedError("the geometric-mean band has no mixed-integer linear or quadratic form")


def _band(model: ModelIR, instance: DfsoInstance, xs: list[str]) -> None:
    eff = instance.efficiency
    if not eff.has_band:
        return
    lin, quad, const = _efficiency_expr(model, instance, xs)
    lim = eff.limit()
    if eff.maximize:
        model.add_row("band", lin, ">=", lim - eff.abs_slack - const)
    else:
        model.add_row("band", lin, "<=", lim + eff.abs_slack - const, quad)


def _cost(model: ModelIR, instance: DfsoInstance, xs: list[str]) -> str:
    """Variable equal to the minimized efficiency objective (negated for maximize kinds)."""
    lin, quad, const = _efficiency_expr(model, instance, xs)
    c = model.add_var("cost", -math.inf, math.inf)
    sign = -1.0 if instance.efficiency.maximize else 1.0
    if quad:
        model.add_row("cost_def", [(c, -1.0)], "<=", -const, quad)
    else:
        model.add_row("cost_def", [(c, 1.0)] + [(v, -sign * k) for v, k in lin], "=", sign * const)
    return c


def _utility_rows(model: ModelIR, instance: DfsoInstance, xs: list[str], bigm: BigM) -> list[str]:
    u = instance.utility
    scen = instance.population.scenarios
    fs = instance.feasible
    ws = [model.add_var(f"w_{i}", -bigm.M[i], bigm.M[i]) for i in range(scen.shape[0])]
    if isinstance(u, Linear):
        G, h = u.affine(scen)
        for i, w in enumerate(ws):
            model.add_row(f"util_{i}", [(w, 1.0)] + _terms(xs, -G[i]), "=", h[i])
        return ws
    pieces = u.as_pieces()
    kind = utility_kind(u)
    lo_p, hi_p = piece_ranges(u, scen, fs.lb, fs.ub)
    lo_u, hi_u = (lo_p.max(0), hi_p.max(0)) if kind == "max" else (lo_p.min(0), hi_p.min(0))
    for i, w in enumerate(ws):
        sel = [model.add_var(f"sel_{i}_{t}", kind="binary") for t in range(len(pieces))]
        model.add_row(f"sel_sum_{i}", [(s, 1.0) for s in sel], "=", 1.0)
        for t, p in enumerate(pieces):
            g, h = p.affine(scen[i : i + 1])
            g, h = g[0], float(h[0])
            if kind == "max":
                bm = float(hi_u[i] - lo_p[t, i])
                model.add_row(f"util_lo_{i}_{t}", [(w, 1.0)] + _terms(xs, -g), ">=", h)
                model.add_row(f"util_hi_{i}_{t}", [(w, 1.0)] + _terms(xs, -g) + [(sel[t], bm)], "<=", h + bm)
            else:
                bm = float(hi_p[t, i] - lo_u[i])
                model.add_row(f"util_hi_{i}_{t}", [(w, 1.0)] + _terms(xs, -g), "<=", h)
                model.add_row(f"util_lo_{i}_{t}", [(w, 1.0)] + _terms(xs, -g) + [(sel[t], -bm)], ">=", h - bm)
    return ws


def _base(formulation: str, instance: DfsoInstance, bigm: BigM | None, band: bool = True):
    if instance.efficiency.v_star is None:
        raise DomainError("V* must be set before building a model")
    bigm = bigm or compute_big_m(instance)
    model = ModelIR(formulation)
    model.meta.update(
        {
            "q": float(instance.q),
            "big_m": [float(v) for v in bigm.M],
            "groups": [str(g) for g in instance.population.groups],
            "group_sizes": [len(instance.population.indices(p)) for p in range(len(instance.population.groups))],
        }
    )
    xs = _decision(model, instance)
    if band:
        _band(model, instance, xs)
    ws = _utility_rows(model, instance, xs, bigm)
    return model, xs, ws, bigm


def _epigraph(model: ModelIR, name: str, q: int, names, weights, nu: str) -> None:
    """sum weights * v^q <= nu."""
    if q == 1:
        model.add_row(name, [(v, c) for v, c in zip(names, weights)] + [(nu, -1.0)], "<=", 0.0)
    else:
        model.add_row(name, [(nu, -1.0)], "<=", 0.0, [(v, v, c) for v, c in zip(names, weights)])


def _abs_rows(model: ModelIR, name: str, a: str, b: str, bound: str) -> None:
    """|a - b| <= bound."""
    model.add_row(f"{name}_p", [(a, 1.0), (b, -1.0), (bound, -1.0)], "<=", 0.0)
    model.add_row(f"{name}_n", [(a, -1.0), (b, 1.0), (bound, -1.0)], "<=", 0.0)


def _nu(model: ModelIR) -> str:
    nu = model.add_var("nu", 0.0)
    model.set_objective([(nu, 1.0)])
    return nu


# ------------------------------------------------------------ formulations


def build_vanilla(instance: DfsoInstance, bigm: BigM | None = None) -> ModelIR:
    """Transportation plan pi with bilinear epigraph sum pi_ij |w_i - w_j|^q <= nu."""
    q = _check_q(instance)
    model, xs, ws, bigm = _base("vanilla", instance, bigm)
    nu = _nu(model)
    pop = instance.population
    for a, b in pop.group_pairs():
        ia, ib = pop.indices(a), pop.indices(b)
        cap = min(1.0 / ia.size, 1.0 / ib.size)
        quad = []
        for i in ia:
            for j in ib:
                pi = model.add_var(f"pi_{i}_{j}", 0.0, cap)
                d = model.add_var(f"d_{i}_{j}", 0.0, bigm.M[i] + bigm.M[j])
                _abs_rows(model, f"dabs_{i}_{j}", ws[i], ws[j], d)
                if q == 2:
                    g = model.add_var(f"gap_{i}_{j}", 0.0, (bigm.M[i] + bigm.M[j]) ** 2)
                    model.add_row(f"gap_def_{i}_{j}", [(g, -1.0)], "<=", 0.0, [(d, d, 1.0)])
                    d = g
                quad.append((pi, d, 1.0))
        for i in ia:
            model.add_row(f"marg_row_{i}_{b}", [(f"pi_{i}_{j}", 1.0) for j in ib], "=", 1.0 / ia.size)
        for j in ib:
            model.add_row(f"marg_col_{j}_{a}", [(f"pi_{i}_{j}", 1.0) for i in ia], "=", 1.0 / ib.size)
        model.add_row(f"epi_{a}_{b}", [(nu, -1.0)], "<=", 0.0, quad)
    return model.seal()


def bit_planes(m_a: int, m_b: int) -> int:
    """ceil(log2(min(m_a, m_b))) + 1 binary digits per integral plan entry."""
    return (min(m_a, m_b) - 1).bit_length() + 1


def build_discretized(
    instance: DfsoInstance,
    bigm: BigM | None = None,
    support_cut: bool = False,
    inflate_big_m: bool = False,
) -> ModelIR:
    """Integral plan m_a m_abar pi written in binary digits z_i_j_k.

    ``inflate_big_m`` scales the McCormick bounds by Omega/(Omega - 1), the
    bound used in the relaxation analysis.
    """
    q = _check_q(instance)
    model, xs, ws, bigm = _base("discretized", instance, bigm)
    nu = _nu(model)
    pop = instance.population
    planes = {}
    for a, b in pop.group_pairs():
        ia, ib = pop.indices(a), pop.indices(b)
        ma, mb = ia.size, ib.size
        om = bit_planes(ma, mb)
        planes[f"{a}_{b}"] = om
        fac = om / (om - 1) if inflate_big_m and om > 1 else 1.0
        names, weights = [], []
        for i in ia:
            for j in ib:
                Mi, Mj = fac * bigm.M[i], fac * bigm.M[j]
                for k in range(1, om + 1):
                    z = model.add_var(f"z_{i}_{j}_{k}", kind="binary")
                    z1 = model.add_var(f"zb1_{i}_{j}_{k}", -Mi, Mi)
                    z2 = model.add_var(f"zb2_{i}_{j}_{k}", -Mj, Mj)
                    wh = model.add_var(f"what_{i}_{j}_{k}", 0.0, Mi + Mj)
                    model.mccormick(f"mc1_{i}_{j}_{k}", z1, z, ws[i], 0.0, 1.0, -Mi, Mi)
                    model.mccormick(f"mc2_{i}_{j}_{k}", z2, z, ws[j], 0.0, 1.0, -Mj, Mj)
                    _abs_rows(model, f"wabs_{i}_{j}_{k}", z1, z2, wh)
                    names.append(wh)
                    weights.append(2 ** (k - 1) / (ma * mb))
                if support_cut:
                    zh = model.add_var(f"zhat_{i}_{j}", kind="binary")
                    for k in range(1, om + 1):
                        model.add_row(f"zhat_link_{i}_{j}_{k}", [(zh, 1.0), (f"z_{i}_{j}_{k}", -1.0)], ">=", 0.0)
        for j in ib:
            terms = [(f"z_{i}_{j}_{k}", 2 ** (k - 1)) for i in ia for k in range(1, om + 1)]
            model.add_row(f"gamma_col_{j}_{a}", terms, "=", ma)
        for i in ia:
            terms = [(f"z_{i}_{j}_{k}", 2 ** (k - 1)) for j in ib for k in range(1, om + 1)]
            model.add_row(f"gamma_row_{i}_{b}", terms, "=", mb)
        if support_cut:
            model.add_row(f"support_{a}_{b}", [(f"zhat_{i}_{j}", 1.0) for i in ia for j in ib], "<=", ma + mb)
        _epigraph(model, f"epi_{a}_{b}", q, names, weights, nu)
    model.meta["bit_planes"] = planes
    model.meta["inflate_big_m"] = inflate_big_m
    return model.seal()


def build_complementary(instance: DfsoInstance, bigm: BigM | None = None, cap: float | None = None) -> ModelIR:
    """Plan pi and transportation duals (mu, lam) tied by complementary slackness.

    The slack big-M is sum (M_i + M_j)^q over the pair. When it overflows a
    ``cap`` must be supplied; the cap is then used with a warning.
    """
    q = _check_q(instance)
    model, xs, ws, bigm = _base("complementary", instance, bigm)
    nu = _nu(model)
    pop = instance.population
    big = {}
    for a, b in pop.group_pairs():
        ia, ib = pop.indices(a), pop.indices(b)
        ma, mb = ia.size, ib.size
        W = bigm.complementary[(a, b)]
        if not math.isfinite(W) or W > 1e300:
            if cap is None:
                raise ConstructionError(
                    f"complementary big-M for pair {a}-{b} overflows; tighten the box, rescale the "
                    "utilities, or pass an explicit cap"
                )
            warnings.warn(f"complementary big-M for pair {a}-{b} overflows; using cap {cap}", RuntimeWarning)
            W = float(cap)
        big[f"{a}_{b}"] = W
        mus = [model.add_var(f"mu_{a}_{b}_{i}", -math.inf, math.inf) for i in ia]
        lams = [model.add_var(f"lam_{a}_{b}_{j}", -math.inf, math.inf) for j in ib]
        model.add_row(
            f"dual_obj_{a}_{b}", [(v, 1.0 / ma) for v in mus] + [(v, 1.0 / mb) for v in lams] + [(nu, -1.0)], "<=", 0.0
        )
        step = min(1.0 / ma, 1.0 / mb)
        for r, i in enumerate(ia):
            for s, j in enumerate(ib):
                Mij = bigm.M[i] + bigm.M[j]
                pi = model.add_var(f"pi_{i}_{j}", 0.0)
                z = model.add_var(f"z_{i}_{j}", kind="binary")
                w = model.add_var(f"wq_{i}_{j}", 0.0, Mij**q)
                wh = model.add_var(f"what_{i}_{j}", 0.0, Mij)
                _abs_rows(model, f"wabs_{i}_{j}", ws[i], ws[j], wh)
                if q == 1:
                    model.add_row(f"wq_def_{i}_{j}", [(w, 1.0), (wh, -1.0)], ">=", 0.0)
                else:
                    model.add_row(f"wq_def_{i}_{j}", [(w, -1.0)], "<=", 0.0, [(wh, wh, 1.0)])
                slack = [(w, 1.0), (mus[r], -1.0), (lams[s], -1.0)]
                model.add_row(f"slack_lo_{i}_{j}", slack, ">=", 0.0)
                model.add_row(f"slack_hi_{i}_{j}", slack + [(z, W)], "<=", W)
                model.add_row(f"link_{i}_{j}", [(pi, 1.0), (z, -step)], "<=", 0.0)
        for i in ia:
            model.add_row(f"marg_row_{i}_{b}", [(f"pi_{i}_{j}", 1.0) for j in ib], "=", 1.0 / ma)
        for j in ib:
            model.add_row(f"marg_col_{j}_{a}", [(f"pi_{i}_{j}", 1.0) for i in ia], "=", 1.0 / mb)
    model.meta["slack_big_m"] = big
    return model.seal()


def _order_rows(model: ModelIR, instance: DfsoInstance, ws: list[str], bigm: BigM, p: int, literal: bool) -> None:
    """Order statistics t_k_p, k = 1..m_p, through selector binaries."""
    pop = instance.population
    idx = pop.indices(p)
    mt = float(np.max(bigm.M[idx]))
    for k in range(1, idx.size + 1):
        t = model.add_var(f"t_{k}_{p}", -mt, mt)
        zs, pis, ths = [], [], []
        for i in idx:
            z = model.add_var(f"z_{i}_{k}_{p}", kind="binary")
            pi = model.add_var(f"pi_{i}_{k}_{p}", kind="binary")
            th = model.add_var(f"th_{i}_{k}_{p}", -bigm.M[i], bigm.M[i])
            model.add_row(f"pick_{i}_{k}_{p}", [(pi, 1.0), (z, -1.0)], "<=", 0.0)
            c_ge, c_le = bigm.quantile_coeffs(p, int(i), k, literal)
            model.add_row(f"ord_ge_{i}_{k}_{p}", [(t, 1.0), (ws[i], -1.0), (z, -c_ge)], ">=", -c_ge)
            model.add_row(f"ord_le_{i}_{k}_{p}", [(t, 1.0), (ws[i], -1.0), (z, -c_le)], "<=", 0.0)
            model.mccormick(f"mct_{i}_{k}_{p}", th, pi, ws[i], 0.0, 1.0, -bigm.M[i], bigm.M[i])
            zs.append(z)
            pis.append(pi)
            ths.append(th)
        model.add_row(f"zsum_{k}_{p}", [(z, 1.0) for z in zs], "=", k)
        model.add_row(f"pisum_{k}_{p}", [(v, 1.0) for v in pis], "=", 1.0)
        model.add_row(f"tdef_{k}_{p}", [(t, 1.0)] + [(v, -1.0) for v in ths], "=", 0.0)


def _aggregate_rows(model: ModelIR, instance: DfsoInstance, ws: list[str], bigm: BigM, p: int) -> None:
    """Partial sums tb_k_p of the k smallest utilities; t_k_p = tb_k_p - tb_(k-1)_p."""
    pop = instance.population
    idx = pop.indices(p)
    mt = float(np.max(bigm.M[idx]))
    for k in range(1, idx.size + 1):
        tb = model.add_var(f"tb_{k}_{p}", -k * mt, k * mt)
        t = model.add_var(f"t_{k}_{p}", -mt, mt)
        pk = model.add_var(f"pk_{k}_{p}", -math.inf, math.inf)
        zs, ss, rhos = [], [], []
        for i in idx:
            z = model.add_var(f"z_{i}_{k}_{p}", kind="binary")
            s = model.add_var(f"s_{i}_{k}_{p}", -bigm.M[i], bigm.M[i])
            rho = model.add_var(f"rho_{i}_{k}_{p}", 0.0)
            model.mccormick(f"mcs_{i}_{k}_{p}", s, z, ws[i], 0.0, 1.0, -bigm.M[i], bigm.M[i])
            model.add_row(f"dual_{i}_{k}_{p}", [(pk, 1.0), (rho, -1.0), (ws[i], -1.0)], "<=", 0.0)
            zs.append(z)
            ss.append(s)
            rhos.append(rho)
        model.add_row(f"zsum_{k}_{p}", [(z, 1.0) for z in zs], "=", k)
        model.add_row(f"tb_up_{k}_{p}", [(tb, 1.0), (pk, -float(k))] + [(r, 1.0) for r in rhos], "<=", 0.0)
        model.add_row(f"tb_lo_{k}_{p}", [(tb, 1.0)] + [(s, -1.0) for s in ss], ">=", 0.0)
        prev = [(f"tb_{k - 1}_{p}", 1.0)] if k > 1 else []
        model.add_row(f"tdef_{k}_{p}", [(t, 1.0), (tb, -1.0)] + prev, "=", 0.0)


def _order_cuts(model: ModelIR, instance: DfsoInstance, p: int) -> None:
    """Sorted quantiles and nested k-smallest sets."""
    idx = instance.population.indices(p)
    for k in range(1, idx.size):
        model.add_row(f"cut_t_{k}_{p}", [(f"t_{k}_{p}", 1.0), (f"t_{k + 1}_{p}", -1.0)], "<=", 0.0)
        for i in idx:
            model.add_row(f"cut_z_{i}_{k}_{p}", [(f"z_{i}_{k}_{p}", 1.0), (f"z_{i}_{k + 1}_{p}", -1.0)], "<=", 0.0)


def _grid_rows(model: ModelIR, instance: DfsoInstance, nu: str, q: int) -> None:
    pop = instance.population
    for a, b in pop.group_pairs():
        g = merged_grid(pop.indices(a).size, pop.indices(b).size)
        names = []
        for c in range(g.n_cells):
            eta = model.add_var(f"eta_{c}_{a}_{b}", 0.0)
            _abs_rows(model, f"gap_{c}_{a}_{b}", f"t_{g.idx_a[c] + 1}_{a}", f"t_{g.idx_b[c] + 1}_{b}", eta)
            names.append(eta)
        _epigraph(model, f"epi_{a}_{b}", q, names, g.width_f, nu)


def build_quantile(
    instance: DfsoInstance, bigm: BigM | None = None, cuts: bool = False, literal_big_m: bool = False
) -> ModelIR:
    """Order statistics from selector binaries, then quantile gaps on the merged grid."""
    q = _check_q(instance)
    model, xs, ws, bigm = _base("quantile", instance, bigm)
    nu = _nu(model)
    for p in range(len(instance.population.groups)):
        _order_rows(model, instance, ws, bigm, p, literal_big_m)
        if cuts:
            _order_cuts(model, instance, p)
    _grid_rows(model, instance, nu, q)
    model.meta.update({"cuts": cuts, "literal_big_m": literal_big_m})
    return model.seal()


def build_aggregate_quantile(instance: DfsoInstance, bigm: BigM | None = None, cuts: bool = False) -> ModelIR:
    """Partial sums of order statistics bracketed by an LP dual and a McCormick primal."""
    q = _check_q(instance)
    model, xs, ws, bigm = _base("aggregate-quantile", instance, bigm)
    nu = _nu(model)
    for p in range(len(instance.population.groups)):
        _aggregate_rows(model, instance, ws, bigm, p)
        if cuts:
            _order_cuts(model, instance, p)
    _grid_rows(model, instance, nu, q)
    model.meta["cuts"] = cuts
    return model.seal()


def build(formulation: str, instance: DfsoInstance, bigm: BigM | None = None, cuts: bool = False) -> ModelIR:
    name = formulation.replace("_", "-")
    if name == "vanilla":
        return build_vanilla(instance, bigm)
    if name == "discretized":
        return build_discretized(instance, bigm, support_cut=cuts)
    if name == "complementary":
        return build_complementary(instance, bigm)
    if name == "quantile":
        return build_quantile(instance, bigm, cuts)
    if name == "aggregate-quantile":
        return build_aggregate_quantile(instance, bigm, cuts)
    raise DomainError(f"unknown formulation {formulation!r}")


# ------------------------------------------------------------ KSD sublevel


def ksd_level_grid(m_a: int, m_b: int) -> list[Fraction]:
    """Sorted distinct values |i/m_a - j/m_b|, i in 0..m_a, j in 0..m_b."""
    if m_a < 1 or m_b < 1:
        raise DomainError("group sizes must be at least 1")
    return sorted({abs(Fraction(i, m_a) - Fraction(j, m_b)) for i in range(m_a + 1) for j in range(m_b + 1)})


def instance_ksd_grid(instance: DfsoInstance) -> list[Fraction]:
    pop = instance.population
    out = set()
    for a, b in pop.group_pairs():
        out.update(ksd_level_grid(pop.indices(a).size, pop.indices(b).size))
    return sorted(out)


def as_level(delta, grid) -> Fraction:
    """Exact grid member equal to delta; floats must match within 1e-12."""
    if isinstance(delta, float):
        best = min(grid, key=lambda g: abs(float(g) - delta))
        if abs(float(best) - delta) > 1e-12:
            raise DomainError(f"level {delta} is not on the KSD grid")
        return best
    d = Fraction(delta)
    if d not in grid:
        raise DomainError(f"level {d} is not on the KSD grid")
    return d


def ksd_indices(m_a: int, m_b: int, delta: Fraction, rule: str = "exact"):
    """Row indices for KSD <= delta between groups of sizes m_a and m_b.

    Returns (lower, upper): lower[i] for i = 1..m_a gives L with t_L(b) <= t_i(a);
    upper[i] for i = 0..m_a-1 gives U with t_(i+1)(a) <= t_U(b). Index 0 and
    m_b + 1 are the infinite sentinels; callers omit those rows.

    ``rule="exact"`` uses ceil for the lower index and min(., 1) for the upper
    one, which is what F_b within delta of F_a on each step of F_a requires.
    ``rule="literal"`` uses floor and max(., 1) and rejects indices outside
    [0, m_b + 1].
    """
    if rule not in ("exact", "literal"):
        raise DomainError(f"unknown index rule {rule!r}")
    delta = Fraction(delta)
    lower, upper = {}, {}
    for i in range(1, m_a + 1):
        v = max(Fraction(i, m_a) - delta, Fraction(0)) * m_b
        lower[i] = math.ceil(v) if rule == "exact" else math.floor(v)
    for i in range(0, m_a):
        s = Fraction(i, m_a) + delta
        s = min(s, Fraction(1)) if rule == "exact" else max(s, Fraction(1))
        upper[i] = math.floor(s * m_b) + 1
    for v in list(lower.values()) + list(upper.values()):
        if v < 0 or v > m_b + 1:
            raise ConstructionError(f"KSD row index {v} outside [0, {m_b + 1}]")
    return lower, upper


def build_ksd_sublevel(instance: DfsoInstance, delta, bigm: BigM | None = None, rule: str = "exact", cuts: bool = True) -> ModelIR:
    """Minimize the efficiency value subject to KSD(x) <= delta and the band."""
    grid = instance_ksd_grid(instance)
    d = as_level(delta, grid)
    model, xs, ws, bigm = _base("ksd-sublevel", instance, bigm)
    cost = _cost(model, instance, xs)
    model.set_objective([(cost, 1.0)])
    pop = instance.population
    for p in range(len(pop.groups)):
        _order_rows(model, instance, ws, bigm, p, False)
        if cuts:
            _order_cuts(model, instance, p)
    for a, b in pop.group_pairs():
        ma, mb = pop.indices(a).size, pop.indices(b).size
        lower, upper = ksd_indices(ma, mb, d, rule)
        for i, L in lower.items():
            if 1 <= L <= mb:
                model.add_row(f"ksd_lo_{a}_{b}_{i}", [(f"t_{L}_{b}", 1.0), (f"t_{i}_{a}", -1.0)], "<=", 0.0)
        for i, U in upper.items():
            if 1 <= U <= mb:
                model.add_row(f"ksd_up_{a}_{b}_{i}", [(f"t_{i + 1}_{a}", 1.0), (f"t_{U}_{b}", -1.0)], "<=", 0.0)
    model.meta.update({"delta": str(d), "rule": rule, "cuts": cuts})
    return model.seal()


# ------------------------------------------------------------ relaxation floors


def relaxation_floor(instance: DfsoInstance, formulation: str, candidates=None) -> float:
    """Closed-form value of the continuous relaxation.

    Discretized and complementary relax to 0. For the quantile formulation the
    value is the last merged-grid cell width times the gap of the group maxima,
    raised to q; for the aggregate-quantile formulation it is the gap of the
    group means raised to q (a lower bound on its relaxation). Both are
    minimized over ``candidates`` (default: the efficiency optimum), max over
    pairs.
    """
    name = formulation.replace("_", "-")
    if name in ("discretized", "complementary"):
        return 0.0
    if name not in ("quantile", "aggregate-quantile"):
        raise DomainError(f"no relaxation floor for {formulation!r}")
    if candidates is None:
        from ..solve.kernel import efficiency_optimum

        candidates = [efficiency_optimum(instance)[1]]
    pop = instance.population
    q = float(instance.q)
    best = math.inf
    for x in candidates:
        u = utilities(instance.utility, np.asarray(x, dtype=float), pop.scenarios)
        val = 0.0
        for a, b in pop.group_pairs():
            ua, ub = u[pop.indices(a)], u[pop.indices(b)]
            if name == "quantile":
                g = merged_grid(ua.size, ub.size)
                v = float(g.width_f[-1]) * abs(ua.max() - ub.max()) ** q
            else:
                v = abs(ua.mean() - ub.mean()) ** q
            val = max(val, v)
        best = min(best, val)
    return best
