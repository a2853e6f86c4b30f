"""End-to-end DFSO solve: moment bounds, AM from several starts, scores."""

from __future__ import annotations

from ..errors import DfsoError, UnsupportedError
from ..instance import DfsoInstance, Linear
from .am import SolveReport, am_solve, default_start
from .bounds import GelbrichResult, gelbrich_am, group_moments, jensen_bound


def moment_bounds_apply(instance: DfsoInstance) -> bool:
    return isinstance(instance.utility, Linear) and not instance.feasible.integer.any()


def gelbrich_estimate(instance: DfsoInstance, starts=(), tol: float = 1e-6, max_iter: int = 200) -> GelbrichResult:
    """Smallest Gelbrich value reached by majorize-minimize from the given starts.

    The Gelbrich program is nonconvex; each run finds a local minimum. The
    efficiency optimum is always one of the starts.
    """
    if instance.q != 2:
        raise UnsupportedError("the Gelbrich bound is defined for q = 2")
    moments = group_moments(instance.population)
    best = None
    for x0 in [None, *starts]:
        r = gelbrich_am(instance, moments, tol=tol, max_iter=max_iter, x0=x0)
        if best is None or r.value < best.value:
            best = r
    return best


def solve_dfso(
    instance: DfsoInstance,
    tol: float = 1e-6,
    max_iter: int = 200,
    init: str = "best",
    bounds: bool = True,
) -> SolveReport:
    """AM with bounds attached.

    ``init``: "efficiency" starts from the efficiency optimum, "jensen" from
    the Jensen minimizer, "gelbrich" from the Gelbrich minimizer (q = 2), and
    "best" runs every applicable start and keeps the lowest objective. The
    moment-based starts need a linear utility and continuous x.
    """
    starts = []
    moments_ok = moment_bounds_apply(instance)
    use_gelbrich = moments_ok and instance.q == 2
    if init in ("efficiency", "best") or not moments_ok:
        starts.append(("efficiency", default_start(instance)))
    jb = None
    if moments_ok and init in ("jensen", "best"):
        jb = jensen_bound(instance)
        starts.append(("jensen", jb[1]))
    g = None
    if use_gelbrich and init in ("gelbrich", "best"):
        g = gelbrich_am(instance, tol=tol, max_iter=max_iter)
        starts.append(("gelbrich", g.x))
    best = None
    for name, x0 in starts:
        rep = am_solve(instance, x0, tol=tol, max_iter=max_iter)
        rep.bounds["start"] = name
        if best is None or rep.objective < best.objective:
            best = rep
    if bounds and isinstance(instance.utility, Linear):
        try:
            best.bounds["jensen"] = float((jb or jensen_bound(instance))[0])
        except DfsoError as exc:
            best.bounds["jensen_error"] = str(exc)
        if use_gelbrich:
            ge = gelbrich_estimate(instance, [best.x] + ([g.x] if g is not None else []), tol, max_iter)
            best.bounds["gelbrich"] = float(ge.value)
    return best


def gap_percent(upper: float, lower: float) -> float:
    """(UB - LB) / UB * 100, zero when both vanish."""
    if upper == 0:
        return 0.0
    return float((upper - lower) / upper * 100.0)
