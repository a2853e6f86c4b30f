"""Small instance builders shared by the test modules."""

import numpy as np

from dfso.apps.adapters import knapsack_adapter, regression_adapter
from dfso.apps.synth import synth_knapsack, synth_regression
from dfso.instance import EfficiencyModel, FeasibleSet, Linear, PiecewiseMax, make_instance, with_v_star


def tiny_knapsack(seed: int, q: float = 1.0, eps: float = 0.2):
    """Binary knapsack with m = n between 3 and 8 items."""
    m = 3 + seed % 6
    return knapsack_adapter(synth_knapsack(m, seed), eps, q)


def tiny_suite(q: float, count: int = 20):
    return [tiny_knapsack(s, q) for s in range(count)]


def tiny_piecewise(seed: int, q: float = 1.0):
    """Binary x with a two-piece max utility and a linear cost band."""
    rng = np.random.default_rng(seed)
    n, m = 3, 4
    xi = rng.integers(-3, 4, (m, 2)).astype(float)
    p1 = Linear(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0]]), np.zeros(2), np.zeros(n), 0.0)
    p2 = Linear(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, -1.0]]), np.zeros(2), np.zeros(n), 1.0)
    C = rng.integers(1, 5, (m, n)).astype(float)
    eff = EfficiencyModel("linear", {"C": -C, "d": np.zeros(m)}, 0.5)
    fs = FeasibleSet.box(np.zeros(n), np.ones(n), integer=np.ones(n, bool))
    inst = make_instance(xi, ["a", "a", "b", "b"], PiecewiseMax((p1, p2)), eff, fs, q)
    return with_v_star(inst)


def regression_instance(m: int, seed: int, loss: str = "mae", eps: float = 0.1, kappa: int = 10, q: float = 2.0):
    pop, _ = synth_regression(m, kappa, seed)
    return regression_adapter(pop, loss, eps, q)


def shifted_instance(groups, lb=0.0, ub=1.0, q=2.0, eps=0.1):
    """One decision x; scenario (s, c) has utility s * x + c. ``groups`` maps label -> list of (s, c)."""
    rows, labels = [], []
    for g, pts in groups.items():
        rows += pts
        labels += [g] * len(pts)
    xi = np.array(rows, dtype=float)
    m = xi.shape[0]
    u = Linear(np.array([[1.0], [0.0]]), np.array([0.0, 1.0]), np.zeros(1), 0.0)
    eff = EfficiencyModel("linear", {"C": np.zeros((m, 1)), "d": np.ones(m)}, eps)
    return with_v_star(make_instance(xi, labels, u, eff, FeasibleSet.box([lb], [ub]), q))


def ksd_toy():
    # a = {0, 1}, b = {x, x, 1} with x in [0, 1/2]: KSD is 1/6 at x = 0 and 1/2 otherwise
    return shifted_instance({"a": [(0, 0), (0, 1)], "b": [(1, 0), (1, 0), (0, 1)]}, lb=0.0, ub=0.5, q=1.0)
