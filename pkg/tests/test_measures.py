import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfso.errors import DomainError, ResourceError
from dfso.measures import (
    EmpiricalDist,
    demographic_parity,
    is_staircase,
    ksd,
    ksd_wd_sandwich,
    merged_grid,
    ot_bruteforce,
    quantile,
    transport_plan,
    wasserstein1_via_cdf,
    wasserstein_q_pow,
    wd_fairness,
)

samples = st.lists(st.integers(-20, 20).map(float), min_size=1, max_size=9)


# ---------------------------------------------------------------- quantile


@pytest.mark.parametrize(
    "values, y, expected",
    [([1, 3], Fraction(1, 2), 1.0), ([1, 3], 1, 3.0), ([5], Fraction(1, 3), 5.0), ([3, 1], Fraction(1, 2), 1.0)],
)
def test_quantile_examples(values, y, expected):
    assert quantile(values, y) == expected


@pytest.mark.parametrize("y", [0, -1, Fraction(3, 2)])
def test_quantile_rejects_levels_outside_unit_interval(y):
    with pytest.raises(DomainError):
        quantile([1, 2], y)


def test_empirical_dist_is_sorted_and_stable():
    d = EmpiricalDist.from_values([2.0, 1.0, 2.0, 0.0])
    assert d.values.tolist() == [0.0, 1.0, 2.0, 2.0]
    assert d.order.tolist() == [3, 1, 0, 2]
    with pytest.raises(DomainError):
        EmpiricalDist.from_values([])
    with pytest.raises(DomainError):
        EmpiricalDist.from_values([1.0, math.nan])


# ---------------------------------------------------------------- merged grid


def test_merged_grid_identical_sizes():
    g = merged_grid(2, 2)
    assert g.breakpoints == (0, Fraction(1, 2), 1)


def test_merged_grid_two_by_three():
    g = merged_grid(2, 3)
    assert g.breakpoints == (0, Fraction(1, 3), Fraction(1, 2), Fraction(2, 3), 1)
    # cell (1/3, 1/2] sits in (0, 1/2] for a and (1/3, 2/3] for b (1-based 1 and 2)
    assert g.idx_a[1] == 0 and g.idx_b[1] == 1
    assert g.idx_a.tolist() == [0, 0, 1, 1]
    assert g.idx_b.tolist() == [0, 1, 1, 2]
    assert sum(g.widths) == 1


def test_merged_grid_rejects_empty_group():
    with pytest.raises(DomainError):
        merged_grid(0, 3)


@given(st.integers(1, 30), st.integers(1, 30))
def test_merged_grid_cells_nest_in_both_grids(ma, mb):
    g = merged_grid(ma, mb)
    expected = sorted({Fraction(0)} | {Fraction(i, ma) for i in range(1, ma + 1)} | {Fraction(j, mb) for j in range(1, mb + 1)})
    assert list(g.breakpoints) == expected
    for lo, hi, ja, jb in zip(g.breakpoints[:-1], g.breakpoints[1:], g.idx_a, g.idx_b):
        assert Fraction(int(ja), ma) <= lo and hi <= Fraction(int(ja) + 1, ma)
        assert Fraction(int(jb), mb) <= lo and hi <= Fraction(int(jb) + 1, mb)


# ---------------------------------------------------------------- Wasserstein


def test_wasserstein_examples():
    assert wasserstein_q_pow([0, 1], [1, 0], 2) == 0.0
    assert wasserstein_q_pow([0, 1], [0, 2], 1) == 0.5
    assert wasserstein_q_pow([1.5], [4.0], 3) == 2.5**3
    with pytest.raises(DomainError):
        wasserstein_q_pow([0], [1], 0.5)


def test_cdf_route_examples():
    assert wasserstein1_via_cdf([0, 1], [0, 1]) == 0.0
    assert wasserstein1_via_cdf([0, 1], [0, 2]) == 0.5
    assert wasserstein1_via_cdf([0], [3]) == 3.0


def test_ot_examples():
    assert ot_bruteforce([2, 3], [3, 2], 1) == 0.0
    assert ot_bruteforce([0, 1], [0, 2], 2) == 0.5
    assert ot_bruteforce([0, 10], [5], 1) == 5.0


def test_ot_size_guard():
    with pytest.raises(ResourceError):
        ot_bruteforce(np.zeros(101), np.zeros(100), 1)


@settings(max_examples=60, deadline=None)
@given(samples, samples, st.sampled_from([1.0, 2.0]))
def test_quantile_route_matches_transport(a, b, q):
    assert abs(wasserstein_q_pow(a, b, q) - ot_bruteforce(a, b, q)) <= 1e-9 * max(1.0, ot_bruteforce(a, b, q))


@settings(max_examples=60, deadline=None)
@given(samples, samples)
def test_cdf_route_matches_quantile_route(a, b):
    assert abs(wasserstein1_via_cdf(a, b) - wasserstein_q_pow(a, b, 1)) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(samples, samples, samples, st.sampled_from([1.0, 2.0, 3.0]))
def test_metric_axioms_at_root(a, b, c, q):
    d = lambda u, v: wasserstein_q_pow(u, v, q) ** (1 / q)  # noqa: E731
    assert d(a, b) == pytest.approx(d(b, a), abs=1e-9)
    assert d(a, c) <= d(a, b) + d(b, c) + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-50, 50), min_size=1, max_size=8, unique=True),
       st.lists(st.integers(-50, 50), min_size=1, max_size=8, unique=True))
def test_optimal_plan_is_staircase(a, b):
    _, plan = transport_plan(np.array(a, float), np.array(b, float), 2)
    assert is_staircase(plan, 1e-15)
    assert np.allclose(plan.sum(axis=1), 1 / len(a)) and np.allclose(plan.sum(axis=0), 1 / len(b))


# ---------------------------------------------------------------- KSD and DP


def test_ksd_examples():
    assert ksd([0, 1], [1, 0]) == 0.0
    assert ksd([0, 1], [0, 2]) == 0.5
    assert ksd([0, 0, 0, 1, 1], [0, 1]) == pytest.approx(0.1, abs=1e-15)


def test_demographic_parity_examples():
    assert demographic_parity([0, 0, 0, 1, 1], [0, 1]) == pytest.approx(0.1, abs=1e-15)
    assert demographic_parity([0, 1], [1, 0]) == 0.0
    assert demographic_parity([0, 0], [1, 1, 1]) == 1.0
    with pytest.raises(DomainError):
        demographic_parity([0, 2], [1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from([0.0, 1.0]), min_size=1, max_size=12),
       st.lists(st.sampled_from([0.0, 1.0]), min_size=1, max_size=12),
       st.sampled_from([1.0, 2.0, 3.0]))
def test_wasserstein_equals_parity_on_binary_support(a, b, q):
    assert abs(wasserstein_q_pow(a, b, q) - demographic_parity(a, b)) <= 1e-12


def test_sandwich_example():
    lo, hi, c = ksd_wd_sandwich([0, 1], [0, 2], 1)
    assert (c.t1, c.t2, c.delta_measure, c.eta) == (0.0, 2.0, 1.0, 0.5)
    assert lo == 0.25 and hi == 0.5
    assert lo <= ksd([0, 1], [0, 2]) <= hi


def test_sandwich_identical_and_single_atom():
    assert ksd_wd_sandwich([1, 2], [2, 1], 2)[:2] == (0.0, 0.0)
    assert ksd_wd_sandwich([4.0], [4.0], 1)[:2] == (0.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(samples, samples)
def test_sandwich_holds_for_q1(a, b):
    lo, hi, _ = ksd_wd_sandwich(a, b, 1)
    k = ksd(a, b)
    assert lo <= k + 1e-10
    assert k <= hi + 1e-10


# ---------------------------------------------------------------- group fairness


def test_wd_fairness_examples():
    groups = {"a": [0], "b": [1], "c": [2]}
    assert wd_fairness(groups, [0.0, 1.0, 3.0], 1) == (3.0, ("a", "c"))
    assert wd_fairness({"a": [0, 1], "b": [2, 3]}, [1.0, 2.0, 2.0, 1.0], 2)[0] == 0.0
    with pytest.raises(DomainError):
        wd_fairness({"a": [0, 1]}, [0.0, 1.0], 1)


def test_wd_fairness_is_max_over_pairs():
    rng = np.random.default_rng(3)
    u = rng.normal(size=20)
    groups = {g: np.arange(5 * g, 5 * g + 5) for g in range(4)}
    value, pair = wd_fairness(groups, u, 2)
    per_pair = {(a, b): ot_bruteforce(u[groups[a]], u[groups[b]], 2) for a in range(4) for b in range(a + 1, 4)}
    assert len(per_pair) == 6
    assert value == pytest.approx(max(per_pair.values()), abs=1e-9)
    assert per_pair[pair] == pytest.approx(value, abs=1e-9)


def test_sandwich_lower_bound_fails_for_q2():
    # one CDF step of height 1/6 spans the whole support [0, 5]; the q = 2 lower bound overshoots
    lo, hi, _ = ksd_wd_sandwich([0, 5], [0, 5, 5], 2)
    k = ksd([0, 5], [0, 5, 5])
    assert k == pytest.approx(1 / 6)
    assert lo == pytest.approx(math.sqrt(1 / 12)) and lo > k
    assert k <= hi
