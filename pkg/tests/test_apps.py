import csv
import json
import math

import numpy as np
import pytest

from dfso.apps import adapters
from dfso.apps.adapters import (
    Counties,
    allocation_adapter,
    allocation_bounds,
    knapsack_adapter,
    load_counties,
    max_min_allocation,
    regression_adapter,
    synth_counties,
    write_counties,
)
from dfso.apps.experiment import COLUMNS, ExperimentConfig, run_experiment, write_outputs
from dfso.apps.synth import regression_feature_mean, regression_truth, scaled_groups, synth_knapsack, synth_regression
from dfso.errors import DomainError, InfeasibleError
from dfso.instance import GroupedPopulation
from dfso.solve.am import fairness_scores

# ---------------------------------------------------------------- synthetic data


def test_regression_generator_deterministic_and_in_range():
    pop, x0 = synth_regression(41, 5, 3)
    again, x0b = synth_regression(41, 5, 3)
    assert np.array_equal(pop.scenarios, again.scenarios) and np.array_equal(x0, x0b)
    assert pop.groups == ["-1", "1"] and len(pop.group_indices["-1"]) == 21
    j = np.arange(1, 5)
    neg, pos = pop.scenarios[pop.indices(0)], pop.scenarios[pop.indices(1)]
    assert np.all(neg[:, :-1] >= 0) and np.all(neg[:, :-1] <= j)
    assert np.all(pos[:, :-1] >= 0) and np.all(pos[:, :-1] <= j + 2)
    assert np.all(neg[:, -1] == -1) and np.all(pos[:, -1] == 1)
    scale = abs(regression_feature_mean(41, 5) @ x0)
    assert np.all(np.abs(pop.responses - pop.scenarios @ x0) <= 0.1 * scale + 1e-12)


def test_regression_truth_blocks():
    x0 = regression_truth(5, np.random.default_rng(0))
    assert np.all(x0[:2] <= 0) and np.all(x0[2:4] >= 0) and x0[4] == 0
    x0 = regression_truth(2, np.random.default_rng(0))
    assert x0[1] == 0 and x0[0] <= 0


def test_feature_mean_matches_large_sample():
    m, kappa = 20000, 4
    pop, _ = synth_regression(m, kappa, 0)
    assert np.allclose(pop.scenarios.mean(axis=0), regression_feature_mean(m, kappa), atol=0.05)


def test_knapsack_generator():
    pop = synth_knapsack(9, 1)
    v, w = pop.scenarios[:, 0], pop.scenarios[:, 1]
    assert np.all((w >= 1) & (w <= 100))
    gap = v - w
    a, b = pop.indices(0), pop.indices(1)
    assert len(a) == 5 and np.all((gap[a] >= 10) & (gap[a] <= 30)) and np.all((gap[b] >= 20) & (gap[b] <= 60))
    assert np.array_equal(synth_knapsack(9, 1).scenarios, pop.scenarios)


def test_scaled_groups_shapes_and_independence():
    pop = scaled_groups(7, 2, [1.0, 2.0, 3.0], seed=0)
    assert pop.groups == ["0", "1", "2"] and [len(pop.indices(g)) for g in range(3)] == [3, 2, 2]
    a, b = pop.scenarios[pop.indices(0)][:2], pop.scenarios[pop.indices(1)]
    assert not np.allclose(2 * a, b)


def test_generators_reject_bad_sizes():
    with pytest.raises(DomainError):
        synth_regression(1, 3, 0)
    with pytest.raises(DomainError):
        synth_knapsack(1, 0)


# ---------------------------------------------------------------- adapters


def test_knapsack_adapter_two_items():
    pop = GroupedPopulation(np.array([[2.0, 1.0], [3.0, 2.0]]), ("a", "b"))
    inst = knapsack_adapter(pop, 0.1, 2.0, capacity=2)
    assert inst.efficiency.v_star == 3.0
    assert inst.is_feasible(np.array([0.0, 1.0])) and not inst.is_feasible(np.array([1.0, 1.0]))
    with pytest.raises(DomainError):
        knapsack_adapter(GroupedPopulation(np.array([[2.5, 1.0], [3.0, 2.0]]), ("a", "b")))


def test_regression_adapter_requires_response():
    with pytest.raises(DomainError, match="response"):
        regression_adapter(GroupedPopulation(np.zeros((2, 2)), ("a", "b")))
    pop, _ = synth_regression(10, 3, 0)
    with pytest.raises(DomainError):
        regression_adapter(pop, "huber")


def test_infinite_epsilon_drops_band():
    pop, _ = synth_regression(20, 3, 0)
    inst = regression_adapter(pop, "mse", math.inf)
    assert not inst.efficiency.has_band
    assert inst.is_feasible(np.full(3, 99.0))
    tight = regression_adapter(pop, "mse", 0.1)
    assert not tight.is_feasible(np.full(3, 99.0))


def test_allocation_adapter_band_and_bounds():
    c = load_counties()
    T, lb, ub = allocation_bounds(c)
    assert c.population @ lb <= T and np.all(lb <= ub) and np.all(ub <= 1.0)
    inst = allocation_adapter(c, 0.1)
    x = max_min_allocation(inst)
    assert inst.is_feasible(x)
    assert inst.efficiency.ok(x)
    assert sorted(set(c.groups)) == ["rural", "urban"]


def test_allocation_infeasible_supply():
    c = Counties(("a", "b"), np.array([100.0, 100.0]), np.array([10.0, 10.0]), ("g1", "g2"))
    with pytest.raises(InfeasibleError):
        allocation_adapter(c, supply_fraction=-0.1)


def test_counties_round_trip_and_default_grouping(tmp_path):
    c = synth_counties(12, 3)
    path = tmp_path / "c.csv"
    write_counties(c, path)
    back = load_counties(path)
    assert back.names == c.names and np.array_equal(back.population, c.population) and back.groups == c.groups
    path.write_text("county,population,seniors\nx,60000,100\ny,1000,10\n")
    assert load_counties(path).groups == ("urban", "rural")
    path.write_text("county,pop\nx,1\n")
    with pytest.raises(DomainError):
        load_counties(path)


def test_max_min_rejects_other_problems():
    pop, _ = synth_regression(10, 3, 0)
    with pytest.raises(DomainError):
        max_min_allocation(regression_adapter(pop))


def test_shipped_counties_match_generator():
    c = load_counties()
    synth = synth_counties()
    assert c.names == synth.names and c.groups == synth.groups
    assert np.array_equal(c.population, synth.population) and np.array_equal(c.seniors, synth.seniors)
    assert adapters.URBAN_THRESHOLD == 50_000


# ---------------------------------------------------------------- experiment


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    cfg = ExperimentConfig("regression-mae", (0.05, 0.2), 2.0, (0, 1), m=20, kappa=3, methods=("am", "jensen", "gelbrich"))
    rows = run_experiment(cfg)
    out = tmp_path_factory.mktemp("exp")
    write_outputs(cfg, rows, out)
    return cfg, rows, out


def test_rows_sorted_and_complete(small_run):
    _, rows, _ = small_run
    assert len(rows) == 2 * 2 * 3
    keys = [(r.epsilon, r.method, r.seed) for r in rows]
    assert keys == sorted(keys)


def test_am_rows_inside_band_and_monotone(small_run):
    cfg, rows, _ = small_run
    from dfso.apps.experiment import build_instance

    for r in rows:
        if r.method != "am":
            continue
        inst = build_instance(cfg, r.seed, r.epsilon)
        assert inst.efficiency.ok(np.array(r.x))
        assert all(b <= a + 1e-9 for a, b in zip(r.trace, r.trace[1:]))


def test_bounds_below_their_own_distance(small_run):
    _, rows, _ = small_run
    for r in rows:
        if r.method in ("jensen", "gelbrich"):
            assert r.bound <= r.wd + 1e-9
            assert r.gap_pct is not None and r.gap_pct >= -1e-6


def test_scores_recomputed_from_x(small_run):
    cfg, rows, _ = small_run
    from dfso.apps.experiment import build_instance

    for r in rows:
        if r.x:
            inst = build_instance(cfg, r.seed, r.epsilon)
            s = fairness_scores(inst, np.array(r.x))
            assert abs(s["wd"] - r.wd) <= 1e-9 and abs(s["ksd"] - r.ksd) <= 1e-9
            assert abs(inst.efficiency.value(np.array(r.x)) - r.efficiency) <= 1e-9


def test_failures_are_recorded():
    # the continuous oracle is limited to three decisions
    cfg = ExperimentConfig("regression-mae", (0.1,), 2.0, (0,), m=10, kappa=4, methods=("oracle", "jensen"))
    rows = {r.method: r for r in run_experiment(cfg)}
    assert rows["oracle"].status.startswith("error:") and rows["oracle"].x == []
    assert rows["jensen"].status == "bound"


def test_output_files(small_run):
    _, rows, out = small_run
    with open(out / "tradeoff.csv") as fh:
        table = list(csv.DictReader(fh))
    assert tuple(table[0]) == COLUMNS and len(table) == len(rows)
    assert all(row["wall_ms"] == "" for row in table)
    with open(out / "histogram.csv") as fh:
        hist = list(csv.DictReader(fh))
    am0 = [h for h in hist if h["method"] == "am" and h["seed"] == "0" and h["epsilon"] == "0.05"]
    assert len(am0) == 20
    assert sum(float(h["weight"]) for h in am0) == pytest.approx(2.0)
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["problem"] == "regression-mae" and len(report["rows"]) == len(rows)
    with open(out / "trace.csv") as fh:
        assert next(csv.reader(fh)) == ["epsilon", "seed", "iteration", "objective"]


def test_emit_methods_write_models(tmp_path):
    cfg = ExperimentConfig("knapsack", (0.2,), 1.0, (0,), m=4, methods=("emit-quantile",), out_dir=str(tmp_path))
    rows = run_experiment(cfg)
    assert rows[0].status == "emitted"
    assert sorted(p.suffix for p in (tmp_path / "models").iterdir()) == [".json", ".lp"]


def test_config_validation():
    with pytest.raises(DomainError):
        ExperimentConfig("portfolio")
    with pytest.raises(DomainError):
        ExperimentConfig(epsilons=(-0.1,))
    with pytest.raises(DomainError):
        ExperimentConfig(methods=("simplex",))


def test_max_min_skipped_outside_allocation():
    rows = run_experiment(ExperimentConfig("knapsack", (0.2,), 1.0, (0,), m=6, methods=("max-min",)))
    assert rows[0].status.startswith("skipped")
