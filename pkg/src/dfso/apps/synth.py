"""Seeded synthetic populations for the regression and knapsack experiments."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from ..instance import GroupedPopulation


def regression_truth(kappa: int, rng: np.random.Generator) -> np.ndarray:
    """Coefficient vector x0: negatives, then positives, last entry zero."""
    half = kappa // 2
    x0 = np.zeros(kappa)
    x0[:half] = rng.uniform(-1.0, 0.0, half)
    # odd kappa leaves one extra slot; it joins the positive block
    n_pos = kappa - half - 1
    x0[half : half + n_pos] = rng.uniform(0.0, 10.0, n_pos)
    return x0


def regression_feature_mean(m: int, kappa: int) -> np.ndarray:
    """Exact mixture mean of the generated features."""
    m1 = math.ceil(m / 2)
    j = np.arange(1, kappa)
    mean = np.empty(kappa)
    mean[:-1] = (m1 * j / 2 + (m - m1) * (j + 2) / 2) / m
    mean[-1] = (-m1 + (m - m1)) / m
    return mean


def synth_regression(m: int, kappa: int, seed: int) -> tuple[GroupedPopulation, np.ndarray]:
    """Features Unif(0, j) (group -1) or Unif(0, j + 2) (group 1), sensitive last.

    The response is xi @ x0 plus per-sample noise Unif(-0.1, 0.1) times the
    mean response.
    """
    if m < 2 or kappa < 2:
        raise DomainError("need m >= 2 and kappa >= 2")
    rng = np.random.default_rng(seed)
    x0 = regression_truth(kappa, rng)
    m1 = math.ceil(m / 2)
    j = np.arange(1, kappa, dtype=float)
    xi = np.empty((m, kappa))
    xi[:m1, :-1] = rng.uniform(0.0, 1.0, (m1, kappa - 1)) * j
    xi[m1:, :-1] = rng.uniform(0.0, 1.0, (m - m1, kappa - 1)) * (j + 2)
    xi[:m1, -1] = -1.0
    xi[m1:, -1] = 1.0
    scale = float(regression_feature_mean(m, kappa) @ x0)
    noise = rng.uniform(-0.1, 0.1, m) * scale
    y = xi @ x0 + noise
    labels = ["-1"] * m1 + ["1"] * (m - m1)
    return GroupedPopulation(xi, tuple(labels), y), x0


def synth_knapsack(m: int, seed: int) -> GroupedPopulation:
    """Items with integer weight w in 1..100 and value w + U{10..30} or w + U{20..60}.

    Columns: f1 = value, f2 = weight.
    """
    if m < 2:
        raise DomainError("need m >= 2")
    rng = np.random.default_rng(seed)
    m1 = math.ceil(m / 2)
    w = rng.integers(1, 101, m)
    v = np.empty(m)
    v[:m1] = w[:m1] + rng.integers(10, 31, m1)
    v[m1:] = w[m1:] + rng.integers(20, 61, m - m1)
    labels = ["a"] * m1 + ["abar"] * (m - m1)
    return GroupedPopulation(np.column_stack([v, w]).astype(float), tuple(labels))


def synth_population(kind: str, m: int, kappa: int = 2, seed: int = 0) -> GroupedPopulation:
    if kind in ("regression", "regression-mae", "regression-mse"):
        return synth_regression(m, kappa, seed)[0]
    if kind == "knapsack":
        if kappa < 2:
            raise DomainError("need kappa >= 2")
        return synth_knapsack(m, seed)
    raise DomainError(f"no generator for {kind!r}")


def scaled_groups(m: int, kappa: int, scales, seed: int, loc: float = 1.0) -> GroupedPopulation:
    """Groups whose laws are scaled copies of one sub-Gaussian law.

    Every group draws its own sample u_i ~ N(loc, I) and stores scales[g] * u_i,
    so population distributions differ only by scale while the samples differ.
    """
    rng = np.random.default_rng(seed)
    k = len(scales)
    sizes = [m // k + (1 if g < m % k else 0) for g in range(k)]
    blocks = [s * (loc + rng.standard_normal((n, kappa))) for s, n in zip(scales, sizes)]
    labels = [str(g) for g, n in enumerate(sizes) for _ in range(n)]
    return GroupedPopulation(np.vstack(blocks), tuple(labels))
