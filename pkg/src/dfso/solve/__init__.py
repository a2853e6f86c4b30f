"""Solvers: convex kernel, alternating minimization, moment bounds, reference oracles."""

from .am import MatchingPlan, SolveReport, am_solve, am_subproblem, comonotonic_matching, fairness_scores
from .bounds import GroupMoments, gelbrich_am, gelbrich_value, group_moments, jensen_bound
from .kernel import Program, convex_kernel, efficiency_optimum
from .oracle import exact_oracle, multistart_am
from .pipeline import gap_percent, gelbrich_estimate, solve_dfso

__all__ = [
    "MatchingPlan", "SolveReport", "am_solve", "am_subproblem", "comonotonic_matching", "fairness_scores",
    "GroupMoments", "gelbrich_am", "gelbrich_value", "group_moments", "jensen_bound",
    "Program", "convex_kernel", "efficiency_optimum", "exact_oracle", "multistart_am",
    "gap_percent", "gelbrich_estimate", "solve_dfso",
]
