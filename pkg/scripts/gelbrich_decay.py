"""Relative gap between WD_2^2 and the Gelbrich value at a fixed decision as m grows.

Groups are scaled copies of one law, so the population gap is zero and the
empirical gap shrinks with the sample size.
"""

import argparse

import numpy as np

from dfso.apps.synth import scaled_groups
from dfso.instance import EfficiencyModel, FeasibleSet, Linear, make_instance
from dfso.solve import gelbrich_value, group_moments
from dfso.solve.am import wd_value


def relative_gap(m, kappa, scales, seed, x):
    pop = scaled_groups(m, kappa, scales, seed)
    eff = EfficiencyModel("linear", {"C": np.zeros((m, kappa)), "d": np.ones(m)}, np.inf, v_star=1.0)
    box = FeasibleSet.box(-np.ones(kappa), np.ones(kappa))
    inst = make_instance(pop.scenarios, pop.labels, Linear.identity(kappa), eff, box)
    wd = wd_value(inst, x)
    return (wd - gelbrich_value(inst, group_moments(pop), x)) / wd


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[100, 200, 400, 800, 1600, 3200])
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--scales", type=float, nargs="+", default=[1.0, 2.0])
    p.add_argument("--reps", type=int, default=20)
    args = p.parse_args()
    x = np.full(args.kappa, 1.0 / args.kappa)
    print(f"{'m':>6} {'mean gap %':>11} {'max gap %':>10} {'gap*sqrt(m_a)':>14}")
    for m in args.sizes:
        gaps = [relative_gap(m, args.kappa, args.scales, s, x) for s in range(args.reps)]
        g = float(np.mean(gaps))
        print(f"{m:>6} {100 * g:>11.3f} {100 * max(gaps):>10.3f} {g * np.sqrt(m // len(args.scales)):>14.4f}")


if __name__ == "__main__":
    main()
