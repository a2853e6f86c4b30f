"""Vaccine allocation: Wasserstein fairness of AM against the max-min comparator."""

import argparse

import numpy as np

from dfso.apps.adapters import allocation_adapter, load_counties, max_min_allocation
from dfso.solve import solve_dfso
from dfso.solve.am import fairness_scores


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--counties", help="county CSV (default: bundled synthetic table)")
    p.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.2, 0.267])
    args = p.parse_args()
    counties = load_counties(args.counties)
    print(f"{len(counties.names)} counties: " + ", ".join(f"{g} {counties.groups.count(g)}" for g in sorted(set(counties.groups))))
    print(f"{'eps':>6} {'method':<8} {'WD_2^2':>12} {'KSD':>8} {'geo mean':>10}")
    for eps in args.eps:
        inst = allocation_adapter(counties, eps, 2.0)
        for name, x in (("am", solve_dfso(inst, bounds=False).x), ("max-min", max_min_allocation(inst))):
            s = fairness_scores(inst, x)
            geo = float(np.exp(np.mean(np.log(x))))
            print(f"{eps:>6} {name:<8} {s['wd']:>12.4e} {s['ksd']:>8.3f} {geo:>10.5f}")


if __name__ == "__main__":
    main()
