"""Continuous relaxation floors and model sizes of each formulation on small knapsacks."""

import argparse

import numpy as np

from dfso.apps.adapters import knapsack_adapter
from dfso.apps.synth import synth_knapsack
from dfso.micp import FORMULATIONS, build, relaxation_floor
from dfso.solve import exact_oracle


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--m", type=int, nargs="+", default=[4, 6, 8])
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    print(f"{'m':>3} {'formulation':<20} {'vars':>6} {'bins':>6} {'rows':>6} {'floor':>12} {'optimum':>12}")
    for m in args.m:
        inst = knapsack_adapter(synth_knapsack(m, args.seed), 0.2, args.q)
        opt = exact_oracle(inst)
        for name in FORMULATIONS:
            c = build(name, inst, cuts=True).counts()
            floor = relaxation_floor(inst, name, [opt.x]) if name != "vanilla" else np.nan
            print(f"{m:>3} {name:<20} {c['variables']:>6} {c['binaries']:>6} {c['constraints']:>6} {floor:>12.5g} {opt.value:>12.5g}")


if __name__ == "__main__":
    main()
