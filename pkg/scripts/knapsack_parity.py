"""Fair knapsack: AM objective against the enumeration oracle on small item sets."""

import argparse

from dfso.apps.adapters import knapsack_adapter
from dfso.apps.synth import synth_knapsack
from dfso.solve import exact_oracle, solve_dfso


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--q", type=float, default=2.0)
    args = p.parse_args()
    equal = 0
    print(f"{'seed':>4} {'AM':>12} {'oracle':>12} {'ratio':>8}")
    for seed in range(args.seeds):
        inst = knapsack_adapter(synth_knapsack(args.m, seed), args.eps, args.q)
        am = solve_dfso(inst, bounds=False).objective
        opt = exact_oracle(inst).value
        equal += abs(am - opt) <= 1e-7 * max(1.0, abs(opt))
        ratio = am / opt if opt > 0 else float("nan")
        print(f"{seed:>4} {am:>12.6g} {opt:>12.6g} {ratio:>8.3f}")
    print(f"AM reached the oracle value on {equal}/{args.seeds} instances")


if __name__ == "__main__":
    main()
