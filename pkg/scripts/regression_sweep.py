"""Epsilon sweep for fair regression: AM against the Jensen and Gelbrich bounds.

    python3 scripts/regression_sweep.py --loss mae --out runs/regression
"""

import argparse

from dfso.apps.experiment import ExperimentConfig, run_experiment, write_outputs


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--loss", choices=("mae", "mse"), default="mae")
    p.add_argument("--eps", type=float, nargs="+", default=[0.01, 0.05, 0.1, 0.2, 0.5])
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--kappa", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="runs/regression")
    args = p.parse_args()
    cfg = ExperimentConfig(
        f"regression-{args.loss}", tuple(args.eps), 2.0, tuple(args.seeds), args.m, args.kappa, out_dir=args.out
    )
    rows = run_experiment(cfg, jobs=args.jobs)
    write_outputs(cfg, rows, args.out)
    print(f"{'eps':>6} {'method':<9} {'seed':>4} {'efficiency':>12} {'WD':>12} {'bound':>12} {'gap %':>8}")
    for r in rows:
        bound = "" if r.bound is None else f"{r.bound:.5g}"
        gap = "" if r.gap_pct is None else f"{r.gap_pct:.2f}"
        print(f"{r.epsilon:>6} {r.method:<9} {r.seed:>4} {r.efficiency:>12.5g} {r.wd:>12.5g} {bound:>12} {gap:>8}")


if __name__ == "__main__":
    main()
