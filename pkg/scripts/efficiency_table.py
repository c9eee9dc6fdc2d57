#!/usr/bin/env python3
"""Reconfiguration-efficiency table: how often each method keeps its 4-bit
quantized phases between adjacent (correlated) channel realizations."""

import argparse

from risofdm.harness import ExperimentSpec, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="efficiency_table.csv")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=50,
                        help="length of the correlated realization sequence")
    parser.add_argument("--n-sweep", default="25,64,100")
    parser.add_argument("--bits", type=int, default=4)
    args = parser.parse_args()
    spec = ExperimentSpec(kind="efficiency_table", out_path=args.out,
                          seed=args.seed, trials=args.trials,
                          n_sweep=tuple(int(x) for x in args.n_sweep.split(",")),
                          quant_bits=args.bits)
    rows = run_experiment(spec)
    for row in rows:
        print(f"N={row.n_reflectors:4d}  {row.method:8s} "
              f"efficiency {row.efficiency_pct:6.1f}%")


if __name__ == "__main__":
    main()
