#!/usr/bin/env python3
"""Sweep the bandwidth and compare every configuration method against the
coherent ceiling at desk scale.  Writes the results CSV plus a plot-data
companion (x=bandwidth, series=method, y=rate)."""

import argparse

from risofdm.harness import ExperimentSpec, run_experiment


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="rate_vs_bandwidth.csv")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--trials", type=int, default=50)
    parser.add_argument("--n-reflectors", type=int, default=100)
    args = parser.parse_args()
    spec = ExperimentSpec(kind="rate_vs_bandwidth", out_path=args.out,
                          seed=args.seed, trials=args.trials,
                          n_reflectors=args.n_reflectors)
    rows = run_experiment(spec)
    for row in rows:
        print(f"B={row.bandwidth_hz / 1e6:5.1f} MHz  {row.method:10s} "
              f"{row.rate_bps / 1e6:8.2f} Mbit/s")


if __name__ == "__main__":
    main()
