"""Command-line front end.

Verbs:
  simulate   one channel realization, one configuration method, rate report
  sweep      the canned experiments (bandwidth sweep, efficiency, Doppler)
  oracle     exhaustive-search dominance suite on tiny instances
  train-nn   fit the neural configurator and save its parameters

Each verb takes a plain-text config file plus override flags; ``--seed``,
``--out`` and ``--method`` are shared.  Exit code 0 on success; on failure a
single ``error: <reason>`` line goes to stderr and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from . import configfile, harness
from .channel import export_channel_csv, synthesize_channel
from .configurators import (AoSettings, RisConfiguration, ao_optimize,
                            export_config_csv, ti_stm, tv_stm)
from .errors import SimulatorError
from .metrics import (achievable_rate, quantize, residual_doppler,
                      uniform_allocation)
from .neural import TrainSettings, infer_config, load_params, save_params, train
from .scene import default_stationary_scenario, derive_geometry, wrap_phase

METHODS = ("tv_stm", "ti_stm", "ao", "nn")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risofdm",
        description="Link-level simulator for RIS-aided OFDM communication",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    sim = sub.add_parser("simulate", help="rate report for one realization")
    sim.add_argument("--config", help="scenario config file (defaults apply if omitted)")
    sim.add_argument("--method", choices=METHODS, default="tv_stm")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", default="report.csv")
    sim.add_argument("--bits", type=int, default=None,
                     help="quantize the configuration to this many bits")
    sim.add_argument("--nn-params", help="parameter file for --method nn")
    sim.add_argument("--dump-channel", help="also export the realization as CSV")
    sim.add_argument("--dump-config", help="also export the configuration as CSV")
    sim.add_argument("--ao-inner-tol", type=float, default=None,
                     help="relative improvement cutoff of the inner phase solver")
    sim.add_argument("--ao-outer-tol", type=float, default=None,
                     help="relative rate improvement cutoff between outer rounds")
    sim.add_argument("--ao-max-outer", type=int, default=None)

    swp = sub.add_parser("sweep", help="run a canned experiment")
    swp.add_argument("--experiment", choices=harness.EXPERIMENT_KINDS)
    swp.add_argument("--config", help="experiment config file")
    swp.add_argument("--seed", type=int, default=None)
    swp.add_argument("--out", default=None)
    swp.add_argument("--trials", type=int, default=None)
    swp.add_argument("--method", default=None,
                     help="ignored by table experiments; kept for flag symmetry")

    orc = sub.add_parser("oracle", help="exhaustive-search dominance suite")
    orc.add_argument("--instances", type=int, default=50)
    orc.add_argument("--seed", type=int, default=0)
    orc.add_argument("--out", default="oracle.csv")

    tnn = sub.add_parser("train-nn", help="train the neural configurator")
    tnn.add_argument("--config", help="scenario config file")
    tnn.add_argument("--train-config", help="training settings file")
    tnn.add_argument("--realizations", type=int, default=100)
    tnn.add_argument("--seed", type=int, default=0)
    tnn.add_argument("--out", default="nn_params.txt")
    return parser


def _load_scenario(path, seed):
    if path:
        scenario = configfile.scenario_from_file(path)
    else:
        scenario = default_stationary_scenario(seed=seed)
    return scenario


def _cmd_simulate(args) -> int:
    scenario = _load_scenario(args.config, args.seed)
    rng = np.random.default_rng(args.seed)
    chan = synthesize_channel(scenario, derive_geometry(scenario, rng))
    alloc = uniform_allocation(scenario)
    if args.method == "tv_stm":
        config = tv_stm(chan)
    elif args.method == "ti_stm":
        config = ti_stm(chan)
    elif args.method == "ao":
        settings = AoSettings()
        overrides = {"inner_tol": args.ao_inner_tol, "outer_tol": args.ao_outer_tol,
                     "max_outer": args.ao_max_outer}
        fields = {k: v for k, v in overrides.items() if v is not None}
        if fields:
            settings = dataclasses.replace(settings, **fields)
        result = ao_optimize(chan, scenario, settings)
        config, alloc = result.config, result.allocation
    else:
        if not args.nn_params:
            raise SimulatorError("--method nn needs --nn-params")
        params = load_params(args.nn_params)
        config = infer_config(params, chan, scenario.n_subcarriers)
    bits = args.bits
    if bits is not None:
        config = RisConfiguration(wrap_phase(quantize(config.thetas, bits)),
                                  time_invariant=config.time_invariant)
    report = achievable_rate(chan, config, alloc, scenario)
    residual = None
    if chan.n_blocks >= 2:
        residual = residual_doppler(chan, config)
    report = type(report)(
        rate_bit_s=report.rate_bit_s, coherent_bit_s=report.coherent_bit_s,
        per_subcarrier_snr=report.per_subcarrier_snr, xi=report.xi,
        b_bits=bits, residual_doppler_hz=residual,
    )
    with open(args.out, "w", encoding="ascii", newline="\n") as fh:
        fh.write(report.CSV_HEADER + "\n" + report.csv_row() + "\n")
    if args.dump_channel:
        export_channel_csv(chan, args.dump_channel)
    if args.dump_config:
        export_config_csv(config, args.dump_config)
    print(f"{args.method}: rate {report.rate_bit_s:.6g} bit/s "
          f"(coherent bound {report.coherent_bit_s:.6g}) -> {args.out}")
    return 0


def _cmd_sweep(args) -> int:
    if args.config:
        spec = harness.experiment_spec_from_kv(configfile.parse_kv(args.config))
    elif args.experiment:
        spec = harness.ExperimentSpec(kind=args.experiment)
    else:
        raise SimulatorError("sweep needs --experiment or --config")
    overrides = {}
    if args.experiment and args.config:
        overrides["kind"] = args.experiment
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_path"] = args.out
    if args.trials is not None:
        overrides["trials"] = args.trials
    if overrides:
        spec = dataclasses.replace(spec, **overrides)
    rows = harness.run_experiment(spec)
    print(f"{spec.kind}: {len(rows)} result rows -> {spec.out_path}")
    return 0


def _cmd_oracle(args) -> int:
    spec = harness.ExperimentSpec(kind="oracle_suite", trials=args.instances,
                                  seed=args.seed, out_path=args.out)
    rows = harness.run_experiment(spec)
    # each row carries the exhaustive optimum in coherent_bps, so the AO
    # margin against it is directly visible
    worst = min((r.rate_bps - r.coherent_bps for r in rows if r.method == "ao"),
                default=0.0)
    print(f"oracle suite: {args.instances} instances -> {args.out} "
          f"(worst AO margin vs optimum {worst:.3e} bit/s)")
    return 0


def _cmd_train_nn(args) -> int:
    scenario = _load_scenario(args.config, args.seed)
    settings = (configfile.train_settings_from_file(args.train_config)
                if args.train_config else TrainSettings())
    rng = np.random.default_rng(args.seed)
    dataset = [synthesize_channel(scenario, derive_geometry(scenario, rng))
               for _ in range(args.realizations)]
    params = train(dataset, scenario, settings, rng)
    save_params(params, args.out)
    print(f"trained {params.depth}-layer configurator on {args.realizations} "
          f"realizations -> {args.out}")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "oracle": _cmd_oracle,
        "train-nn": _cmd_train_nn,
    }
    try:
        return handlers[args.verb](args)
    except (SimulatorError, ValueError, OSError, KeyError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
