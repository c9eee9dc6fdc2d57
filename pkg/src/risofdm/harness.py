"""Experiment runner: bandwidth sweeps, efficiency and Doppler tables.

Every experiment is driven by an `ExperimentSpec` and a seed; trials use
per-trial generator streams derived from (seed, context, trial), so results
are reproducible byte for byte and trials could run in any order or in
parallel without changing the output.

Wall-clock timings are kept on the in-memory rows for logging but stay out
of the CSV, which must be identical across reruns of the same spec/seed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .channel import (ChannelRealization, block_spectra, full_freq_response,
                      synthesize_channel)
from .configurators import RisConfiguration, ao_optimize, ti_stm, tv_stm
from .errors import InfeasibleScenarioError, InvalidScenarioError
from .metrics import (PowerAllocation, achievable_rate, coherent_gains, coherent_rate,
                      quantize, efficiency_rate, residual_doppler, tap_drift_hz,
                      uniform_allocation, waterfill)
from .neural import TrainSettings, infer_config, init_params, train
from .scene import (PathProfile, PathSet, RisGrid, Scenario, default_mobile_scenario,
                    default_stationary_scenario, derive_geometry, wrap_phase)

EXPERIMENT_KINDS = ("rate_vs_bandwidth", "efficiency_table", "doppler_table", "oracle_suite")

RESULT_CSV_HEADER = ("method,n_reflectors,bandwidth_hz,speed_mps,b_bits,"
                     "rate_bps,coherent_bps,efficiency_pct,residual_doppler_hz")


@dataclass(frozen=True)
class ExperimentSpec:
    """What to run and at which scale."""

    kind: str
    bandwidth_sweep_hz: tuple[float, ...] = (2.1e6, 4.2e6, 6.3e6, 8.4e6, 10.5e6)
    n_sweep: tuple[int, ...] = (25, 64, 100)
    n_reflectors: int = 100
    bandwidth_hz: float = 10.5e6
    n_subcarriers: int = 256
    ue_speed: float = 20.0
    quant_bits: int = 4
    trials: int = 50
    seed: int = 0
    out_path: str = "results.csv"
    train_realizations: int = 60
    train_epochs: int = 100
    delay_jitter_s: float = 1e-9

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise InvalidScenarioError(
                f"unknown experiment kind {self.kind!r}; expected one of {EXPERIMENT_KINDS}"
            )
        if not self.bandwidth_sweep_hz or not self.n_sweep:
            raise InvalidScenarioError("sweep lists cannot be empty")
        if self.trials < 1:
            raise InvalidScenarioError("need at least one trial")


@dataclass
class ResultRow:
    method: str
    n_reflectors: int
    bandwidth_hz: float
    speed_mps: float
    b_bits: int | None
    rate_bps: float
    coherent_bps: float
    efficiency_pct: float | None = None
    residual_doppler_hz: float | None = None
    wall_time_s: float = 0.0


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # plain-float repr round-trips exactly
    return str(value)


def emit_results(rows, path, plot_path=None) -> None:
    """Write rows with the documented header; optionally a companion
    (x, series, y) file for rate-versus-bandwidth plots."""
    lines = [RESULT_CSV_HEADER]
    for r in rows:
        lines.append(",".join(_fmt(v) for v in (
            r.method, r.n_reflectors, float(r.bandwidth_hz), float(r.speed_mps),
            r.b_bits, float(r.rate_bps), float(r.coherent_bps),
            r.efficiency_pct, r.residual_doppler_hz,
        )))
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    if plot_path is not None:
        plot_lines = ["x,series,y"]
        for r in rows:
            plot_lines.append(f"{float(r.bandwidth_hz)!r},{r.method},{float(r.rate_bps)!r}")
        try:
            with open(plot_path, "w", encoding="ascii", newline="\n") as fh:
                fh.write("\n".join(plot_lines) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write plot data to {plot_path}: {exc}") from exc


def parse_results_csv(path) -> list[ResultRow]:
    """Read back a results CSV written by `emit_results`."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(ResultRow(
            method=parts[0], n_reflectors=int(parts[1]),
            bandwidth_hz=float(parts[2]), speed_mps=float(parts[3]),
            b_bits=int(parts[4]) if parts[4] else None,
            rate_bps=float(parts[5]), coherent_bps=float(parts[6]),
            efficiency_pct=float(parts[7]) if parts[7] else None,
            residual_doppler_hz=float(parts[8]) if parts[8] else None,
        ))
    return rows


def _rng(*ids: int) -> np.random.Generator:
    return np.random.default_rng(list(ids))


def jitter_path_set(base: PathSet, rng: np.random.Generator,
                    delay_jitter_s: float) -> PathSet:
    """Re-draw the scattered micro-delays around a shared base geometry.

    Line-of-sight components (the first path of each composite hop) are kept
    verbatim; every scattered path, including the whole direct group, gets a
    fresh delay within +/- the jitter scale.  One nanosecond is several
    carrier periods, so this re-randomizes the scattered phases while
    leaving gains, angles and Doppler untouched.
    """
    def nudge(delay: float) -> float:
        return max(0.0, delay + rng.uniform(-delay_jitter_s, delay_jitter_s))

    ap_ris = [base.ap_ris_paths[0]]
    ap_ris += [replace(p, delay_s=nudge(p.delay_s)) for p in base.ap_ris_paths[1:]]
    ris_ue = [base.ris_ue_paths[0]]
    ris_ue += [replace(p, delay_s=nudge(p.delay_s)) for p in base.ris_ue_paths[1:]]
    direct = [replace(p, delay_s=nudge(p.delay_s)) for p in base.direct_paths]
    return PathSet(tuple(ap_ris), tuple(ris_ue), tuple(direct))


def correlated_realizations(scenario: Scenario, count: int, rng: np.random.Generator,
                            base: PathSet | None = None,
                            delay_jitter_s: float = 1e-9) -> list[ChannelRealization]:
    """A sequence of adjacent channel realizations sharing one geometry."""
    if base is None:
        base = derive_geometry(scenario, rng)
    return [
        synthesize_channel(scenario, jitter_path_set(base, rng, delay_jitter_s))
        for _ in range(count)
    ]


def _coherent_row_rate(chan: ChannelRealization, scenario: Scenario) -> float:
    """Coherent bound with its own water-filled allocation (true ceiling)."""
    noise = scenario.bandwidth_hz * scenario.noise_density
    gains = coherent_gains(chan, scenario)
    powers = np.vstack([
        waterfill(gains[u], scenario.power_budget, noise) for u in range(chan.n_blocks)
    ])
    return coherent_rate(chan, PowerAllocation(powers), scenario)


def _train_for_scenario(scenario: Scenario, spec: ExperimentSpec, context: int,
                        correlated: bool):
    """Train a configurator network on draws from the scenario's channel
    distribution (jittered around one geometry when ``correlated``)."""
    rng = _rng(spec.seed, context, 1)
    if correlated:
        dataset = correlated_realizations(scenario, spec.train_realizations, rng,
                                          delay_jitter_s=spec.delay_jitter_s)
    else:
        dataset = [synthesize_channel(scenario, derive_geometry(scenario, rng))
                   for _ in range(spec.train_realizations)]
    settings = TrainSettings(epochs=spec.train_epochs)
    return train(dataset, scenario, settings, _rng(spec.seed, context, 2))


def run_rate_vs_bandwidth(spec: ExperimentSpec) -> list[ResultRow]:
    """Monte-Carlo mean rates of every method across the bandwidth sweep.

    Requires a stationary setup.  Bandwidths whose delay spread would need
    more taps than subcarriers produce NaN-rate rows instead of vanishing.
    """
    rows = []
    for b_idx, bandwidth in enumerate(spec.bandwidth_sweep_hz):
        started = time.perf_counter()
        scenario = default_stationary_scenario(
            spec.n_reflectors, bandwidth, spec.n_subcarriers, spec.seed)
        try:
            synthesize_channel(scenario, derive_geometry(scenario, _rng(spec.seed, b_idx, 0)))
        except InfeasibleScenarioError:
            for method in ("ao", "coherent", "nn", "tv_stm"):
                rows.append(ResultRow(method, spec.n_reflectors, bandwidth, 0.0, None,
                                      float("nan"), float("nan")))
            continue
        params = _train_for_scenario(scenario, spec, b_idx, correlated=False)
        sums = {m: [0.0, 0.0] for m in ("ao", "coherent", "nn", "tv_stm")}
        for trial in range(spec.trials):
            chan = synthesize_channel(
                scenario, derive_geometry(scenario, _rng(spec.seed, b_idx, 3, trial)))
            unif = uniform_allocation(scenario)
            coh = _coherent_row_rate(chan, scenario)
            sums["coherent"][0] += coh
            sums["coherent"][1] += coh
            tv_report = achievable_rate(chan, tv_stm(chan), unif, scenario)
            sums["tv_stm"][0] += tv_report.rate_bit_s
            sums["tv_stm"][1] += tv_report.coherent_bit_s
            ao = ao_optimize(chan, scenario)
            ao_report = achievable_rate(chan, ao.config, ao.allocation, scenario)
            sums["ao"][0] += ao_report.rate_bit_s
            sums["ao"][1] += ao_report.coherent_bit_s
            nn_report = achievable_rate(
                chan, infer_config(params, chan, scenario.n_subcarriers), unif, scenario)
            sums["nn"][0] += nn_report.rate_bit_s
            sums["nn"][1] += nn_report.coherent_bit_s
        elapsed = time.perf_counter() - started
        for method in sorted(sums):
            rows.append(ResultRow(
                method, spec.n_reflectors, bandwidth, 0.0, None,
                sums[method][0] / spec.trials, sums[method][1] / spec.trials,
                wall_time_s=elapsed))
    rows.sort(key=lambda r: (r.bandwidth_hz, r.method))
    return rows


def run_efficiency_table(spec: ExperimentSpec) -> list[ResultRow]:
    """Reconfiguration efficiency of each method over a correlated sequence
    of channel realizations, at the experiment's quantization depth."""
    rows = []
    for n_idx, n_elements in enumerate(spec.n_sweep):
        started = time.perf_counter()
        scenario = default_stationary_scenario(
            n_elements, spec.bandwidth_hz, spec.n_subcarriers, spec.seed)
        base = derive_geometry(scenario, _rng(spec.seed, n_idx, 0))
        rng_train = _rng(spec.seed, n_idx, 1)
        train_set = correlated_realizations(scenario, spec.train_realizations, rng_train,
                                            base=base, delay_jitter_s=spec.delay_jitter_s)
        params = train(train_set, scenario, TrainSettings(epochs=spec.train_epochs),
                       _rng(spec.seed, n_idx, 2))
        sequence = correlated_realizations(
            scenario, spec.trials, _rng(spec.seed, n_idx, 3), base=base,
            delay_jitter_s=spec.delay_jitter_s)
        unif = uniform_allocation(scenario)
        thetas = {"tv_stm": [], "ao": [], "nn": []}
        rates = {m: 0.0 for m in thetas}
        coherents = {m: 0.0 for m in thetas}
        for chan in sequence:
            tv = tv_stm(chan)
            ao = ao_optimize(chan, scenario)
            nn = infer_config(params, chan, scenario.n_subcarriers)
            thetas["tv_stm"].append(tv.thetas[0])
            thetas["ao"].append(ao.config.thetas[0])
            thetas["nn"].append(nn.thetas[0])
            rates["tv_stm"] += achievable_rate(chan, tv, unif, scenario).rate_bit_s
            ao_rep = achievable_rate(chan, ao.config, ao.allocation, scenario)
            rates["ao"] += ao_rep.rate_bit_s
            rates["nn"] += achievable_rate(chan, nn, unif, scenario).rate_bit_s
            coherents["tv_stm"] += _coherent_row_rate(chan, scenario)
        elapsed = time.perf_counter() - started
        coherent_mean = coherents["tv_stm"] / len(sequence)
        for method in sorted(thetas):
            # wrap after quantizing so +pi and -pi compare as the same level
            quantized = wrap_phase(quantize(np.vstack(thetas[method]), spec.quant_bits))
            rows.append(ResultRow(
                method, n_elements, spec.bandwidth_hz, 0.0, spec.quant_bits,
                rates[method] / len(sequence), coherent_mean,
                efficiency_pct=efficiency_rate(quantized), wall_time_s=elapsed))
    rows.sort(key=lambda r: (r.n_reflectors, r.method))
    return rows


def run_doppler_table(spec: ExperimentSpec) -> list[ResultRow]:
    """Mobile-user comparison of the time-varying and time-invariant
    strongest-tap configurations against the coherent ceiling.

    Uniform-power rows carry the headline numbers; ``*_wf`` rows repeat them
    with water-filled power.  The ``uncompensated`` row holds the Doppler
    the link suffers with the surface switched off (drift of the bare direct
    channel, or the largest path Doppler when the direct link is blocked);
    ``frozen_random`` additionally measures a fixed random configuration.
    """
    rows = []
    methods = ("coherent", "frozen_random", "ti_stm", "ti_stm_wf",
               "tv_stm", "tv_stm_wf", "uncompensated")
    for n_idx, n_elements in enumerate(spec.n_sweep):
        started = time.perf_counter()
        scenario = default_mobile_scenario(
            n_elements, spec.bandwidth_hz, spec.n_subcarriers,
            spec.ue_speed, seed=spec.seed)
        acc_rate = {m: 0.0 for m in methods}
        acc_coh = {m: 0.0 for m in methods}
        acc_res = {m: 0.0 for m in methods}
        noise = scenario.bandwidth_hz * scenario.noise_density
        for trial in range(spec.trials):
            # the trial stream is shared across the N sweep (common random
            # numbers), so size trends are paired comparisons
            rng = _rng(spec.seed, 4, trial)
            paths = derive_geometry(scenario, rng)
            chan = synthesize_channel(scenario, paths)
            unif = uniform_allocation(scenario)
            coh = _coherent_row_rate(chan, scenario)
            acc_rate["coherent"] += coh
            acc_coh["coherent"] += coh
            for name, config in (("tv_stm", tv_stm(chan)), ("ti_stm", ti_stm(chan))):
                report = achievable_rate(chan, config, unif, scenario)
                res = residual_doppler(chan, config)
                acc_rate[name] += report.rate_bit_s
                acc_coh[name] += report.coherent_bit_s
                acc_res[name] += abs(res)
                powers = np.vstack([
                    waterfill(report.per_subcarrier_snr[u] * noise
                              / np.maximum(unif.powers[u], 1e-300),
                              scenario.power_budget, noise)
                    for u in range(chan.n_blocks)
                ])
                wf_report = achievable_rate(chan, config, PowerAllocation(powers), scenario)
                acc_rate[name + "_wf"] += wf_report.rate_bit_s
                acc_coh[name + "_wf"] += wf_report.coherent_bit_s
                acc_res[name + "_wf"] += abs(res)
            frozen = RisConfiguration(
                np.tile(rng.uniform(-np.pi, np.pi, scenario.n_reflectors),
                        (scenario.n_blocks, 1)),
                time_invariant=True)
            frozen_report = achievable_rate(chan, frozen, unif, scenario)
            acc_rate["frozen_random"] += frozen_report.rate_bit_s
            acc_coh["frozen_random"] += frozen_report.coherent_bit_s
            acc_res["frozen_random"] += abs(residual_doppler(chan, frozen))
            if paths.direct_paths:
                bare_drift = abs(tap_drift_hz(chan.direct_taps, chan.block_duration_s))
            else:
                bare_drift = paths.max_doppler_hz()
            acc_res["uncompensated"] += bare_drift
            pad = scenario.n_subcarriers - chan.n_taps
            bare = full_freq_response(np.pad(chan.direct_taps, ((0, 0), (0, pad))))
            bare_snr = unif.powers * np.abs(bare) ** 2 / noise
            xi = scenario.n_subcarriers + chan.n_taps - 1
            bare_rate = scenario.bandwidth_hz / xi * float(np.sum(np.log2(1.0 + bare_snr)))
            acc_rate["uncompensated"] += bare_rate
            acc_coh["uncompensated"] += coh
        elapsed = time.perf_counter() - started
        for method in methods:
            rows.append(ResultRow(
                method, n_elements, spec.bandwidth_hz, spec.ue_speed, None,
                acc_rate[method] / spec.trials, acc_coh[method] / spec.trials,
                residual_doppler_hz=(None if method == "coherent"
                                     else acc_res[method] / spec.trials),
                wall_time_s=elapsed))
    rows.sort(key=lambda r: (r.n_reflectors, r.method))
    return rows


def random_tiny_scenario(rng: np.random.Generator, max_reflectors: int = 6,
                         mobile: bool = False) -> Scenario:
    """Small random instance for exhaustive-search and oracle checks."""
    n = int(rng.integers(1, max_reflectors + 1))
    k = int(rng.choice([8, 16, 32]))
    carrier = float(rng.uniform(1e9, 6e9))
    lam = 3e8 / carrier
    speed = float(rng.uniform(5.0, 30.0)) if mobile else 0.0
    blocks = int(rng.integers(2, 5)) if mobile else 1
    return Scenario(
        carrier_hz=carrier,
        bandwidth_hz=float(rng.uniform(2e6, 8e6)),
        n_subcarriers=k,
        grid=RisGrid(n_rows=n, n_cols=1, d_h=lam / 2, d_v=lam / 2),
        ap_pos=(30.0 + rng.uniform(-5, 5), -20.0 + rng.uniform(-5, 5), 10.0),
        ris_pos=(0.0, 0.0, 5.0),
        ue_pos=(15.0 + rng.uniform(-5, 5), 10.0 + rng.uniform(-5, 5), 1.5),
        ue_speed=speed,
        ue_heading=(0.0, 1.0, 0.0),
        block_duration_s=3e-4,
        n_blocks=blocks,
        noise_density=5e-23,
        power_budget=1.0,
        rng_seed=int(rng.integers(0, 2 ** 31)),
        profile=PathProfile(
            n_ap_ris_nlos=int(rng.integers(1, 3)),
            n_ris_ue_nlos=int(rng.integers(1, 3)),
            n_direct_paths=int(rng.integers(0, 4)),
            nlos_delay_spread_s=100e-9,
        ),
    )


def brute_force_config_oracle(chan: ChannelRealization, bits: int,
                              alloc: PowerAllocation, scenario: Scenario):
    """Exhaustively search every quantized configuration (tiny inputs only).

    Returns the best configuration (held across blocks) and its rate.
    Refuses anything beyond ``2**bits`` levels on more than 8 reflectors or
    more than 2 bits: the search space is capped at 4**8 points.
    """
    n = chan.n_reflectors
    if bits > 2 or n > 8:
        raise ValueError(f"exhaustive search refused for N={n}, bits={bits}")
    step = np.pi / 2 ** (bits - 1)
    levels = -np.pi + step * np.arange(2 ** bits)
    combos = np.stack(
        np.meshgrid(*([levels] * n), indexing="ij"), axis=-1).reshape(-1, n)
    omegas = np.exp(1j * combos)
    powers = alloc.powers
    noise = scenario.bandwidth_hz * scenario.noise_density
    xi = scenario.n_subcarriers + chan.n_taps - 1
    totals = np.zeros(combos.shape[0])
    for u in range(chan.n_blocks):
        d, q = block_spectra(chan, u + 1, scenario.n_subcarriers)
        h = d[:, None] + q @ omegas.T
        snr = powers[u][:, None] * np.abs(h) ** 2 / noise
        totals += np.log2(1.0 + snr).sum(axis=0)
    totals *= scenario.bandwidth_hz / xi
    best = int(np.argmax(totals))
    config = RisConfiguration(np.tile(combos[best], (chan.n_blocks, 1)),
                              time_invariant=True)
    return config, float(totals[best])


def run_oracle_suite(spec: ExperimentSpec) -> list[ResultRow]:
    """Sandwich the optimizers between brute force and quantization on tiny
    instances: continuous AO above the quantized optimum, quantized
    single-shot methods below it."""
    rows = []
    bits = min(spec.quant_bits, 2)
    for instance in range(spec.trials):
        rng = _rng(spec.seed, instance)
        scenario = random_tiny_scenario(rng)
        chan = synthesize_channel(scenario, derive_geometry(scenario, rng))
        unif = uniform_allocation(scenario)
        _, oracle_value = brute_force_config_oracle(chan, bits, unif, scenario)
        ao = ao_optimize(chan, scenario)
        ao_rate = achievable_rate(chan, ao.config, ao.allocation, scenario).rate_bit_s
        tv_q = RisConfiguration(wrap_phase(quantize(tv_stm(chan).thetas, bits)))
        tv_rate = achievable_rate(chan, tv_q, unif, scenario).rate_bit_s
        params = init_params(scenario.n_subcarriers, scenario.n_reflectors, 2,
                             _rng(spec.seed, instance, 1))
        nn_q = RisConfiguration(wrap_phase(
            quantize(infer_config(params, chan, scenario.n_subcarriers).thetas, bits)))
        nn_rate = achievable_rate(chan, nn_q, unif, scenario).rate_bit_s
        for method, rate in (("oracle", oracle_value), ("ao", ao_rate),
                             ("tv_stm_q", tv_rate), ("nn_q", nn_rate)):
            rows.append(ResultRow(
                method, scenario.n_reflectors, scenario.bandwidth_hz, 0.0,
                bits if method != "ao" else None, rate, oracle_value))
    return rows


def run_experiment(spec: ExperimentSpec, emit: bool = True) -> list[ResultRow]:
    """Dispatch on the experiment kind and optionally write the CSVs."""
    runner = {
        "rate_vs_bandwidth": run_rate_vs_bandwidth,
        "efficiency_table": run_efficiency_table,
        "doppler_table": run_doppler_table,
        "oracle_suite": run_oracle_suite,
    }[spec.kind]
    rows = runner(spec)
    if emit:
        plot = (str(spec.out_path) + ".plot.csv"
                if spec.kind == "rate_vs_bandwidth" else None)
        emit_results(rows, spec.out_path, plot)
    return rows


_SPEC_CASTS = {
    "kind": str, "n_reflectors": int, "bandwidth_hz": float, "n_subcarriers": int,
    "ue_speed": float, "quant_bits": int, "trials": int, "seed": int,
    "out_path": str, "train_realizations": int, "train_epochs": int,
    "delay_jitter_s": float,
}


def experiment_spec_from_kv(pairs: dict[str, str]) -> ExperimentSpec:
    kwargs = {}
    for key, value in pairs.items():
        if key == "bandwidth_sweep_hz":
            kwargs[key] = tuple(float(x) for x in value.split(","))
        elif key == "n_sweep":
            kwargs[key] = tuple(int(x) for x in value.split(","))
        elif key in _SPEC_CASTS:
            kwargs[key] = _SPEC_CASTS[key](value)
        else:
            raise InvalidScenarioError(f"unknown experiment key {key!r}")
    if "kind" not in kwargs:
        raise InvalidScenarioError("experiment file must set 'kind'")
    return ExperimentSpec(**kwargs)
