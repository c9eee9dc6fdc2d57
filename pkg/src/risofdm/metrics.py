"""Rate objective and the derived performance metrics.

The achievable rate sums ``log2(1 + p_i |H_i|^2 / (B N0))`` over subcarriers
and blocks, scaled by ``B / xi`` with the cyclic-prefix factor
``xi = K + M - 1``.  The coherent bound replaces the combined channel
magnitude with the sum of the individual magnitudes (every reflector and the
direct path perfectly phase aligned per subcarrier), which upper-bounds any
configuration by the triangle inequality.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, full_freq_response
from .errors import MetricError
from .scene import Scenario


@dataclass(frozen=True)
class PowerAllocation:
    """Per-block subcarrier powers in watts, shape (U, K)."""

    powers: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.powers, dtype=float)
        if p.ndim != 2:
            raise ValueError("powers must be a (n_blocks, n_subcarriers) array")
        if np.any(p < 0.0):
            raise ValueError("subcarrier powers cannot be negative")
        object.__setattr__(self, "powers", p)
        p.setflags(write=False)


@dataclass(frozen=True)
class RateReport:
    """Outcome of a rate evaluation plus optional companion metrics."""

    rate_bit_s: float
    coherent_bit_s: float
    per_subcarrier_snr: np.ndarray  # (U, K)
    xi: int
    b_bits: int | None = None
    efficiency_pct: float | None = None
    residual_doppler_hz: float | None = None

    CSV_HEADER = "rate_bps,coherent_bps,xi,b_bits,efficiency_pct,residual_doppler_hz"

    def csv_row(self) -> str:
        def fmt(x):
            return "" if x is None else repr(x) if isinstance(x, float) else str(x)

        return ",".join(
            fmt(v) for v in (
                float(self.rate_bit_s), float(self.coherent_bit_s), self.xi,
                self.b_bits, self.efficiency_pct, self.residual_doppler_hz,
            )
        )


def uniform_allocation(scenario: Scenario) -> PowerAllocation:
    """Spread the block budget evenly over the subcarriers."""
    p = scenario.power_budget / scenario.n_subcarriers
    return PowerAllocation(np.full((scenario.n_blocks, scenario.n_subcarriers), p))


def _combined_spectra(chan: ChannelRealization, omegas: np.ndarray,
                      scenario: Scenario) -> np.ndarray:
    """Per-block combined channel responses, shape (U, K)."""
    k = scenario.n_subcarriers
    pad = k - chan.n_taps
    taps = chan.direct_taps + np.einsum("unm,un->um", chan.composite, omegas)
    return full_freq_response(np.pad(taps, ((0, 0), (0, pad))))


def _check_allocation(alloc: PowerAllocation, scenario: Scenario) -> np.ndarray:
    p = alloc.powers
    if p.shape != (scenario.n_blocks, scenario.n_subcarriers):
        raise ValueError(
            f"allocation shape {p.shape} does not match "
            f"({scenario.n_blocks}, {scenario.n_subcarriers})"
        )
    if np.any(p.sum(axis=1) > scenario.power_budget + 1e-9):
        raise ValueError("allocation exceeds the power budget")
    return p


def achievable_rate(chan: ChannelRealization, config, alloc: PowerAllocation,
                    scenario: Scenario) -> RateReport:
    """Rate of one configuration, with the coherent bound alongside.

    ``config`` provides one phase row per block (see
    `configurators.RisConfiguration`); weights must be unit modulus.
    """
    omegas = np.asarray(config.omegas)
    if omegas.shape != (scenario.n_blocks, scenario.n_reflectors):
        raise ValueError(
            f"configuration shape {omegas.shape} does not match "
            f"({scenario.n_blocks}, {scenario.n_reflectors})"
        )
    p = _check_allocation(alloc, scenario)
    h = _combined_spectra(chan, omegas, scenario)
    noise = scenario.bandwidth_hz * scenario.noise_density
    snr = p * np.abs(h) ** 2 / noise
    xi = scenario.n_subcarriers + chan.n_taps - 1
    rate = scenario.bandwidth_hz / xi * float(np.sum(np.log2(1.0 + snr)))
    return RateReport(
        rate_bit_s=rate,
        coherent_bit_s=coherent_rate(chan, alloc, scenario),
        per_subcarrier_snr=snr,
        xi=xi,
    )


def coherent_gains(chan: ChannelRealization, scenario: Scenario) -> np.ndarray:
    """Per-subcarrier power of the perfectly aligned channel, shape (U, K)."""
    k = scenario.n_subcarriers
    pad = k - chan.n_taps
    mags = np.abs(full_freq_response(np.pad(chan.direct_taps, ((0, 0), (0, pad)))))
    mags += np.abs(
        full_freq_response(np.pad(chan.composite, ((0, 0), (0, 0), (0, pad))))
    ).sum(axis=1)
    return mags ** 2


def coherent_rate(chan: ChannelRealization, alloc: PowerAllocation,
                  scenario: Scenario) -> float:
    """Upper bound: every reflector and the direct path add in phase on
    every subcarrier."""
    p = _check_allocation(alloc, scenario)
    noise = scenario.bandwidth_hz * scenario.noise_density
    snr = p * coherent_gains(chan, scenario) / noise
    xi = scenario.n_subcarriers + chan.n_taps - 1
    return scenario.bandwidth_hz / xi * float(np.sum(np.log2(1.0 + snr)))


def waterfill(gains: np.ndarray, total_power: float, noise_floor: float) -> np.ndarray:
    """Classic water level over parallel channels.

    ``gains`` are channel power gains; the returned powers satisfy
    ``p_i = max(0, mu - noise_floor / g_i)`` with the level ``mu`` found by
    bisection so the budget is met to a 1e-12 relative tolerance.
    Zero-gain subcarriers receive nothing; an all-zero gain vector yields an
    all-zero allocation with a warning.
    """
    gains = np.asarray(gains, dtype=float)
    if total_power <= 0.0:
        raise ValueError("total power must be positive")
    if np.any(gains < 0.0):
        raise ValueError("gains cannot be negative")
    with np.errstate(divide="ignore"):
        cost = np.where(gains > 0.0, noise_floor / np.where(gains > 0.0, gains, 1.0), np.inf)
    if not np.any(np.isfinite(cost)):
        warnings.warn("all subcarrier gains are zero; allocating no power")
        return np.zeros_like(gains)

    def spent(mu: float) -> float:
        return float(np.sum(np.maximum(0.0, mu - cost[np.isfinite(cost)])))

    lo = float(np.min(cost))
    hi = lo + total_power  # at least the cheapest channel absorbs the budget
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if spent(mid) > total_power:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * total_power:
            break
    mu = 0.5 * (lo + hi)
    powers = np.where(np.isfinite(cost), np.maximum(0.0, mu - cost), 0.0)
    excess = powers.sum() - total_power
    if excess > 0.0:  # trim bisection residue, keep within budget
        active = powers > 0.0
        powers[active] = np.maximum(0.0, powers[active] - excess / active.sum())
    return powers


def quantize(theta: np.ndarray, bits: int) -> np.ndarray:
    """Snap phases to the ``pi / 2**(bits-1)`` grid, ties away from zero."""
    if bits < 1:
        raise ValueError("need at least one quantization bit")
    theta = np.asarray(theta, dtype=float)
    step = np.pi / 2 ** (bits - 1)
    ratio = theta / step
    levels = np.sign(ratio) * np.floor(np.abs(ratio) + 0.5)
    return levels * step


def efficiency_rate(config_sequence: np.ndarray) -> float:
    """Share of reflector-steps that kept their (quantized) phase, percent.

    ``config_sequence`` holds one quantized phase row per channel
    realization; entries are compared exactly between adjacent rows.
    """
    seq = np.asarray(config_sequence)
    if seq.ndim != 2 or seq.shape[0] < 2:
        raise MetricError("efficiency needs at least two configuration rows")
    t, n = seq.shape
    changes = int(np.count_nonzero(seq[1:] != seq[:-1]))
    return 100.0 * (1.0 - changes / (n * (t - 1)))


def tap_drift_hz(taps: np.ndarray, block_duration_s: float) -> float:
    """Phase-drift rate of the strongest tap of a (U, M) tap series, in Hz.

    Fits a least-squares line to the unwrapped phase over the U blocks and
    converts the slope to a frequency.  The tap is picked by total energy
    across blocks.
    """
    taps = np.asarray(taps)
    if taps.shape[0] < 2:
        raise MetricError("residual Doppler needs at least two blocks")
    tap = int(np.argmax(np.sum(np.abs(taps) ** 2, axis=0)))
    series = taps[:, tap]
    if np.max(np.abs(series)) < 1e-12:
        raise MetricError("strongest combined tap is numerically zero")
    phase = np.unwrap(np.angle(series))
    u = np.arange(taps.shape[0], dtype=float)
    slope = float(np.polyfit(u, phase, 1)[0])  # rad per block
    return slope / (2.0 * np.pi * block_duration_s)


def residual_doppler(chan: ChannelRealization, config) -> float:
    """Drift of the strongest combined tap ``direct + V.T w`` across blocks."""
    omegas = np.asarray(config.omegas)
    taps = chan.direct_taps + np.einsum("unm,un->um", chan.composite, omegas)
    return tap_drift_hz(taps, chan.block_duration_s)
