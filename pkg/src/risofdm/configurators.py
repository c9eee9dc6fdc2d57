"""Reflector phase-configuration algorithms.

Two families are implemented:

* strongest-tap maximization (STM): pick the tap whose phase-aligned
  combined magnitude is largest and align every reflector to it.  The
  time-varying flavor re-solves per block; the time-invariant flavor solves
  once at a reference block and freezes the result for the whole frame.
* alternating optimization (AO): water-fill the subcarrier powers, then
  improve the phases through a linearized lower bound of the per-subcarrier
  channel power, re-anchored after every inner solve.  The inner problem is
  handled by projected gradient ascent on the per-element unit disks with a
  backtracking line search, so no external solver is required and the true
  rate never decreases between outer rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, block_spectra
from .metrics import PowerAllocation, waterfill
from .scene import Scenario, wrap_phase


@dataclass(frozen=True)
class RisConfiguration:
    """Per-block reflector phases in [-pi, pi), shape (U, N)."""

    thetas: np.ndarray
    time_invariant: bool = False

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float)
        if t.ndim != 2:
            raise ValueError("thetas must be a (n_blocks, n_reflectors) array")
        if np.any(t < -np.pi) or np.any(t >= np.pi):
            raise ValueError("phases must lie in [-pi, pi)")
        if self.time_invariant and t.shape[0] > 1 and np.any(t != t[0]):
            raise ValueError("time-invariant configuration with differing rows")
        object.__setattr__(self, "thetas", t)
        t.setflags(write=False)

    @property
    def omegas(self) -> np.ndarray:
        """Unit-modulus element weights exp(j theta)."""
        return np.exp(1j * self.thetas)

    @property
    def n_blocks(self) -> int:
        return self.thetas.shape[0]


CONFIG_CSV_HEADER = "block,reflector,theta_radians"


def export_config_csv(config: RisConfiguration, path) -> None:
    lines = [CONFIG_CSV_HEADER]
    for u in range(config.thetas.shape[0]):
        for n in range(config.thetas.shape[1]):
            lines.append(f"{u + 1},{n},{float(config.thetas[u, n])!r}")
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write configuration CSV to {path}: {exc}") from exc


def stm_candidate(chan: ChannelRealization, block: int, tap: int) -> np.ndarray:
    """Phases aligning every reflector with the direct channel at one tap.

    ``theta_n = arg(direct[tap]) - arg(V[n, tap])`` wrapped to [-pi, pi).
    A zero direct tap aligns to phase zero instead (any constant reference
    yields the same combined magnitude).
    """
    if not 0 <= tap < chan.n_taps:
        raise ValueError(f"tap {tap} outside 0..{chan.n_taps - 1}")
    u = block - 1
    reference = np.angle(chan.direct_taps[u, tap])  # zero for a zero tap
    return wrap_phase(reference - np.angle(chan.composite[u, :, tap]))


def _aligned_tap_scores(chan: ChannelRealization, block: int) -> np.ndarray:
    """Squared combined magnitude of each tap after phase alignment."""
    u = block - 1
    return (np.abs(chan.direct_taps[u]) + np.abs(chan.composite[u]).sum(axis=0)) ** 2


def tv_stm(chan: ChannelRealization) -> RisConfiguration:
    """Time-varying strongest-tap configuration, one fresh row per block.

    Ties in the tap score break towards the smaller tap index.
    """
    rows = []
    for block in range(1, chan.n_blocks + 1):
        best_tap = int(np.argmax(_aligned_tap_scores(chan, block)))
        rows.append(stm_candidate(chan, block, best_tap))
    return RisConfiguration(np.vstack(rows), time_invariant=False)


def ti_stm(chan: ChannelRealization, reference_block: int = 1) -> RisConfiguration:
    """Time-invariant strongest-tap configuration.

    Candidate phases and the tap choice both come from the reference block;
    the single row is then held for every block of the frame.
    """
    if not 1 <= reference_block <= chan.n_blocks:
        raise ValueError(f"reference block {reference_block} outside 1..{chan.n_blocks}")
    best_tap = int(np.argmax(_aligned_tap_scores(chan, reference_block)))
    row = stm_candidate(chan, reference_block, best_tap)
    return RisConfiguration(np.tile(row, (chan.n_blocks, 1)), time_invariant=True)


def sca_surrogate(a, b, anchor_a, anchor_b):
    """Linearized lower bound of ``a**2 + b**2`` around an anchor point.

    Exact at the anchor, below the true value everywhere else (first-order
    expansion of a convex function).
    """
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    aa, bb = np.asarray(anchor_a, dtype=float), np.asarray(anchor_b, dtype=float)
    return aa ** 2 + bb ** 2 + 2.0 * aa * (a - aa) + 2.0 * bb * (b - bb)


@dataclass(frozen=True)
class ScaState:
    """Anchor point and iterate of the inner phase solver."""

    anchor_a: np.ndarray
    anchor_b: np.ndarray
    current_omega: np.ndarray
    iteration: int = 0


@dataclass(frozen=True)
class AoSettings:
    inner_tol: float = 1e-7
    inner_max_steps: int = 500
    outer_tol: float = 1e-5
    max_outer: int = 30
    max_backtracks: int = 40


def make_sca_state(chan: ChannelRealization, block: int, omega: np.ndarray,
                   scenario: Scenario) -> ScaState:
    """Anchor the surrogate at the combined response of ``omega``."""
    d, q = block_spectra(chan, block, scenario.n_subcarriers)
    combined = d + q @ omega
    return ScaState(anchor_a=combined.real.copy(), anchor_b=combined.imag.copy(),
                    current_omega=np.asarray(omega, dtype=complex).copy())


def sca_inner_solve(chan: ChannelRealization, block: int, powers: np.ndarray,
                    state: ScaState, scenario: Scenario,
                    settings: AoSettings = AoSettings()) -> ScaState:
    """Maximize the surrogate rate over the per-element unit disks.

    Projected gradient ascent with a halving line search starting at step 1;
    only improving steps are accepted, so the surrogate objective is
    non-decreasing.  Stops on a 1e-7 relative improvement (configurable) or
    after the step budget.
    """
    d, q = block_spectra(chan, block, scenario.n_subcarriers)
    noise = scenario.bandwidth_hz * scenario.noise_density
    p = np.asarray(powers, dtype=float)
    aa, bb = state.anchor_a, state.anchor_b

    def objective(omega: np.ndarray) -> float:
        combined = d + q @ omega
        bound = np.maximum(sca_surrogate(combined.real, combined.imag, aa, bb), 0.0)
        return float(np.sum(np.log2(1.0 + p * bound / noise)))

    def gradient(omega: np.ndarray) -> np.ndarray:
        combined = d + q @ omega
        bound = sca_surrogate(combined.real, combined.imag, aa, bb)
        live = bound > 0.0
        weight = np.where(live, p / noise / (np.log(2.0) * (1.0 + p * np.maximum(bound, 0.0) / noise)), 0.0)
        return 2.0 * (q.conj().T @ (weight * (aa + 1j * bb)))

    def project(omega: np.ndarray) -> np.ndarray:
        mags = np.abs(omega)
        return np.where(mags > 1.0, omega / np.where(mags > 0.0, mags, 1.0), omega)

    omega = state.current_omega.copy()
    value = objective(omega)
    steps = 0
    for steps in range(1, settings.inner_max_steps + 1):
        grad = gradient(omega)
        if not np.all(np.isfinite(grad)):
            raise RuntimeError(
                f"non-finite surrogate gradient at block {block}, step {steps}"
            )
        step = 1.0
        candidate, cand_value = None, value
        for _ in range(settings.max_backtracks):
            trial = project(omega + step * grad)
            trial_value = objective(trial)
            if trial_value > value:
                candidate, cand_value = trial, trial_value
                break
            step *= 0.5
        if candidate is None:
            break
        improvement = (cand_value - value) / max(abs(value), 1e-300)
        omega, value = candidate, cand_value
        if improvement < settings.inner_tol:
            break
    return ScaState(anchor_a=aa, anchor_b=bb, current_omega=omega,
                    iteration=state.iteration + steps)


@dataclass(frozen=True)
class AoResult:
    config: RisConfiguration
    allocation: PowerAllocation
    rate_history: tuple[tuple[float, ...], ...]  # per block, per outer round


def _block_rate(d, q, omega, powers, scenario) -> float:
    """One block's rate sum without the bandwidth/prefix prefactor, which is
    common to every candidate and irrelevant for the comparisons here."""
    noise = scenario.bandwidth_hz * scenario.noise_density
    gains = np.abs(d + q @ omega) ** 2
    return float(np.sum(np.log2(1.0 + powers * gains / noise)))


def ao_optimize(chan: ChannelRealization, scenario: Scenario,
                settings: AoSettings = AoSettings()) -> AoResult:
    """Alternate water-filling and surrogate phase updates, per block.

    Starts from the time-varying strongest-tap configuration with uniform
    power.  After convergence the weights are snapped back to unit modulus
    (phase kept); if that snap ever lost rate against the warm start, the
    warm start wins, so the result never falls below it.
    """
    warm = tv_stm(chan)
    noise = scenario.bandwidth_hz * scenario.noise_density
    k = scenario.n_subcarriers
    budget = scenario.power_budget
    thetas = np.empty_like(warm.thetas)
    allocation = np.empty((chan.n_blocks, k))
    history = []
    for block in range(1, chan.n_blocks + 1):
        d, q = block_spectra(chan, block, k)
        omega = np.exp(1j * warm.thetas[block - 1])
        powers = np.full(k, budget / k)
        rates = [_block_rate(d, q, omega, powers, scenario)]
        for _ in range(settings.max_outer):
            powers = waterfill(np.abs(d + q @ omega) ** 2, budget, noise)
            state = make_sca_state(chan, block, omega, scenario)
            state = sca_inner_solve(chan, block, powers, state, scenario, settings)
            omega = state.current_omega
            rates.append(_block_rate(d, q, omega, powers, scenario))
            if (rates[-1] - rates[-2]) < settings.outer_tol * max(abs(rates[-2]), 1e-300):
                break
        snapped = np.exp(1j * np.angle(omega))
        powers = waterfill(np.abs(d + q @ snapped) ** 2, budget, noise)
        final = _block_rate(d, q, snapped, powers, scenario)
        warm_omega = np.exp(1j * warm.thetas[block - 1])
        warm_powers = waterfill(np.abs(d + q @ warm_omega) ** 2, budget, noise)
        warm_rate = _block_rate(d, q, warm_omega, warm_powers, scenario)
        if final < warm_rate:  # snap guard; keep the better unit-modulus point
            snapped, powers, final = warm_omega, warm_powers, warm_rate
        thetas[block - 1] = wrap_phase(np.angle(snapped))
        allocation[block - 1] = powers
        rates.append(final)
        history.append(tuple(rates))
    return AoResult(
        config=RisConfiguration(thetas, time_invariant=False),
        allocation=PowerAllocation(allocation),
        rate_history=tuple(history),
    )
