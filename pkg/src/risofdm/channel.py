"""Tap-domain channel synthesis and frequency-domain views.

The direct link collapses into an M-tap impulse response per transmission
block; the reflected link factorizes into a per-block N x M matrix ``V`` so
that, for any unit-modulus element weights ``w = exp(j theta)``, the received
composite taps are exactly ``V.T @ w``.  Mobility enters only through a
per-block phasor ``exp(+j 2 pi f_D u T_b)`` on each path; with zero speed and
a single block the mobile generator reproduces the stationary one bit for
bit.

Each path contributes a sampled band-limited pulse ``sinc(m + B (eta - tau))``
with ``sinc(x) = sin(pi x) / (pi x)``; ``eta`` anchors the first tap so the
response stays causal.  The tiny delay a reflector's own phase shift adds
(at most half a carrier period, orders of magnitude below the tap spacing)
is left out of the pulse argument, which is what makes the ``V.T @ w``
factorization exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleScenarioError, InvalidScenarioError
from .scene import PathSet, RisGrid, Scenario, array_response, wavelength

GUARD_TAPS = 4  # extra taps kept for sinc sidelobes of off-grid delays


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Per-block channel tensors, immutable after construction.

    direct_taps: complex (U, M); composite: complex (U, N, M), one row per
    reflector.  ``eta`` is the causality reference the tap grid is anchored
    to and ``block_duration_s`` the spacing of the U blocks in time.
    """

    n_taps: int
    eta: float
    direct_taps: np.ndarray
    composite: np.ndarray
    block_duration_s: float

    def __post_init__(self):
        self.direct_taps.setflags(write=False)
        self.composite.setflags(write=False)

    @property
    def n_blocks(self) -> int:
        return self.direct_taps.shape[0]

    @property
    def n_reflectors(self) -> int:
        return self.composite.shape[1]


def delay_reference(paths: PathSet) -> float:
    """Causality anchor: earliest direct delay, or earliest cascade delay
    when the direct link is blocked."""
    if paths.direct_paths:
        return min(p.delay_s for p in paths.direct_paths)
    cascade = [a.delay_s + b.delay_s for a in paths.ap_ris_paths for b in paths.ris_ue_paths]
    if not cascade:
        raise InvalidScenarioError("path set contains no paths")
    return min(cascade)


def n_taps(paths: PathSet, scenario: Scenario, eta: float, guard: int = GUARD_TAPS) -> int:
    """Number of taps needed to hold the delay spread plus sinc guard.

    The span includes the largest per-reflector phase delay (half a carrier
    period), so even a zero-spread channel keeps one leading tap.  Raises
    when the result would exceed the subcarrier count: the cyclic prefix
    would no longer fit the symbol.
    """
    delays = [a.delay_s + b.delay_s for a in paths.ap_ris_paths for b in paths.ris_ue_paths]
    delays += [p.delay_s for p in paths.direct_paths]
    phase_delay = 1.0 / (2.0 * scenario.carrier_hz)
    m = math.ceil(scenario.bandwidth_hz * (max(delays) + phase_delay - eta)) + guard
    m = max(m, 1)
    if m > scenario.n_subcarriers:
        raise InfeasibleScenarioError(
            f"{m} taps exceed {scenario.n_subcarriers} subcarriers; "
            "lower the bandwidth or the delay spread"
        )
    return m


def direct_taps(paths: PathSet, scenario: Scenario, eta: float, m_count: int,
                block: int) -> np.ndarray:
    """Direct-link taps for transmission block ``block`` (1-based), shape (M,)."""
    if not 1 <= block <= scenario.n_blocks:
        raise InvalidScenarioError(f"block {block} outside 1..{scenario.n_blocks}")
    m = np.arange(m_count)
    taps = np.zeros(m_count, dtype=complex)
    for p in paths.direct_paths:
        pulse = np.sinc(m + scenario.bandwidth_hz * (eta - p.delay_s))
        phase = np.exp(-2j * np.pi * (
            scenario.carrier_hz * p.delay_s
            - p.doppler_hz * block * scenario.block_duration_s
        ))
        taps += math.sqrt(p.gain) * phase * pulse
    return taps


def composite_matrix(paths: PathSet, scenario: Scenario, grid: RisGrid, eta: float,
                     m_count: int, block: int) -> np.ndarray:
    """Reflected-link factor matrix ``V`` for one block, shape (N, M).

    Row n aggregates every AP->RIS x RIS->UE path pair as seen by reflector
    n, with the reflector's own phase weight left out: applying a
    configuration is the contraction ``V.T @ exp(j theta)``.
    """
    if not 1 <= block <= scenario.n_blocks:
        raise InvalidScenarioError(f"block {block} outside 1..{scenario.n_blocks}")
    lam = wavelength(scenario)
    m = np.arange(m_count)
    v = np.zeros((grid.n_elements, m_count), dtype=complex)
    responses_a = [array_response(grid, p.angles, lam) for p in paths.ap_ris_paths]
    responses_b = [array_response(grid, p.angles, lam) for p in paths.ris_ue_paths]
    for pa, resp_a in zip(paths.ap_ris_paths, responses_a):
        for pb, resp_b in zip(paths.ris_ue_paths, responses_b):
            delay = pa.delay_s + pb.delay_s
            pulse = np.sinc(m + scenario.bandwidth_hz * (eta - delay))
            phase = np.exp(-2j * np.pi * (
                scenario.carrier_hz * delay
                - pb.doppler_hz * block * scenario.block_duration_s
            ))
            amp = math.sqrt(pa.gain * pb.gain)
            v += amp * phase * np.outer(resp_a * resp_b, pulse)
    return v


def synthesize_channel(scenario: Scenario, paths: PathSet | None = None,
                       rng: np.random.Generator | None = None,
                       guard: int = GUARD_TAPS) -> ChannelRealization:
    """Build the full per-block realization for a scenario.

    One path set serves the whole frame (the channel is static within it);
    only the per-block Doppler phasors advance from block to block.
    """
    if paths is None:
        from .scene import derive_geometry  # local import keeps module loading light
        if rng is None:
            rng = np.random.default_rng(scenario.rng_seed)
        paths = derive_geometry(scenario, rng)
    eta = delay_reference(paths)
    m_count = n_taps(paths, scenario, eta, guard)
    u_count = scenario.n_blocks
    direct = np.zeros((u_count, m_count), dtype=complex)
    comp = np.zeros((u_count, scenario.grid.n_elements, m_count), dtype=complex)
    for u in range(1, u_count + 1):
        direct[u - 1] = direct_taps(paths, scenario, eta, m_count, u)
        comp[u - 1] = composite_matrix(paths, scenario, scenario.grid, eta, m_count, u)
    return ChannelRealization(
        n_taps=m_count,
        eta=eta,
        direct_taps=direct,
        composite=comp,
        block_duration_s=scenario.block_duration_s,
    )


def freq_response(taps: np.ndarray, subcarrier: int) -> complex:
    """Response ``sum_j exp(+2j pi i j / K) x[j]`` of a K-padded tap vector
    at one subcarrier (conjugated DFT row)."""
    taps = np.asarray(taps)
    k = taps.shape[0]
    if not 0 <= subcarrier < k:
        raise IndexError(f"subcarrier {subcarrier} outside 0..{k - 1}")
    j = np.arange(k)
    return complex(np.sum(np.exp(2j * np.pi * subcarrier * j / k) * taps))


def full_freq_response(taps: np.ndarray) -> np.ndarray:
    """All K subcarrier responses at once (scaled inverse FFT)."""
    taps = np.asarray(taps)
    return taps.shape[-1] * np.fft.ifft(taps, axis=-1)


def block_spectra(chan: ChannelRealization, block: int,
                  n_subcarriers: int) -> tuple[np.ndarray, np.ndarray]:
    """Frequency-domain views used by the rate and configuration code.

    Returns ``(d, Q)`` where ``d[i]`` is the direct response on subcarrier i
    and ``Q[i, n]`` the response of reflector n's composite row, so the
    combined channel at a configuration ``w`` is ``d + Q @ w``.
    """
    k = n_subcarriers
    if chan.n_taps > k:
        raise InvalidScenarioError("channel has more taps than subcarriers")
    u = block - 1
    pad = k - chan.n_taps
    d = full_freq_response(np.pad(chan.direct_taps[u], (0, pad)))
    q = full_freq_response(np.pad(chan.composite[u], ((0, 0), (0, pad)))).T
    return d, q


_CSV_HEADER = "block,tap,reflector,re,im"


def export_channel_csv(chan: ChannelRealization, path) -> None:
    """Write a realization as one coefficient per row (reflector -1 holds
    the direct taps); metadata travels in leading comment lines."""
    lines = [
        f"# n_blocks={chan.n_blocks}",
        f"# n_reflectors={chan.n_reflectors}",
        f"# n_taps={chan.n_taps}",
        f"# eta={float(chan.eta)!r}",
        f"# block_duration_s={float(chan.block_duration_s)!r}",
        _CSV_HEADER,
    ]
    for u in range(chan.n_blocks):
        for m in range(chan.n_taps):
            c = chan.direct_taps[u, m]
            lines.append(f"{u + 1},{m},-1,{float(c.real)!r},{float(c.imag)!r}")
        for n in range(chan.n_reflectors):
            for m in range(chan.n_taps):
                c = chan.composite[u, n, m]
                lines.append(f"{u + 1},{m},{n},{float(c.real)!r},{float(c.imag)!r}")
    try:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write channel CSV to {path}: {exc}") from exc


def import_channel_csv(path) -> ChannelRealization:
    """Inverse of `export_channel_csv`."""
    meta: dict[str, str] = {}
    rows = []
    try:
        with open(path, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, value = line.lstrip("# ").partition("=")
                    meta[key.strip()] = value.strip()
                elif line != _CSV_HEADER:
                    rows.append(line.split(","))
    except OSError as exc:
        raise OSError(f"cannot read channel CSV from {path}: {exc}") from exc
    u_count = int(meta["n_blocks"])
    n_count = int(meta["n_reflectors"])
    m_count = int(meta["n_taps"])
    direct = np.zeros((u_count, m_count), dtype=complex)
    comp = np.zeros((u_count, n_count, m_count), dtype=complex)
    for block_s, tap_s, refl_s, re_s, im_s in rows:
        u, m, n = int(block_s) - 1, int(tap_s), int(refl_s)
        value = float(re_s) + 1j * float(im_s)
        if n < 0:
            direct[u, m] = value
        else:
            comp[u, n, m] = value
    return ChannelRealization(
        n_taps=m_count,
        eta=float(meta["eta"]),
        direct_taps=direct,
        composite=comp,
        block_duration_s=float(meta["block_duration_s"]),
    )
