"""Scenario description and propagation geometry for a RIS-aided OFDM link.

The reflecting surface is a rectangular grid of passive elements lying in the
y-z plane.  A path is described by its delay, its linear power gain and the
azimuth/elevation it presents to the surface; mobile paths additionally carry
a Doppler frequency.  Everything downstream (tap synthesis, rate evaluation,
configuration algorithms) reads its physical truth from one `Scenario`.

Conventions:
  * azimuth is measured in the x-y plane from the +x axis (the surface
    normal), elevation from the x-y plane towards +z;
  * element 0 of the grid sits at the surface origin, the element farthest
    from the origin applies the largest phase rotation;
  * Doppler is positive when the receiver moves towards the path source.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGeometryError, InvalidScenarioError

SPEED_OF_LIGHT = 3.0e8  # m/s, the value used everywhere in the model


def wrap_phase(theta):
    """Wrap angles (scalar or array) to the interval [-pi, pi)."""
    return (np.asarray(theta) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class RisGrid:
    """Rectangular reflector grid: ``n_rows * n_cols`` elements of size
    ``d_h`` x ``d_v`` meters."""

    n_rows: int
    n_cols: int
    d_h: float
    d_v: float

    def __post_init__(self):
        if self.n_rows < 1 or self.n_cols < 1:
            raise InvalidScenarioError("grid needs at least one row and one column")
        if not (self.d_h > 0.0 and self.d_v > 0.0):
            raise InvalidScenarioError("element sides d_h, d_v must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_rows * self.n_cols


@dataclass(frozen=True)
class PathAngles:
    """Azimuth/elevation pair seen from the reflecting surface, in radians."""

    azimuth: float
    elevation: float

    def __post_init__(self):
        if not (math.isfinite(self.azimuth) and math.isfinite(self.elevation)):
            raise InvalidScenarioError("path angles must be finite")
        if abs(self.azimuth) > math.pi or abs(self.elevation) > math.pi / 2:
            raise InvalidScenarioError(
                f"angles out of range: azimuth={self.azimuth}, elevation={self.elevation}"
            )


@dataclass(frozen=True)
class ApRisPath:
    delay_s: float
    gain: float
    angles: PathAngles


@dataclass(frozen=True)
class RisUePath:
    delay_s: float
    gain: float
    angles: PathAngles
    doppler_hz: float


@dataclass(frozen=True)
class DirectPath:
    delay_s: float
    gain: float
    doppler_hz: float


@dataclass(frozen=True)
class PathSet:
    """Per-path description of the three propagation groups.

    ``ap_ris_paths`` and ``ris_ue_paths`` form the composite (reflected)
    channel and must be non-empty; ``direct_paths`` may be empty when the
    direct link is blocked.  By construction of `derive_geometry` the first
    entry of each composite group is the geometric line-of-sight path.
    """

    ap_ris_paths: tuple[ApRisPath, ...]
    ris_ue_paths: tuple[RisUePath, ...]
    direct_paths: tuple[DirectPath, ...]

    def __post_init__(self):
        if not self.ap_ris_paths or not self.ris_ue_paths:
            raise InvalidScenarioError("composite channel needs at least one path per hop")
        for p in (*self.ap_ris_paths, *self.ris_ue_paths, *self.direct_paths):
            if p.delay_s < 0.0:
                raise InvalidScenarioError(f"negative path delay {p.delay_s}")
            if p.gain < 0.0:
                raise InvalidScenarioError(f"negative path gain {p.gain}")

    def max_doppler_hz(self) -> float:
        """Largest |Doppler| carried by any path (0 for a stationary set)."""
        shifts = [abs(p.doppler_hz) for p in self.ris_ue_paths]
        shifts += [abs(p.doppler_hz) for p in self.direct_paths]
        return max(shifts) if shifts else 0.0


@dataclass(frozen=True)
class PathProfile:
    """Statistical knobs for the synthetic path draw.

    Per-group pathloss follows PL(d) = (lambda / 4 pi d)^2 * d^-(gamma - 2);
    the line-of-sight component keeps ``los_fraction`` of a group's gain and
    the scattered paths share the rest with an exponential delay profile.
    """

    n_ap_ris_nlos: int = 1
    n_ris_ue_nlos: int = 1
    n_direct_paths: int = 3
    nlos_delay_spread_s: float = 300e-9
    nlos_decay_s: float = 100e-9
    los_fraction: float = 0.9
    los_exponent: float = 2.0
    nlos_exponent: float = 3.5
    direct_extra_loss: float = 10.0 ** (-3.5)  # linear; blockage on top of pathloss
    nlos_elevation_range: float = math.pi / 4

    def __post_init__(self):
        if self.n_ap_ris_nlos < 0 or self.n_ris_ue_nlos < 0 or self.n_direct_paths < 0:
            raise InvalidScenarioError("path counts cannot be negative")
        if not 0.0 < self.los_fraction <= 1.0:
            raise InvalidScenarioError("los_fraction must lie in (0, 1]")
        if self.nlos_delay_spread_s < 0.0 or self.nlos_decay_s <= 0.0:
            raise InvalidScenarioError("invalid delay spread / decay")


@dataclass(frozen=True)
class Scenario:
    """Carrier plan, node placement, mobility and budget for one link."""

    carrier_hz: float
    bandwidth_hz: float
    n_subcarriers: int
    grid: RisGrid
    ap_pos: tuple[float, float, float]
    ris_pos: tuple[float, float, float]
    ue_pos: tuple[float, float, float]
    ue_speed: float = 0.0
    ue_heading: tuple[float, float, float] = (1.0, 0.0, 0.0)
    block_duration_s: float = 1e-3
    n_blocks: int = 1
    noise_density: float = 5e-23
    power_budget: float = 1.0
    rng_seed: int = 0
    profile: PathProfile = field(default_factory=PathProfile)

    def __post_init__(self):
        if self.carrier_hz <= 0.0:
            raise InvalidScenarioError("carrier frequency must be positive")
        if self.bandwidth_hz <= 0.0:
            raise InvalidScenarioError("bandwidth must be positive")
        if self.n_subcarriers < 1:
            raise InvalidScenarioError("need at least one subcarrier")
        if self.ue_speed < 0.0:
            raise InvalidScenarioError("speed cannot be negative")
        if self.block_duration_s <= 0.0 or self.n_blocks < 1:
            raise InvalidScenarioError("invalid block structure")
        if self.noise_density <= 0.0 or self.power_budget <= 0.0:
            raise InvalidScenarioError("noise density and power budget must be positive")
        if abs(np.linalg.norm(self.ue_heading) - 1.0) > 1e-6:
            raise InvalidScenarioError("ue_heading must be a unit vector")

    @property
    def n_reflectors(self) -> int:
        return self.grid.n_elements


def wavelength(scenario: Scenario) -> float:
    """Carrier wavelength in meters."""
    if scenario.carrier_hz <= 0.0:
        raise InvalidScenarioError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / scenario.carrier_hz


def element_offsets(grid: RisGrid) -> np.ndarray:
    """Positions of the grid elements in the surface plane, shape (3, N).

    Column n is ``[0, d_h * (n mod n_rows), d_v * floor(n / n_cols)]``:
    the x row is identically zero because the surface spans the y-z plane.
    """
    n = np.arange(grid.n_elements)
    horizontal = grid.d_h * (n % grid.n_rows)
    vertical = grid.d_v * (n // grid.n_cols)
    return np.vstack([np.zeros_like(horizontal), horizontal, vertical])


def array_response(grid: RisGrid, angles: PathAngles, lam: float) -> np.ndarray:
    """Per-element phase front of a plane wave, unit-modulus complex (N,).

    The wave vector is ``(-2 pi / lam) [cos az cos el, sin az cos el, sin el]``
    and each element contributes ``exp(j <wave, offset>)``.
    """
    if lam <= 0.0:
        raise InvalidScenarioError("wavelength must be positive")
    az, el = angles.azimuth, angles.elevation
    wave = (-2.0 * np.pi / lam) * np.array(
        [math.cos(az) * math.cos(el), math.sin(az) * math.cos(el), math.sin(el)]
    )
    return np.exp(1j * (wave @ element_offsets(grid)))


def doppler_frequency(
    speed: float,
    heading: tuple[float, float, float] | np.ndarray,
    arrival_direction: tuple[float, float, float] | np.ndarray,
    carrier_hz: float,
) -> float:
    """Doppler shift in Hz for a receiver moving at ``speed`` m/s.

    ``arrival_direction`` points from the receiver towards the path source,
    so motion straight at the source yields +speed*carrier/c.
    """
    if speed < 0.0:
        raise InvalidScenarioError("speed cannot be negative")
    heading = np.asarray(heading, dtype=float)
    arrival = np.asarray(arrival_direction, dtype=float)
    for name, vec in (("heading", heading), ("arrival_direction", arrival)):
        if abs(np.linalg.norm(vec) - 1.0) > 1e-6:
            raise InvalidScenarioError(f"{name} must be a unit vector")
    return (speed * carrier_hz / SPEED_OF_LIGHT) * float(heading @ arrival)


def _bearing(from_pos: np.ndarray, to_pos: np.ndarray) -> PathAngles:
    d = to_pos - from_pos
    r = np.linalg.norm(d)
    return PathAngles(
        azimuth=math.atan2(d[1], d[0]),
        elevation=math.asin(np.clip(d[2] / r, -1.0, 1.0)),
    )


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _pathloss(lam: float, dist: float, exponent: float) -> float:
    return (lam / (4.0 * np.pi * dist)) ** 2 * dist ** -(exponent - 2.0)


def _split_gains(total: float, los_fraction: float, nlos_offsets: np.ndarray,
                 decay_s: float) -> tuple[float, np.ndarray]:
    """Split a group gain between its LOS path and an exponential tail."""
    if nlos_offsets.size == 0:
        return total, np.array([])
    weights = np.exp(-nlos_offsets / decay_s)
    nlos = (1.0 - los_fraction) * total * weights / weights.sum()
    return los_fraction * total, nlos


def _direction_from_angles(az: float, el: float) -> np.ndarray:
    return np.array(
        [math.cos(az) * math.cos(el), math.sin(az) * math.cos(el), math.sin(el)]
    )


def derive_geometry(scenario: Scenario, rng: np.random.Generator) -> PathSet:
    """Draw a path set consistent with the scenario geometry.

    Line-of-sight delays and angles follow from the node positions; scattered
    paths are drawn from the scenario's `PathProfile`.  Deterministic for a
    given generator state.  The first path of each composite group is the
    line-of-sight component.
    """
    ap = np.asarray(scenario.ap_pos, dtype=float)
    ris = np.asarray(scenario.ris_pos, dtype=float)
    ue = np.asarray(scenario.ue_pos, dtype=float)
    for a, b, names in ((ap, ris, "AP/RIS"), (ris, ue, "RIS/UE"), (ap, ue, "AP/UE")):
        if np.linalg.norm(a - b) < 1e-9:
            raise DegenerateGeometryError(f"{names} positions coincide")

    lam = wavelength(scenario)
    prof = scenario.profile
    d_ar = float(np.linalg.norm(ap - ris))
    d_ru = float(np.linalg.norm(ris - ue))
    d_au = float(np.linalg.norm(ap - ue))

    # AP -> RIS hop: LOS plus scattered paths, no Doppler (both ends static).
    gain_a = _pathloss(lam, d_ar, prof.los_exponent)
    off_a = rng.uniform(0.0, prof.nlos_delay_spread_s, size=prof.n_ap_ris_nlos)
    az_a = rng.uniform(-np.pi / 2, np.pi / 2, size=prof.n_ap_ris_nlos)
    el_a = rng.uniform(-prof.nlos_elevation_range, prof.nlos_elevation_range,
                       size=prof.n_ap_ris_nlos)
    los_gain_a, nlos_gain_a = _split_gains(
        gain_a, prof.los_fraction if prof.n_ap_ris_nlos else 1.0, off_a, prof.nlos_decay_s
    )
    ap_ris = [ApRisPath(d_ar / SPEED_OF_LIGHT, los_gain_a, _bearing(ris, ap))]
    for i in range(prof.n_ap_ris_nlos):
        ap_ris.append(
            ApRisPath(d_ar / SPEED_OF_LIGHT + off_a[i], nlos_gain_a[i],
                      PathAngles(az_a[i], el_a[i]))
        )

    # RIS -> UE hop: each path carries the Doppler of its arrival direction
    # at the (possibly moving) UE.
    gain_b = _pathloss(lam, d_ru, prof.los_exponent)
    off_b = rng.uniform(0.0, prof.nlos_delay_spread_s, size=prof.n_ris_ue_nlos)
    az_b = rng.uniform(-np.pi / 2, np.pi / 2, size=prof.n_ris_ue_nlos)
    el_b = rng.uniform(-prof.nlos_elevation_range, prof.nlos_elevation_range,
                       size=prof.n_ris_ue_nlos)
    arr_az = rng.uniform(-np.pi, np.pi, size=prof.n_ris_ue_nlos)
    arr_el = rng.uniform(-prof.nlos_elevation_range, prof.nlos_elevation_range,
                         size=prof.n_ris_ue_nlos)
    los_gain_b, nlos_gain_b = _split_gains(
        gain_b, prof.los_fraction if prof.n_ris_ue_nlos else 1.0, off_b, prof.nlos_decay_s
    )
    f_los = doppler_frequency(scenario.ue_speed, scenario.ue_heading,
                              _unit(ris - ue), scenario.carrier_hz)
    ris_ue = [RisUePath(d_ru / SPEED_OF_LIGHT, los_gain_b, _bearing(ris, ue), f_los)]
    for i in range(prof.n_ris_ue_nlos):
        f_i = doppler_frequency(
            scenario.ue_speed, scenario.ue_heading,
            _direction_from_angles(arr_az[i], arr_el[i]), scenario.carrier_hz,
        )
        ris_ue.append(
            RisUePath(d_ru / SPEED_OF_LIGHT + off_b[i], nlos_gain_b[i],
                      PathAngles(az_b[i], el_b[i]), f_i)
        )

    # Direct AP -> UE link: scattered-only, one shared Doppler from the AP
    # bearing; may be switched off entirely (blocked link).  The first path
    # sits at the geometric delay: the tap window is anchored at the direct
    # minimum, and the triangle inequality then keeps every cascade inside it.
    direct: list[DirectPath] = []
    if prof.n_direct_paths > 0:
        gain_d = _pathloss(lam, d_au, prof.nlos_exponent) * prof.direct_extra_loss
        off_d = np.concatenate([
            [0.0],
            rng.uniform(0.0, prof.nlos_delay_spread_s, size=prof.n_direct_paths - 1),
        ])
        weights = np.exp(-off_d / prof.nlos_decay_s)
        gains_d = gain_d * weights / weights.sum()
        f_direct = doppler_frequency(scenario.ue_speed, scenario.ue_heading,
                                     _unit(ap - ue), scenario.carrier_hz)
        for i in range(prof.n_direct_paths):
            direct.append(DirectPath(d_au / SPEED_OF_LIGHT + off_d[i], gains_d[i], f_direct))

    return PathSet(tuple(ap_ris), tuple(ris_ue), tuple(direct))


def _square_grid(n_elements: int, lam: float) -> RisGrid:
    side = math.isqrt(n_elements)
    if side * side != n_elements:
        raise InvalidScenarioError(f"reflector count {n_elements} is not a perfect square")
    return RisGrid(n_rows=side, n_cols=side, d_h=lam / 2.0, d_v=lam / 2.0)


def default_stationary_scenario(
    n_elements: int = 100,
    bandwidth_hz: float = 10.5e6,
    n_subcarriers: int = 256,
    seed: int = 0,
) -> Scenario:
    """Desk-scale static-user deployment used by the experiment defaults.

    Surface at the origin of the y-z plane, access point and user in front of
    it, direct link softly blocked so the reflected channel matters.
    """
    carrier = 3.5e9
    lam = SPEED_OF_LIGHT / carrier
    return Scenario(
        carrier_hz=carrier,
        bandwidth_hz=bandwidth_hz,
        n_subcarriers=n_subcarriers,
        grid=_square_grid(n_elements, lam),
        ap_pos=(30.0, -20.0, 10.0),
        ris_pos=(0.0, 0.0, 5.0),
        ue_pos=(15.0, 10.0, 1.5),
        ue_speed=0.0,
        ue_heading=(1.0, 0.0, 0.0),
        block_duration_s=n_subcarriers / bandwidth_hz,
        n_blocks=1,
        noise_density=5e-23,
        power_budget=1.0,
        rng_seed=seed,
        profile=PathProfile(),
    )


def default_mobile_scenario(
    n_elements: int = 100,
    bandwidth_hz: float = 10.5e6,
    n_subcarriers: int = 256,
    ue_speed: float = 20.0,
    n_blocks: int = 14,
    seed: int = 0,
) -> Scenario:
    """Drive-by deployment for the Doppler experiments.

    The user passes abeam of a roadside surface (zero radial speed towards
    it) while moving away from a distant access point, whose heavily blocked
    direct link carries nearly the full Doppler shift.  The block duration is
    set so the direct Doppler precesses about one full cycle per frame.
    """
    carrier = 3.5e9
    lam = SPEED_OF_LIGHT / carrier
    ue = (6.0, 0.0, 1.5)
    ap = (20.0, -150.0, 20.0)
    heading = (0.0, 1.0, 0.0)
    f_direct = abs(
        doppler_frequency(ue_speed, heading, _unit(np.array(ap) - np.array(ue)), carrier)
    )
    block = 1.0 / (n_blocks * f_direct) if f_direct > 0.0 else 1e-3
    return Scenario(
        carrier_hz=carrier,
        bandwidth_hz=bandwidth_hz,
        n_subcarriers=n_subcarriers,
        grid=_square_grid(n_elements, lam),
        ap_pos=ap,
        ris_pos=(0.0, 0.0, 4.0),
        ue_pos=ue,
        ue_speed=ue_speed,
        ue_heading=heading,
        block_duration_s=block,
        n_blocks=n_blocks,
        noise_density=2e-24,
        power_budget=1.0,
        rng_seed=seed,
        profile=PathProfile(los_fraction=0.98, direct_extra_loss=1e-4),
    )
