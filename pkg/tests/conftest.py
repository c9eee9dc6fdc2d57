import numpy as np
import pytest

from risofdm import (ApRisPath, PathAngles, PathSet, RisGrid, RisUePath, Scenario,
                     derive_geometry, synthesize_channel)
from risofdm.harness import random_tiny_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_tiny_instance(seed: int, mobile: bool = False):
    """Random small scenario with one drawn path set and its realization."""
    rng = np.random.default_rng([seed, 77])
    scenario = random_tiny_scenario(rng, mobile=mobile)
    paths = derive_geometry(scenario, rng)
    chan = synthesize_channel(scenario, paths)
    return scenario, paths, chan


def synthetic_scenario(n_elements=4, n_subcarriers=16, carrier_hz=3e9,
                       bandwidth_hz=5e6, n_blocks=1, block_duration_s=2e-4,
                       **kwargs) -> Scenario:
    """Scenario shell for tests that hand-build their own path sets."""
    lam = 3e8 / carrier_hz
    defaults = dict(
        carrier_hz=carrier_hz,
        bandwidth_hz=bandwidth_hz,
        n_subcarriers=n_subcarriers,
        grid=RisGrid(n_elements, 1, lam / 2, lam / 2),
        ap_pos=(30.0, -20.0, 10.0),
        ris_pos=(0.0, 0.0, 5.0),
        ue_pos=(15.0, 10.0, 1.5),
        n_blocks=n_blocks,
        block_duration_s=block_duration_s,
        noise_density=5e-23,
        power_budget=1.0,
    )
    defaults.update(kwargs)
    return Scenario(**defaults)


def single_cascade_paths(delay_a=100e-9, delay_b=60e-9, doppler_hz=0.0,
                         gain_a=1.0, gain_b=1.0, direct=()):
    """One AP->RIS path and one RIS->UE path, optionally some direct paths."""
    return PathSet(
        ap_ris_paths=(ApRisPath(delay_a, gain_a, PathAngles(0.3, 0.1)),),
        ris_ue_paths=(RisUePath(delay_b, gain_b, PathAngles(-0.5, 0.05), doppler_hz),),
        direct_paths=tuple(direct),
    )
