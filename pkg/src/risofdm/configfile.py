"""Plain-text key/value configuration files.

One ``key = value`` pair per line, ``#`` starts a comment, values in SI
units.  Scenario keys match the `Scenario` field names, with the grid and
path-profile fields flattened to the top level (``n_rows``, ``d_h``,
``los_fraction``, ...); 3-vectors are comma-separated triples.  Training
keys match `TrainSettings` field names.
"""

from __future__ import annotations

from dataclasses import fields

from .errors import InvalidScenarioError
from .neural import TrainSettings
from .scene import PathProfile, RisGrid, Scenario, default_stationary_scenario


def parse_kv(path) -> dict[str, str]:
    pairs: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise InvalidScenarioError(
                        f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}"
                    )
                key, value = line.split("=", 1)
                pairs[key.strip()] = value.strip()
    except OSError as exc:
        raise OSError(f"cannot read configuration file {path}: {exc}") from exc
    return pairs


def _triple(text: str) -> tuple[float, float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 3:
        raise InvalidScenarioError(f"expected three comma-separated numbers, got {text!r}")
    return tuple(parts)  # type: ignore[return-value]


_SCENARIO_SCALARS = {
    "carrier_hz": float, "bandwidth_hz": float, "n_subcarriers": int,
    "ue_speed": float, "block_duration_s": float, "n_blocks": int,
    "noise_density": float, "power_budget": float, "rng_seed": int,
}
_SCENARIO_TRIPLES = ("ap_pos", "ris_pos", "ue_pos", "ue_heading")
_GRID_FIELDS = {"n_rows": int, "n_cols": int, "d_h": float, "d_v": float}


def scenario_from_kv(pairs: dict[str, str], base: Scenario | None = None) -> Scenario:
    """Build a scenario from parsed pairs, starting from the stationary
    defaults (or an explicit base) for anything left unspecified."""
    base = base if base is not None else default_stationary_scenario()
    kwargs = {
        "carrier_hz": base.carrier_hz, "bandwidth_hz": base.bandwidth_hz,
        "n_subcarriers": base.n_subcarriers, "grid": base.grid,
        "ap_pos": base.ap_pos, "ris_pos": base.ris_pos, "ue_pos": base.ue_pos,
        "ue_speed": base.ue_speed, "ue_heading": base.ue_heading,
        "block_duration_s": base.block_duration_s, "n_blocks": base.n_blocks,
        "noise_density": base.noise_density, "power_budget": base.power_budget,
        "rng_seed": base.rng_seed, "profile": base.profile,
    }
    grid_kwargs = {f: getattr(base.grid, f) for f in _GRID_FIELDS}
    profile_kwargs = {f.name: getattr(base.profile, f.name) for f in fields(PathProfile)}
    profile_casts = {f.name: (int if f.type == "int" else float) for f in fields(PathProfile)}
    for key, value in pairs.items():
        if key in _SCENARIO_SCALARS:
            kwargs[key] = _SCENARIO_SCALARS[key](value)
        elif key in _SCENARIO_TRIPLES:
            kwargs[key] = _triple(value)
        elif key in _GRID_FIELDS:
            grid_kwargs[key] = _GRID_FIELDS[key](value)
        elif key in profile_kwargs:
            profile_kwargs[key] = profile_casts[key](value)
        else:
            raise InvalidScenarioError(f"unknown scenario key {key!r}")
    kwargs["grid"] = RisGrid(**grid_kwargs)
    kwargs["profile"] = PathProfile(**profile_kwargs)
    return Scenario(**kwargs)


def scenario_from_file(path, base: Scenario | None = None) -> Scenario:
    return scenario_from_kv(parse_kv(path), base)


def train_settings_from_kv(pairs: dict[str, str]) -> TrainSettings:
    kwargs = {}
    casts = {"batch_size": int, "epochs": int, "depth": int}
    for key, value in pairs.items():
        names = {f.name for f in fields(TrainSettings)}
        if key not in names:
            raise InvalidScenarioError(f"unknown training key {key!r}")
        kwargs[key] = casts.get(key, float)(value)
    return TrainSettings(**kwargs)


def train_settings_from_file(path) -> TrainSettings:
    return train_settings_from_kv(parse_kv(path))
