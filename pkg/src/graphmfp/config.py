"""Run configuration: JSON file -> validated scenario and command options.

Every key is optional; defaults describe the baseline experiment (a 100 m
isovelocity waveguide, 200 Hz source at 5 km range and 50 m depth, searched
over 4-6 km and the full water column). Unknown keys anywhere in the file
are rejected so that typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .montecarlo import CorrectnessWindow, Scenario
from .waveguide import Environment, SourceLocation, half_step_depth_axis

PROCESSOR_CHOICES = ("bartlett", "graph", "both")

DEFAULTS: dict = {
    "environment": {
        "depth_m": 100.0,
        "sound_speed_mps": 1500.0,
        "frequency_hz": 200.0,
        "density_kgm3": 1000.0,
    },
    "source": {"range_m": 5000.0, "depth_m": 50.0},
    "search_grid": {
        "range_min_m": 4000.0,
        "range_max_m": 6000.0,
        "n_ranges": 101,
        "n_depths": 49,
    },
    "window": {
        "range_interval_m": [4950.0, 5050.0],
        "depth_interval_m": [45.0, 55.0],
    },
    "sensor_grid": {"count": 41, "spacing_m": 2.0},
    "snr_db": 20.0,
    "n_sensors": 10,
    "epsilon": None,
    "master_seed": 20211229,
    "redraw_array": "per_trial",
    "trials": 100,
    "sensor_counts": [4, 6, 8, 10, 15, 20, 30, 40],
    "processor": "both",
    "workers": 1,
}


@dataclass(frozen=True)
class RunConfig:
    """A validated scenario plus the command-level options."""

    scenario: Scenario
    processor: str
    trials: int
    sensor_counts: tuple[int, ...]
    workers: int


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _merged_section(raw: dict, key: str) -> dict:
    section = raw.get(key, {})
    if not isinstance(section, dict):
        raise ConfigError(f"'{key}' must be an object")
    _check_keys(section, DEFAULTS[key], f"'{key}'")
    return {**DEFAULTS[key], **section}


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"'{where}' must be a number")
    return float(value)


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{where}' must be an integer")
    return value


def _snr(value) -> float:
    if value == "inf":
        return float("inf")
    return _number(value, "snr_db")


def load_raw_config(path: os.PathLike | str | None) -> dict:
    """Read the JSON config file; ``None`` means all defaults."""
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    return raw


def build_run_config(raw: dict, overrides: dict | None = None) -> RunConfig:
    """Validate a raw config dict (plus CLI overrides) into a RunConfig."""
    _check_keys(raw, DEFAULTS, "the config root")
    merged = {**DEFAULTS, **raw}
    if overrides:
        merged = {**merged, **{k: v for k, v in overrides.items() if v is not None}}

    env_cfg = _merged_section(raw, "environment")
    src_cfg = _merged_section(raw, "source")
    grid_cfg = _merged_section(raw, "search_grid")
    win_cfg = _merged_section(raw, "window")
    sens_cfg = _merged_section(raw, "sensor_grid")

    try:
        environment = Environment(
            depth_m=_number(env_cfg["depth_m"], "environment.depth_m"),
            sound_speed_mps=_number(
                env_cfg["sound_speed_mps"], "environment.sound_speed_mps"
            ),
            frequency_hz=_number(env_cfg["frequency_hz"], "environment.frequency_hz"),
            density_kgm3=_number(env_cfg["density_kgm3"], "environment.density_kgm3"),
        )
        source = SourceLocation(
            range_m=_number(src_cfg["range_m"], "source.range_m"),
            depth_m=_number(src_cfg["depth_m"], "source.depth_m"),
        )
        n_ranges = _integer(grid_cfg["n_ranges"], "search_grid.n_ranges")
        n_depths = _integer(grid_cfg["n_depths"], "search_grid.n_depths")
        if n_ranges < 1 or n_depths < 1:
            raise ConfigError("search grid sizes must be positive")
        ranges = np.linspace(
            _number(grid_cfg["range_min_m"], "search_grid.range_min_m"),
            _number(grid_cfg["range_max_m"], "search_grid.range_max_m"),
            n_ranges,
        )
        depths = half_step_depth_axis(environment.depth_m, n_depths)
        window = CorrectnessWindow(
            range_interval_m=tuple(win_cfg["range_interval_m"]),
            depth_interval_m=tuple(win_cfg["depth_interval_m"]),
        )
        epsilon = merged["epsilon"]
        scenario = Scenario(
            environment=environment,
            source=source,
            search_ranges_m=ranges,
            search_depths_m=depths,
            window=window,
            snr_db=_snr(merged["snr_db"]),
            n_sensors=_integer(merged["n_sensors"], "n_sensors"),
            sensor_grid_count=_integer(sens_cfg["count"], "sensor_grid.count"),
            sensor_grid_spacing_m=_number(
                sens_cfg["spacing_m"], "sensor_grid.spacing_m"
            ),
            epsilon=None if epsilon is None else _number(epsilon, "epsilon"),
            master_seed=_integer(merged["master_seed"], "master_seed"),
            redraw_array=merged["redraw_array"],
        )
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid scenario: {exc}") from exc

    processor = merged["processor"]
    if processor not in PROCESSOR_CHOICES:
        raise ConfigError(f"processor must be one of {PROCESSOR_CHOICES}")
    trials = _integer(merged["trials"], "trials")
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    counts_raw = merged["sensor_counts"]
    if not isinstance(counts_raw, (list, tuple)) or not counts_raw:
        raise ConfigError("sensor_counts must be a non-empty list of integers")
    counts = tuple(_integer(c, "sensor_counts") for c in counts_raw)
    for c in counts:
        if c < 2 or c > scenario.sensor_grid_count:
            raise ConfigError(
                f"sensor count {c} outside [2, {scenario.sensor_grid_count}]"
            )
    workers = _integer(merged["workers"], "workers")
    if workers < 1:
        raise ConfigError("workers must be at least 1")
    return RunConfig(
        scenario=scenario,
        processor=processor,
        trials=trials,
        sensor_counts=counts,
        workers=workers,
    )


def load_run_config(
    path: os.PathLike | str | None, overrides: dict | None = None
) -> RunConfig:
    return build_run_config(load_raw_config(path), overrides)
