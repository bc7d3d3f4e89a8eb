"""Receiver geometry: nearly vertical line arrays in the range-depth plane.

Arrays are described by strictly increasing sensor depths plus a small
horizontal range offset per sensor (zero for a perfectly vertical array).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Offsets beyond this are no longer "nearly vertical" and are rejected.
MAX_RANGE_OFFSET_M = 100.0


def _frozen_float_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SensorArray:
    """Positions of the N receivers, ordered top to bottom."""

    sensor_depths_m: np.ndarray
    sensor_range_offsets_m: np.ndarray

    def __post_init__(self):
        depths = _frozen_float_array(self.sensor_depths_m, "sensor_depths_m")
        offsets = _frozen_float_array(
            self.sensor_range_offsets_m, "sensor_range_offsets_m"
        )
        if depths.size < 2:
            raise ValueError("an array needs at least 2 sensors")
        if offsets.shape != depths.shape:
            raise ValueError("offsets and depths must have the same length")
        if np.any(depths <= 0.0):
            raise ValueError("sensor depths must be positive")
        if np.any(np.diff(depths) <= 0.0):
            raise ValueError("sensor depths must be strictly increasing")
        if np.any(np.abs(offsets) >= MAX_RANGE_OFFSET_M):
            raise ValueError(
                f"range offsets must stay below {MAX_RANGE_OFFSET_M} m in magnitude"
            )
        object.__setattr__(self, "sensor_depths_m", depths)
        object.__setattr__(self, "sensor_range_offsets_m", offsets)

    @property
    def n_sensors(self) -> int:
        return int(self.sensor_depths_m.size)


def random_vla(
    n_sensors: int,
    grid_count: int,
    grid_spacing_m: float,
    rng_seed,
) -> SensorArray:
    """Draw a vertical array on a regular depth grid.

    Sensor depths are sampled uniformly without replacement from the grid
    {d, 2d, ..., grid_count*d} (one step below the surface, so no sensor sits
    on the pressure-release boundary) and returned sorted ascending. The draw
    is deterministic per seed; ``rng_seed`` may be an integer or any seed
    accepted by :func:`numpy.random.default_rng`.
    """
    if n_sensors < 2:
        raise ValueError("n_sensors must be at least 2")
    if n_sensors > grid_count:
        raise ValueError(
            f"cannot place {n_sensors} distinct sensors on {grid_count} grid points"
        )
    if not grid_spacing_m > 0.0:
        raise ValueError("grid_spacing_m must be positive")
    rng = np.random.default_rng(rng_seed)
    slots = rng.choice(grid_count, size=n_sensors, replace=False)
    depths = (np.sort(slots) + 1) * float(grid_spacing_m)
    return SensorArray(depths, np.zeros(n_sensors))


def fixed_vla(depths_m, offsets_m=None) -> SensorArray:
    """Build an array from explicit depths (and optional range offsets)."""
    depths = np.asarray(depths_m, dtype=float)
    if offsets_m is None:
        offsets_m = np.zeros(depths.shape)
    return SensorArray(depths, offsets_m)
