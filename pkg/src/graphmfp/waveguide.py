"""Analytic normal-mode propagation in an ideal isovelocity waveguide.

The water column has constant sound speed, a pressure-release surface at
z = 0 and a rigid bottom at z = D, so the vertical wavenumbers are exactly
gamma_m = (m - 1/2) * pi / D and a mode propagates when gamma_m < k with
k = 2*pi*f/c. The complex pressure at a receiver (z, r) due to a narrowband
point source at depth z_s is the far-field modal sum

    g(z_s, z, r) = sum_m sin(gamma_m z_s) sin(gamma_m z) exp(i k_rm r) / sqrt(k_rm r)

with horizontal wavenumbers k_rm = sqrt(k^2 - gamma_m^2). The leading
constant of the sum is fixed to 1: every consumer in this package either
normalizes replicas or works with inter-sensor ratios, so an overall scale
cancels. The asymptotic sum is only trusted beyond FAR_FIELD_WAVELENGTHS
wavelengths of horizontal range.

Externally computed replica grids (e.g. from a full mode code) can be used
in place of this model through :mod:`graphmfp.replicafile`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import SensorArray
from .errors import NearFieldRange, NoPropagatingModes

# Far-field validity floor of the asymptotic modal sum, in wavelengths.
FAR_FIELD_WAVELENGTHS = 10.0


@dataclass(frozen=True)
class Environment:
    """Isovelocity waveguide parameters and the narrowband source frequency."""

    depth_m: float
    sound_speed_mps: float
    frequency_hz: float
    density_kgm3: float = 1000.0

    def __post_init__(self):
        for name in ("depth_m", "sound_speed_mps", "frequency_hz", "density_kgm3"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0.0):
                raise ValueError(f"{name} must be a positive finite number")

    @property
    def wavenumber(self) -> float:
        """Angular wavenumber k = 2*pi*f/c (rad/m)."""
        return 2.0 * np.pi * self.frequency_hz / self.sound_speed_mps

    @property
    def wavelength_m(self) -> float:
        return self.sound_speed_mps / self.frequency_hz

    @property
    def cutoff_frequency_hz(self) -> float:
        """Frequency below which no mode propagates: c / (4 D)."""
        return self.sound_speed_mps / (4.0 * self.depth_m)


@dataclass(frozen=True)
class ModeSet:
    """Propagating modes: vertical and horizontal wavenumbers, mode m = 1..M."""

    vertical_wavenumbers: np.ndarray
    horizontal_wavenumbers: np.ndarray

    def __post_init__(self):
        gamma = np.asarray(self.vertical_wavenumbers, dtype=float)
        kr = np.asarray(self.horizontal_wavenumbers, dtype=float)
        if gamma.ndim != 1 or gamma.shape != kr.shape or gamma.size == 0:
            raise ValueError("wavenumber arrays must be equal-length, non-empty 1-d")
        if np.any(kr <= 0.0):
            raise ValueError("horizontal wavenumbers must be positive")
        if np.any(np.diff(kr) >= 0.0):
            raise ValueError("horizontal wavenumbers must be strictly decreasing")
        gamma = gamma.copy()
        kr = kr.copy()
        gamma.setflags(write=False)
        kr.setflags(write=False)
        object.__setattr__(self, "vertical_wavenumbers", gamma)
        object.__setattr__(self, "horizontal_wavenumbers", kr)

    @property
    def mode_count(self) -> int:
        return int(self.vertical_wavenumbers.size)


@dataclass(frozen=True)
class SourceLocation:
    """Candidate or true source position in the range-depth plane."""

    range_m: float
    depth_m: float

    def __post_init__(self):
        if not (np.isfinite(self.range_m) and self.range_m > 0.0):
            raise ValueError("range_m must be positive and finite")
        if not (np.isfinite(self.depth_m) and self.depth_m > 0.0):
            raise ValueError("depth_m must be positive and finite")


@dataclass(frozen=True)
class ReplicaVector:
    """Modeled complex pressures at the array for one candidate location."""

    location: SourceLocation
    pressures: np.ndarray
    norm: float

    def __post_init__(self):
        p = np.asarray(self.pressures, dtype=complex)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("pressures must be a non-empty 1-d complex vector")
        if not np.all(np.isfinite(p.view(float))):
            raise ValueError("pressures must be finite")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "pressures", p)

    @property
    def n_sensors(self) -> int:
        return int(self.pressures.size)


@dataclass(frozen=True)
class ReplicaGrid:
    """Dense dictionary of replicas over a range x depth search grid.

    ``pressures[i, j, n]`` is sensor n of the replica for range ``ranges_m[i]``
    and depth ``depths_m[j]``; ``norms[i, j]`` caches the matching l2 norms.
    """

    ranges_m: np.ndarray
    depths_m: np.ndarray
    pressures: np.ndarray
    norms: np.ndarray
    array: SensorArray

    def __post_init__(self):
        expected = (self.ranges_m.size, self.depths_m.size, self.array.n_sensors)
        if self.pressures.shape != expected:
            raise ValueError(
                f"pressure table has shape {self.pressures.shape}, expected {expected}"
            )
        if self.norms.shape != expected[:2]:
            raise ValueError("norm table does not match the grid axes")
        for name in ("ranges_m", "depths_m", "pressures", "norms"):
            getattr(self, name).setflags(write=False)

    @property
    def n_sensors(self) -> int:
        return self.array.n_sensors

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.ranges_m.size), int(self.depths_m.size))

    def replica(self, range_index: int, depth_index: int) -> ReplicaVector:
        """Materialize the replica vector of one grid cell."""
        location = SourceLocation(
            float(self.ranges_m[range_index]), float(self.depths_m[depth_index])
        )
        return ReplicaVector(
            location=location,
            pressures=self.pressures[range_index, depth_index],
            norm=float(self.norms[range_index, depth_index]),
        )


def solve_modes(env: Environment) -> ModeSet:
    """Return the propagating modes of the ideal waveguide.

    Raises :class:`NoPropagatingModes` when the frequency is below the first
    cutoff c/(4D).
    """
    k = env.wavenumber
    depth = env.depth_m
    # Largest m with (m - 1/2) pi / D < k; guard the exact-cutoff edge.
    count = int(np.floor(k * depth / np.pi + 0.5))
    while count > 0 and (count - 0.5) * np.pi / depth >= k:
        count -= 1
    if count == 0:
        raise NoPropagatingModes(
            f"frequency {env.frequency_hz} Hz is below the first modal cutoff "
            f"{env.cutoff_frequency_hz} Hz"
        )
    m = np.arange(1, count + 1, dtype=float)
    gamma = (m - 0.5) * np.pi / depth
    kr = np.sqrt((k - gamma) * (k + gamma))
    return ModeSet(vertical_wavenumbers=gamma, horizontal_wavenumbers=kr)


def _abs2(values: np.ndarray) -> np.ndarray:
    return values.real**2 + values.imag**2


def _modal_sum(modes: ModeSet, source_depth_m, receiver_depth_m, range_m) -> np.ndarray:
    """Far-field modal pressure sum, broadcasting over leading axes.

    All three position arguments gain a trailing mode axis, so the returned
    array has their broadcast shape. Every element is computed with the same
    elementwise operations and a contiguous last-axis reduction, which keeps
    batched evaluation bit-identical to single-point evaluation.
    """
    gamma = modes.vertical_wavenumbers
    kr = modes.horizontal_wavenumbers
    zs = np.asarray(source_depth_m, dtype=float)[..., None]
    z = np.asarray(receiver_depth_m, dtype=float)[..., None]
    r = np.asarray(range_m, dtype=float)[..., None]
    krr = kr * r
    terms = np.sin(gamma * zs) * np.sin(gamma * z) * (np.exp(1j * krr) / np.sqrt(krr))
    return np.sum(terms, axis=-1)


def _check_inside_water(depth_m: float, env: Environment, what: str) -> None:
    if not (0.0 < depth_m < env.depth_m):
        raise ValueError(
            f"{what} depth {depth_m} m must lie strictly inside (0, {env.depth_m}) m"
        )


def _far_field_floor_m(env: Environment) -> float:
    return FAR_FIELD_WAVELENGTHS * env.wavelength_m


def greens(
    modes: ModeSet,
    env: Environment,
    source: SourceLocation,
    receiver_depth_m: float,
    receiver_range_offset_m: float = 0.0,
) -> complex:
    """Complex pressure at a single receiver for the given source.

    The effective horizontal range is ``source.range_m`` minus the receiver's
    range offset; :class:`NearFieldRange` is raised when it falls below the
    far-field floor of the asymptotic sum.
    """
    _check_inside_water(source.depth_m, env, "source")
    _check_inside_water(receiver_depth_m, env, "receiver")
    r = source.range_m - receiver_range_offset_m
    floor = _far_field_floor_m(env)
    if r < floor:
        raise NearFieldRange(
            f"effective range {r} m is below the far-field floor {floor} m"
        )
    return complex(_modal_sum(modes, source.depth_m, receiver_depth_m, r))


def replica_vector(
    modes: ModeSet,
    env: Environment,
    source: SourceLocation,
    array: SensorArray,
) -> ReplicaVector:
    """Replica pressures at every sensor of ``array`` for one candidate source."""
    _check_inside_water(source.depth_m, env, "source")
    depths = array.sensor_depths_m
    if depths[0] <= 0.0 or depths[-1] >= env.depth_m:
        bad = 0 if depths[0] <= 0.0 else array.n_sensors - 1
        raise ValueError(
            f"sensor {bad} at {depths[bad]} m is outside the water column "
            f"(0, {env.depth_m}) m"
        )
    ranges = source.range_m - array.sensor_range_offsets_m
    floor = _far_field_floor_m(env)
    if np.any(ranges < floor):
        bad = int(np.argmin(ranges))
        raise NearFieldRange(
            f"sensor {bad}: effective range {ranges[bad]} m is below the "
            f"far-field floor {floor} m"
        )
    pressures = _modal_sum(modes, source.depth_m, depths, ranges)
    norm = float(np.sqrt(np.sum(_abs2(pressures))))
    return ReplicaVector(location=source, pressures=pressures, norm=norm)


def _validated_axis(values, name: str) -> np.ndarray:
    axis = np.array(values, dtype=float)
    if axis.ndim != 1 or axis.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d axis")
    if not np.all(np.isfinite(axis)):
        raise ValueError(f"{name} must be finite")
    if np.any(np.diff(axis) <= 0.0):
        raise ValueError(f"{name} must be sorted strictly ascending")
    return axis


def replica_grid(
    modes: ModeSet,
    env: Environment,
    ranges_m,
    depths_m,
    array: SensorArray,
) -> ReplicaGrid:
    """Evaluate replicas on the full search grid.

    Cells are independent; each one equals the corresponding
    :func:`replica_vector` call bit for bit. Search depths must stay strictly
    inside the water column (boundary depths would produce identically zero
    surface replicas).
    """
    ranges = _validated_axis(ranges_m, "ranges_m")
    depths = _validated_axis(depths_m, "depths_m")
    if depths[0] <= 0.0 or depths[-1] >= env.depth_m:
        raise ValueError(
            f"search depths must lie strictly inside (0, {env.depth_m}) m"
        )
    sensor_depths = array.sensor_depths_m
    if sensor_depths[0] <= 0.0 or sensor_depths[-1] >= env.depth_m:
        raise ValueError("array does not fit inside the water column")
    floor = _far_field_floor_m(env)
    min_range = ranges[0] - np.max(array.sensor_range_offsets_m)
    if min_range < floor:
        raise NearFieldRange(
            f"grid cell at range {ranges[0]} m: effective range {min_range} m "
            f"is below the far-field floor {floor} m"
        )
    n = array.n_sensors
    pressures = np.empty((ranges.size, depths.size, n), dtype=complex)
    for i in range(ranges.size):
        # (depths, sensors, modes) block; same kernel as replica_vector.
        pressures[i] = _modal_sum(
            modes,
            depths[:, None],
            sensor_depths[None, :],
            (ranges[i] - array.sensor_range_offsets_m)[None, :],
        )
    norms = np.sqrt(np.sum(_abs2(pressures), axis=-1))
    return ReplicaGrid(
        ranges_m=ranges, depths_m=depths, pressures=pressures, norms=norms, array=array
    )


def half_step_depth_axis(depth_m: float, n_points: int) -> np.ndarray:
    """Depth axis covering (0, D) with a half-step inset at both boundaries.

    Surface and bottom are excluded because the surface boundary condition
    zeroes every replica entry there, which breaks inter-sensor ratios.
    """
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    step = depth_m / n_points
    return (np.arange(n_points) + 0.5) * step
