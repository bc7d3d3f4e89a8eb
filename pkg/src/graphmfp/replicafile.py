"""Replica-grid interchange format.

Grids computed by any propagation model (for example a full normal-mode
code) can be dropped in for the analytic waveguide through this file format.
It is a plain text format, one logical record per line, in this exact order:

    graphmfp-replicas 1
    n_sensors <N>
    n_ranges <I>
    n_depths <J>
    ranges_m <I floats, ascending>
    depths_m <J floats, ascending>
    sensor_depths_m <N floats, ascending>
    sensor_offsets_m <N floats>
    <I*J data lines>

Each data line holds one grid cell as 2N whitespace-separated decimal
floats: the real and imaginary parts of the N sensor pressures,
interleaved. Cells are row-major: the range index varies slowest. All
floats are written with full round-trip precision, so export followed by
import reproduces the complex values bit for bit.
"""

from __future__ import annotations

import os

import numpy as np

from .arrays import fixed_vla
from .errors import ReplicaFileError
from .waveguide import ReplicaGrid, _abs2

FORMAT_NAME = "graphmfp-replicas"
FORMAT_VERSION = 1


def _fmt(x: float) -> str:
    return repr(float(x))


def export_replicas(grid: ReplicaGrid, path: os.PathLike | str) -> None:
    """Write a replica grid in the interchange format."""
    n_ranges, n_depths = grid.shape
    lines = [
        f"{FORMAT_NAME} {FORMAT_VERSION}",
        f"n_sensors {grid.n_sensors}",
        f"n_ranges {n_ranges}",
        f"n_depths {n_depths}",
        "ranges_m " + " ".join(_fmt(r) for r in grid.ranges_m),
        "depths_m " + " ".join(_fmt(d) for d in grid.depths_m),
        "sensor_depths_m "
        + " ".join(_fmt(z) for z in grid.array.sensor_depths_m),
        "sensor_offsets_m "
        + " ".join(_fmt(o) for o in grid.array.sensor_range_offsets_m),
    ]
    for i in range(n_ranges):
        for j in range(n_depths):
            cell = grid.pressures[i, j]
            lines.append(
                " ".join(f"{_fmt(p.real)} {_fmt(p.imag)}" for p in cell)
            )
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def _parse_int_line(line: str, key: str) -> int:
    parts = line.split()
    if len(parts) != 2 or parts[0] != key:
        raise ReplicaFileError(f"expected '{key} <int>', got {line!r}")
    try:
        return int(parts[1])
    except ValueError as exc:
        raise ReplicaFileError(f"invalid integer in '{key}' line: {parts[1]!r}") from exc


def _parse_float_line(line: str, key: str, count: int) -> np.ndarray:
    parts = line.split()
    if not parts or parts[0] != key:
        raise ReplicaFileError(f"expected a '{key}' line, got {line!r}")
    if len(parts) - 1 != count:
        raise ReplicaFileError(
            f"'{key}' line holds {len(parts) - 1} values, header promised {count}"
        )
    try:
        return np.array([float(v) for v in parts[1:]], dtype=float)
    except ValueError as exc:
        raise ReplicaFileError(f"invalid float in '{key}' line") from exc


def import_replicas(source_descriptor: os.PathLike | str) -> ReplicaGrid:
    """Read a replica grid written by :func:`export_replicas` (or any tool
    following the documented format). Raises :class:`ReplicaFileError` on
    malformed files, dimension mismatches, or non-finite pressures.
    """
    try:
        with open(source_descriptor, "r", encoding="ascii") as handle:
            lines = [line.rstrip("\n") for line in handle]
    except OSError as exc:
        raise ReplicaFileError(f"cannot read {source_descriptor}: {exc}") from exc
    lines = [line for line in lines if line.strip()]
    if len(lines) < 8:
        raise ReplicaFileError("file is too short to hold a replica-grid header")
    magic = lines[0].split()
    if magic != [FORMAT_NAME, str(FORMAT_VERSION)]:
        raise ReplicaFileError(
            f"unsupported header {lines[0]!r}; expected "
            f"'{FORMAT_NAME} {FORMAT_VERSION}'"
        )
    n_sensors = _parse_int_line(lines[1], "n_sensors")
    n_ranges = _parse_int_line(lines[2], "n_ranges")
    n_depths = _parse_int_line(lines[3], "n_depths")
    if n_sensors < 2 or n_ranges < 1 or n_depths < 1:
        raise ReplicaFileError("header dimensions must be positive (N >= 2)")
    ranges = _parse_float_line(lines[4], "ranges_m", n_ranges)
    depths = _parse_float_line(lines[5], "depths_m", n_depths)
    sensor_depths = _parse_float_line(lines[6], "sensor_depths_m", n_sensors)
    sensor_offsets = _parse_float_line(lines[7], "sensor_offsets_m", n_sensors)
    for axis, name in ((ranges, "ranges_m"), (depths, "depths_m")):
        if np.any(np.diff(axis) <= 0.0):
            raise ReplicaFileError(f"{name} axis must be strictly ascending")
    try:
        array = fixed_vla(sensor_depths, sensor_offsets)
    except ValueError as exc:
        raise ReplicaFileError(f"invalid sensor positions: {exc}") from exc

    data_lines = lines[8:]
    expected_rows = n_ranges * n_depths
    if len(data_lines) != expected_rows:
        raise ReplicaFileError(
            f"found {len(data_lines)} data rows, header promised {expected_rows}"
        )
    pressures = np.empty((n_ranges, n_depths, n_sensors), dtype=complex)
    for row, line in enumerate(data_lines):
        i, j = divmod(row, n_depths)
        parts = line.split()
        if len(parts) != 2 * n_sensors:
            raise ReplicaFileError(
                f"cell (range {i}, depth {j}): {len(parts)} values, "
                f"expected {2 * n_sensors}"
            )
        try:
            flat = np.array([float(v) for v in parts], dtype=float)
        except ValueError as exc:
            raise ReplicaFileError(
                f"cell (range {i}, depth {j}): invalid float"
            ) from exc
        if not np.all(np.isfinite(flat)):
            bad = int(np.flatnonzero(~np.isfinite(flat))[0]) // 2
            raise ReplicaFileError(
                f"cell (range {i}, depth {j}): non-finite pressure at sensor {bad}"
            )
        pressures[i, j] = flat[0::2] + 1j * flat[1::2]
    norms = np.sqrt(np.sum(_abs2(pressures), axis=-1))
    return ReplicaGrid(
        ranges_m=ranges,
        depths_m=depths,
        pressures=pressures,
        norms=norms,
        array=array,
    )
