"""Noise injection, localization trials, and sensor-count sweeps.

Every random quantity is drawn from a substream derived from
``(master_seed, n_sensors, trial_index, role)``, so any trial is exactly
reproducible in isolation and a sweep gives identical results no matter how
its trials are scheduled (sequentially or across worker processes).
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .arrays import random_vla
from .errors import MfpError
from .processors import (
    LocateResult,
    MeasuredField,
    ambiguity_surface,
    locate,
)
from .waveguide import (
    Environment,
    ReplicaVector,
    SourceLocation,
    _abs2,
    replica_grid,
    replica_vector,
    solve_modes,
)

REDRAW_MODES = ("per_trial", "fixed")
# Substream roles: array geometry and additive noise are independent draws.
_ROLE_ARRAY = 0
_ROLE_NOISE = 1


@dataclass(frozen=True)
class CorrectnessWindow:
    """Closed range x depth box inside which an estimate counts as correct."""

    range_interval_m: tuple[float, float]
    depth_interval_m: tuple[float, float]

    def __post_init__(self):
        for name in ("range_interval_m", "depth_interval_m"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"{name} must be a finite closed interval")
            object.__setattr__(self, name, (lo, hi))

    def contains(self, range_m: float, depth_m: float) -> bool:
        rlo, rhi = self.range_interval_m
        dlo, dhi = self.depth_interval_m
        return rlo <= range_m <= rhi and dlo <= depth_m <= dhi


def is_correct(estimate, window: CorrectnessWindow) -> bool:
    """True when the estimated range and depth both fall inside the window."""
    range_m, depth_m = estimate[0], estimate[1]
    return window.contains(float(range_m), float(depth_m))


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulated localization experiment."""

    environment: Environment
    source: SourceLocation
    search_ranges_m: np.ndarray
    search_depths_m: np.ndarray
    window: CorrectnessWindow
    snr_db: float = 20.0
    n_sensors: int = 10
    sensor_grid_count: int = 41
    sensor_grid_spacing_m: float = 2.0
    epsilon: float | None = None
    master_seed: int = 0
    redraw_array: str = "per_trial"

    def __post_init__(self):
        ranges = np.array(self.search_ranges_m, dtype=float)
        depths = np.array(self.search_depths_m, dtype=float)
        for axis, name in ((ranges, "search_ranges_m"), (depths, "search_depths_m")):
            if axis.ndim != 1 or axis.size == 0 or np.any(np.diff(axis) <= 0.0):
                raise ValueError(f"{name} must be a strictly ascending 1-d axis")
        if depths[0] <= 0.0 or depths[-1] >= self.environment.depth_m:
            raise ValueError("search depths must stay strictly inside the waveguide")
        if not (ranges[0] <= self.source.range_m <= ranges[-1]):
            raise ValueError("source range lies outside the search grid")
        if not (depths[0] <= self.source.depth_m <= depths[-1]):
            raise ValueError("source depth lies outside the search grid")
        if not self.window.contains(self.source.range_m, self.source.depth_m):
            raise ValueError("correctness window does not contain the source")
        if self.redraw_array not in REDRAW_MODES:
            raise ValueError(f"redraw_array must be one of {REDRAW_MODES}")
        if self.n_sensors < 2 or self.n_sensors > self.sensor_grid_count:
            raise ValueError("n_sensors must lie in [2, sensor_grid_count]")
        if self.sensor_grid_spacing_m <= 0.0:
            raise ValueError("sensor_grid_spacing_m must be positive")
        deepest = self.sensor_grid_count * self.sensor_grid_spacing_m
        if deepest >= self.environment.depth_m:
            raise ValueError("sensor grid reaches the waveguide bottom")
        if np.isnan(self.snr_db):
            raise ValueError("snr_db must be a number or +inf")
        if self.epsilon is not None and not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive when given")
        if self.master_seed < 0:
            raise ValueError("master_seed must be a non-negative integer")
        ranges.setflags(write=False)
        depths.setflags(write=False)
        object.__setattr__(self, "search_ranges_m", ranges)
        object.__setattr__(self, "search_depths_m", depths)

    def to_dict(self) -> dict:
        """Plain-data form of the scenario, embedded in exports for provenance."""
        return {
            "environment": {
                "depth_m": self.environment.depth_m,
                "sound_speed_mps": self.environment.sound_speed_mps,
                "frequency_hz": self.environment.frequency_hz,
                "density_kgm3": self.environment.density_kgm3,
            },
            "source": {
                "range_m": self.source.range_m,
                "depth_m": self.source.depth_m,
            },
            "search_ranges_m": [float(r) for r in self.search_ranges_m],
            "search_depths_m": [float(d) for d in self.search_depths_m],
            "window": {
                "range_interval_m": list(self.window.range_interval_m),
                "depth_interval_m": list(self.window.depth_interval_m),
            },
            "snr_db": "inf" if np.isinf(self.snr_db) else self.snr_db,
            "n_sensors": self.n_sensors,
            "sensor_grid_count": self.sensor_grid_count,
            "sensor_grid_spacing_m": self.sensor_grid_spacing_m,
            "epsilon": self.epsilon,
            "master_seed": self.master_seed,
            "redraw_array": self.redraw_array,
        }


@dataclass(frozen=True)
class TrialResult:
    bartlett_correct: bool
    graph_correct: bool
    bartlett_estimate: LocateResult | None
    graph_estimate: LocateResult | None
    bartlett_error: str | None = None
    graph_error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    """Probability-of-correct-localization curves over sensor counts."""

    sensor_counts: tuple[int, ...]
    p_correct_bartlett: tuple[float, ...]
    p_correct_graph: tuple[float, ...]
    failures_bartlett: tuple[int, ...]
    failures_graph: tuple[int, ...]
    trials_per_point: int
    master_seed: int


def inject_noise(
    clean: ReplicaVector, snr_db: float, rng: np.random.Generator
) -> MeasuredField:
    """Add circular complex Gaussian noise at the requested array SNR.

    The per-entry noise variance is sigma^2 = ||g||^2 / (N 10^(SNR/10))
    (real and imaginary parts each carry half), so the expected total noise
    power across the N sensors matches the SNR definition. ``snr_db = inf``
    returns the clean field unchanged.
    """
    if clean.norm == 0.0:
        raise ValueError("clean field must have positive norm")
    if np.isinf(snr_db):
        return MeasuredField(clean.pressures)
    n = clean.n_sensors
    sigma2 = clean.norm**2 / (n * 10.0 ** (snr_db / 10.0))
    draws = rng.standard_normal((n, 2)) * np.sqrt(sigma2 / 2.0)
    return MeasuredField(clean.pressures + draws[:, 0] + 1j * draws[:, 1])


def _array_seed(scenario: Scenario, n_sensors: int, trial_index: int):
    if scenario.redraw_array == "per_trial":
        return np.random.SeedSequence(
            [scenario.master_seed, n_sensors, trial_index, _ROLE_ARRAY]
        )
    return np.random.SeedSequence([scenario.master_seed, n_sensors])


def _noise_rng(scenario: Scenario, n_sensors: int, trial_index: int):
    return np.random.default_rng(
        np.random.SeedSequence(
            [scenario.master_seed, n_sensors, trial_index, _ROLE_NOISE]
        )
    )


def trial_realization(scenario: Scenario, n_sensors: int, trial_index: int):
    """Array, replica grid, clean replica, and measured field of one trial.

    Raises on any invalid input; :func:`run_trial` wraps the same draw with
    failure capture for sweep use.
    """
    env = scenario.environment
    modes = solve_modes(env)
    array = random_vla(
        n_sensors,
        scenario.sensor_grid_count,
        scenario.sensor_grid_spacing_m,
        _array_seed(scenario, n_sensors, trial_index),
    )
    grid = replica_grid(
        modes, env, scenario.search_ranges_m, scenario.search_depths_m, array
    )
    clean = replica_vector(modes, env, scenario.source, array)
    field = inject_noise(
        clean, scenario.snr_db, _noise_rng(scenario, n_sensors, trial_index)
    )
    return array, grid, clean, field


def run_trial(scenario: Scenario, n_sensors: int, trial_index: int) -> TrialResult:
    """Draw one array and one noise realization, localize with both processors.

    The result is a pure function of ``(scenario, n_sensors, trial_index)``.
    Degenerate-scenario errors inside a processor run are recorded on the
    result rather than raised, so sweeps never abort mid-way.
    """
    env = scenario.environment
    modes = solve_modes(env)
    array = random_vla(
        n_sensors,
        scenario.sensor_grid_count,
        scenario.sensor_grid_spacing_m,
        _array_seed(scenario, n_sensors, trial_index),
    )
    grid = replica_grid(
        modes, env, scenario.search_ranges_m, scenario.search_depths_m, array
    )
    clean = replica_vector(modes, env, scenario.source, array)
    try:
        field = inject_noise(
            clean, scenario.snr_db, _noise_rng(scenario, n_sensors, trial_index)
        )
    except (MfpError, ValueError) as exc:
        message = f"{type(exc).__name__}: {exc}"
        return TrialResult(False, False, None, None, message, message)

    estimates: dict[str, LocateResult | None] = {}
    errors: dict[str, str | None] = {}
    for kind in ("bartlett", "graph"):
        try:
            surface = ambiguity_surface(kind, grid, field, scenario.epsilon)
            estimates[kind] = locate(surface)
            errors[kind] = None
        except MfpError as exc:
            estimates[kind] = None
            errors[kind] = f"{type(exc).__name__}: {exc}"
    return TrialResult(
        bartlett_correct=(
            estimates["bartlett"] is not None
            and is_correct(estimates["bartlett"], scenario.window)
        ),
        graph_correct=(
            estimates["graph"] is not None
            and is_correct(estimates["graph"], scenario.window)
        ),
        bartlett_estimate=estimates["bartlett"],
        graph_estimate=estimates["graph"],
        bartlett_error=errors["bartlett"],
        graph_error=errors["graph"],
    )


def _run_task(args: tuple[Scenario, int, int]) -> TrialResult:
    scenario, n_sensors, trial_index = args
    return run_trial(scenario, n_sensors, trial_index)


def probability_sweep(
    scenario: Scenario,
    sensor_counts: Sequence[int],
    trials: int,
    workers: int = 1,
) -> SweepResult:
    """Estimate P(correct localization) for each sensor count.

    Runs ``trials`` independent trials per count. With ``workers > 1`` the
    trials are distributed over a process pool; because every trial owns its
    substream, the result is identical to the sequential run.
    """
    counts = [int(c) for c in sensor_counts]
    if not counts:
        raise ValueError("sensor_counts must be non-empty")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    tasks = [(scenario, c, t) for c in counts for t in range(trials)]
    if workers > 1:
        with multiprocessing.Pool(processes=workers) as pool:
            results = pool.map(_run_task, tasks, chunksize=max(1, trials // 4))
    else:
        results = [_run_task(task) for task in tasks]

    p_bart, p_graph, fail_bart, fail_graph = [], [], [], []
    for ci in range(len(counts)):
        block = results[ci * trials : (ci + 1) * trials]
        p_bart.append(sum(r.bartlett_correct for r in block) / trials)
        p_graph.append(sum(r.graph_correct for r in block) / trials)
        fail_bart.append(sum(r.bartlett_error is not None for r in block))
        fail_graph.append(sum(r.graph_error is not None for r in block))
    return SweepResult(
        sensor_counts=tuple(counts),
        p_correct_bartlett=tuple(p_bart),
        p_correct_graph=tuple(p_graph),
        failures_bartlett=tuple(fail_bart),
        failures_graph=tuple(fail_graph),
        trials_per_point=trials,
        master_seed=scenario.master_seed,
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def sweep_to_csv(result: SweepResult) -> str:
    """CSV form of a sweep: one row per sensor count."""
    lines = ["n_sensors,p_bartlett,p_graph,trials,failures_bartlett,failures_graph"]
    for i, count in enumerate(result.sensor_counts):
        lines.append(
            f"{count},{_fmt(result.p_correct_bartlett[i])},"
            f"{_fmt(result.p_correct_graph[i])},{result.trials_per_point},"
            f"{result.failures_bartlett[i]},{result.failures_graph[i]}"
        )
    return "\n".join(lines) + "\n"


def sweep_to_json(result: SweepResult, scenario: Scenario) -> dict:
    """JSON-ready sweep document embedding the full scenario for provenance."""
    return {
        "scenario": scenario.to_dict(),
        "sensor_counts": list(result.sensor_counts),
        "p_correct_bartlett": list(result.p_correct_bartlett),
        "p_correct_graph": list(result.p_correct_graph),
        "failures_bartlett": list(result.failures_bartlett),
        "failures_graph": list(result.failures_graph),
        "trials_per_point": result.trials_per_point,
        "master_seed": result.master_seed,
    }


def empirical_snr_db(clean: ReplicaVector, noisy_fields: Sequence[MeasuredField]) -> float:
    """Moment estimate of the SNR realized by a set of noisy snapshots."""
    n = clean.n_sensors
    noise_power = 0.0
    for f in noisy_fields:
        noise_power += float(np.sum(_abs2(f.pressures - clean.pressures)))
    sigma2_hat = noise_power / (len(noisy_fields) * n)
    return float(10.0 * np.log10(clean.norm**2 / (n * sigma2_hat)))
