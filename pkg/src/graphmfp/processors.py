"""Localization processors over replica dictionaries.

Two processors score how well a measured pressure vector matches the replica
of a candidate source location:

* Bartlett: the classical beamformer ``w^H Omega w`` with the replica as a
  unit-norm weight vector.
* Graph: each candidate induces a sparse directed cyclic adjacency matrix A
  whose nonzero entries are half the inter-sensor replica ratios. The replica
  itself is then an eigenvector of A with eigenvalue exactly 1. Expanding the
  measured field in the eigenvector basis of A concentrates all energy on
  that eigenvector if and only if the candidate matches, so the inverse
  squared norm of the spectral coefficients, after deleting the dominant one,
  peaks at the source.

A is similar to half the cycle-graph adjacency via the diagonal matrix of
replica entries, so its spectrum is exactly {cos(2 pi k / N)} and its
eigenvectors are the replica-modulated complex exponentials. The basis
returned by :func:`gft_basis` is this canonical analytic construction,
ordered k = 0..N-1 with the unit eigenvalue first; a generic eigensolver
would pick arbitrary bases inside the degenerate cos-eigenvalue pairs and
make the spectral cost basis-dependent, while the canonical choice is
deterministic. Tests cross-check that the resulting surface argmax agrees
with a generic eigendecomposition.

All kernels are written batch-first (elementwise operations plus contiguous
last-axis reductions): evaluating a whole surface produces bit-identical
values to calling the single-cell operations cell by cell.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateReplica,
    DegenerateSurface,
    ReconstructionFailure,
    ZeroReplica,
)
from .waveguide import ReplicaGrid, ReplicaVector, SourceLocation, _abs2

PROCESSOR_KINDS = ("bartlett", "graph")

# Replica entries below RATIO_FLOOR * max|g| make the inter-sensor ratios
# explosive; such candidates are rejected (or flagged inside a surface).
RATIO_FLOOR = 1e-12
# Basis acceptance: F T must equal the identity and T diag(lam) F must
# reconstruct A within these tolerances.
_FT_TOL = 1e-10
_RECON_TOL = 1e-10
_HERMITIAN_TOL = 1e-12
# Cap on the complex workspace (elements) of one batched surface chunk.
_CHUNK_BUDGET = 2_000_000


@dataclass(frozen=True)
class MeasuredField:
    """Pressure vector recorded at the array (signal plus noise)."""

    pressures: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.pressures, dtype=complex)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("pressures must be a non-empty 1-d complex vector")
        if not np.all(np.isfinite(p.view(float))):
            raise ValueError("measured pressures must be finite")
        p = p.copy()
        p.setflags(write=False)
        object.__setattr__(self, "pressures", p)

    @property
    def n_sensors(self) -> int:
        return int(self.pressures.size)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Hermitian PSD covariance of the array data (rank 1 per snapshot)."""

    entries: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.entries, dtype=complex)
        if om.ndim != 2 or om.shape[0] != om.shape[1]:
            raise ValueError("covariance must be a square matrix")
        scale = max(1.0, float(np.max(np.abs(om)))) if om.size else 1.0
        if float(np.max(np.abs(om - om.conj().T))) > _HERMITIAN_TOL * scale:
            raise ValueError("covariance must be Hermitian")
        if float(np.min(np.linalg.eigvalsh(om))) < -1e-10 * scale:
            raise ValueError("covariance must be positive semidefinite")
        om = om.copy()
        om.setflags(write=False)
        object.__setattr__(self, "entries", om)

    @property
    def n_sensors(self) -> int:
        return int(self.entries.shape[0])


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Sparse directed cyclic graph shift built from one candidate replica.

    Nonzeros sit at (i, i+-1) plus the wraparound pair, with value half the
    ratio of the corresponding replica entries; ``replica_pressures`` keeps
    the generating replica for the canonical eigenbasis.
    """

    entries: np.ndarray
    source_location: SourceLocation
    replica_pressures: np.ndarray

    def __post_init__(self):
        for name in ("entries", "replica_pressures"):
            arr = np.asarray(getattr(self, name), dtype=complex)
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.replica_pressures.size
        if self.entries.shape != (n, n):
            raise ValueError("adjacency entries do not match the replica length")

    @property
    def n_sensors(self) -> int:
        return int(self.entries.shape[0])


@dataclass(frozen=True)
class GftBasis:
    """Spectral decomposition of an adjacency matrix.

    ``inverse`` holds the eigenvector columns T (unit l2 norm each),
    ``forward`` the transform F = T^-1, and ``eigenvalues`` the graph
    frequencies cos(2 pi k / N) in k order, so ``unit_index`` is 0.
    """

    eigenvalues: np.ndarray
    forward: np.ndarray
    inverse: np.ndarray
    unit_index: int

    def __post_init__(self):
        for name in ("eigenvalues", "forward", "inverse"):
            arr = np.asarray(getattr(self, name))
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        unit = np.flatnonzero(np.abs(self.eigenvalues - 1.0) <= 1e-9)
        if unit.size != 1 or int(unit[0]) != self.unit_index:
            raise ValueError("exactly one eigenvalue must equal 1 at unit_index")

    @property
    def n_sensors(self) -> int:
        return int(self.eigenvalues.size)


class LocateResult(NamedTuple):
    range_m: float
    depth_m: float
    peak_db: float


@dataclass(frozen=True)
class AmbiguitySurface:
    """Processor output over the search grid, raw and in normalized dB."""

    ranges_m: np.ndarray
    depths_m: np.ndarray
    values: np.ndarray
    values_db: np.ndarray
    flagged: np.ndarray

    def __post_init__(self):
        shape = (self.ranges_m.size, self.depths_m.size)
        for name in ("values", "values_db", "flagged"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} does not match the grid axes")
        for name in ("ranges_m", "depths_m", "values", "values_db", "flagged"):
            getattr(self, name).setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (int(self.ranges_m.size), int(self.depths_m.size))


# ---------------------------------------------------------------------------
# Batched kernels. Every public operation routes through these with a batch
# of one, so surface evaluation is bit-identical to per-cell evaluation.
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _cycle_eigenvectors(n: int) -> np.ndarray:
    """Unit-norm cycle-graph eigenvectors: U[v, k] = exp(2i pi k v / n)/sqrt(n)."""
    k = np.arange(n)
    u = np.exp(2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)
    u.setflags(write=False)
    return u


@functools.lru_cache(maxsize=None)
def _cycle_eigenvectors_ct(n: int) -> np.ndarray:
    uh = _cycle_eigenvectors(n).conj().T.copy()
    uh.setflags(write=False)
    return uh


@functools.lru_cache(maxsize=None)
def _graph_frequencies(n: int) -> np.ndarray:
    lam = np.cos(2.0 * np.pi * np.arange(n) / n)
    lam.setflags(write=False)
    return lam


def _degenerate_rows(g: np.ndarray) -> np.ndarray:
    """True where a replica row has an entry at or below the ratio floor."""
    a2 = _abs2(g)
    return np.min(a2, axis=-1) <= (RATIO_FLOOR**2) * np.max(a2, axis=-1)


def _cycle_ratios(g: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward and backward neighbor ratios along the sensor cycle.

    ``fwd[..., i] = g_i / g_{i+1}`` and ``bwd[..., i] = g_{i+1} / g_i`` with
    cyclic wraparound; rows must already have passed the ratio floor.
    """
    g_next = np.roll(g, -1, axis=-1)
    return g / g_next, g_next / g


def _canonical_basis(g: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic eigendecomposition of the batch of adjacency matrices.

    For replica g the adjacency equals diag(g) C diag(g)^-1 with C half the
    cycle adjacency, so T = diag(g) U (column-normalized) and F = T^-1 follow
    in closed form from the cycle eigenvectors U.
    """
    n = g.shape[-1]
    u = _cycle_eigenvectors(n)
    uh = _cycle_eigenvectors_ct(n)
    scale = np.sqrt(np.sum(_abs2(g), axis=-1)) / np.sqrt(n)
    t = (g[..., :, None] * u) / scale[..., None, None]
    f = (uh / g[..., None, :]) * scale[..., None, None]
    return _graph_frequencies(n), t, f


def _basis_residuals(
    t: np.ndarray,
    lam: np.ndarray,
    f: np.ndarray,
    ratio_fwd: np.ndarray,
    ratio_bwd: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Invariant residuals per batch row: max |F T - I| and the relative
    Frobenius error of T diag(lam) F against the sparse adjacency."""
    n = t.shape[-1]
    ft = np.matmul(f, t)
    idx = np.arange(n)
    ft[..., idx, idx] -= 1.0
    ft_dev = np.sqrt(np.max(_abs2(ft), axis=(-2, -1)))
    recon = np.matmul(t * lam, f)
    nxt = (idx + 1) % n
    recon[..., idx, nxt] -= 0.5 * ratio_fwd
    recon[..., nxt, idx] -= 0.5 * ratio_bwd
    a_frob2 = np.sum(0.25 * _abs2(ratio_fwd) + 0.25 * _abs2(ratio_bwd), axis=-1)
    recon_rel = np.sqrt(np.sum(_abs2(recon), axis=(-2, -1)) / a_frob2)
    return ft_dev, recon_rel


def _gft_remainder_sq(f: np.ndarray, field: np.ndarray) -> np.ndarray:
    """Squared norm of the spectral coefficients after deleting the largest.

    Ties on the largest modulus resolve to the lowest index (argmax rule),
    keeping the deletion deterministic.
    """
    coeffs = np.sum(f * field[None, None, :], axis=-1)
    n = coeffs.shape[-1]
    drop = np.argmax(_abs2(coeffs), axis=-1)
    keep = np.arange(n)[None, :] != drop[:, None]
    remainder = coeffs[keep].reshape(coeffs.shape[0], n - 1)
    return np.sum(_abs2(remainder), axis=-1)


def _bartlett_values(omega: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """w^H Omega w per batch row, clamped at 0 against rounding."""
    ow = np.sum(omega[None, :, :] * weights[:, None, :], axis=-1)
    vals = np.sum(np.conj(weights) * ow, axis=-1).real
    return np.maximum(vals, 0.0)


def _chunk_rows(n_sensors: int) -> int:
    return max(16, _CHUNK_BUDGET // (n_sensors * n_sensors))


# ---------------------------------------------------------------------------
# Single-candidate operations.
# ---------------------------------------------------------------------------


def covariance(field: MeasuredField, *snapshots: MeasuredField) -> CovarianceMatrix:
    """Covariance of the array data: the outer product of the measured field.

    Extra snapshots, if given, are averaged in; the default single-snapshot
    call yields the rank-1 matrix the processors are defined on.
    """
    fields = (field, *snapshots)
    n = field.n_sensors
    if any(f.n_sensors != n for f in fields):
        raise ValueError("all snapshots must have the same sensor count")
    acc = np.zeros((n, n), dtype=complex)
    for f in fields:
        acc += np.outer(f.pressures, np.conj(f.pressures))
    return CovarianceMatrix(acc / len(fields))


def bartlett(omega: CovarianceMatrix, replica: ReplicaVector) -> float:
    """Bartlett power for one candidate: w^H Omega w with w = g / ||g||."""
    if replica.norm == 0.0:
        raise ZeroReplica("replica norm is zero; cannot form a weight vector")
    if omega.n_sensors != replica.n_sensors:
        raise ValueError("covariance and replica sensor counts differ")
    weights = replica.pressures / replica.norm
    return float(_bartlett_values(omega.entries, weights[None, :])[0])


def adjacency(replica: ReplicaVector) -> AdjacencyMatrix:
    """Build the candidate's cyclic graph shift from inter-sensor ratios."""
    g = replica.pressures
    n = g.size
    if n < 3:
        raise ValueError(
            "the graph processor needs at least 3 sensors (the cyclic wraparound "
            "collides with the neighbor edge for N = 2)"
        )
    if bool(_degenerate_rows(g[None, :])[0]):
        raise DegenerateReplica(
            f"replica for {replica.location} has an entry within {RATIO_FLOOR} "
            "of zero relative to its largest entry"
        )
    ratio_fwd, ratio_bwd = _cycle_ratios(g[None, :])
    entries = np.zeros((n, n), dtype=complex)
    idx = np.arange(n)
    nxt = (idx + 1) % n
    entries[idx, nxt] = 0.5 * ratio_fwd[0]
    entries[nxt, idx] = 0.5 * ratio_bwd[0]
    return AdjacencyMatrix(
        entries=entries, source_location=replica.location, replica_pressures=g
    )


def shift_identity_residual(a: AdjacencyMatrix, field) -> float:
    """Relative residual ||A s - s|| / ||s|| of the graph shift identity.

    Vanishes (to rounding) exactly when ``field`` is the noiseless pressure
    vector of the adjacency's own candidate location.
    """
    s = np.asarray(field, dtype=complex)
    if s.shape != (a.n_sensors,):
        raise ValueError("field length does not match the adjacency size")
    denom = np.sum(_abs2(s))
    if denom == 0.0:
        raise ValueError("field must be nonzero")
    shifted = np.sum(a.entries * s[None, :], axis=-1)
    return float(np.sqrt(np.sum(_abs2(shifted - s)) / denom))


def gft_basis(a: AdjacencyMatrix) -> GftBasis:
    """Canonical eigendecomposition of the adjacency matrix.

    Raises :class:`ReconstructionFailure` when the analytic basis cannot meet
    its inverse/reconstruction tolerances, which signals an ill-conditioned
    (near-degenerate) replica.
    """
    g = a.replica_pressures
    lam, t, f = _canonical_basis(g[None, :])
    ratio_fwd, ratio_bwd = _cycle_ratios(g[None, :])
    ft_dev, recon_rel = _basis_residuals(t, lam, f, ratio_fwd, ratio_bwd)
    if not (ft_dev[0] <= _FT_TOL and recon_rel[0] <= _RECON_TOL):
        raise ReconstructionFailure(
            f"basis residuals {float(ft_dev[0]):.3e} (inverse), "
            f"{float(recon_rel[0]):.3e} (reconstruction) exceed tolerance for "
            f"candidate {a.source_location}"
        )
    return GftBasis(eigenvalues=lam, forward=f[0], inverse=t[0], unit_index=0)


def default_epsilon(field: MeasuredField) -> float:
    """Regularizer keeping the spectral cost finite on an exact match."""
    return 1e-12 * float(np.sum(_abs2(field.pressures)))


def graph_cost(basis: GftBasis, field: MeasuredField, epsilon: float) -> float:
    """Spectral matching cost: 1 / (||coeffs minus largest||^2 + epsilon)."""
    if not (np.isfinite(epsilon) and epsilon > 0.0):
        raise ValueError("epsilon must be positive")
    if basis.n_sensors != field.n_sensors:
        raise ValueError("basis and field sensor counts differ")
    rem = _gft_remainder_sq(basis.forward[None, :, :], field.pressures)[0]
    return float(1.0 / (rem + epsilon))


# ---------------------------------------------------------------------------
# Surfaces.
# ---------------------------------------------------------------------------


def _bartlett_surface_values(
    grid: ReplicaGrid, field: MeasuredField
) -> tuple[np.ndarray, np.ndarray]:
    omega = covariance(field).entries
    flat = grid.pressures.reshape(-1, grid.n_sensors)
    norms = grid.norms.reshape(-1)
    flagged = norms == 0.0
    values = np.zeros(flat.shape[0])
    ok = np.flatnonzero(~flagged)
    step = _chunk_rows(grid.n_sensors)
    for start in range(0, ok.size, step):
        rows = ok[start : start + step]
        weights = flat[rows] / norms[rows, None]
        values[rows] = _bartlett_values(omega, weights)
    return values, flagged


def _graph_surface_values(
    grid: ReplicaGrid, field: MeasuredField, epsilon: float
) -> tuple[np.ndarray, np.ndarray]:
    n = grid.n_sensors
    if n < 3:
        raise ValueError("the graph processor needs at least 3 sensors")
    flat = grid.pressures.reshape(-1, n)
    flagged = _degenerate_rows(flat)
    values = np.zeros(flat.shape[0])
    ok = np.flatnonzero(~flagged)
    step = _chunk_rows(n)
    for start in range(0, ok.size, step):
        rows = ok[start : start + step]
        g = flat[rows]
        lam, t, f = _canonical_basis(g)
        ratio_fwd, ratio_bwd = _cycle_ratios(g)
        ft_dev, recon_rel = _basis_residuals(t, lam, f, ratio_fwd, ratio_bwd)
        bad = (ft_dev > _FT_TOL) | (recon_rel > _RECON_TOL)
        if np.any(bad):
            flagged[rows[bad]] = True
            rows = rows[~bad]
            f = f[~bad]
        if rows.size:
            rem = _gft_remainder_sq(f, field.pressures)
            values[rows] = 1.0 / (rem + epsilon)
    return values, flagged


def ambiguity_surface(
    processor_kind: str,
    grid: ReplicaGrid,
    field: MeasuredField,
    epsilon: float | None = None,
) -> AmbiguitySurface:
    """Evaluate one processor over every grid cell.

    Degenerate cells (ratio floor, basis failure, or zero-norm replicas for
    Bartlett) get value 0 and a flag instead of aborting the surface. The dB
    table is normalized so its maximum is exactly 0.
    """
    if processor_kind not in PROCESSOR_KINDS:
        raise ValueError(f"processor_kind must be one of {PROCESSOR_KINDS}")
    if field.n_sensors != grid.n_sensors:
        raise ValueError("field and grid sensor counts differ")
    if processor_kind == "bartlett":
        values, flagged = _bartlett_surface_values(grid, field)
    else:
        eps = default_epsilon(field) if epsilon is None else float(epsilon)
        if not (np.isfinite(eps) and eps > 0.0):
            raise ValueError("epsilon must be positive")
        values, flagged = _graph_surface_values(grid, field, eps)
    shape = grid.shape
    values = values.reshape(shape)
    flagged = flagged.reshape(shape)
    peak = float(np.max(values))
    if peak > 0.0:
        with np.errstate(divide="ignore"):
            values_db = 10.0 * np.log10(values / peak)
    else:
        values_db = np.zeros(shape)
    return AmbiguitySurface(
        ranges_m=grid.ranges_m,
        depths_m=grid.depths_m,
        values=values,
        values_db=values_db,
        flagged=flagged,
    )


def locate(surface: AmbiguitySurface) -> LocateResult:
    """Coordinates of the surface maximum.

    Ties break to the lowest range index, then the lowest depth index (the
    row-major argmax order), so the result is deterministic.
    """
    if bool(np.all(surface.flagged)):
        raise DegenerateSurface("every grid cell is flagged as degenerate")
    i, j = np.unravel_index(int(np.argmax(surface.values)), surface.values.shape)
    return LocateResult(
        range_m=float(surface.ranges_m[i]),
        depth_m=float(surface.depths_m[j]),
        peak_db=float(surface.values_db[i, j]),
    )


def _fmt(x: float) -> str:
    return repr(float(x))


def surface_to_csv(surface: AmbiguitySurface) -> str:
    """Render the surface as CSV, row-major over ranges then depths.

    Floats are written with full round-trip precision; the flag column is
    0/1.
    """
    lines = ["range_m,depth_m,value,value_db,flagged"]
    for i, r in enumerate(surface.ranges_m):
        for j, d in enumerate(surface.depths_m):
            lines.append(
                f"{_fmt(r)},{_fmt(d)},{_fmt(surface.values[i, j])},"
                f"{_fmt(surface.values_db[i, j])},{int(surface.flagged[i, j])}"
            )
    return "\n".join(lines) + "\n"
