"""Per-time-step optimal quadratic quantizer grids for the firm value.

Grids are fitted by Lloyd fixed-point passes on simulated Euler marginal
samples: each pass replaces every grid point by the mean of the samples in
its Voronoi cell, which never increases the quantization error on a fixed
sample set.  Cell weights are sample frequencies and the Markov transitions
of the projected chain are counted on a fresh, independently seeded sample
set to avoid the optimistic bias of reusing the fitting samples.

All passes work on sorted samples with prefix sums, so one pass costs
O(N log M) for N samples and M grid points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import MarketScenario, TimeGrid, simulate_value_paths
from .rng import derive_key

__all__ = [
    "QuantizerGrid",
    "GridSequence",
    "TransitionMatrix",
    "nearest_index",
    "nearest_projection",
    "quantile_grid",
    "grid_distortion",
    "lloyd_pass",
    "marginal_value_samples",
    "build_grid_sequence",
    "estimate_transitions",
    "save_grid_cache",
    "load_grid_cache",
]

GRID_CACHE_MAGIC = "quantcredit-grids v1"


@dataclass(frozen=True)
class QuantizerGrid:
    """Grid points with their cell weights and quantization error.

    ``distortion`` is the L2 mean quantization error (root mean squared
    distance of a sample to its nearest grid point).  ``empty_cells``
    counts Voronoi cells that received no samples in the last fit.
    """

    points: np.ndarray
    weights: np.ndarray
    distortion: float
    empty_cells: int = 0

    @property
    def size(self) -> int:
        return len(self.points)

    def validate(self):
        if len(self.points) != len(self.weights):
            raise ValueError("points and weights must have equal length")
        if not np.all(np.diff(self.points) > 0):
            raise ValueError("grid points must be strictly increasing")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.distortion < 0:
            raise ValueError("distortion must be nonnegative")


@dataclass(frozen=True)
class GridSequence:
    """One quantizer grid per filter time index ``k = 0..n``."""

    grids: tuple[QuantizerGrid, ...]

    @property
    def n(self) -> int:
        return len(self.grids) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(g.size for g in self.grids)

    def validate(self):
        if len(self.grids) < 1 or self.grids[0].size != 1:
            raise ValueError("grid sequence must start with a single-point grid")
        for g in self.grids:
            g.validate()


@dataclass(frozen=True)
class TransitionMatrix:
    """Estimated transitions of the projected chain between two grids.

    Rows that were never visited by a sample path get a point mass on the
    nearest grid point at the destination step and are listed in
    ``dead_rows``.
    """

    probs: np.ndarray
    samples: int
    dead_rows: tuple[int, ...] = field(default_factory=tuple)

    def validate(self):
        if np.any(self.probs < 0):
            raise ValueError("transition entries must be nonnegative")
        if np.max(np.abs(self.probs.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("transition rows must sum to 1")


def nearest_index(points: np.ndarray, x):
    """Index of the nearest grid point, ties toward the smaller index.

    ``points`` must be strictly increasing; works on scalars and arrays via
    bisection on the cell midpoints.
    """
    mids = 0.5 * (points[1:] + points[:-1])
    return np.searchsorted(mids, x, side="left")


def nearest_projection(grid: QuantizerGrid, x):
    """Closest-neighbor projection index onto ``grid``."""
    idx = nearest_index(grid.points, x)
    return int(idx) if np.ndim(idx) == 0 else idx


def quantile_grid(samples: np.ndarray, size: int) -> np.ndarray:
    """Evenly spaced sample quantiles, the Lloyd starting grid and the
    baseline any fitted grid must beat on the same samples."""
    if size < 1:
        raise ValueError("grid size must be at least 1")
    if len(samples) < size:
        raise ValueError(f"{len(samples)} samples cannot support a size-{size} grid")
    pts = np.quantile(np.asarray(samples, dtype=float), (np.arange(size) + 0.5) / size)
    if size > 1 and not np.all(np.diff(pts) > 0):
        raise ValueError("samples too degenerate for distinct quantile grid points")
    return pts


def _cell_bounds(xs_sorted: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Sample-index boundaries of each Voronoi cell on sorted samples.

    A sample equal to a cell midpoint is assigned to the left cell,
    matching the tie rule of :func:`nearest_index`.
    """
    mids = 0.5 * (points[1:] + points[:-1])
    inner = np.searchsorted(xs_sorted, mids, side="right")
    return np.concatenate(([0], inner, [len(xs_sorted)]))


def _grid_stats(xs, cs1, cs2, points):
    bounds = _cell_bounds(xs, points)
    counts = np.diff(bounds)
    sums = cs1[bounds[1:]] - cs1[bounds[:-1]]
    sq_sums = cs2[bounds[1:]] - cs2[bounds[:-1]]
    n = len(xs)
    weights = counts / n
    sse = float(np.sum(sq_sums - 2.0 * points * sums + points**2 * counts))
    return weights, np.sqrt(max(sse, 0.0) / n), counts


def _lloyd_move(xs, cs1, points):
    bounds = _cell_bounds(xs, points)
    counts = np.diff(bounds)
    sums = cs1[bounds[1:]] - cs1[bounds[:-1]]
    new_pts = np.where(counts > 0, sums / np.maximum(counts, 1), points)
    return np.sort(new_pts)


def _sorted_with_prefixes(samples):
    xs = np.sort(np.asarray(samples, dtype=float))
    cs1 = np.concatenate(([0.0], np.cumsum(xs)))
    cs2 = np.concatenate(([0.0], np.cumsum(xs**2)))
    return xs, cs1, cs2


def grid_distortion(samples, points) -> float:
    """L2 mean quantization error of ``points`` on ``samples``."""
    xs, cs1, cs2 = _sorted_with_prefixes(samples)
    _, distortion, _ = _grid_stats(xs, cs1, cs2, np.asarray(points, dtype=float))
    return float(distortion)


def lloyd_pass(samples, grid: QuantizerGrid) -> QuantizerGrid:
    """One Lloyd pass: move every point to its cell mean.

    Empty cells keep their point; the output is re-sorted and carries the
    weights and distortion of the moved grid on the same samples.  The
    distortion never increases relative to the input grid.
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) == 0:
        raise ValueError("need at least one sample")
    xs, cs1, cs2 = _sorted_with_prefixes(samples)
    new_pts = _lloyd_move(xs, cs1, np.asarray(grid.points, dtype=float))
    weights, distortion, counts = _grid_stats(xs, cs1, cs2, new_pts)
    return QuantizerGrid(new_pts, weights, float(distortion), int(np.sum(counts == 0)))


def marginal_value_samples(fv, scn: MarketScenario, grid: TimeGrid, sample_paths: int, seed: int) -> np.ndarray:
    """Euler sample paths of the firm value used to fit the grids.

    Shape ``(sample_paths, n+1)``.  The stream is derived from ``seed`` so
    the same seed always reproduces the same fitting samples.
    """
    return simulate_value_paths(fv, scn.v0, grid, sample_paths, derive_key(seed, "quantizer-marginals"))


def build_grid_sequence(
    fv, scn: MarketScenario, grid: TimeGrid, sizes, sample_paths: int, lloyd_iters: int, seed: int
) -> GridSequence:
    """Fit one quantizer grid per time step on simulated marginal samples.

    ``sizes[0]`` must be 1 (the start value is known); each later step gets
    ``lloyd_iters`` Lloyd passes from the quantile starting grid.
    """
    grid.validate()
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) != grid.n + 1:
        raise ValueError(f"need {grid.n + 1} grid sizes, got {len(sizes)}")
    if sizes[0] != 1:
        raise ValueError("the first grid size must be 1")
    if min(sizes) < 1:
        raise ValueError("grid sizes must be positive")
    if lloyd_iters < 1:
        raise ValueError("need at least one Lloyd pass")
    if sample_paths < 100 * max(sizes):
        raise ValueError(
            f"insufficient samples: {sample_paths} paths for grids up to size {max(sizes)}"
        )
    samples = marginal_value_samples(fv, scn, grid, sample_paths, seed)
    grids = [QuantizerGrid(np.array([float(scn.v0)]), np.array([1.0]), 0.0)]
    for k in range(1, grid.n + 1):
        xs, cs1, cs2 = _sorted_with_prefixes(samples[:, k])
        pts = quantile_grid(xs, sizes[k])
        for _ in range(lloyd_iters):
            pts = _lloyd_move(xs, cs1, pts)
        weights, distortion, counts = _grid_stats(xs, cs1, cs2, pts)
        grids.append(QuantizerGrid(pts, weights, float(distortion), int(np.sum(counts == 0))))
    return GridSequence(tuple(grids))


def estimate_transitions(
    sequence: GridSequence, fv, scn: MarketScenario, grid: TimeGrid, sample_paths: int, seed: int
) -> list[TransitionMatrix]:
    """Count projected sample-path transitions between consecutive grids.

    Uses a sample set independent of the one that fitted the grids (fresh
    substream from the same seed).  Returns one matrix per step ``k=1..n``.
    """
    grid.validate()
    if sequence.n != grid.n:
        raise ValueError(f"sequence has {sequence.n} steps but time grid has {grid.n}")
    paths = simulate_value_paths(
        fv, scn.v0, grid, sample_paths, derive_key(seed, "quantizer-transitions")
    )
    idx = [nearest_index(sequence.grids[k].points, paths[:, k]) for k in range(grid.n + 1)]
    out = []
    for k in range(1, grid.n + 1):
        n_prev, n_cur = sequence.grids[k - 1].size, sequence.grids[k].size
        counts = np.bincount(idx[k - 1] * n_cur + idx[k], minlength=n_prev * n_cur)
        counts = counts.reshape(n_prev, n_cur).astype(float)
        row_sums = counts.sum(axis=1)
        dead = np.flatnonzero(row_sums == 0)
        for i in dead:
            j = nearest_index(sequence.grids[k].points, sequence.grids[k - 1].points[i])
            counts[i, int(j)] = 1.0
            row_sums[i] = 1.0
        out.append(TransitionMatrix(counts / row_sums[:, None], sample_paths, tuple(int(i) for i in dead)))
    return out


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.atleast_1d(values))


def save_grid_cache(path, sequence: GridSequence, transitions, cache_hash: str):
    """Write grids and transitions as a versioned text file.

    Floats are written with shortest round-trip representation, so a load
    reproduces the arrays bit for bit.
    """
    lines = [GRID_CACHE_MAGIC, f"hash={cache_hash} n={sequence.n} sizes={','.join(map(str, sequence.sizes))}"]
    for k, g in enumerate(sequence.grids):
        lines.append(f"step {k}")
        lines.append("points " + _fmt(g.points))
        lines.append("weights " + _fmt(g.weights))
        lines.append(f"distortion {g.distortion!r}")
        lines.append(f"empty {g.empty_cells}")
        if k >= 1:
            tm = transitions[k - 1]
            lines.append(f"tsamples {tm.samples}")
            lines.append("tdead" + ("" if not tm.dead_rows else " " + " ".join(map(str, tm.dead_rows))))
            for row in tm.probs:
                lines.append("trow " + _fmt(row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_grid_cache(path):
    """Read a grid cache file; returns ``(sequence, transitions, hash)``."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != GRID_CACHE_MAGIC:
        raise ValueError(f"{path}: not a grid cache file")
    header = dict(part.split("=", 1) for part in lines[1].split())
    n = int(header["n"])
    sizes = tuple(int(s) for s in header["sizes"].split(","))
    grids, transitions = [], []
    pos = 2
    for k in range(n + 1):
        if lines[pos] != f"step {k}":
            raise ValueError(f"{path}: expected 'step {k}' at line {pos + 1}")
        points = np.array([float(v) for v in lines[pos + 1].split()[1:]])
        weights = np.array([float(v) for v in lines[pos + 2].split()[1:]])
        distortion = float(lines[pos + 3].split()[1])
        empty = int(lines[pos + 4].split()[1])
        grids.append(QuantizerGrid(points, weights, distortion, empty))
        pos += 5
        if k >= 1:
            samples = int(lines[pos].split()[1])
            dead = tuple(int(i) for i in lines[pos + 1].split()[1:])
            rows = []
            pos += 2
            for _ in range(grids[k - 1].size):
                rows.append([float(v) for v in lines[pos].split()[1:]])
                pos += 1
            transitions.append(TransitionMatrix(np.array(rows), samples, dead))
    sequence = GridSequence(tuple(grids))
    if sequence.sizes != sizes:
        raise ValueError(f"{path}: header sizes do not match grid blocks")
    return sequence, transitions, header["hash"]
