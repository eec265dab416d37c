"""Forward filter of the hidden firm value on the quantizer grids.

Conditionally on consecutive firm values ``(v_prev, v_cur)`` and the
previous price ``y_prev``, the next observed price is lognormal with
log-mean

    m = log y_prev + (psi - (nu^2 + delta^2)/2 - nu b/vol) dt
        + (nu / vol) (v_cur - v_prev)

and log-variance ``delta^2 dt``, all coefficients frozen at the left time
point (Euler discretization of the observation equation).  The filter
recursion propagates a weight vector over the quantizer grid: transition
by the estimated chain matrix, multiply by the observation likelihood,
renormalize.  The per-step normalizers are accumulated in log space so the
un-normalized filter mass is recoverable as ``weights * exp(log_evidence)``
without underflow over long observation windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ObservationModel, TimeGrid, coefficients
from .quantization import GridSequence, QuantizerGrid

__all__ = [
    "FilterUnderflowError",
    "ObservationPath",
    "FilterDistribution",
    "likelihood",
    "likelihood_matrix",
    "bayes_update",
    "filter_init",
    "filter_step",
    "run_filter",
    "save_filter_csv",
    "load_filter_csv",
]


class FilterUnderflowError(RuntimeError):
    """Raised when every posterior weight underflows to zero at one step."""

    def __init__(self, step: int):
        super().__init__(f"filter mass underflowed to zero at step {step}")
        self.step = step


@dataclass(frozen=True)
class ObservationPath:
    """Observed prices aligned with the filter time grid, ``y_0 = s0``."""

    values: np.ndarray

    def validate(self):
        if np.any(np.asarray(self.values) <= 0):
            raise ValueError("observed prices must be strictly positive")


@dataclass(frozen=True)
class FilterDistribution:
    """Normalized weights over a quantizer grid plus accumulated evidence."""

    grid: QuantizerGrid
    weights: np.ndarray
    log_evidence: float

    def mean(self) -> float:
        return float(self.weights @ self.grid.points)

    def validate(self):
        w = np.asarray(self.weights)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("filter weights must be nonnegative and sum to 1")


def _loglik(v_prev, y_prev, v_cur, y_cur, fv, obs, t_prev, dt):
    """Log observation density; broadcasts over ``v_prev`` and ``v_cur``."""
    b = np.asarray(fv.drift(t_prev, v_prev), dtype=float)
    vol = np.asarray(fv.vol(t_prev, v_prev), dtype=float)
    nu = obs.nu_at(t_prev)
    delta = obs.delta_at(t_prev)
    if delta <= 0:
        raise ValueError(f"delta({t_prev}) must be positive for the likelihood")
    m = (
        math.log(y_prev)
        + (obs.psi - 0.5 * (nu**2 + delta**2) - nu * b / vol) * dt
        + (nu / vol) * (v_cur - v_prev)
    )
    s2 = delta**2 * dt
    log_y = math.log(y_cur)
    return -0.5 * (log_y - m) ** 2 / s2 - log_y - 0.5 * math.log(2.0 * math.pi * s2)


def likelihood(v_prev, y_prev, v_cur, y_cur, fv, obs: ObservationModel, t_prev, dt) -> float:
    """Observation density of ``y_cur`` given ``(v_prev, y_prev, v_cur)``."""
    if y_cur <= 0 or y_prev <= 0:
        raise ValueError("prices must be strictly positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    coefficients(fv, t_prev, v_prev)  # domain check, vol > 0
    return float(np.exp(_loglik(float(v_prev), y_prev, float(v_cur), y_cur, fv, obs, t_prev, dt)))


def likelihood_matrix(
    grid_prev: QuantizerGrid, grid_cur: QuantizerGrid, y_prev, y_cur, fv, obs, t_prev, dt
) -> np.ndarray:
    """Observation densities for every (source point, destination point) pair."""
    v_prev = np.asarray(grid_prev.points, dtype=float)[:, None]
    v_cur = np.asarray(grid_cur.points, dtype=float)[None, :]
    return np.exp(_loglik(v_prev, y_prev, v_cur, y_cur, fv, obs, t_prev, dt))


def bayes_update(prior: np.ndarray, likelihood_mat: np.ndarray, transition: np.ndarray):
    """One filter recursion step on explicit tables.

    Returns the renormalized posterior ``w_j ∝ sum_i prior_i g_ij p_ij``
    and the log of the normalizer.  The posterior is invariant under
    positive scaling of the likelihood table; the log-normalizer shifts by
    the log of the scale.
    """
    un_normalized = prior @ (likelihood_mat * transition)
    total = float(un_normalized.sum())
    if not total > 0 or not math.isfinite(total):
        raise FilterUnderflowError(-1)
    return un_normalized / total, math.log(total)


def filter_init(sequence: GridSequence) -> FilterDistribution:
    """Point mass on the known start value, zero accumulated evidence."""
    if sequence.grids[0].size != 1:
        raise ValueError("filter initialization needs a single-point start grid")
    return FilterDistribution(sequence.grids[0], np.array([1.0]), 0.0)


def filter_step(
    state: FilterDistribution,
    k: int,
    y_prev: float,
    y_cur: float,
    sequence: GridSequence,
    transitions,
    fv,
    obs: ObservationModel,
    grid: TimeGrid,
) -> FilterDistribution:
    """Advance the filter from step ``k-1`` to step ``k``."""
    if len(state.weights) != sequence.grids[k - 1].size:
        raise ValueError(f"filter state does not match grid at step {k - 1}")
    g = likelihood_matrix(
        sequence.grids[k - 1], sequence.grids[k], y_prev, y_cur, fv, obs,
        grid.instants[k - 1], grid.deltas[k - 1],
    )
    try:
        weights, log_norm = bayes_update(state.weights, g, transitions[k - 1].probs)
    except FilterUnderflowError:
        raise FilterUnderflowError(k) from None
    return FilterDistribution(sequence.grids[k], weights, state.log_evidence + log_norm)


def run_filter(
    path: ObservationPath, sequence: GridSequence, transitions, fv, obs, grid: TimeGrid
) -> FilterDistribution:
    """Fold :func:`filter_step` over the whole observation path."""
    path.validate()
    values = np.asarray(path.values, dtype=float)
    if len(values) != sequence.n + 1:
        raise ValueError(
            f"observation path has {len(values)} values but the sequence has {sequence.n + 1} steps"
        )
    state = filter_init(sequence)
    for k in range(1, sequence.n + 1):
        state = filter_step(state, k, values[k - 1], values[k], sequence, transitions, fv, obs, grid)
    return state


def save_filter_csv(path, dist: FilterDistribution):
    lines = [f"# log_evidence = {dist.log_evidence!r}", "grid_point,weight"]
    for p, w in zip(dist.grid.points, dist.weights):
        lines.append(f"{float(p)!r},{float(w)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_filter_csv(path):
    """Read back a filter CSV; returns ``(points, weights, log_evidence)``."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    log_evidence = float(lines[0].split("=", 1)[1])
    if lines[1] != "grid_point,weight":
        raise ValueError(f"{path}: unexpected filter CSV header")
    rows = [ln.split(",") for ln in lines[2:]]
    points = np.array([float(r[0]) for r in rows])
    weights = np.array([float(r[1]) for r in rows])
    return points, weights, log_evidence
