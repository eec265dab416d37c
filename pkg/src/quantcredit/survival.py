"""Full-information survival probabilities by bridge-corrected Monte Carlo.

Plain Euler monitoring of a barrier only checks the grid knots and misses
intra-interval crossings.  Conditionally on two consecutive knots ``x, y``
(both above the barrier ``a``), the minimum of the connecting bridge with
diffusion coefficient frozen at the left knot falls below ``a`` with
probability ``exp(-2 (x-a)(y-a) / (vol^2 dt))``, so each interval
contributes the survival factor ``1 - exp(...)`` and a trial's weight is
the product of its factors.  Averaging the weights over trials estimates
the survival probability much more accurately than knot monitoring at the
same step count.

The mixture estimator reuses the same Brownian increments for every start
value (common random numbers), which makes a point-mass mixture exactly
reproduce the single-start estimate and keeps mixtures comparable across
start values.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import euler_step_frozen
from .rng import CHUNK, chunk_sizes, chunk_stream

__all__ = [
    "SurvivalEstimate",
    "BridgeInterval",
    "bridge_survival_factor",
    "survival_full_mc",
    "survival_naive_mc",
    "survival_partial",
]

#: Mixture components with weight at or below this are skipped; the induced
#: bias is bounded by floor * (number of grid points).
WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True)
class SurvivalEstimate:
    """Monte Carlo survival probability with its sampling error."""

    value: float
    stderr: float
    trials: int
    euler_steps: int
    start: float
    end: float


@dataclass(frozen=True)
class BridgeInterval:
    """One Euler subinterval: endpoint values, barrier, frozen volatility."""

    left: float
    right: float
    barrier: float
    local_vol: float
    dt: float

    def validate(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.local_vol > 0:
            raise ValueError("local_vol must be positive")


def _bridge_factors(x, y, a, inv_var):
    """Vectorized per-interval survival factors.

    ``inv_var = 1 / (local_vol^2 * dt)``; returns 0 where ``min(x, y) <= a``
    and ``1 - exp(-2 (x-a)(y-a) inv_var)`` elsewhere.
    """
    crossed = np.minimum(x, y) <= a
    expo = np.minimum(-2.0 * (x - a) * (y - a) * inv_var, 0.0)
    return np.where(crossed, 0.0, -np.expm1(expo))


def bridge_survival_factor(iv: BridgeInterval) -> float:
    """Probability that the bridge between ``iv.left`` and ``iv.right``
    stays above ``iv.barrier`` on the subinterval."""
    iv.validate()
    inv_var = 1.0 / (iv.local_vol**2 * iv.dt)
    return float(_bridge_factors(iv.left, iv.right, iv.barrier, inv_var))


def _mixture_chunk(model, starts, weights, s, dt, a, steps, chunk_index, m, seed, naive):
    """Survival weights for one chunk of trials, all start values at once.

    Returns ``(per_start_sum, mixture_sum, mixture_sq_sum)`` where the
    mixture uses the supplied weights.  The same increments drive every
    start value (common random numbers).
    """
    rng = chunk_stream(seed, chunk_index)
    z = rng.standard_normal((steps, m))
    sq = np.sqrt(dt)
    v = np.repeat(starts[:, None], m, axis=1)
    prod = np.ones_like(v)
    for k in range(steps):
        t_k = s + k * dt
        alive = v > 0
        v_safe = np.where(alive, v, 1.0)
        if naive:
            v_next = euler_step_frozen(model, t_k, dt, v, sq * z[k])
            prod *= (np.minimum(v, v_next) > a).astype(float)
        else:
            vol = np.where(alive, np.asarray(model.vol(t_k, v_safe), dtype=float), 1.0)
            v_next = euler_step_frozen(model, t_k, dt, v, sq * z[k])
            inv_var = 1.0 / (vol**2 * dt)
            prod *= _bridge_factors(v, v_next, a, inv_var)
        v = v_next
    per_start = prod.sum(axis=1)
    mix = weights @ prod
    return per_start, mix.sum(), float(mix @ mix)


def _run_mixture(model, starts, weights, s, t, a, steps, trials, seed, naive, workers):
    dt = (t - s) / steps
    jobs = list(chunk_sizes(trials))
    run = lambda job: _mixture_chunk(
        model, starts, weights, s, dt, a, steps, job[0], job[1], seed, naive
    )
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run, jobs))
    else:
        partials = [run(job) for job in jobs]
    # Fixed-order reduction over chunks: identical for any worker count.
    per_start = np.zeros(len(starts))
    mix_sum = 0.0
    mix_sq = 0.0
    for ps, ms, m2 in partials:
        per_start += ps
        mix_sum += ms
        mix_sq += m2
    mean = mix_sum / trials
    var = max(mix_sq - trials * mean**2, 0.0) / max(trials - 1, 1)
    stderr = float(np.sqrt(var / trials))
    value = float(weights @ (per_start / trials))
    return value, stderr, per_start / trials


def survival_full_mc(
    fv, v: float, s: float, t: float, a: float, steps: int, trials: int, seed: int, *, workers: int = 1
) -> SurvivalEstimate:
    """Bridge Monte Carlo estimate of ``P(inf_{[s,t]} V > a | V_s = v)``.

    Simulates ``trials`` Euler paths on the uniform ``steps``-step grid over
    ``[s, t]`` and averages the per-trial products of bridge survival
    factors (volatility frozen at the left knot).  Deterministic for a
    fixed seed, independent of ``workers``.  Starting at or below the
    barrier returns value 0 with zero error.
    """
    _check_mc_args(s, t, steps, trials)
    if v <= a:
        return SurvivalEstimate(0.0, 0.0, trials, steps, s, t)
    value, stderr, _ = _run_mixture(
        fv, np.array([float(v)]), np.array([1.0]), s, t, a, steps, trials, seed, False, workers
    )
    return SurvivalEstimate(value, stderr, trials, steps, s, t)


def survival_naive_mc(
    fv, v: float, s: float, t: float, a: float, steps: int, trials: int, seed: int, *, workers: int = 1
) -> SurvivalEstimate:
    """Discrete-minimum estimator (knot monitoring only, no bridge factors).

    Biased upward: crossings between knots are not seen.  Kept as the
    comparison baseline for the bridge estimator, with the same trial
    substreams so the two are coupled.
    """
    _check_mc_args(s, t, steps, trials)
    if v <= a:
        return SurvivalEstimate(0.0, 0.0, trials, steps, s, t)
    value, stderr, _ = _run_mixture(
        fv, np.array([float(v)]), np.array([1.0]), s, t, a, steps, trials, seed, True, workers
    )
    return SurvivalEstimate(value, stderr, trials, steps, s, t)


def survival_partial(
    filter_dist,
    fv,
    s: float,
    t: float,
    a: float,
    steps: int,
    trials: int,
    seed: int,
    *,
    weight_floor: float = WEIGHT_FLOOR,
    workers: int = 1,
) -> SurvivalEstimate:
    """Survival probability under partial information.

    Mixes the bridge Monte Carlo estimates started at each filter grid
    point, weighted by the filter distribution.  All start values share the
    same Brownian increments per trial, so a point-mass filter reproduces
    :func:`survival_full_mc` exactly and the reported standard error is the
    sampling error of the per-trial mixture.  Grid points at or below the
    barrier contribute zero; weights at or below ``weight_floor`` are
    skipped.
    """
    _check_mc_args(s, t, steps, trials)
    points = np.asarray(filter_dist.grid.points, dtype=float)
    weights = np.asarray(filter_dist.weights, dtype=float)
    active = (weights > weight_floor) & (points > a)
    if not np.any(active):
        return SurvivalEstimate(0.0, 0.0, trials, steps, s, t)
    value, stderr, _ = _run_mixture(
        fv, points[active], weights[active], s, t, a, steps, trials, seed, False, workers
    )
    return SurvivalEstimate(value, stderr, trials, steps, s, t)


def _check_mc_args(s, t, steps, trials):
    if not t > s:
        raise ValueError(f"need t > s, got s={s}, t={t}")
    if steps < 2:
        raise ValueError(f"need at least 2 Euler steps, got {steps}")
    if trials < 100:
        raise ValueError(f"need at least 100 trials, got {trials}")
