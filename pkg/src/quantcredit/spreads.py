"""Zero-coupon credit spreads from survival probabilities.

With unit face value and zero recovery, the spread over the riskless bond
from ``s`` to maturity ``t`` is ``-log(survival) / (t - s)``.  A zero
survival probability maps to an infinite spread, serialized as ``inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .survival import WEIGHT_FLOOR, survival_partial

__all__ = [
    "SpreadPoint",
    "SpreadCurve",
    "spread",
    "steps_for_maturity",
    "spread_curve",
    "save_curve_csv",
    "load_curve_csv",
]


@dataclass(frozen=True)
class SpreadPoint:
    maturity: float
    survival: float
    stderr: float
    spread: float


@dataclass(frozen=True)
class SpreadCurve:
    """Spreads per maturity, all evaluated at time ``start``."""

    start: float
    points: tuple[SpreadPoint, ...]

    @property
    def maturities(self) -> np.ndarray:
        return np.array([p.maturity for p in self.points])

    @property
    def spreads(self) -> np.ndarray:
        return np.array([p.spread for p in self.points])

    @property
    def survivals(self) -> np.ndarray:
        return np.array([p.survival for p in self.points])

    def validate(self):
        ts = self.maturities
        if len(ts) == 0 or np.any(ts <= self.start) or np.any(np.diff(ts) <= 0):
            raise ValueError("maturities must be strictly increasing and exceed start")
        for p in self.points:
            if p.survival > 0 and not math.isfinite(p.spread):
                raise ValueError("spread must be finite when survival is positive")
            if p.survival == 0 and math.isfinite(p.spread):
                raise ValueError("zero survival must give an infinite spread")
            if p.survival <= 1 and p.spread < 0:
                raise ValueError("spreads must be nonnegative")


def spread(p: float, s: float, t: float) -> float:
    """Annualized zero-coupon spread for survival probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"survival probability must lie in [0, 1], got {p}")
    if not t > s:
        raise ValueError(f"need t > s, got s={s}, t={t}")
    if p == 0.0:
        return math.inf
    return -math.log(p) / (t - s) + 0.0


def steps_for_maturity(schedule, t: float) -> int:
    """Euler step count for maturity ``t`` from ``(t_max, steps)`` pairs."""
    for t_max, steps in schedule:
        if t <= t_max + 1e-12:
            return int(steps)
    raise ValueError(f"maturity {t} not covered by the Euler step schedule")


def spread_curve(
    filter_dist,
    fv,
    scn,
    maturities,
    schedule,
    trials: int,
    seed: int,
    *,
    weight_floor: float = WEIGHT_FLOOR,
    workers: int = 1,
) -> SpreadCurve:
    """Spread curve across maturities from one filter distribution.

    Every maturity runs its own mixture Monte Carlo but shares the filter,
    the quantizer grids and the trial substreams (common random numbers),
    so curve entries are independent of evaluation order.
    """
    s = scn.horizon
    pts = []
    for t in maturities:
        est = survival_partial(
            filter_dist, fv, s, float(t), scn.barrier,
            steps_for_maturity(schedule, t), trials, seed,
            weight_floor=weight_floor, workers=workers,
        )
        pts.append(SpreadPoint(float(t), est.value, est.stderr, spread(est.value, s, float(t))))
    curve = SpreadCurve(s, tuple(pts))
    curve.validate()
    return curve


def save_curve_csv(path, curve: SpreadCurve, config_hash: str = "", seed: int | None = None):
    lines = [
        f"# config_hash = {config_hash}",
        f"# seed = {seed if seed is not None else ''}",
        f"# evaluated_at = {curve.start!r}",
        "maturity,survival,stderr,spread",
    ]
    for p in curve.points:
        lines.append(f"{p.maturity!r},{p.survival!r},{p.stderr!r},{p.spread!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_curve_csv(path):
    """Read back a curve CSV; returns ``(curve, config_hash, seed)``."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    meta = {}
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, value = ln.lstrip("# ").partition(" = ")
            meta[key] = value
        else:
            body.append(ln)
    if body[0] != "maturity,survival,stderr,spread":
        raise ValueError(f"{path}: unexpected curve CSV header")
    pts = []
    for ln in body[1:]:
        t, p, se, sp = ln.split(",")
        pts.append(SpreadPoint(float(t), float(p), float(se), float(sp)))
    curve = SpreadCurve(float(meta["evaluated_at"]), tuple(pts))
    seed = int(meta["seed"]) if meta.get("seed") else None
    return curve, meta.get("config_hash", ""), seed
