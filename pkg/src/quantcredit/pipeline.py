"""End-to-end orchestration: grids, observation, filter, spread curve.

Artifacts written by a full run (all deterministic for a fixed config and
seed, no timestamps):

    grids.txt        quantizer grids and transition matrices (cache; reused
                     when the header hash matches)
    observation.csv  the observed price path, ``time,price``
    filter.csv       filter weights over the final grid plus log evidence
    curve.csv        ``maturity,survival,stderr,spread`` per maturity
    observation.svg / curve.svg   convenience plots
    manifest.json    config hash, seeds, versions, artifact digests
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ScenarioConfig
from .dynamics import TimeGrid, simulate_joint_paths
from .filtering import ObservationPath, run_filter, save_filter_csv
from .quantization import build_grid_sequence, estimate_transitions, load_grid_cache, save_grid_cache
from .rng import derive_key
from .spreads import save_curve_csv, spread_curve, steps_for_maturity
from .survival import survival_full_mc
from .svgplot import line_plot, save_svg

__all__ = ["ObservationMisalignedError", "run_pipeline", "run_convergence", "prepare_grids",
           "observation_path", "save_observation_csv", "load_observation_csv"]


class ObservationMisalignedError(ValueError):
    """Observation file does not line up with the filter time grid."""


def _quantizer_hash(cfg: ScenarioConfig) -> str:
    """Hash of everything the grid cache depends on, including its seed."""
    parts = [
        repr(cfg.firm),
        f"v0={cfg.scenario.v0!r}",
        f"horizon={cfg.scenario.horizon!r}",
        f"steps={cfg.observation_steps}",
        f"sizes={','.join(map(str, cfg.grid_sizes))}",
        f"lloyd={cfg.lloyd_iterations}",
        f"paths={cfg.quantizer_paths}",
        f"seed={derive_key(cfg.seed, 'quantizer')}",
    ]
    return hashlib.sha256("|".join(parts).encode()).hexdigest()[:16]


def prepare_grids(cfg: ScenarioConfig, out_dir: Path):
    """Build (or reload) the quantizer grids and transitions for ``cfg``."""
    cache = out_dir / "grids.txt"
    want = _quantizer_hash(cfg)
    if cache.exists():
        try:
            sequence, transitions, found = load_grid_cache(cache)
            if found == want:
                return sequence, transitions, cache
        except ValueError:
            pass
    grid = cfg.time_grid()
    q_seed = derive_key(cfg.seed, "quantizer")
    sequence = build_grid_sequence(
        cfg.firm, cfg.scenario, grid, cfg.grid_sizes, cfg.quantizer_paths,
        cfg.lloyd_iterations, q_seed,
    )
    transitions = estimate_transitions(
        sequence, cfg.firm, cfg.scenario, grid, cfg.quantizer_paths, q_seed
    )
    save_grid_cache(cache, sequence, transitions, want)
    return sequence, transitions, cache


def observation_path(cfg: ScenarioConfig, obs_file=None) -> ObservationPath:
    """Observed prices: simulated from the config seeds, or read from CSV."""
    grid = cfg.time_grid()
    if obs_file is None:
        seed = derive_key(cfg.seed, "observation", cfg.obs_seed)
        _, s = simulate_joint_paths(cfg.firm, cfg.observation, cfg.scenario, grid, 1, seed)
        return ObservationPath(s[0])
    times, prices = load_observation_csv(obs_file)
    if len(times) != grid.n + 1:
        raise ObservationMisalignedError(
            f"{obs_file}: {len(times)} rows, but the filter grid has {grid.n + 1} instants"
        )
    if np.max(np.abs(times - grid.instants)) > 1e-9:
        raise ObservationMisalignedError(
            f"{obs_file}: observation times do not match the filter grid (no resampling is done)"
        )
    path = ObservationPath(prices)
    path.validate()
    return path


def save_observation_csv(path, grid: TimeGrid, values):
    lines = ["time,price"]
    for t, y in zip(grid.instants, values):
        lines.append(f"{float(t)!r},{float(y)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_observation_csv(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if lines[0] != "time,price":
        raise ObservationMisalignedError(f"{path}: expected 'time,price' header")
    rows = [ln.split(",") for ln in lines[1:]]
    times = np.array([float(r[0]) for r in rows])
    prices = np.array([float(r[1]) for r in rows])
    return times, prices


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run_pipeline(cfg: ScenarioConfig, obs_file=None, out_dir=None) -> dict[str, Path]:
    """Run the full scenario and write all artifacts; returns their paths."""
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = cfg.time_grid()

    sequence, transitions, grids_path = prepare_grids(cfg, out)

    obs = observation_path(cfg, obs_file)
    obs_path = out / "observation.csv"
    save_observation_csv(obs_path, grid, obs.values)

    filt = run_filter(obs, sequence, transitions, cfg.firm, cfg.observation, grid)
    filter_path = out / "filter.csv"
    save_filter_csv(filter_path, filt)

    mc_seed = derive_key(cfg.seed, "survival-mc")
    curve = spread_curve(
        filt, cfg.firm, cfg.scenario, cfg.scenario.maturities, cfg.euler_schedule,
        cfg.mc_trials, mc_seed, weight_floor=cfg.weight_floor, workers=cfg.workers,
    )
    curve_path = out / "curve.csv"
    save_curve_csv(curve_path, curve, cfg.config_hash(), cfg.seed)

    obs_svg = out / "observation.svg"
    save_svg(obs_svg, line_plot(
        [(grid.instants, obs.values, "")],
        title="Observed price path", xlabel="time (years)", ylabel="price",
    ))
    curve_svg = out / "curve.svg"
    finite = curve.spreads[np.isfinite(curve.spreads)]
    ceiling = 2.0 * float(np.max(finite)) if len(finite) else 1.0
    save_svg(curve_svg, line_plot(
        [(curve.maturities, curve.spreads, "")],
        title="Zero-coupon credit spreads", xlabel="maturity (years)",
        ylabel="spread (per year)", y_clip=ceiling,
    ))

    manifest = {
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "obs_seed": cfg.obs_seed,
        "versions": {
            "quantcredit": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "artifacts": {
            p.name: _digest(p) for p in (grids_path, obs_path, filter_path, curve_path)
        },
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    return {
        "grids": grids_path,
        "observation": obs_path,
        "filter": filter_path,
        "curve": curve_path,
        "observation_svg": obs_svg,
        "curve_svg": curve_svg,
        "manifest": manifest_path,
    }


def run_convergence(cfg: ScenarioConfig, sweep_kind: str, values, out_dir=None) -> Path:
    """Numerics diagnostics: sweep MC trials, Euler steps or grid sizes.

    Writes ``convergence.csv`` with one row per sweep point (estimate,
    standard error, wall seconds).  Survival sweeps start the firm value at
    ``v0`` over the first configured maturity window.
    """
    out = Path(out_dir if out_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    scn = cfg.scenario
    t_first = scn.maturities[0]
    rows = []
    if sweep_kind == "mc_trials":
        steps = steps_for_maturity(cfg.euler_schedule, t_first)
        for m in values:
            seed = derive_key(cfg.seed, "convergence-m", int(m))
            t0 = time.perf_counter()
            est = survival_full_mc(cfg.firm, scn.v0, scn.horizon, t_first, scn.barrier,
                                   steps, int(m), seed, workers=cfg.workers)
            rows.append(("mc_trials", int(m), est.value, est.stderr, time.perf_counter() - t0))
    elif sweep_kind == "euler_steps":
        seed = derive_key(cfg.seed, "convergence-n")
        for n in values:
            t0 = time.perf_counter()
            est = survival_full_mc(cfg.firm, scn.v0, scn.horizon, t_first, scn.barrier,
                                   int(n), cfg.mc_trials, seed, workers=cfg.workers)
            rows.append(("euler_steps", int(n), est.value, est.stderr, time.perf_counter() - t0))
    elif sweep_kind == "grid_size":
        grid = cfg.time_grid()
        q_seed = derive_key(cfg.seed, "quantizer")
        for g in values:
            sizes = (1,) + (int(g),) * cfg.observation_steps
            t0 = time.perf_counter()
            seq = build_grid_sequence(cfg.firm, scn, grid, sizes, cfg.quantizer_paths,
                                      cfg.lloyd_iterations, q_seed)
            rows.append(("grid_size", int(g), seq.grids[-1].distortion, 0.0, time.perf_counter() - t0))
    else:
        raise ValueError(f"unknown sweep kind {sweep_kind!r} (mc_trials, euler_steps, grid_size)")

    path = out / "convergence.csv"
    lines = [
        f"# config_hash = {cfg.config_hash()}",
        f"# seed = {cfg.seed}",
        f"# sweep = {sweep_kind}",
        "parameter,value,estimate,stderr,seconds",
    ]
    for kind, v, est, se, secs in rows:
        lines.append(f"{kind},{v},{est!r},{se!r},{secs:.3f}")
    path.write_text("\n".join(lines) + "\n")
    return path


def load_convergence_csv(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if lines[0] != "parameter,value,estimate,stderr,seconds":
        raise ValueError(f"{path}: unexpected convergence CSV header")
    rows = []
    for ln in lines[1:]:
        kind, v, est, se, secs = ln.split(",")
        rows.append((kind, int(v), float(est), float(se), float(secs)))
    return rows
