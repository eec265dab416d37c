"""Scenario configuration: parsing, validation, canonical hashing.

Config files are flat ``section.key = value`` lines with ``#`` comments.
Parsing reports syntax problems with their line number; validation runs
after parsing and reports every violated constraint (not just the first)
with its field path.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Union

from .dynamics import CEV, GBM, MarketScenario, ObservationModel, StepFunction, TimeGrid

__all__ = ["ConfigParseError", "ConfigError", "ScenarioConfig", "parse_config", "load_config"]


class ConfigParseError(ValueError):
    """Malformed config text; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ConfigError(ValueError):
    """Config parsed but violates constraints; carries all violations."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid configuration:\n  " + "\n  ".join(violations))
        self.violations = violations


@dataclass(frozen=True)
class ScenarioConfig:
    firm: Union[GBM, CEV]
    observation: ObservationModel
    scenario: MarketScenario
    observation_steps: int
    grid_sizes: tuple[int, ...]
    lloyd_iterations: int
    quantizer_paths: int
    euler_schedule: tuple[tuple[float, int], ...]
    mc_trials: int
    weight_floor: float
    workers: int
    seed: int
    obs_seed: int
    output_dir: str

    def time_grid(self) -> TimeGrid:
        return TimeGrid.uniform(self.scenario.horizon, self.observation_steps)

    def canonical(self) -> str:
        """Canonical key=value dump of everything that affects the numbers.

        Seeds, worker count and the output directory are excluded: seeds are
        reported next to the hash, and workers/output location must never
        change any numeric output.
        """
        items = dict(_firm_items(self.firm))
        items["obs.psi"] = repr(self.observation.psi)
        items["obs.nu"] = _coeff_repr(self.observation.nu)
        items["obs.delta"] = _coeff_repr(self.observation.delta)
        items["scenario.v0"] = repr(self.scenario.v0)
        items["scenario.s0"] = repr(self.scenario.s0)
        items["scenario.barrier"] = repr(self.scenario.barrier)
        items["scenario.horizon"] = repr(self.scenario.horizon)
        items["scenario.maturities"] = ",".join(repr(t) for t in self.scenario.maturities)
        items["numerics.observation_steps"] = str(self.observation_steps)
        items["numerics.grid_sizes"] = ",".join(map(str, self.grid_sizes))
        items["numerics.lloyd_iterations"] = str(self.lloyd_iterations)
        items["numerics.quantizer_paths"] = str(self.quantizer_paths)
        items["numerics.euler_schedule"] = ",".join(f"{t!r}:{n}" for t, n in self.euler_schedule)
        items["numerics.mc_trials"] = str(self.mc_trials)
        items["numerics.weight_floor"] = repr(self.weight_floor)
        return "\n".join(f"{k} = {v}" for k, v in sorted(items.items()))

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def with_overrides(self, seed=None, output_dir=None) -> "ScenarioConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg


def _firm_items(firm):
    if isinstance(firm, GBM):
        return [("firm.model", "gbm"), ("firm.mu", repr(firm.mu)), ("firm.sigma", repr(firm.sigma))]
    return [
        ("firm.model", "cev"),
        ("firm.mu", repr(firm.mu)),
        ("firm.gamma", repr(firm.gamma)),
        ("firm.beta", repr(firm.beta)),
    ]


def _coeff_repr(coeff) -> str:
    if isinstance(coeff, StepFunction):
        return ",".join(f"{t!r}:{v!r}" for t, v in zip(coeff.times, coeff.values))
    return repr(float(coeff))


_KNOWN_KEYS = {
    "firm.model", "firm.mu", "firm.sigma", "firm.gamma", "firm.beta",
    "obs.psi", "obs.nu", "obs.delta",
    "scenario.v0", "scenario.s0", "scenario.barrier", "scenario.horizon", "scenario.maturities",
    "numerics.observation_steps", "numerics.grid_sizes", "numerics.lloyd_iterations",
    "numerics.quantizer_paths", "numerics.euler_schedule", "numerics.mc_trials",
    "numerics.weight_floor", "numerics.workers",
    "seed", "obs_seed", "output_dir",
}


def _scan(text: str):
    """Split config text into ``key -> (value, line_no)``."""
    entries: dict[str, tuple[str, int]] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(line_no, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigParseError(line_no, "empty key")
        if key in entries:
            raise ConfigParseError(line_no, f"duplicate key {key!r}")
        entries[key] = (value, line_no)
    return entries


def _take(entries, key, convert, default=None, required=False, missing=None):
    if key not in entries:
        if required and missing is not None:
            missing.append(f"{key}: required key is missing")
        return default
    value, line_no = entries.pop(key)
    try:
        return convert(value)
    except ConfigParseError:
        raise
    except Exception as exc:
        raise ConfigParseError(line_no, f"{key}: {exc}") from None


def _float(value: str) -> float:
    return float(value)


def _coeff(value: str):
    """A constant or a ``t0:v0,t1:v1,...`` step table."""
    if ":" not in value:
        return float(value)
    pairs = [item.split(":") for item in value.split(",")]
    times = tuple(float(t) for t, _ in pairs)
    values = tuple(float(v) for _, v in pairs)
    return StepFunction(times, values)


def _maturities(value: str) -> tuple[float, ...]:
    if value.startswith("range:"):
        _, start, stop, step = value.split(":")
        start, stop, step = float(start), float(stop), float(step)
        if step <= 0:
            raise ValueError("range step must be positive")
        out = []
        k = 0
        while True:
            t = round(start + k * step, 10)
            if t > stop + 1e-9:
                break
            out.append(t)
            k += 1
        return tuple(out)
    return tuple(float(v) for v in value.split(","))


def _schedule(value: str) -> tuple[tuple[float, int], ...]:
    pairs = []
    for item in value.split(","):
        t_max, steps = item.split(":")
        pairs.append((float(t_max), int(steps)))
    return tuple(pairs)


def _int_list(value: str) -> tuple[int, ...]:
    return tuple(int(v) for v in value.split(","))


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a config; raises ConfigParseError or ConfigError."""
    entries = _scan(text)
    violations: list[str] = []

    model_kind = _take(entries, "firm.model", str, required=True, missing=violations)
    mu = _take(entries, "firm.mu", _float, required=True, missing=violations)
    sigma = _take(entries, "firm.sigma", _float)
    gamma = _take(entries, "firm.gamma", _float)
    beta = _take(entries, "firm.beta", _float)
    psi = _take(entries, "obs.psi", _float, required=True, missing=violations)
    nu = _take(entries, "obs.nu", _coeff, required=True, missing=violations)
    delta = _take(entries, "obs.delta", _coeff, required=True, missing=violations)
    v0 = _take(entries, "scenario.v0", _float, required=True, missing=violations)
    s0 = _take(entries, "scenario.s0", _float, required=True, missing=violations)
    barrier = _take(entries, "scenario.barrier", _float, required=True, missing=violations)
    horizon = _take(entries, "scenario.horizon", _float, required=True, missing=violations)
    maturities = _take(entries, "scenario.maturities", _maturities, default=(), required=True, missing=violations)
    n_steps = _take(entries, "numerics.observation_steps", int, required=True, missing=violations)
    sizes_raw = _take(entries, "numerics.grid_sizes", _int_list, required=True, missing=violations)
    lloyd = _take(entries, "numerics.lloyd_iterations", int, required=True, missing=violations)
    q_paths = _take(entries, "numerics.quantizer_paths", int, required=True, missing=violations)
    schedule = _take(entries, "numerics.euler_schedule", _schedule, default=(), required=True, missing=violations)
    mc_trials = _take(entries, "numerics.mc_trials", int, required=True, missing=violations)
    weight_floor = _take(entries, "numerics.weight_floor", _float, default=1e-12)
    workers = _take(entries, "numerics.workers", int, default=1)
    seed = _take(entries, "seed", int, required=True, missing=violations)
    obs_seed = _take(entries, "obs_seed", int, default=0)
    output_dir = _take(entries, "output_dir", str, default="out")

    for key, (_, line_no) in entries.items():
        violations.append(f"{key}: unknown key (line {line_no})")

    firm = None
    if model_kind == "gbm":
        if sigma is None:
            violations.append("firm.sigma: required for the gbm model")
        elif sigma <= 0:
            violations.append("firm.sigma: must be positive")
        if gamma is not None or beta is not None:
            violations.append("firm.gamma/firm.beta: not valid for the gbm model")
        if mu is not None and sigma is not None and sigma > 0:
            firm = GBM(mu=mu, sigma=sigma)
    elif model_kind == "cev":
        if gamma is None or beta is None:
            violations.append("firm.gamma, firm.beta: required for the cev model")
        elif gamma <= 0:
            violations.append("firm.gamma: must be positive")
        if sigma is not None:
            violations.append("firm.sigma: not valid for the cev model")
        if mu is not None and gamma is not None and beta is not None and gamma > 0:
            firm = CEV(mu=mu, gamma=gamma, beta=beta)
    elif model_kind is not None:
        violations.append(f"firm.model: must be 'gbm' or 'cev', got {model_kind!r}")

    observation = None
    if psi is not None and nu is not None and delta is not None:
        observation = ObservationModel(psi=psi, nu=nu, delta=delta)
        if horizon is not None and horizon > 0:
            try:
                observation.validate(horizon)
            except ValueError as exc:
                violations.append(f"obs.delta: {exc}")

    scenario = None
    if None not in (v0, s0, barrier, horizon) and maturities is not None:
        scenario = MarketScenario(v0=v0, s0=s0, barrier=barrier, horizon=horizon, maturities=maturities)
        try:
            scenario.validate()
        except ValueError as exc:
            for problem in str(exc).split("; "):
                field = "scenario.maturities" if "maturit" in problem else "scenario"
                violations.append(f"{field}: {problem}")

    sizes: tuple[int, ...] = ()
    if sizes_raw is not None and n_steps is not None:
        if n_steps < 1:
            violations.append("numerics.observation_steps: must be at least 1")
        elif len(sizes_raw) == 1:
            sizes = (1,) + (sizes_raw[0],) * n_steps
        elif len(sizes_raw) != n_steps + 1:
            violations.append(
                f"numerics.grid_sizes: need 1 or {n_steps + 1} entries, got {len(sizes_raw)}"
            )
        else:
            sizes = sizes_raw
        if sizes:
            if sizes[0] != 1:
                violations.append("numerics.grid_sizes: the first grid size must be 1")
            if min(sizes) < 1:
                violations.append("numerics.grid_sizes: sizes must be positive")

    if lloyd is not None and lloyd < 1:
        violations.append("numerics.lloyd_iterations: must be at least 1")
    if q_paths is not None and sizes and q_paths < 100 * max(sizes):
        violations.append(
            f"numerics.quantizer_paths: need at least 100 x max grid size = {100 * max(sizes)}"
        )
    if schedule:
        t_maxes = [t for t, _ in schedule]
        if any(b <= a for a, b in zip(t_maxes, t_maxes[1:])):
            violations.append("numerics.euler_schedule: thresholds must increase")
        if any(n < 2 for _, n in schedule):
            violations.append("numerics.euler_schedule: step counts must be at least 2")
        if maturities and max(maturities, default=0) > t_maxes[-1] + 1e-12:
            violations.append("numerics.euler_schedule: does not cover the largest maturity")
    if mc_trials is not None and mc_trials < 100:
        violations.append("numerics.mc_trials: must be at least 100")
    if weight_floor is not None and not 0.0 <= weight_floor < 1.0:
        violations.append("numerics.weight_floor: must lie in [0, 1)")
    if workers is not None and workers < 1:
        violations.append("numerics.workers: must be at least 1")
    if seed is not None and seed < 0:
        violations.append("seed: must be nonnegative")

    if violations:
        raise ConfigError(violations)

    return ScenarioConfig(
        firm=firm,
        observation=observation,
        scenario=scenario,
        observation_steps=n_steps,
        grid_sizes=sizes,
        lloyd_iterations=lloyd,
        quantizer_paths=q_paths,
        euler_schedule=schedule,
        mc_trials=mc_trials,
        weight_floor=weight_floor,
        workers=workers,
        seed=seed,
        obs_seed=obs_seed,
        output_dir=output_dir,
    )


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        return parse_config(fh.read())
