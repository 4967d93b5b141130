"""Scenario configuration: JSON parsing, defaults, validation."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

OUTCOMES = ("binary", "tte")
METHODS_FOR_OUTCOME = {
    "binary": ("glm", "cart"),
    "tte": ("glm", "cart", "transformation", "nelson-aalen"),
}
# method -> (model family, outcome-derived predictor) for survival outcomes
TTE_METHOD_MAP = {
    "glm": ("glm", "time"),
    "transformation": ("glm", "log-time"),
    "nelson-aalen": ("glm", "nelson-aalen"),
    "cart": ("cart", "nelson-aalen"),
}
TRUTH_MODES = ("generating", "full-data")
WORKERS_ENV = "AUGMI_WORKERS"

PRESETS = {
    "desk": {"n": 20_000, "replicates": 50, "mi": {"m": 10, "iterations": 10}},
}


class ConfigError(ValueError):
    pass


def available_cores() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


@dataclass(frozen=True)
class MIConfig:
    m: int = 25
    iterations: int = 15
    method: str = "glm"
    # "all" or a |Kendall tau| threshold
    predictor_selection: str | float = 0.05


@dataclass(frozen=True)
class ScenarioConfig:
    outcome: str
    n: int
    observed_fraction: float
    replicates: int
    seed: int
    mi: MIConfig = field(default_factory=MIConfig)
    parallelism: int = field(default_factory=available_cores)
    output_dir: str = "out"
    row_joint_mask: bool = True
    truth: str = "generating"

    def __post_init__(self):
        _validate(self)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)


def _positive_int(name, v):
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        raise ConfigError(f"{name}: must be a positive integer, got {v!r}")


def _validate(c: ScenarioConfig):
    if c.outcome not in OUTCOMES:
        raise ConfigError(f"outcome: must be one of {OUTCOMES}, got {c.outcome!r}")
    for name in ("n", "replicates", "parallelism"):
        _positive_int(name, getattr(c, name))
    if isinstance(c.seed, bool) or not isinstance(c.seed, int) or c.seed < 0:
        raise ConfigError(f"seed: must be a non-negative integer, got {c.seed!r}")
    f = c.observed_fraction
    if isinstance(f, bool) or not isinstance(f, (int, float)) or not 0 < f <= 1:
        raise ConfigError(f"observed_fraction: must be in (0, 1], got {f!r}")
    _positive_int("mi.m", c.mi.m)
    if c.mi.m < 3:
        raise ConfigError(f"mi.m: must be >= 3, got {c.mi.m}")
    _positive_int("mi.iterations", c.mi.iterations)
    allowed = METHODS_FOR_OUTCOME[c.outcome]
    if c.mi.method not in allowed:
        raise ConfigError(
            f"mi.method: {c.mi.method!r} not valid for outcome {c.outcome!r}; expected one of {allowed}"
        )
    sel = c.mi.predictor_selection
    if sel != "all" and (
        isinstance(sel, bool) or not isinstance(sel, (int, float)) or not 0 <= sel <= 1
    ):
        raise ConfigError(f"mi.predictor_selection: must be 'all' or a number in [0, 1], got {sel!r}")
    if c.truth not in TRUTH_MODES:
        raise ConfigError(f"truth: must be one of {TRUTH_MODES}, got {c.truth!r}")
    if not isinstance(c.row_joint_mask, bool):
        raise ConfigError("row_joint_mask: must be true or false")


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        out[k] = _merge(out.get(k, {}), v) if isinstance(v, dict) else v
    return out


def config_from_dict(raw: dict, preset: str | None = None) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    mi_raw = raw.get("mi", {})
    if not isinstance(mi_raw, dict):
        raise ConfigError("mi: must be an object")
    mi_known = {f.name for f in dataclasses.fields(MIConfig)}
    mi_unknown = sorted(set(mi_raw) - mi_known)
    if mi_unknown:
        raise ConfigError(f"unknown config keys in mi: {mi_unknown}")
    missing = [k for k in ("outcome", "n", "observed_fraction", "replicates", "seed") if k not in raw]
    if missing:
        raise ConfigError(f"missing required config keys: {missing}")
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}")
        raw = _merge(raw, PRESETS[preset])
    fields = dict(raw)
    fields["mi"] = MIConfig(**raw.get("mi", {}))
    return ScenarioConfig(**fields)


def parse_config(path, preset: str | None = None) -> ScenarioConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: malformed JSON: {e}") from None
    return config_from_dict(raw, preset)


def resolve_workers(config: ScenarioConfig, cli_workers: int | None = None) -> int:
    """CLI flag beats the environment variable, which beats the config."""
    if cli_workers is not None:
        return cli_workers
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV}: not an integer: {env!r}") from None
    return config.parallelism
