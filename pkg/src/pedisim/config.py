"""Run configuration: strict JSON loading, dotted-path overrides, seed handling.

Parsing is fail-closed: unknown keys and inverted ranges are hard errors so a
typo can never silently change a reward weight.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, is_dataclass
from pathlib import Path

import numpy as np

from .env import EnvConfig
from .scenarios import SCENARIO_IDS
from .seeding import derive_seed, derive_seeds, generator_for  # noqa: F401  (re-exported)


@dataclass(frozen=True)
class TrainParams:
    """Trainer surface mirrored into the torch-side config at launch time."""

    num_envs: int = 16
    updates: int = 200
    horizon: int = 24
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    epochs: int = 4
    minibatches: int = 4
    lr: float = 1e-3
    value_coef: float = 0.5
    entropy_coef: float = 0.003
    max_grad_norm: float = 1.0
    checkpoint_every: int = 0


@dataclass(frozen=True)
class EvalParams:
    n_commands: int = 1024
    settle_seconds: float = 5.0
    log_scan: bool = False


@dataclass(frozen=True)
class TeleopParams:
    port: int = 8720
    snapshot_hz: float = 20.0
    safety_lo: tuple = (-2.0, -2.0, 0.0)
    safety_hi: tuple = (2.0, 2.0, 1.3)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    stage: int = 1
    scenarios: tuple = SCENARIO_IDS
    out_dir: str = "runs/latest"
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainParams = TrainParams()
    eval: EvalParams = EvalParams()
    teleop: TeleopParams = TeleopParams()


# fields that are (lo, hi) intervals; loader enforces lo <= hi
RANGE_FIELDS = {
    "obstacle1_width", "obstacle_height", "obstacle_mass", "robot_friction",
    "obstacle_friction", "base_mass_offset", "push_interval", "base_push_force",
    "foot_push_force", "terrain_roughness", "outlier_range", "drift_range",
    "jitter_range", "gap_range", "yaw_range",
}


class ConfigError(ValueError):
    pass


def _coerce(default_value, raw, path: str):
    if isinstance(default_value, np.ndarray):
        return np.asarray(raw, dtype=float)
    if isinstance(default_value, tuple):
        return tuple(tuple(x) if isinstance(x, list) else x for x in raw)
    if isinstance(default_value, bool):
        if not isinstance(raw, bool):
            raise ConfigError(f"{path}: expected a boolean, got {raw!r}")
        return raw
    if isinstance(default_value, int) and not isinstance(default_value, bool):
        if isinstance(raw, float) and not raw.is_integer():
            raise ConfigError(f"{path}: expected an integer, got {raw!r}")
        return int(raw)
    if isinstance(default_value, float):
        return float(raw)
    return raw


def _check_ranges(obj, path: str = "") -> None:
    if not is_dataclass(obj):
        return
    for f in dataclasses.fields(obj):
        value = getattr(obj, f.name)
        where = f"{path}.{f.name}" if path else f.name
        if f.name in RANGE_FIELDS:
            lo, hi = value
            if lo > hi:
                raise ConfigError(f"{where}: range lo {lo} > hi {hi}")
        elif is_dataclass(value):
            _check_ranges(value, where)


def dataclass_from_dict(default, data: dict, path: str = ""):
    """Rebuild a dataclass from a dict, strictly: unknown keys are fatal."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    names = {f.name for f in dataclasses.fields(default)}
    updates = {}
    for key, raw in data.items():
        where = f"{path}.{key}" if path else key
        if key not in names:
            raise ConfigError(f"unknown config key '{where}'")
        current = getattr(default, key)
        if is_dataclass(current) and isinstance(raw, dict):
            updates[key] = dataclass_from_dict(current, raw, where)
        else:
            updates[key] = _coerce(current, raw, where)
    return dataclasses.replace(default, **updates)


def apply_override(cfg: RunConfig, assignment: str) -> RunConfig:
    """One 'dotted.path=value' override; value parsed as JSON, else a string."""
    if "=" not in assignment:
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    dotted, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    nested: dict = {}
    cursor = nested
    parts = dotted.strip().split(".")
    for part in parts[:-1]:
        cursor = cursor.setdefault(part, {})
    cursor[parts[-1]] = value
    return dataclass_from_dict(cfg, nested)


def load_config(path=None, overrides=()) -> RunConfig:
    """defaults <- file <- command-line overrides, validated fail-closed."""
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} does not exist")
        try:
            data = json.loads(p.read_text() or "{}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"{p}: line {e.lineno}, column {e.colno}: {e.msg}") from e
        cfg = dataclass_from_dict(cfg, data)
    for assignment in overrides:
        cfg = apply_override(cfg, assignment)
    _check_ranges(cfg)
    if cfg.stage not in (1, 2, 3):
        raise ConfigError(f"stage must be 1, 2 or 3, got {cfg.stage}")
    return cfg


def config_to_dict(obj):
    if is_dataclass(obj):
        return {f.name: config_to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return [config_to_dict(x) for x in obj]
    return obj


def echo_config(cfg: RunConfig, run_dir) -> Path:
    """Write the fully resolved config into the run directory for provenance."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    out = run_dir / "config.json"
    out.write_text(json.dumps(config_to_dict(cfg), indent=2) + "\n")
    return out
