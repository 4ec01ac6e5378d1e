"""Experiment configuration: TOML presets, overrides, validation.

A config file fully determines an experiment (environment, grid, evolution,
adaptation, GP kernels, replicates); CLI flags override individual keys.
Validation errors carry the offending field name.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .adapt import AdaptConfig
from .errors import ConfigError
from .evolve import EvolveConfig
from .gp import GPHyper, preset_hyper
from .repertoire import GridSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_PRESET_PACKAGE = "sapt.presets"
KNOWN_ENV_IDS = ("asteroid", "arm")
METHODS = ("sapt", "no-gp-safety", "single-dynamics", "cbo")


@dataclass
class ExperimentConfig:
    env_id: str
    seed: int
    grid: GridSpec
    evolve: EvolveConfig
    adapt: AdaptConfig
    replicates: int
    process_noise: float
    psi_real: Optional[np.ndarray]  # pinned held-out condition; None = sample per replicate
    gp_safety: GPHyper
    gp_reward: GPHyper
    env_overrides: dict = field(default_factory=dict)


def preset_path(name: str) -> Path:
    from importlib.resources import files

    p = files(_PRESET_PACKAGE).joinpath(f"{name}.toml")
    return Path(str(p))


_REQUIRED = object()


def _expect(table: dict, key: str, types, where: str, default=_REQUIRED):
    if key not in table:
        if default is _REQUIRED:
            raise ConfigError(f"{where}.{key}: missing required key")
        return default
    val = table[key]
    if not isinstance(val, types):
        tn = types.__name__ if isinstance(types, type) else "/".join(t.__name__ for t in types)
        raise ConfigError(f"{where}.{key}: expected {tn}, got {type(val).__name__}")
    return val


def _float_list(table: dict, key: str, where: str, default=None):
    if key not in table and default is not None:
        return list(default)
    val = _expect(table, key, list, where)
    try:
        return [float(v) for v in val]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected a list of numbers, got {val!r}") from None


def _hyper_from(table: dict, where: str, fallback: GPHyper) -> GPHyper:
    if not table:
        return fallback
    try:
        return GPHyper(
            lengthscale=tuple(_float_list(table, "lengthscale", where, fallback.lengthscale)),
            signal_var=float(_expect(table, "signal_var", (int, float), where, fallback.signal_var)),
            noise_var=float(_expect(table, "noise_var", (int, float), where, fallback.noise_var)),
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(data: dict) -> ExperimentConfig:
    env_id = _expect(data, "env_id", str, "config")
    if env_id not in KNOWN_ENV_IDS:
        raise ConfigError(f"config.env_id: unknown environment {env_id!r}, expected one of {KNOWN_ENV_IDS}")
    seed = int(_expect(data, "seed", int, "config", 0))

    gtab = _expect(data, "grid", dict, "config", {})
    if gtab:
        grid = GridSpec(
            tuple(int(b) for b in _expect(gtab, "bins", list, "grid")),
            tuple(_float_list(gtab, "lower", "grid")),
            tuple(_float_list(gtab, "upper", "grid")),
        )
    else:
        grid = None  # resolved from the env by the caller

    etab = _expect(data, "evolve", dict, "config", {})
    evolve = EvolveConfig(
        n_dynamics=int(_expect(etab, "n_dynamics", int, "evolve", 4)),
        n_init=int(_expect(etab, "n_init", int, "evolve", 500)),
        budget=int(_expect(etab, "budget", int, "evolve", 50_000)),
        mutation_sigma=float(_expect(etab, "mutation_sigma", (int, float), "evolve", 0.05)),
        seed=seed,
        progress_interval=int(_expect(etab, "progress_interval", int, "evolve", 1000)),
    )

    atab = _expect(data, "adapt", dict, "config", {})
    if "goal" not in atab:
        raise ConfigError("adapt.goal: missing required key")
    if "safety_limit" not in atab:
        raise ConfigError("adapt.safety_limit: missing required key")
    adapt = AdaptConfig(
        goal=np.array(_float_list(atab, "goal", "adapt")),
        safety_limit=float(_expect(atab, "safety_limit", (int, float), "adapt")),
        kappa=float(_expect(atab, "kappa", (int, float), "adapt", 2.0)),
        max_trials=int(_expect(atab, "max_trials", int, "adapt", 20)),
        ei_xi=float(_expect(atab, "ei_xi", (int, float), "adapt", 0.01)),
        seed=seed,
        abort_when_unsafe=bool(_expect(atab, "abort_when_unsafe", bool, "adapt", False)),
    )
    replicates = int(_expect(atab, "replicates", int, "adapt", 15))
    if replicates < 1:
        raise ConfigError(f"adapt.replicates: must be >= 1, got {replicates}")
    process_noise = float(_expect(atab, "process_noise", (int, float), "adapt", 0.0))
    if process_noise < 0:
        raise ConfigError(f"adapt.process_noise: must be >= 0, got {process_noise}")
    psi_real = None
    if "psi_real" in atab:
        psi_real = np.array(_float_list(atab, "psi_real", "adapt"))

    gp_tab = _expect(data, "gp", dict, "config", {})
    gp_safety = _hyper_from(_expect(gp_tab, "safety", dict, "gp", {}), "gp.safety",
                            preset_hyper(env_id, "safety"))
    gp_reward = _hyper_from(_expect(gp_tab, "reward", dict, "gp", {}), "gp.reward",
                            preset_hyper(env_id, "reward"))

    env_overrides = _expect(data, "env", dict, "config", {})

    if grid is None:
        from .envs import make_env

        grid = make_env(env_id, **env_overrides).default_grid()
    if len(adapt.goal) != grid.ndim:
        raise ConfigError(
            f"adapt.goal: has {len(adapt.goal)} coordinates but the grid is {grid.ndim}-dimensional"
        )

    return ExperimentConfig(
        env_id=env_id,
        seed=seed,
        grid=grid,
        evolve=evolve,
        adapt=adapt,
        replicates=replicates,
        process_noise=process_noise,
        psi_real=psi_real,
        gp_safety=gp_safety,
        gp_reward=gp_reward,
        env_overrides=env_overrides,
    )


def apply_overrides(data: dict, overrides: dict[str, Any]) -> dict:
    """Set dotted keys (e.g. 'adapt.max_trials') in a nested config dict;
    None values are ignored."""
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split(".")
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"config.{dotted}: cannot override non-table key")
        node[leaf] = value
    return data


def load_config(path_or_name: str, overrides: Optional[dict[str, Any]] = None) -> ExperimentConfig:
    """Load a TOML config from a path or a shipped preset name."""
    path = Path(path_or_name)
    if not path.exists():
        candidate = preset_path(path_or_name)
        if not candidate.exists():
            raise ConfigError(
                f"config: {path_or_name!r} is neither a file nor a known preset"
            )
        path = candidate
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: {path}: {exc}") from exc
    if overrides:
        apply_overrides(data, overrides)
    return parse_config(data)
