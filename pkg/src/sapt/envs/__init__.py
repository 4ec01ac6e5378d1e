"""Simulators and the sim-as-real evaluation harness.

Both environments expose the same duck-typed surface: `env_id`,
`policy_bounds` / `dynamics_bounds` as (d, 2) arrays, `default_grid()`,
`rollout(policy, psi, noise_scale, rng)`, `rollout_many(policy, psis)`, and
the trajectory functionals `reward(traj, goal)`, `safety(traj)`,
`descriptor(traj)`.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..trajectory import Trajectory
from .arm import PlanarArm, arm_fk
from .lander import AsteroidLander

ENV_CLASSES = {
    AsteroidLander.env_id: AsteroidLander,
    PlanarArm.env_id: PlanarArm,
}


def make_env(env_id: str, **overrides):
    try:
        cls = ENV_CLASSES[env_id]
    except KeyError:
        raise ConfigError(
            f"unknown env_id {env_id!r}; available: {sorted(ENV_CLASSES)}"
        ) from None
    return cls(**overrides)


class RealEnv:
    """Deployment-side wrapper: executes policies under a held-out dynamics
    condition with process noise, without exposing that condition."""

    def __init__(self, base, psi_real, process_noise: float = 0.0, seed: int = 0):
        psi = np.asarray(psi_real, dtype=float).ravel()
        lo, hi = base.dynamics_bounds[:, 0], base.dynamics_bounds[:, 1]
        if psi.shape != lo.shape:
            raise ConfigError(
                f"psi_real has shape {psi.shape}, expected {lo.shape} for {base.env_id}"
            )
        if not ((psi >= lo) & (psi <= hi)).all():
            raise ConfigError(
                f"psi_real {psi.tolist()} outside the feasible dynamics bounds"
            )
        self.base = base
        self.process_noise = float(process_noise)
        self._psi_real = psi
        self._rng = np.random.default_rng(seed)

    @property
    def env_id(self) -> str:
        return self.base.env_id

    def execute(self, policy) -> Trajectory:
        return self.base.rollout(
            policy, self._psi_real, noise_scale=self.process_noise, rng=self._rng
        )

    def reward(self, traj, goal) -> float:
        return self.base.reward(traj, goal)

    def safety(self, traj) -> float:
        return self.base.safety(traj)

    def descriptor(self, traj):
        return self.base.descriptor(traj)


def make_real_env(env, psi_real, process_noise: float = 0.0, seed: int = 0) -> RealEnv:
    """`env` may be an env_id string or a configured environment instance."""
    if isinstance(env, str):
        env = make_env(env)
    return RealEnv(env, psi_real, process_noise=process_noise, seed=seed)


__all__ = [
    "AsteroidLander",
    "PlanarArm",
    "RealEnv",
    "arm_fk",
    "make_env",
    "make_real_env",
    "ENV_CLASSES",
]
