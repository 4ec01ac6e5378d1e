"""Quality-diversity evolution of the safety repertoire.

Candidates are scored under one shared set of dynamics conditions sampled
once per run: fitness is the *minimum* safety score across conditions and the
descriptor is the mean outcome, so archived policies are as safe as possible
under the worst training condition. Evolution runs single-threaded and is
bit-deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, EvaluationFailedError, EvolutionFailedError
from .repertoire import GridSpec, Repertoire, RepertoireEntry
from .trajectory import Trajectory


@dataclass
class EvolveConfig:
    n_dynamics: int = 4
    n_init: int = 500
    budget: int = 50_000
    mutation_sigma: float = 0.05
    policy_bounds: Optional[np.ndarray] = None  # (d, 2); defaults to env bounds
    seed: int = 0
    progress_interval: int = 1000

    def __post_init__(self):
        if self.n_dynamics < 1:
            raise ConfigError(f"evolve.n_dynamics must be >= 1, got {self.n_dynamics}")
        if self.n_init < 1:
            raise ConfigError(f"evolve.n_init must be >= 1, got {self.n_init}")
        if self.budget < self.n_init:
            raise ConfigError(
                f"evolve.budget must be >= n_init ({self.n_init}), got {self.budget}"
            )
        if self.mutation_sigma <= 0:
            raise ConfigError(f"evolve.mutation_sigma must be > 0, got {self.mutation_sigma}")
        if self.policy_bounds is not None:
            self.policy_bounds = np.asarray(self.policy_bounds, dtype=float)


def sample_dynamics(bounds, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. uniform dynamics conditions within per-dimension bounds,
    returned as an (n, d) array."""
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    if n < 1:
        raise ConfigError(f"need at least one dynamics condition, got n={n}")
    lo, hi = bounds[:, 0], bounds[:, 1]
    if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
        raise ConfigError("dynamics bounds must be finite")
    if (lo > hi).any():
        raise ConfigError(f"dynamics bounds degenerate (lower > upper): {bounds.tolist()}")
    return rng.uniform(lo, hi, size=(n, len(lo)))


@dataclass
class Evaluation:
    fitness: float
    descriptor: np.ndarray
    trajectories: list[Trajectory]
    safeties: np.ndarray


def evaluate_policy(theta, conditions, env) -> Evaluation:
    """Roll the policy out under every condition; fitness is the minimum
    safety score, descriptor the per-dimension mean outcome."""
    conditions = np.atleast_2d(np.asarray(conditions, dtype=float))
    if len(conditions) == 0:
        raise ConfigError("evaluate_policy needs at least one dynamics condition")
    trajectories = env.rollout_many(theta, conditions)
    for traj in trajectories:
        if not traj.is_finite():
            raise EvaluationFailedError("rollout diverged (non-finite state)")
    safeties = np.array([env.safety(t) for t in trajectories])
    descriptors = np.array([env.descriptor(t) for t in trajectories])
    return Evaluation(
        fitness=float(safeties.min()),
        descriptor=descriptors.mean(axis=0),
        trajectories=trajectories,
        safeties=safeties,
    )


def mutate(theta, sigma: float, bounds, rng: np.random.Generator) -> np.ndarray:
    """Isotropic Gaussian perturbation scaled per dimension by the parameter
    range, clamped back into bounds."""
    if sigma <= 0:
        raise ConfigError(f"mutation sigma must be > 0, got {sigma}")
    theta = np.asarray(theta, dtype=float)
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    step = rng.normal(0.0, sigma * (hi - lo))
    return np.clip(theta + step, lo, hi)


def map_elites(
    env,
    config: EvolveConfig,
    grid: Optional[GridSpec] = None,
    progress: Optional[Callable[[int, Repertoire], None]] = None,
) -> Repertoire:
    """Fill the archive with exactly `budget` evaluations: uniform random
    policies first, then select-mutate-evaluate-insert. Failed evaluations
    consume budget."""
    rng = np.random.default_rng(config.seed)
    bounds = config.policy_bounds if config.policy_bounds is not None else env.policy_bounds
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]

    conditions = sample_dynamics(env.dynamics_bounds, config.n_dynamics, rng)
    rep = Repertoire(grid or env.default_grid(), env_id=env.env_id, dynamics_conditions=conditions)

    evals = 0

    def run_one(theta) -> bool:
        nonlocal evals
        evals += 1
        try:
            ev = evaluate_policy(theta, conditions, env)
        except EvaluationFailedError:
            return False
        worst = int(np.argmin(ev.safeties))
        rep.try_insert(
            RepertoireEntry(
                policy=theta,
                trajectory=ev.trajectories[worst],
                descriptor=ev.descriptor,
                safety_prior=ev.fitness,
            )
        )
        return True

    def tick():
        if progress is not None and evals % config.progress_interval == 0:
            progress(evals, rep)

    any_success = False
    for _ in range(config.n_init):
        any_success |= run_one(rng.uniform(lo, hi))
        tick()
    if not any_success:
        raise EvolutionFailedError("all initial policy evaluations failed")

    while evals < config.budget:
        parent = rep.random_elite(rng)
        run_one(mutate(parent.policy, config.mutation_sigma, bounds, rng))
        tick()

    if progress is not None and evals % config.progress_interval != 0:
        progress(evals, rep)
    return rep
