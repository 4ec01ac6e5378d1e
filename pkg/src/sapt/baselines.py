"""Comparison methods sharing the transfer infrastructure.

Three baselines: trusting the simulated safety priors verbatim (no safety
model), evolving the archive under a single dynamics condition, and
constrained Bayesian optimization directly in policy-parameter space.
"""

from __future__ import annotations

import enum
from dataclasses import replace
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .adapt import (
    AdaptationLog,
    AdaptConfig,
    EpisodeRecord,
    FrozenPriorModel,
    SelectionKind,
    adapt_loop,
    expected_improvement,
)
from .evolve import EvolveConfig, map_elites
from .gp import GPHyper, gp_fit, zero_prior
from .repertoire import Repertoire


class BaselineKind(enum.Enum):
    CBO_PARAM_SPACE = "cbo"
    NO_GP_SAFETY = "no-gp-safety"
    SINGLE_DYNAMICS = "single-dynamics"


def run_no_gp_safety(rep: Repertoire, real_env, config: AdaptConfig, **kwargs) -> AdaptationLog:
    """Ablation: the safety gate uses the static repertoire prior with zero
    uncertainty; the reward model is still learned online."""
    return adapt_loop(
        rep,
        real_env,
        config,
        safety_model_factory=lambda prior, hyper: FrozenPriorModel(prior),
        method=BaselineKind.NO_GP_SAFETY.value,
        **kwargs,
    )


def run_single_dynamics(
    env,
    evolve_config: EvolveConfig,
    real_env,
    adapt_config: AdaptConfig,
    grid=None,
    **kwargs,
) -> tuple[AdaptationLog, Repertoire]:
    """Ablation: evolve the archive under one randomly-sampled condition,
    then run the full transfer loop on it."""
    rep = map_elites(env, replace(evolve_config, n_dynamics=1), grid=grid)
    log = adapt_loop(
        rep, real_env, adapt_config, method=BaselineKind.SINGLE_DYNAMICS.value, **kwargs
    )
    return log, rep


# CBO kernel presets over normalized policy parameters. Lengthscales grow
# with sqrt(dim) so correlation between random points is dimension-stable.
def cbo_hyper(policy_dim: int, target: str, safety_scale: float = 100.0) -> GPHyper:
    ell = (0.5 * np.sqrt(policy_dim),) * policy_dim
    if target == "reward":
        return GPHyper(ell, 0.25, 1e-4)
    return GPHyper(ell, safety_scale**2, 1e-2)


def run_cbo(
    real_env,
    policy_bounds,
    config: AdaptConfig,
    *,
    n_candidates: int = 4096,
    reward_hyper: Optional[GPHyper] = None,
    safety_hyper: Optional[GPHyper] = None,
    safety_scale: float = 100.0,
) -> AdaptationLog:
    """Constrained BO in policy space: zero-prior-mean GPs for reward and
    safety, acquisition EI(theta) * Pr(safety >= limit), maximized by uniform
    random search within bounds."""
    bounds = np.asarray(policy_bounds, dtype=float)
    d = len(bounds)
    lo, hi = bounds[:, 0], bounds[:, 1]
    reward_hyper = reward_hyper or cbo_hyper(d, "reward")
    safety_hyper = safety_hyper or cbo_hyper(d, "safety", safety_scale)

    rng = np.random.default_rng(config.seed)
    log = AdaptationLog(
        method=BaselineKind.CBO_PARAM_SPACE.value,
        goal=config.goal,
        safety_limit=config.safety_limit,
    )
    x_obs: list[np.ndarray] = []
    r_obs: list[float] = []
    c_obs: list[float] = []

    for trial in range(config.max_trials):
        gp_r = gp_fit(zero_prior, np.array(x_obs) if x_obs else [], r_obs, reward_hyper)
        gp_c = gp_fit(zero_prior, np.array(x_obs) if x_obs else [], c_obs, safety_hyper)
        candidates = rng.uniform(0.0, 1.0, size=(n_candidates, d))
        mu_r, var_r = gp_r.predict_batch(candidates)
        mu_c, var_c = gp_c.predict_batch(candidates)
        sigma_r = np.sqrt(var_r)
        sigma_c = np.sqrt(var_c)

        r_best = max(r_obs) if r_obs else -1.0
        ei = expected_improvement(mu_r, sigma_r, r_best, config.ei_xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(sigma_c > 0, (mu_c - config.safety_limit) / np.where(sigma_c > 0, sigma_c, 1.0), 0.0)
        prob_safe = np.where(sigma_c > 0, ndtr(z), (mu_c >= config.safety_limit).astype(float))
        acq = ei * prob_safe

        i = int(np.argmax(acq))
        theta = lo + candidates[i] * (hi - lo)
        traj = real_env.execute(theta)
        reward = float(real_env.reward(traj, config.goal))
        safety = float(real_env.safety(traj))
        x_obs.append(candidates[i])
        r_obs.append(reward)
        c_obs.append(safety)

        log.episodes.append(
            EpisodeRecord(
                trial_index=trial,
                cell_index=-1,
                descriptor=np.atleast_1d(real_env.descriptor(traj)),
                mu_r=float(mu_r[i]),
                sigma_r=float(sigma_r[i]),
                mu_c=float(mu_c[i]),
                sigma_c=float(sigma_c[i]),
                esi_value=float(acq[i]),
                observed_reward=reward,
                observed_safety=safety,
                violated=bool(safety < config.safety_limit),
                kind=SelectionKind.ESI,
                truncated=traj.truncated,
                trajectory=traj,
            )
        )
    return log
