"""Episodic transfer to the deployed system via safe Bayesian optimization.

Each episode: score every archive cell with expected improvement gated by a
lower confidence bound on predicted safety, execute the winning policy, then
refit the reward and safety models on the observations so far. When no cell
clears the safety gate the loop either falls back to the most-confidently-safe
cell or aborts, depending on configuration.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, EmptyRepertoireError
from .gp import GPHyper, NearestNeighborPrior, gp_fit, preset_hyper
from .repertoire import Repertoire
from .trajectory import Trajectory

_SQRT_2PI = math.sqrt(2.0 * math.pi)


class SelectionKind(enum.Enum):
    ESI = "esi"
    CONSERVATIVE_FALLBACK = "fallback"


@dataclass
class AdaptConfig:
    goal: np.ndarray
    safety_limit: float
    kappa: float = 2.0
    max_trials: int = 20
    ei_xi: float = 0.01
    seed: int = 0
    abort_when_unsafe: bool = False

    def __post_init__(self):
        self.goal = np.atleast_1d(np.asarray(self.goal, dtype=float))
        self.safety_limit = float(self.safety_limit)
        if self.max_trials < 1:
            raise ConfigError(f"adapt.max_trials must be >= 1, got {self.max_trials}")
        if self.kappa < 0:
            raise ConfigError(f"adapt.kappa must be >= 0, got {self.kappa}")
        if self.ei_xi < 0:
            raise ConfigError(f"adapt.ei_xi must be >= 0, got {self.ei_xi}")


def expected_improvement(mu, sigma, r_best: float, xi: float = 0.0):
    """Closed-form EI for maximization; the zero-uncertainty limit is
    max(0, mu - r_best - xi). Accepts scalars or arrays."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    imp = mu - r_best - xi
    with np.errstate(over="ignore", invalid="ignore"):
        safe_sigma = np.where(sigma > 0, sigma, 1.0)
        z = imp / safe_sigma
        ei = np.where(
            sigma > 0,
            imp * ndtr(z) + sigma * np.exp(-0.5 * z * z) / _SQRT_2PI,
            np.maximum(imp, 0.0),
        )
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def lcb(mu_c, sigma_c, kappa: float):
    """Pessimistic safety estimate mu - kappa * sigma."""
    return mu_c - kappa * np.asarray(sigma_c, dtype=float)


def esi(mu_r, sigma_r, mu_c, sigma_c, *, r_best: float, safety_limit: float,
        kappa: float, xi: float = 0.0):
    """Expected improvement gated to zero wherever the safety LCB falls below
    the limit; the boundary itself counts as safe."""
    ei = expected_improvement(mu_r, sigma_r, r_best, xi)
    gate = lcb(mu_c, sigma_c, kappa) >= safety_limit
    out = np.where(gate, ei, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def violation_bound(kappa: float) -> float:
    """Per-episode upper bound on Pr(observed safety < limit) for any cell
    that passes the LCB gate, assuming calibrated models."""
    if kappa < 0:
        raise ConfigError(f"kappa must be >= 0, got {kappa}")
    return 0.5 + 0.5 * math.erf(-kappa / math.sqrt(2.0))


@dataclass
class Selection:
    cell_index: int
    kind: SelectionKind
    mu_r: float
    sigma_r: float
    mu_c: float
    sigma_c: float
    esi_value: float


def select_next(rep: Repertoire, gp_r, gp_c, config: AdaptConfig, r_best: float) -> Selection:
    """Argmax of ESI over cells passing the safety gate (ties go to the
    lowest cell index); if no cell passes, the max-LCB cell is returned as a
    conservative fallback."""
    cells = rep.occupied_cells()
    if not cells:
        raise EmptyRepertoireError("cannot select from an empty repertoire")
    x = rep.normalized_descriptors()
    mu_r, var_r = gp_r.predict_batch(x)
    mu_c, var_c = gp_c.predict_batch(x)
    sigma_r = np.sqrt(var_r)
    sigma_c = np.sqrt(var_c)
    lcb_vals = lcb(mu_c, sigma_c, config.kappa)
    safe = lcb_vals >= config.safety_limit
    ei = expected_improvement(mu_r, sigma_r, r_best, config.ei_xi)

    if safe.any():
        candidates = np.flatnonzero(safe)
        i = int(candidates[np.argmax(ei[candidates])])
        kind = SelectionKind.ESI
        value = float(ei[i])
    else:
        i = int(np.argmax(lcb_vals))
        kind = SelectionKind.CONSERVATIVE_FALLBACK
        value = 0.0
    return Selection(
        cell_index=cells[i],
        kind=kind,
        mu_r=float(mu_r[i]),
        sigma_r=float(sigma_r[i]),
        mu_c=float(mu_c[i]),
        sigma_c=float(sigma_c[i]),
        esi_value=value,
    )


@dataclass
class EpisodeRecord:
    trial_index: int
    cell_index: int
    descriptor: np.ndarray
    mu_r: float
    sigma_r: float
    mu_c: float
    sigma_c: float
    esi_value: float
    observed_reward: float
    observed_safety: float
    violated: bool
    kind: SelectionKind
    truncated: bool
    trajectory: Optional[Trajectory] = None


@dataclass
class AdaptationLog:
    method: str
    goal: np.ndarray
    safety_limit: float
    episodes: list[EpisodeRecord] = field(default_factory=list)

    def violations(self) -> int:
        return sum(e.violated for e in self.episodes)

    def best_reward(self) -> float:
        return max((e.observed_reward for e in self.episodes), default=float("nan"))

    def summary(self) -> dict:
        return {
            "method": self.method,
            "best_reward": self.best_reward(),
            "violations": self.violations(),
            "episodes": len(self.episodes),
        }

    def csv_header(self) -> list[str]:
        d = len(np.atleast_1d(self.episodes[0].descriptor)) if self.episodes else 1
        return (
            ["method", "trial", "cell"]
            + [f"desc_{i}" for i in range(d)]
            + ["mu_r", "sigma_r", "mu_c", "sigma_c", "esi", "reward", "safety",
               "violated", "kind", "truncated"]
        )

    def csv_rows(self) -> list[list]:
        rows = []
        for e in self.episodes:
            rows.append(
                [self.method, e.trial_index, e.cell_index]
                + [repr(float(v)) for v in np.atleast_1d(e.descriptor)]
                + [repr(e.mu_r), repr(e.sigma_r), repr(e.mu_c), repr(e.sigma_c),
                   repr(e.esi_value), repr(e.observed_reward), repr(e.observed_safety),
                   int(e.violated), e.kind.value, int(e.truncated)]
            )
        return rows

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.csv_header())
            writer.writerows(self.csv_rows())


class LiveGP:
    """Reward/safety model refitted from scratch after every observation."""

    def __init__(self, prior_mean, hyper: GPHyper):
        self.prior_mean = prior_mean
        self.hyper = hyper
        self._x: list[np.ndarray] = []
        self._y: list[float] = []
        self._model = gp_fit(prior_mean, np.empty((0, 1)), [], hyper)

    def observe(self, x, y: float) -> None:
        self._x.append(np.asarray(x, dtype=float).ravel())
        self._y.append(float(y))
        self._model = gp_fit(self.prior_mean, np.array(self._x), np.array(self._y), self.hyper)

    def predict_batch(self, x):
        return self._model.predict_batch(x)


class FrozenPriorModel:
    """Zero-uncertainty model pinned to a prior function; ignores data."""

    def __init__(self, prior_mean):
        self.prior_mean = prior_mean

    def observe(self, x, y: float) -> None:
        pass

    def predict_batch(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.asarray(self.prior_mean(x), dtype=float), np.zeros(len(x))


def _episodic_transfer(
    rep: Repertoire,
    real_env,
    config: AdaptConfig,
    reward_model,
    safety_model,
    method: str,
) -> AdaptationLog:
    log = AdaptationLog(method=method, goal=config.goal, safety_limit=config.safety_limit)
    reward_floor = float(rep.reward_priors().min()) - 1.0
    observed_rewards: list[float] = []

    for trial in range(config.max_trials):
        r_best = max(observed_rewards) if observed_rewards else reward_floor
        sel = select_next(rep, reward_model, safety_model, config, r_best)
        if sel.kind is SelectionKind.CONSERVATIVE_FALLBACK and config.abort_when_unsafe:
            break
        entry = rep.cells[sel.cell_index]
        traj = real_env.execute(entry.policy)
        reward = float(real_env.reward(traj, config.goal))
        safety = float(real_env.safety(traj))
        observed_rewards.append(reward)

        x = rep.grid.normalize(entry.descriptor)
        reward_model.observe(x, reward)
        safety_model.observe(x, safety)

        log.episodes.append(
            EpisodeRecord(
                trial_index=trial,
                cell_index=sel.cell_index,
                descriptor=entry.descriptor.copy(),
                mu_r=sel.mu_r,
                sigma_r=sel.sigma_r,
                mu_c=sel.mu_c,
                sigma_c=sel.sigma_c,
                esi_value=sel.esi_value,
                observed_reward=reward,
                observed_safety=safety,
                violated=bool(safety < config.safety_limit),
                kind=sel.kind,
                truncated=traj.truncated,
                trajectory=traj,
            )
        )
    return log


def adapt_loop(
    rep: Repertoire,
    real_env,
    config: AdaptConfig,
    *,
    reward_hyper: Optional[GPHyper] = None,
    safety_hyper: Optional[GPHyper] = None,
    safety_model_factory=None,
    method: str = "sapt",
) -> AdaptationLog:
    """Run the full transfer loop on the deployed system.

    `safety_model_factory(prior_mean, hyper)` may replace the live safety GP
    (the no-GP-safety ablation pins it to the repertoire prior); everything
    else is shared across methods.
    """
    if len(rep) == 0:
        raise EmptyRepertoireError("adaptation needs a non-empty repertoire")
    reward_hyper = reward_hyper or preset_hyper(real_env.env_id, "reward")
    safety_hyper = safety_hyper or preset_hyper(real_env.env_id, "safety")

    rep.assign_rewards(config.goal, real_env.reward)
    x_cells = rep.normalized_descriptors()
    prior_c = NearestNeighborPrior(x_cells, rep.safety_priors())
    prior_r = NearestNeighborPrior(x_cells, rep.reward_priors())

    reward_model = LiveGP(prior_r, reward_hyper)
    if safety_model_factory is None:
        safety_model = LiveGP(prior_c, safety_hyper)
    else:
        safety_model = safety_model_factory(prior_c, safety_hyper)
    return _episodic_transfer(rep, real_env, config, reward_model, safety_model, method)
