"""Gaussian-process regression with an explicit prior mean function.

The transfer phase models how simulated safety and reward scores shift on the
deployed system: the GP prior mean is a nearest-cell lookup over the archive,
so with zero observations the model reproduces the simulated scores exactly,
and observations only bend the posterior through the residuals y - M(x).
Inputs are normalized goal-space coordinates in [0, 1]^d; kernels are squared
exponential. Hyperparameters are fixed per environment (no marginal-likelihood
fitting); models are immutable once fitted and safe to share for prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.spatial.distance import cdist

from .errors import ConfigError, NumericalError

_JITTERS = (0.0, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_VAR_FLOOR = 1e-12


@dataclass
class GPHyper:
    lengthscale: tuple[float, ...]
    signal_var: float
    noise_var: float

    def __post_init__(self):
        self.lengthscale = tuple(float(l) for l in np.atleast_1d(self.lengthscale))
        self.signal_var = float(self.signal_var)
        self.noise_var = float(self.noise_var)
        if any(l <= 0 for l in self.lengthscale):
            raise ConfigError(f"lengthscales must be > 0, got {self.lengthscale}")
        if self.signal_var <= 0:
            raise ConfigError(f"signal_var must be > 0, got {self.signal_var}")
        if self.noise_var <= 0:
            raise ConfigError(f"noise_var must be > 0, got {self.noise_var}")


def se_kernel(x, x2, hyper: GPHyper) -> float:
    """Squared-exponential covariance between two points."""
    x = np.asarray(x, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x.shape != x2.shape:
        raise ConfigError(f"kernel inputs disagree: {x.shape} vs {x2.shape}")
    ell = np.asarray(hyper.lengthscale)
    return float(hyper.signal_var * np.exp(-0.5 * np.sum(((x - x2) / ell) ** 2)))


def kernel_matrix(xa: np.ndarray, xb: np.ndarray, hyper: GPHyper) -> np.ndarray:
    ell = np.asarray(hyper.lengthscale)
    d2 = cdist(np.atleast_2d(xa) / ell, np.atleast_2d(xb) / ell, metric="sqeuclidean")
    return hyper.signal_var * np.exp(-0.5 * d2)


class NearestNeighborPrior:
    """Piecewise-constant function returning the value of the nearest anchor."""

    def __init__(self, points: np.ndarray, values: np.ndarray):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.values = np.asarray(values, dtype=float).ravel()
        if len(self.points) != len(self.values):
            raise ConfigError("prior anchors and values must have equal length")
        if len(self.points) == 0:
            raise ConfigError("prior needs at least one anchor point")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = np.argmin(cdist(x, self.points, metric="sqeuclidean"), axis=1)
        return self.values[idx]


def zero_prior(x: np.ndarray) -> np.ndarray:
    return np.zeros(len(np.atleast_2d(x)))


class GPModel:
    """Posterior over a scalar function of normalized goal-space coordinates.

    Built by `gp_fit`; prediction is thread-safe, refitting means building a
    new model (always from scratch, which trivially matches incremental
    updates).
    """

    def __init__(self, prior_mean, x_obs, y_obs, hyper, chol, alpha):
        self.prior_mean = prior_mean
        self.x_obs = x_obs
        self.y_obs = y_obs
        self.hyper = hyper
        self._chol = chol
        self._alpha = alpha

    @property
    def n_obs(self) -> int:
        return len(self.y_obs)

    def predict_batch(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Posterior mean and variance at each row of x."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mean = np.asarray(self.prior_mean(x), dtype=float)
        if self.n_obs == 0:
            return mean, np.full(len(x), self.hyper.signal_var)
        k_star = kernel_matrix(self.x_obs, x, self.hyper)  # (t, m)
        mu = mean + k_star.T @ self._alpha
        v = solve_triangular(self._chol, k_star, lower=True)
        var = self.hyper.signal_var - np.einsum("ij,ij->j", v, v)
        return mu, np.maximum(var, _VAR_FLOOR)

    def predict(self, x) -> tuple[float, float]:
        mu, var = self.predict_batch(np.atleast_2d(np.asarray(x, dtype=float)))
        return float(mu[0]), float(var[0])

    def with_observation(self, x, y) -> "GPModel":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x_new = np.vstack([self.x_obs, x]) if self.n_obs else x
        y_new = np.append(self.y_obs, float(y))
        return gp_fit(self.prior_mean, x_new, y_new, self.hyper)


def gp_fit(
    prior_mean: Callable[[np.ndarray], np.ndarray],
    x_obs,
    y_obs,
    hyper: GPHyper,
) -> GPModel:
    """Condition the prior on observations (possibly none).

    Targets are residuals against the prior mean; coincident inputs are fine
    because the noise term regularizes the kernel matrix.
    """
    x_obs = np.atleast_2d(np.asarray(x_obs, dtype=float)) if np.size(x_obs) else np.empty((0, 1))
    y_obs = np.asarray(y_obs, dtype=float).ravel()
    if len(x_obs) != len(y_obs):
        raise ConfigError(f"got {len(x_obs)} inputs but {len(y_obs)} targets")
    if not np.isfinite(y_obs).all():
        raise ConfigError("observation targets must be finite")
    if len(y_obs) == 0:
        return GPModel(prior_mean, np.empty((0, 1)), y_obs, hyper, None, None)

    k = kernel_matrix(x_obs, x_obs, hyper)
    k[np.diag_indices_from(k)] += hyper.noise_var
    chol = None
    for jitter in _JITTERS:
        try:
            chol = cholesky(k + jitter * np.eye(len(k)), lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    if chol is None:
        raise NumericalError(
            f"kernel matrix not positive definite after jitter up to {_JITTERS[-1]:g} "
            f"(n={len(k)}, noise_var={hyper.noise_var:g})"
        )
    residuals = y_obs - np.asarray(prior_mean(x_obs), dtype=float)
    alpha = cho_solve((chol, True), residuals)
    return GPModel(prior_mean, x_obs, y_obs, hyper, chol, alpha)


def gp_predict(model: GPModel, x) -> tuple[float, float]:
    return model.predict(x)


# Per-environment kernel presets selected by grid search on sim-to-sim
# transfer (lengthscale x signal variance x noise variance, scored by
# violations then final reward).
GP_PRESETS: dict[tuple[str, str], GPHyper] = {
    ("asteroid", "safety"): GPHyper((0.1,), 8600.0, 1e-2),
    ("asteroid", "reward"): GPHyper((0.1,), 0.003, 1e-2),
    ("arm", "safety"): GPHyper((0.05, 0.05), 0.86, 1e-4),
    ("arm", "reward"): GPHyper((0.05, 0.05), 5e-5, 1e-4),
}


def preset_hyper(env_id: str, target: str) -> GPHyper:
    try:
        return GP_PRESETS[(env_id, target)]
    except KeyError:
        raise ConfigError(f"no GP preset for env {env_id!r} target {target!r}") from None
