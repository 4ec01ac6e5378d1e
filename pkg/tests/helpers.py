"""Independent oracles and small fixtures shared across tests.

Every oracle here is implemented from first principles with a different
code path than the package (explicit loops, np.linalg.solve, complex phase
accumulation, Monte Carlo) so agreement is evidence, not tautology.
"""

import math

import numpy as np

from sapt.repertoire import GridSpec, Repertoire, RepertoireEntry
from sapt.trajectory import Trajectory


def dense_gp_oracle(prior_fn, x_obs, y_obs, hyper, x_query):
    """Posterior mean/variance via explicit kernel loops and a dense solve."""
    x_obs = np.atleast_2d(x_obs)
    x_query = np.atleast_2d(x_query)
    n = len(x_obs)
    ell = np.asarray(hyper.lengthscale, dtype=float)

    def k(a, b):
        return hyper.signal_var * math.exp(-0.5 * float(np.sum(((a - b) / ell) ** 2)))

    gram = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            gram[i, j] = k(x_obs[i], x_obs[j])
    gram += hyper.noise_var * np.eye(n)
    resid = np.asarray(y_obs, dtype=float) - np.asarray(prior_fn(x_obs), dtype=float)

    mus, variances = [], []
    for q in x_query:
        kv = np.array([k(q, x_obs[i]) for i in range(n)])
        mus.append(float(prior_fn(q[None, :])[0]) + kv @ np.linalg.solve(gram, resid))
        variances.append(k(q, q) - kv @ np.linalg.solve(gram, kv))
    return np.array(mus), np.array(variances)


def fk_phase_oracle(angles, links):
    """Forward kinematics by complex phase accumulation, point by point."""
    z = 0.0 + 0.0j
    phase = 0.0
    pts = [(0.0, 0.0)]
    for a, length in zip(angles, links):
        phase += a
        z += length * complex(math.cos(phase), math.sin(phase))
        pts.append((z.real, z.imag))
    return np.array(pts)


def mc_expected_improvement(mu, sigma, r_best, xi=0.0, n=2_000_000, seed=0):
    samples = np.random.default_rng(seed).normal(mu, sigma, size=n)
    return float(np.maximum(samples - r_best - xi, 0.0).mean())


def flat_trajectory(value: float, n_steps: int = 3, state_dim: int = 1) -> Trajectory:
    states = np.full((n_steps + 1, state_dim), float(value))
    actions = np.zeros((n_steps, 1))
    return Trajectory(states, actions, dt=0.1)


def make_entry(descriptor, safety, policy=None, trajectory=None) -> RepertoireEntry:
    descriptor = np.atleast_1d(np.asarray(descriptor, dtype=float))
    if trajectory is None:
        trajectory = flat_trajectory(descriptor[0], state_dim=len(descriptor))
    return RepertoireEntry(
        policy=policy if policy is not None else np.zeros(2),
        trajectory=trajectory,
        descriptor=descriptor,
        safety_prior=safety,
    )


def make_repertoire(entries, bins=(10,), lower=(0.0,), upper=(1.0,)) -> Repertoire:
    rep = Repertoire(GridSpec(bins, lower, upper), env_id="test")
    for e in entries:
        rep.try_insert(e)
    return rep


class StubModel:
    """predict_batch stand-in with scripted means/variances per cell."""

    def __init__(self, mu, var):
        self.mu = np.asarray(mu, dtype=float)
        self.var = np.asarray(var, dtype=float)

    def predict_batch(self, x):
        return self.mu.copy(), self.var.copy()


class ScriptedRealEnv:
    """Deployment stub: maps executed policies to fixed observations via a
    value channel encoded in the trajectory states."""

    env_id = "test"

    def __init__(self, safety_of_policy, reward_of_policy):
        self.safety_of_policy = safety_of_policy
        self.reward_of_policy = reward_of_policy
        self.executed = []

    def execute(self, policy):
        self.executed.append(np.asarray(policy, dtype=float))
        key = float(np.asarray(policy).ravel()[0])
        states = np.array([[key, 0.0], [key, 1.0]])
        return Trajectory(states, np.zeros((1, 1)), dt=0.1)

    def reward(self, traj, goal):
        return self.reward_of_policy[float(traj.states[0, 0])]

    def safety(self, traj):
        return self.safety_of_policy[float(traj.states[0, 0])]

    def descriptor(self, traj):
        return np.array([traj.states[0, 0]])
