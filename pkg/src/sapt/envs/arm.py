"""Planar 4-DoF kinematic arm with uncertain link lengths and unsafe discs.

The policy is a 4-10-10-4 tanh network (204 weights) mapping joint angles to
joint-velocity commands, integrated with Euler steps. Trajectory states are
(q1..q4, effector_x, effector_y): the effector position is appended so reward,
safety, and descriptor are pure functions of the trajectory alone even though
it depends on the link lengths of the rollout.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from ..repertoire import GridSpec
from ..trajectory import Trajectory

N_JOINTS = 4
HIDDEN = 10
# (4*10 + 10) + (10*10 + 10) + (10*4 + 4)
N_PARAMS = (N_JOINTS * HIDDEN + HIDDEN) + (HIDDEN * HIDDEN + HIDDEN) + (HIDDEN * N_JOINTS + N_JOINTS)

DEFAULT_DISCS = (
    (10.0, 10.0, 1.5),
    (-12.0, 6.0, 1.5),
    (-6.0, -12.0, 1.5),
    (13.0, -5.0, 1.5),
)


def unpack_weights(theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (N_PARAMS,):
        raise ConfigError(f"arm policy must have {N_PARAMS} parameters, got {theta.shape}")
    i = 0
    w1 = theta[i : i + 40].reshape(N_JOINTS, HIDDEN); i += 40
    b1 = theta[i : i + 10]; i += 10
    w2 = theta[i : i + 100].reshape(HIDDEN, HIDDEN); i += 100
    b2 = theta[i : i + 10]; i += 10
    w3 = theta[i : i + 40].reshape(HIDDEN, N_JOINTS); i += 40
    b3 = theta[i : i + 4]
    return w1, b1, w2, b2, w3, b3


def arm_fk(angles, links) -> np.ndarray:
    """Positions of the base, the three intermediate joints, and the effector
    for a planar chain: shape (5, 2)."""
    angles = np.asarray(angles, dtype=float)
    links = np.asarray(links, dtype=float)
    phase = np.cumsum(angles)
    seg = links[:, None] * np.stack([np.cos(phase), np.sin(phase)], axis=1)
    pts = np.vstack([np.zeros((1, 2)), np.cumsum(seg, axis=0)])
    return pts


class PlanarArm:
    env_id = "arm"
    policy_dim = N_PARAMS
    descriptor_dim = 2

    def __init__(
        self,
        dt: float = 0.1,
        n_steps: int = 50,
        joint_speed_limit: float = np.pi / 2,
        link_bounds: tuple[float, float] = (4.0, 7.0),
        unsafe_discs=DEFAULT_DISCS,
        weight_bound: float = 3.0,
        grid_bins: tuple[int, int] = (20, 20),
    ):
        self.dt = float(dt)
        self.n_steps = int(n_steps)
        self.joint_speed_limit = float(joint_speed_limit)
        self.max_reach = N_JOINTS * float(link_bounds[1])
        self.discs = np.array([d[:2] for d in unsafe_discs])
        self.disc_radii = np.array([d[2] for d in unsafe_discs])
        self.grid_bins = tuple(int(b) for b in grid_bins)
        self.policy_bounds = np.tile([-weight_bound, weight_bound], (N_PARAMS, 1)).astype(float)
        self.dynamics_bounds = np.tile(
            [float(link_bounds[0]), float(link_bounds[1])], (N_JOINTS, 1)
        ).astype(float)

    def default_grid(self) -> GridSpec:
        return GridSpec(self.grid_bins, (0.0, 0.0), (1.0, 1.0))

    def _effector(self, q: np.ndarray, links: np.ndarray) -> np.ndarray:
        # q, links: (C, 4) -> effector positions (C, 2)
        phase = np.cumsum(q, axis=1)
        ex = (links * np.cos(phase)).sum(axis=1)
        ey = (links * np.sin(phase)).sum(axis=1)
        return np.stack([ex, ey], axis=1)

    def _simulate(self, policy, links: np.ndarray, noise: np.ndarray | None):
        """Vectorized over conditions: links (C, 4), optional noise
        (n_steps, C, 4) added to the joint angles after each step."""
        w1, b1, w2, b2, w3, b3 = unpack_weights(policy)
        c = links.shape[0]
        q = np.zeros((c, N_JOINTS))
        states = np.empty((self.n_steps + 1, c, N_JOINTS + 2))
        actions = np.empty((self.n_steps, c, N_JOINTS))
        states[0] = np.concatenate([q, self._effector(q, links)], axis=1)
        for t in range(self.n_steps):
            h1 = np.tanh(q @ w1 + b1)
            h2 = np.tanh(h1 @ w2 + b2)
            dq = self.joint_speed_limit * np.tanh(h2 @ w3 + b3)
            q = q + dq * self.dt
            if noise is not None:
                q = q + noise[t]
            actions[t] = dq
            states[t + 1] = np.concatenate([q, self._effector(q, links)], axis=1)
        return states, actions

    def rollout(self, policy, psi, noise_scale: float = 0.0, rng=None) -> Trajectory:
        links = np.asarray(psi, dtype=float).reshape(1, N_JOINTS)
        noise = None
        if noise_scale > 0.0:
            if rng is None:
                raise ConfigError("noise_scale > 0 requires an rng")
            noise = rng.normal(0.0, noise_scale, size=(self.n_steps, 1, N_JOINTS))
        states, actions = self._simulate(policy, links, noise)
        return Trajectory(states[:, 0, :], actions[:, 0, :], self.dt)

    def rollout_many(self, policy, psis) -> list[Trajectory]:
        # one condition at a time: batched matmuls take different BLAS paths
        # per shape, and simulated-vs-deployed rollouts must match bit-exactly
        # when the conditions coincide
        return [self.rollout(policy, psi) for psi in np.atleast_2d(np.asarray(psis, dtype=float))]

    def _goal_to_units(self, goal) -> np.ndarray:
        g = np.asarray(goal, dtype=float).ravel()
        return g * (2.0 * self.max_reach) - self.max_reach

    def reward(self, traj: Trajectory, goal) -> float:
        """Mean per-step proximity reward over the episode; 1.0 iff the
        effector sits on the goal every step."""
        goal_units = self._goal_to_units(goal)
        eff = traj.states[1:, N_JOINTS : N_JOINTS + 2]
        d = np.linalg.norm(eff - goal_units, axis=1)
        return float(np.mean(1.0 / (1.0 + d / self.max_reach)))

    def safety(self, traj: Trajectory) -> float:
        """Closest approach of the effector to any disc boundary; negative
        inside a disc."""
        eff = traj.states[:, N_JOINTS : N_JOINTS + 2]
        dists = np.linalg.norm(eff[:, None, :] - self.discs[None, :, :], axis=2)
        return float((dists - self.disc_radii).min())

    def descriptor(self, traj: Trajectory) -> np.ndarray:
        eff = traj.states[-1, N_JOINTS : N_JOINTS + 2]
        return (eff + self.max_reach) / (2.0 * self.max_reach)
