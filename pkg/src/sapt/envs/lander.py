"""Asteroid-lander simulator: PID velocity control under uncertain gravity.

State is (altitude, vertical velocity); the 8-parameter policy is three PID
gains plus five velocity set-points, each active for a fifth of the episode.
Integration is semi-implicit Euler (velocity first), so zero thrust gives
dv = -g*dt exactly per step and free fall loses altitude from step one.

Thrust is upward-only and capped below the maximum gravity, so braking and
hovering authority genuinely depend on the unknown gravity: descent profiles
tuned under benign conditions undershoot or crash under heavy ones. That
margin structure is what makes trusting simulated safety scores risky here.
"""

from __future__ import annotations

import math

import numpy as np

from ..errors import ConfigError
from ..repertoire import GridSpec
from ..trajectory import Trajectory

POLICY_DIM = 8
N_SETPOINTS = 5


class AsteroidLander:
    env_id = "asteroid"
    policy_dim = POLICY_DIM
    descriptor_dim = 1

    def __init__(
        self,
        dt: float = 0.05,
        duration: float = 15.0,
        initial_altitude: float = 300.0,
        thrust_limit: float = 8.0,
        reward_scale: float = 100.0,
        descriptor_range: tuple[float, float] = (0.0, 400.0),
        gravity_bounds: tuple[float, float] = (3.0, 10.0),
        setpoint_bound: float = 20.0,
        grid_bins: int = 40,
    ):
        self.dt = float(dt)
        self.n_steps = int(round(duration / dt))
        self.steps_per_setpoint = math.ceil(self.n_steps / N_SETPOINTS)
        self.initial_altitude = float(initial_altitude)
        self.thrust_limit = float(thrust_limit)
        self.reward_scale = float(reward_scale)
        self.descriptor_range = (float(descriptor_range[0]), float(descriptor_range[1]))
        self.grid_bins = int(grid_bins)
        # kp, ki, kd, then five velocity set-points. The integral range allows
        # dips below 1 m while hovering (net altitude loss of a PI hover is
        # gravity/ki); authority is still bounded by the thrust cap.
        self.policy_bounds = np.array(
            [[0.0, 10.0], [0.0, 10.0], [0.0, 1.0]]
            + [[-setpoint_bound, setpoint_bound]] * N_SETPOINTS
        )
        self.dynamics_bounds = np.array([[gravity_bounds[0], gravity_bounds[1]]])

    def default_grid(self) -> GridSpec:
        lo, hi = self.descriptor_range
        return GridSpec((self.grid_bins,), (lo,), (hi,))

    def rollout(self, policy, psi, noise_scale: float = 0.0, rng=None) -> Trajectory:
        """Simulate one episode under gravity psi; ends early on ground contact."""
        policy = np.asarray(policy, dtype=float)
        g = float(np.atleast_1d(psi)[0])
        kp, ki, kd = policy[0], policy[1], policy[2]
        setpoints = policy[3:]
        dt = self.dt
        limit = self.thrust_limit
        noise = None
        if noise_scale > 0.0:
            if rng is None:
                raise ConfigError("noise_scale > 0 requires an rng")
            noise = rng.normal(0.0, noise_scale, size=(self.n_steps, 2))

        alt = self.initial_altitude
        v = 0.0
        integ = 0.0
        e_prev = None
        states = [(alt, v)]
        actions = []
        truncated = False
        for t in range(self.n_steps):
            sp = setpoints[min(t // self.steps_per_setpoint, N_SETPOINTS - 1)]
            e = sp - v
            if e_prev is None:
                e_prev = e
            integ += e * dt
            u = kp * e + ki * integ + kd * (e - e_prev) / dt
            e_prev = e
            if u > limit:
                u = limit
            elif u < 0.0:
                u = 0.0
            v += (u - g) * dt
            alt += v * dt
            if noise is not None:
                alt += noise[t, 0]
                v += noise[t, 1]
            states.append((alt, v))
            actions.append((u,))
            if alt <= 0.0:
                truncated = True
                break
        return Trajectory(np.array(states), np.array(actions), dt, truncated)

    def rollout_many(self, policy, psis) -> list[Trajectory]:
        """Noise-free rollouts, one per dynamics condition."""
        return [self.rollout(policy, psi) for psi in np.atleast_2d(psis)]

    def reward(self, traj: Trajectory, goal) -> float:
        goal_alt = float(np.ravel(goal)[0])
        final_alt = float(traj.states[-1, 0])
        return 1.0 / (1.0 + abs(final_alt - goal_alt) / self.reward_scale)

    def safety(self, traj: Trajectory) -> float:
        """Minimum altitude reached anywhere in the episode."""
        return float(traj.states[:, 0].min())

    def descriptor(self, traj: Trajectory) -> np.ndarray:
        return np.array([traj.states[-1, 0]])
