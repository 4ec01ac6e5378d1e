"""Time-indexed state/action records produced by environment rollouts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Trajectory:
    """One episode: states has one more row than actions.

    `truncated` marks episodes that ended before the full horizon (ground
    contact, divergence); entries up to the truncation point are finite.
    """

    states: np.ndarray   # (n_steps + 1, state_dim)
    actions: np.ndarray  # (n_steps, action_dim)
    dt: float
    truncated: bool = False

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.actions = np.asarray(self.actions, dtype=float)
        if self.actions.size == 0:
            self.actions = self.actions.reshape(0, 0)
        if len(self.states) != len(self.actions) + 1:
            raise ValueError(
                f"inconsistent lengths: {len(self.states)} states vs "
                f"{len(self.actions)} actions"
            )

    @property
    def n_steps(self) -> int:
        return len(self.actions)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.states).all() and np.isfinite(self.actions).all())
