"""Discretized goal-space archive keeping one maximally-safe policy per cell.

The archive is the search domain for the online transfer phase: each occupied
cell carries a policy, the trajectory it produced under its worst training
condition, its goal-space descriptor, and a safety prior (plus a reward prior
once a goal is known). Descriptors are stored in task units; `GridSpec`
normalizes them to the unit cube for anything kernel-based.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigError,
    CorruptRepertoireError,
    EmptyRepertoireError,
    InvalidDescriptorError,
    RepertoireFormatError,
    RepertoireVersionError,
)
from .trajectory import Trajectory

FORMAT_VERSION = 1


class InsertOutcome(enum.Enum):
    INSERTED = "inserted"
    REPLACED = "replaced"
    DISCARDED = "discarded"


@dataclass
class GridSpec:
    """Regular grid over the goal space; cells are indexed row-major."""

    bins_per_dim: tuple[int, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        self.bins_per_dim = tuple(int(b) for b in self.bins_per_dim)
        self.lower = tuple(float(x) for x in self.lower)
        self.upper = tuple(float(x) for x in self.upper)
        if not (len(self.bins_per_dim) == len(self.lower) == len(self.upper)):
            raise ConfigError("grid: bins_per_dim, lower, upper must have equal length")
        if len(self.bins_per_dim) < 1:
            raise ConfigError("grid: needs at least one dimension")
        if any(b < 1 for b in self.bins_per_dim):
            raise ConfigError(f"grid: every bin count must be >= 1, got {self.bins_per_dim}")
        for lo, hi in zip(self.lower, self.upper):
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ConfigError(f"grid: require finite lower < upper, got [{lo}, {hi}]")

    @property
    def ndim(self) -> int:
        return len(self.bins_per_dim)

    @property
    def n_cells(self) -> int:
        n = 1
        for b in self.bins_per_dim:
            n *= b
        return n

    def normalize(self, descriptor) -> np.ndarray:
        """Map task-unit coordinates into [0, 1]^d (clipped at the boundary)."""
        d = np.asarray(descriptor, dtype=float)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.clip((d - lo) / (hi - lo), 0.0, 1.0)


def discretize(descriptor, grid: GridSpec) -> int:
    """Row-major cell index of a descriptor; out-of-range coordinates clamp
    to the boundary bin and the upper boundary maps into the last bin."""
    d = np.asarray(descriptor, dtype=float).ravel()
    if d.size != grid.ndim:
        raise InvalidDescriptorError(
            f"descriptor has {d.size} coordinates, grid expects {grid.ndim}"
        )
    if not np.isfinite(d).all():
        raise InvalidDescriptorError(f"descriptor has non-finite coordinates: {d}")
    bins = np.asarray(grid.bins_per_dim)
    frac = (d - np.asarray(grid.lower)) / (np.asarray(grid.upper) - np.asarray(grid.lower))
    idx = np.floor(frac * bins).astype(int)
    idx = np.clip(idx, 0, bins - 1)
    cell = 0
    for i, b in zip(idx, bins):
        cell = cell * int(b) + int(i)
    return cell


@dataclass
class RepertoireEntry:
    """One elite: policy, its trajectory, descriptor, and simulated scores."""

    policy: np.ndarray
    trajectory: Trajectory
    descriptor: np.ndarray
    safety_prior: float
    reward_prior: Optional[float] = None

    def __post_init__(self):
        self.policy = np.asarray(self.policy, dtype=float)
        self.descriptor = np.asarray(self.descriptor, dtype=float).ravel()
        self.safety_prior = float(self.safety_prior)
        if not np.isfinite(self.safety_prior):
            raise InvalidDescriptorError(f"safety prior must be finite, got {self.safety_prior}")


class Repertoire:
    """Map from grid cell to its current elite. Single writer; insertions
    must be serialized, reads are safe once evolution is done."""

    def __init__(self, grid: GridSpec, env_id: str = "", dynamics_conditions=()):
        self.grid = grid
        self.env_id = env_id
        self.dynamics_conditions = [
            [float(v) for v in np.atleast_1d(c)] for c in dynamics_conditions
        ]
        self.cells: dict[int, RepertoireEntry] = {}

    def __len__(self) -> int:
        return len(self.cells)

    def occupied_cells(self) -> list[int]:
        return sorted(self.cells)

    def entries(self) -> list[RepertoireEntry]:
        """Entries in ascending cell order."""
        return [self.cells[c] for c in self.occupied_cells()]

    def descriptors(self) -> np.ndarray:
        """(n, d) descriptors in ascending cell order (task units)."""
        if not self.cells:
            return np.empty((0, self.grid.ndim))
        return np.array([e.descriptor for e in self.entries()])

    def normalized_descriptors(self) -> np.ndarray:
        return self.grid.normalize(self.descriptors())

    def safety_priors(self) -> np.ndarray:
        return np.array([e.safety_prior for e in self.entries()])

    def reward_priors(self) -> np.ndarray:
        vals = [e.reward_prior for e in self.entries()]
        if any(v is None for v in vals):
            raise CorruptRepertoireError("reward priors not assigned; call assign_rewards first")
        return np.array(vals, dtype=float)

    def try_insert(self, entry: RepertoireEntry) -> InsertOutcome:
        """Competitive insertion: empty cell wins, otherwise strictly higher
        safety replaces the occupant (ties keep the incumbent)."""
        cell = discretize(entry.descriptor, self.grid)
        occupant = self.cells.get(cell)
        if occupant is None:
            self.cells[cell] = entry
            return InsertOutcome.INSERTED
        if entry.safety_prior > occupant.safety_prior:
            self.cells[cell] = entry
            return InsertOutcome.REPLACED
        return InsertOutcome.DISCARDED

    def random_elite(self, rng: np.random.Generator) -> RepertoireEntry:
        """Uniform draw over occupied cells."""
        if not self.cells:
            raise EmptyRepertoireError("cannot sample from an empty repertoire")
        keys = self.occupied_cells()
        return self.cells[keys[int(rng.integers(len(keys)))]]

    def assign_rewards(self, goal, reward_fn: Callable) -> "Repertoire":
        """Annotate every entry with reward_fn(trajectory, goal).

        Safety priors are untouched; calling again with the same goal is a
        no-op in effect (idempotent).
        """
        for entry in self.cells.values():
            if entry.trajectory is None:
                raise CorruptRepertoireError("entry without stored trajectory")
            entry.reward_prior = float(reward_fn(entry.trajectory, goal))
        return self

    # -- persistence ---------------------------------------------------

    def save(self, path) -> None:
        """Write JSON-lines: a header line then one entry per line, in
        ascending cell order. Floats round-trip exactly."""
        header = {
            "format_version": FORMAT_VERSION,
            "env_id": self.env_id,
            "grid": {
                "bins": list(self.grid.bins_per_dim),
                "lower": list(self.grid.lower),
                "upper": list(self.grid.upper),
            },
            "dynamics_conditions": self.dynamics_conditions,
            "n_entries": len(self.cells),
        }
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header) + "\n")
            for cell in self.occupied_cells():
                e = self.cells[cell]
                rec = {
                    "cell": cell,
                    "descriptor": e.descriptor.tolist(),
                    "policy": e.policy.tolist(),
                    "safety": e.safety_prior,
                    "trajectory": e.trajectory.states.tolist(),
                    "actions": e.trajectory.actions.tolist(),
                    "dt": e.trajectory.dt,
                    "truncated": e.trajectory.truncated,
                }
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def load(cls, path) -> "Repertoire":
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
        if not lines:
            raise RepertoireFormatError("line 1: file is empty")
        try:
            header = json.loads(lines[0])
        except json.JSONDecodeError as exc:
            raise RepertoireFormatError(f"line 1: {exc}") from exc
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise RepertoireVersionError(
                f"unsupported format_version {version!r}, expected {FORMAT_VERSION}"
            )
        try:
            grid = GridSpec(
                tuple(header["grid"]["bins"]),
                tuple(header["grid"]["lower"]),
                tuple(header["grid"]["upper"]),
            )
        except (KeyError, TypeError, ConfigError) as exc:
            raise RepertoireFormatError(f"line 1: bad grid header ({exc})") from exc
        rep = cls(grid, header.get("env_id", ""), header.get("dynamics_conditions", ()))
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                raise RepertoireFormatError(f"line {lineno}: blank line")
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RepertoireFormatError(f"line {lineno}: {exc}") from exc
            try:
                entry = RepertoireEntry(
                    policy=np.array(rec["policy"], dtype=float),
                    trajectory=Trajectory(
                        states=np.array(rec["trajectory"], dtype=float),
                        actions=np.array(rec.get("actions", []), dtype=float),
                        dt=float(rec["dt"]),
                        truncated=bool(rec.get("truncated", False)),
                    ),
                    descriptor=np.array(rec["descriptor"], dtype=float),
                    safety_prior=float(rec["safety"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise RepertoireFormatError(f"line {lineno}: bad entry ({exc})") from exc
            cell = int(rec["cell"])
            if discretize(entry.descriptor, grid) != cell:
                raise RepertoireFormatError(
                    f"line {lineno}: cell {cell} does not match descriptor"
                )
            rep.cells[cell] = entry
        expected = header.get("n_entries")
        if expected is not None and expected != len(rep.cells):
            raise RepertoireFormatError(
                f"line {len(lines)}: expected {expected} entries, found {len(rep.cells)}"
            )
        return rep


def save(rep: Repertoire, path) -> None:
    rep.save(path)


def load(path) -> Repertoire:
    return Repertoire.load(path)
