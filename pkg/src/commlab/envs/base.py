from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# up, down, left, right, stay as (row, col) deltas
MOVES = np.array([[-1, 0], [1, 0], [0, -1], [0, 1], [0, 0]], dtype=np.int64)
MOVE_NAMES = ("up", "down", "left", "right", "stay")


@dataclass
class StepResult:
    obs: np.ndarray            # [N, obs_dim]
    rewards: np.ndarray        # [N] per-agent reward (0 for dead slots)
    team_reward: float
    done: bool
    info: dict = field(default_factory=dict)


class MultiAgentEnv:
    """Fixed number of agent slots, local observations, discrete actions.

    Subclasses set ``name``, ``n_agents``, ``n_actions``, ``obs_dim``,
    ``grid_size`` and ``max_steps`` and implement ``_reset``/``_step``/
    ``observe``. Everything random flows from the generator seeded in
    :meth:`reset`, so (seed, actions) determines the trajectory.
    """

    name = "env"
    n_agents: int
    n_actions: int
    obs_dim: int
    grid_size: int
    max_steps: int
    action_names: tuple[str, ...] = MOVE_NAMES

    def __init__(self):
        self.rng = np.random.default_rng(0)
        self.t = 0
        self.done = False
        self.alive = np.ones(0, dtype=bool)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.t = 0
        self.done = False
        self._reset()
        return self.observe()

    def step(self, actions) -> StepResult:
        if self.done:
            raise RuntimeError("step() called on a finished episode; call reset()")
        actions = np.asarray(actions, dtype=np.int64)
        if actions.shape != (self.n_agents,):
            raise ValueError(f"expected {self.n_agents} actions, got shape {actions.shape}")
        if np.any((actions < 0) | (actions >= self.n_actions)):
            raise ValueError(f"actions must lie in [0, {self.n_actions})")
        self.t += 1
        result = self._step(actions)
        self.done = result.done
        return result

    # -- subclass hooks -----------------------------------------------------------
    def _reset(self) -> None:
        raise NotImplementedError

    def _step(self, actions: np.ndarray) -> StepResult:
        raise NotImplementedError

    def observe(self) -> np.ndarray:
        raise NotImplementedError

    def positions(self) -> np.ndarray:
        """[N, 2] (row, col) per slot, -1 for inactive slots."""
        raise NotImplementedError

    def success(self) -> bool:
        raise NotImplementedError

    def config(self) -> dict:
        raise NotImplementedError

    def state_dict(self) -> dict:
        """JSON-friendly snapshot for traces."""
        return {"t": self.t, "positions": self.positions().tolist(), "alive": self.alive.tolist()}


def padded(grid: np.ndarray, radius: int, fill) -> np.ndarray:
    """Pad the first two axes of ``grid`` by ``radius`` with ``fill``."""
    pad = [(radius, radius), (radius, radius)] + [(0, 0)] * (grid.ndim - 2)
    return np.pad(grid, pad, mode="constant", constant_values=fill)
