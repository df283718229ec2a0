"""Predators with limited vision search for a stationary prey."""

from __future__ import annotations

import numpy as np

from .base import MOVES, MultiAgentEnv, StepResult, padded

EXPLORE_REWARD = -0.05
PREY_REWARD = 0.05
CELL_FEATURES = 3  # out of bounds, prey, other predator


class PredatorPreyEnv(MultiAgentEnv):
    """Predators that reach the prey stay on it and collect the prey reward.

    The episode ends when every predator has reached the prey or at
    ``max_steps``. The prey never moves and does not communicate.
    """

    name = "prey"
    n_actions = 5

    def __init__(self, grid_size: int = 5, n_agents: int = 3, vision: int = 0, max_steps: int = 20):
        super().__init__()
        self.grid_size, self.n_agents, self.vision, self.max_steps = grid_size, n_agents, vision, max_steps
        side = 2 * vision + 1
        self.obs_dim = side * side * CELL_FEATURES + 2 + 1
        self.alive = np.ones(n_agents, dtype=bool)

    def config(self) -> dict:
        return {"name": "prey", "grid_size": self.grid_size, "n_agents": self.n_agents,
                "vision": self.vision, "max_steps": self.max_steps}

    def _reset(self) -> None:
        g = self.grid_size
        cells = self.rng.choice(g * g, size=self.n_agents + 1, replace=False)
        self.prey = np.array(divmod(int(cells[0]), g), dtype=np.int64)
        self.pos = np.array([divmod(int(c), g) for c in cells[1:]], dtype=np.int64)
        self.reached = np.zeros(self.n_agents, dtype=bool)
        self.finish_step = None

    def _step(self, actions: np.ndarray) -> StepResult:
        moving = ~self.reached
        new = np.clip(self.pos + MOVES[actions], 0, self.grid_size - 1)
        self.pos[moving] = new[moving]
        self.reached |= (self.pos == self.prey).all(axis=1)
        rewards = np.where(self.reached, PREY_REWARD, EXPLORE_REWARD)
        all_in = bool(self.reached.all())
        if all_in and self.finish_step is None:
            self.finish_step = self.t
        done = all_in or self.t >= self.max_steps
        return StepResult(self.observe(), rewards, float(rewards.sum()), done,
                          {"reached": self.reached.copy(), "success": all_in})

    def observe(self) -> np.ndarray:
        v, g = self.vision, self.grid_size
        side = 2 * v + 1
        grid = np.zeros((g, g, CELL_FEATURES))
        grid[self.prey[0], self.prey[1], 1] = 1
        counts = np.zeros((g, g))
        np.add.at(counts, (self.pos[:, 0], self.pos[:, 1]), 1)
        grid_p = padded(grid, v, 0.0)
        if v:
            grid_p[:v, :, 0] = grid_p[-v:, :, 0] = 1
            grid_p[:, :v, 0] = grid_p[:, -v:, 0] = 1
        counts_p = padded(counts, v, 0.0)
        obs = np.zeros((self.n_agents, self.obs_dim))
        norm = max(g - 1, 1)
        n_cells = side * side * CELL_FEATURES
        for i, (r, c) in enumerate(self.pos):
            patch = grid_p[r:r + side, c:c + side].copy()
            others = counts_p[r:r + side, c:c + side].copy()
            others[v, v] -= 1
            patch[..., 2] = np.minimum(others, 1)
            obs[i, :n_cells] = patch.reshape(-1)
            obs[i, n_cells] = r / norm
            obs[i, n_cells + 1] = c / norm
            obs[i, n_cells + 2] = float(self.reached[i])
        return obs

    def positions(self) -> np.ndarray:
        return self.pos.copy()

    def success(self) -> bool:
        return bool(self.reached.all())
