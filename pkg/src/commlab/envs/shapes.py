"""Cooperative navigation over a procedurally generated grid of coloured shapes."""

from __future__ import annotations

import numpy as np

from .base import MOVES, MultiAgentEnv, StepResult, padded

SHAPES = ("circle", "square", "triangle")
COLORS = ("red", "green", "blue")
SIZES = ("small", "big")
# per-cell features: out-of-bounds, shape one-hot, colour one-hot, size one-hot
CELL_FEATURES = 1 + len(SHAPES) + len(COLORS) + len(SIZES)
GOAL_FEATURES = len(SHAPES) + len(COLORS) + len(SIZES)
PATCH_RADIUS = 2


def parse_goal(text: str) -> dict[str, int]:
    """'small green circle' -> {'size': 0, 'color': 1, 'shape': 0}."""
    goal: dict[str, int] = {}
    for word in text.lower().replace("_", " ").split():
        for key, vocab in (("shape", SHAPES), ("color", COLORS), ("size", SIZES)):
            if word in vocab:
                if key in goal:
                    raise ValueError(f"goal {text!r} names two {key}s")
                goal[key] = vocab.index(word)
                break
        else:
            raise ValueError(f"unknown goal word {word!r} in {text!r}")
    if not goal:
        raise ValueError("empty goal")
    return goal


class ShapesEnv(MultiAgentEnv):
    """Each agent must reach a cell matching its goal attributes.

    Reward each step is the fraction of agents standing on their goal,
    shared by the team. The episode ends when all agents are on goal or at
    ``max_steps``.
    """

    name = "shapes"
    n_actions = 5

    def __init__(self, grid_size: int = 30, n_agents: int = 4, goals=("red",),
                 max_steps: int | None = None, cell_prob: float = 0.2):
        super().__init__()
        self.grid_size = grid_size
        self.n_agents = n_agents
        goals = list(goals)
        if len(goals) == 1:
            goals = goals * n_agents
        if len(goals) != n_agents:
            raise ValueError(f"{len(goals)} goals for {n_agents} agents")
        self.goal_names = goals
        self.goals = [parse_goal(g) for g in goals]
        self.max_steps = max_steps if max_steps is not None else 2 * grid_size
        self.cell_prob = cell_prob
        side = 2 * PATCH_RADIUS + 1
        self.obs_dim = side * side * CELL_FEATURES + 2 + GOAL_FEATURES
        self.alive = np.ones(n_agents, dtype=bool)
        self._goal_codes = np.zeros((n_agents, GOAL_FEATURES), dtype=np.float64)
        for i, g in enumerate(self.goals):
            if "shape" in g:
                self._goal_codes[i, g["shape"]] = 1
            if "color" in g:
                self._goal_codes[i, len(SHAPES) + g["color"]] = 1
            if "size" in g:
                self._goal_codes[i, len(SHAPES) + len(COLORS) + g["size"]] = 1

    def config(self) -> dict:
        return {"name": self.name, "grid_size": self.grid_size, "n_agents": self.n_agents,
                "goals": self.goal_names, "max_steps": self.max_steps, "cell_prob": self.cell_prob}

    # -- generation -------------------------------------------------------------
    def _reset(self) -> None:
        g = self.grid_size
        rng = self.rng
        occupied = rng.random((g, g)) < self.cell_prob
        shape = rng.integers(0, len(SHAPES), (g, g))
        color = rng.integers(0, len(COLORS), (g, g))
        size = rng.integers(0, len(SIZES), (g, g))
        self.attrs = np.stack([shape, color, size], axis=-1)
        self.attrs[~occupied] = -1
        # guarantee every goal has at least one matching cell
        for goal in self.goals:
            if not self.goal_mask(goal).any():
                empty = np.argwhere(self.attrs[..., 0] < 0)
                r, c = empty[rng.integers(len(empty))]
                cell = [rng.integers(len(SHAPES)), rng.integers(len(COLORS)), rng.integers(len(SIZES))]
                for j, key in enumerate(("shape", "color", "size")):
                    if key in goal:
                        cell[j] = goal[key]
                self.attrs[r, c] = cell
        self._onehot = self._encode_cells()
        empty = np.argwhere(self.attrs[..., 0] < 0)
        pick = rng.choice(len(empty), size=self.n_agents, replace=len(empty) < self.n_agents)
        self.pos = empty[pick].astype(np.int64)
        self._goal_maps = np.stack([self.goal_mask(gl) for gl in self.goals])
        self.ever_all_on_goal = False

    def _encode_cells(self) -> np.ndarray:
        g = self.grid_size
        feats = np.zeros((g, g, CELL_FEATURES))
        filled = self.attrs[..., 0] >= 0
        rr, cc = np.nonzero(filled)
        a = self.attrs[rr, cc]
        feats[rr, cc, 1 + a[:, 0]] = 1
        feats[rr, cc, 1 + len(SHAPES) + a[:, 1]] = 1
        feats[rr, cc, 1 + len(SHAPES) + len(COLORS) + a[:, 2]] = 1
        oob = np.zeros(CELL_FEATURES)
        oob[0] = 1
        out = padded(feats, PATCH_RADIUS, 0.0)
        out[:PATCH_RADIUS] = oob
        out[-PATCH_RADIUS:] = oob
        out[:, :PATCH_RADIUS] = oob
        out[:, -PATCH_RADIUS:] = oob
        return out

    def goal_mask(self, goal: dict[str, int]) -> np.ndarray:
        m = self.attrs[..., 0] >= 0
        for j, key in enumerate(("shape", "color", "size")):
            if key in goal:
                m &= self.attrs[..., j] == goal[key]
        return m

    # -- dynamics ----------------------------------------------------------------
    def on_goal(self) -> np.ndarray:
        idx = np.arange(self.n_agents)
        return self._goal_maps[idx, self.pos[:, 0], self.pos[:, 1]]

    def _step(self, actions: np.ndarray) -> StepResult:
        self.pos = np.clip(self.pos + MOVES[actions], 0, self.grid_size - 1)
        on = self.on_goal()
        r = float(on.sum()) / self.n_agents
        all_on = bool(on.all())
        self.ever_all_on_goal |= all_on
        done = all_on or self.t >= self.max_steps
        return StepResult(self.observe(), np.full(self.n_agents, r), r, done,
                          {"on_goal": on, "success": all_on})

    def observe(self) -> np.ndarray:
        side = 2 * PATCH_RADIUS + 1
        obs = np.empty((self.n_agents, self.obs_dim))
        norm = max(self.grid_size - 1, 1)
        for i, (r, c) in enumerate(self.pos):
            patch = self._onehot[r:r + side, c:c + side]
            obs[i, :side * side * CELL_FEATURES] = patch.reshape(-1)
        n_patch = side * side * CELL_FEATURES
        obs[:, n_patch:n_patch + 2] = self.pos / norm
        obs[:, n_patch + 2:] = self._goal_codes
        return obs

    def positions(self) -> np.ndarray:
        return self.pos.copy()

    def success(self) -> bool:
        return self.ever_all_on_goal
