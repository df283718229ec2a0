"""Traffic junction: cars on fixed routes choose gas or brake each step."""

from __future__ import annotations

from collections import deque

import numpy as np

from .base import MultiAgentEnv, StepResult, padded

GAS, BRAKE = 0, 1
TIME_PENALTY = -0.01
COLLISION_PENALTY = -10.0
VIEW_RADIUS = 1
SPAWN_ON_OCCUPIED = True  # False blocks entries that are occupied
NEIGHBOR_FEATURES = 2  # road cell, another car present


def _lanes(kind: str, size: int) -> list[list[tuple[int, int]]]:
    """Cells of every lane in driving order."""
    if kind == "easy":
        mid = size // 2
        return [[(mid, c) for c in range(size)],          # eastbound
                [(r, mid) for r in range(size)]]          # southbound
    if kind == "hard":
        a1, a2 = size // 3 - 1, 2 * size // 3 - 1
        lanes = []
        for a in (a1, a2):
            lanes.append([(a, c) for c in reversed(range(size))])   # westbound
            lanes.append([(a + 1, c) for c in range(size)])         # eastbound
            lanes.append([(r, a) for r in range(size)])             # southbound
            lanes.append([(r, a + 1) for r in reversed(range(size))])  # northbound
        return lanes
    raise ValueError(f"unknown traffic layout {kind!r}")


def _opposite(la: list, lb: list) -> bool:
    """Two lanes of the same two-way road running in opposite directions."""
    (ra0, ca0), (ra1, ca1) = la[0], la[-1]
    (rb0, cb0), (rb1, cb1) = lb[0], lb[-1]
    horizontal_a, horizontal_b = ra0 == ra1, rb0 == rb1
    if horizontal_a != horizontal_b:
        return False
    if horizontal_a:
        return abs(ra0 - rb0) == 1 and (ca1 - ca0) * (cb1 - cb0) < 0
    return abs(ca0 - cb0) == 1 and (ra1 - ra0) * (rb1 - rb0) < 0


def build_routes(kind: str, size: int):
    """Enumerate (entry lane, exit lane) shortest paths; turns happen at junction cells."""
    lanes = _lanes(kind, size)
    succ: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for lane in lanes:
        for a, b in zip(lane[:-1], lane[1:]):
            nxt = succ.setdefault(a, [])
            if b not in nxt:
                nxt.append(b)
        succ.setdefault(lane[-1], [])
    road = np.zeros((size, size), dtype=bool)
    for lane in lanes:
        for r, c in lane:
            road[r, c] = True
    routes, entries = [], []
    for li, lin in enumerate(lanes):
        start = lin[0]
        # breadth-first search from the lane entry
        parent = {start: None}
        queue = deque([start])
        while queue:
            cell = queue.popleft()
            for nb in succ[cell]:
                if nb not in parent:
                    parent[nb] = cell
                    queue.append(nb)
        for lo, lout in enumerate(lanes):
            if lo != li and _opposite(lin, lout):
                continue
            end = lout[-1]
            if end not in parent:
                continue
            path = [end]
            while path[-1] != start:
                path.append(parent[path[-1]])
            routes.append(np.array(path[::-1], dtype=np.int64))
            entries.append(li)
    return road, routes, np.array(entries), [lane[0] for lane in lanes]


class TrafficJunctionEnv(MultiAgentEnv):
    """Fixed ``n_max`` car slots; inactive slots are masked.

    Each step: cars move (gas) or hold (brake), collisions are counted on
    the post-move positions (shared cells and swaps), finished cars leave,
    then each entry spawns a car with probability ``p_arrive`` into a free
    slot, even onto an occupied entry cell (drivers cannot wait out traffic
    by stalling at the entry).
    """

    name = "traffic"
    n_actions = 2
    action_names = ("gas", "brake")

    def __init__(self, layout: str = "easy", grid_size: int | None = None, n_max: int | None = None,
                 p_arrive: float | None = None, max_steps: int | None = None):
        super().__init__()
        defaults = {"easy": (7, 5, 0.30, 20), "hard": (18, 20, 0.05, 80)}
        if layout not in defaults:
            raise ValueError(f"unknown traffic layout {layout!r}")
        d_size, d_nmax, d_p, d_steps = defaults[layout]
        self.layout = layout
        self.grid_size = grid_size or d_size
        self.n_agents = n_max or d_nmax
        self.p_arrive = d_p if p_arrive is None else p_arrive
        self.max_steps = max_steps or d_steps
        self.road, self.routes, self.route_entry, self.entry_cells = build_routes(layout, self.grid_size)
        self.n_routes = len(self.routes)
        self.routes_by_entry = [np.flatnonzero(self.route_entry == e) for e in range(len(self.entry_cells))]
        side = 2 * VIEW_RADIUS + 1
        self.obs_dim = side * side * NEIGHBOR_FEATURES + 2 + self.n_routes + 1
        self._route_cells = [[(int(r), int(c)) for r, c in route] for route in self.routes]
        self._entry_cells = [tuple(int(x) for x in cell) for cell in self.entry_cells]
        road_p = padded(self.road.astype(np.float64), VIEW_RADIUS, 0.0)
        self._road_view = [[road_p[r:r + side, c:c + side].reshape(-1).copy()
                            for c in range(self.grid_size)] for r in range(self.grid_size)]
        self.alive = np.zeros(self.n_agents, dtype=bool)

    def config(self) -> dict:
        return {"name": f"traffic-{self.layout}", "layout": self.layout, "grid_size": self.grid_size,
                "n_max": self.n_agents, "p_arrive": self.p_arrive, "max_steps": self.max_steps}

    def set_arrival_prob(self, p: float) -> None:
        self.p_arrive = float(p)

    # -- state ---------------------------------------------------------------------
    def _reset(self) -> None:
        n = self.n_agents
        self.alive = np.zeros(n, dtype=bool)
        self.route = np.zeros(n, dtype=np.int64)
        self.idx = np.zeros(n, dtype=np.int64)
        self.tau = np.zeros(n, dtype=np.int64)
        self.collisions = 0
        self.spawned = self._spawn()

    def car_cells(self) -> np.ndarray:
        cells = np.full((self.n_agents, 2), -1, dtype=np.int64)
        for i in np.flatnonzero(self.alive):
            cells[i] = self._route_cells[self.route[i]][self.idx[i]]
        return cells

    def positions(self) -> np.ndarray:
        return self.car_cells()

    def _spawn(self) -> np.ndarray:
        alive = self.alive.tolist()
        spawned = [False] * self.n_agents
        occupied = {self._route_cells[r][k] for a, r, k in
                    zip(alive, self.route.tolist(), self.idx.tolist()) if a}
        for e, cell in enumerate(self._entry_cells):
            if self.rng.random() >= self.p_arrive:
                continue
            if (cell in occupied and not SPAWN_ON_OCCUPIED) or all(alive):
                continue
            slot = alive.index(False)
            options = self.routes_by_entry[e]
            self.route[slot] = options[self.rng.integers(len(options))]
            self.idx[slot] = 0
            self.tau[slot] = 0
            alive[slot] = spawned[slot] = True
            occupied.add(cell)
        self.alive = np.array(alive)
        return np.array(spawned)

    # -- dynamics --------------------------------------------------------------------
    def _step(self, actions: np.ndarray) -> StepResult:
        n = self.n_agents
        active = self.alive.tolist()
        route, idx, tau = self.route.tolist(), self.idx.tolist(), self.tau.tolist()
        act = actions.tolist()
        before: dict[int, tuple[int, int]] = {}
        after: dict[int, tuple[int, int]] = {}
        exited = [False] * n
        for i in range(n):
            if not active[i]:
                continue
            cells = self._route_cells[route[i]]
            before[i] = cells[idx[i]]
            tau[i] += 1
            if act[i] == GAS:
                idx[i] += 1
            if idx[i] >= len(cells):
                exited[i] = True
            else:
                after[i] = cells[idx[i]]
        collided = collided_cars(before, after)
        rewards = np.zeros(n)
        for i in before:
            rewards[i] = TIME_PENALTY * tau[i] + (COLLISION_PENALTY if i in collided else 0.0)
        self.collisions += len(collided)
        self.tau = np.array(tau, dtype=np.int64)
        self.idx = np.array(idx, dtype=np.int64)
        self.alive = np.array([a and not x for a, x in zip(active, exited)])
        self.spawned = self._spawn()
        done = self.t >= self.max_steps
        hit = np.zeros(n, dtype=bool)
        hit[list(collided)] = True
        info = {"collided": hit, "exited": np.array(exited), "spawned": self.spawned.copy(),
                "acted": np.array(active), "success": self.collisions == 0}
        return StepResult(self.observe(), rewards, float(rewards.sum()), done, info)

    def observe(self) -> np.ndarray:
        obs = np.zeros((self.n_agents, self.obs_dim))
        alive = np.flatnonzero(self.alive).tolist()
        if not alive:
            return obs
        route, idx = self.route.tolist(), self.idx.tolist()
        cells = {i: self._route_cells[route[i]][idx[i]] for i in alive}
        side = 2 * VIEW_RADIUS + 1
        n_nb = side * side * NEIGHBOR_FEATURES
        norm = max(self.grid_size - 1, 1)
        for i in alive:
            r, c = cells[i]
            row = obs[i]
            row[0:n_nb:2] = self._road_view[r][c]
            for j in alive:
                if j == i:
                    continue
                dr, dc = cells[j][0] - r, cells[j][1] - c
                if -VIEW_RADIUS <= dr <= VIEW_RADIUS and -VIEW_RADIUS <= dc <= VIEW_RADIUS:
                    row[2 * ((dr + VIEW_RADIUS) * side + dc + VIEW_RADIUS) + 1] = 1.0
            row[n_nb] = r / norm
            row[n_nb + 1] = c / norm
            row[n_nb + 2 + route[i]] = 1.0
            row[-1] = self.tau[i] / self.max_steps
        return obs

    def success(self) -> bool:
        return self.collisions == 0


def collided_cars(before: dict, after: dict) -> set:
    """Cars sharing a post-move cell, or swapping cells with another car."""
    hit = set()
    by_cell: dict = {}
    for i, cell in after.items():
        by_cell.setdefault(cell, []).append(i)
    for group in by_cell.values():
        if len(group) > 1:
            hit.update(group)
    origin = {cell: i for i, cell in before.items()}
    for i, cell in after.items():
        j = origin.get(cell)
        if j is not None and j != i and after.get(j) == before[i]:
            hit.add(i)
            hit.add(j)
    return hit
