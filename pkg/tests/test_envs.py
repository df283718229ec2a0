"""Random-action replays checked against independent brute-force oracles."""

import itertools

import numpy as np
import pytest

from commlab.envs import ENV_NAMES, make_env
from commlab.envs.shapes import COLORS, SHAPES, SIZES, parse_goal
from commlab.envs.traffic import build_routes

STEPS = 1000


def _rollout(env, seed, steps=STEPS):
    """Yield (state before, actions, result, state after) for ``steps`` random steps."""
    rng = np.random.default_rng(seed)
    env.reset(seed)
    for _ in range(steps):
        if env.done:
            env.reset(int(rng.integers(1 << 30)))
        before = _state(env)
        actions = rng.integers(0, env.n_actions, size=env.n_agents)
        result = env.step(actions)
        yield before, actions, result, _state(env)


def _state(env):
    return {"pos": env.positions().copy(), "alive": env.alive.copy(), "t": env.t}


# -- traffic --------------------------------------------------------------------

def traffic_mismatches(layout="easy", seed=0, steps=STEPS):
    env = make_env(f"traffic-{layout}")
    moves = 0
    bad = []
    tau = np.zeros(env.n_agents, dtype=int)
    for before, actions, res, after in _rollout(env, seed, steps):
        if before["t"] == 0:
            tau[:] = 0
        acted = before["alive"]
        tau[acted] += 1
        # where each acting car ends up if it stays on the grid
        dest = {}
        for i in np.flatnonzero(acted):
            route = env.routes[env.route[i]] if not res.info["exited"][i] else None
            dest[i] = tuple(after["pos"][i]) if route is not None else None
        src = {i: tuple(before["pos"][i]) for i in np.flatnonzero(acted)}
        hit = set()
        for i, j in itertools.combinations(src, 2):
            if dest[i] is not None and dest[i] == dest[j]:
                hit |= {i, j}
            if dest[i] is not None and dest[j] is not None and dest[i] == src[j] and dest[j] == src[i]:
                hit |= {i, j}
        for i in range(env.n_agents):
            want = (-0.01 * tau[i] + (-10.0 if i in hit else 0.0)) if acted[i] else 0.0
            if res.rewards[i] != want:
                bad.append(("reward", before["t"], i, res.rewards[i], want))
            if bool(res.info["collided"][i]) != (i in hit):
                bad.append(("collision", before["t"], i))
        spawned = res.info["spawned"]
        tau[spawned] = 0
        tau[~after["alive"]] = 0
        # locality: neighbour bits are exactly the other cars within one cell
        obs = res.obs
        for i in np.flatnonzero(after["alive"]):
            r, c = after["pos"][i]
            grid = np.zeros((3, 3))
            for j in np.flatnonzero(after["alive"]):
                if j != i:
                    dr, dc = after["pos"][j] - (r, c)
                    if abs(dr) <= 1 and abs(dc) <= 1:
                        grid[dr + 1, dc + 1] = 1
            road = np.zeros((3, 3))
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < env.grid_size and 0 <= cc < env.grid_size:
                        road[dr + 1, dc + 1] = env.road[rr, cc]
            if not (np.array_equal(obs[i, 1:18:2], grid.ravel()) and np.array_equal(obs[i, 0:18:2], road.ravel())):
                bad.append(("locality", before["t"], i))
        dead = ~after["alive"]
        if obs[dead].any():
            bad.append(("dead-obs", before["t"]))
        moves += 1
    return bad, moves


@pytest.mark.parametrize("layout", ["easy", "hard"])
def test_traffic_oracle(layout):
    bad, moves = traffic_mismatches(layout)
    assert moves == STEPS and bad == []


def test_traffic_routes_follow_road():
    for layout, size in (("easy", 7), ("hard", 18)):
        road, routes, _, entries = build_routes(layout, size)
        for route in routes:
            assert all(road[r, c] for r, c in route)
            steps = np.abs(np.diff(route, axis=0)).sum(axis=1)
            assert np.all(steps == 1)
            assert tuple(route[0]) in [tuple(e) for e in entries]
    assert len(build_routes("easy", 7)[1]) == 4


def test_traffic_brake_holds_position_and_gas_advances():
    env = make_env("traffic-easy", {"p_arrive": 1.0})
    env.reset(0)
    alive = np.flatnonzero(env.alive)
    pos = env.positions()
    res = env.step(np.ones(env.n_agents, dtype=int))
    np.testing.assert_array_equal(env.positions()[alive], pos[alive])
    np.testing.assert_allclose(res.rewards[alive], -0.01)


# -- shapes -------------------------------------------------------------------

def shapes_mismatches(seed=0, steps=STEPS, grid=15):
    env = make_env("shapes", {"grid": grid, "agents": 4, "goals": ["red", "blue circle", "small", "red"]})
    goals = [{"color": "red"}, {"color": "blue", "shape": "circle"}, {"size": "small"}, {"color": "red"}]
    bad = []
    for before, actions, res, after in _rollout(env, seed, steps):
        deltas = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1), 4: (0, 0)}
        for i, a in enumerate(actions):
            r = min(max(before["pos"][i][0] + deltas[a][0], 0), grid - 1)
            c = min(max(before["pos"][i][1] + deltas[a][1], 0), grid - 1)
            if (r, c) != tuple(after["pos"][i]):
                bad.append(("move", before["t"], i))
        on = 0
        for i, goal in enumerate(goals):
            r, c = after["pos"][i]
            s, col, sz = env.attrs[r, c]
            if s < 0:
                continue
            cell = {"shape": SHAPES[s], "color": COLORS[col], "size": SIZES[sz]}
            on += all(cell[k] == v for k, v in goal.items())
        want = on / 4
        if res.team_reward != want or not np.all(res.rewards == want):
            bad.append(("reward", before["t"], res.team_reward, want))
        # locality: the patch shows the 5x5 neighbourhood and nothing else
        for i in range(4):
            r, c = after["pos"][i]
            patch = res.obs[i, :25 * 9].reshape(5, 5, 9)
            for dr, dc in itertools.product(range(-2, 3), repeat=2):
                rr, cc = r + dr, c + dc
                cell = patch[dr + 2, dc + 2]
                if not (0 <= rr < grid and 0 <= cc < grid):
                    ok = cell[0] == 1 and cell[1:].sum() == 0
                elif env.attrs[rr, cc, 0] < 0:
                    ok = cell.sum() == 0
                else:
                    s, col, sz = env.attrs[rr, cc]
                    ok = cell[1 + s] == 1 and cell[4 + col] == 1 and cell[7 + sz] == 1 and cell.sum() == 3
                if not ok:
                    bad.append(("locality", before["t"], i))
    return bad


def test_shapes_oracle():
    assert shapes_mismatches() == []


def test_parse_goal():
    assert parse_goal("small green circle") == {"size": 0, "color": 1, "shape": 0}
    with pytest.raises(ValueError):
        parse_goal("red blue")
    with pytest.raises(ValueError):
        parse_goal("purple")


def test_shapes_goal_always_reachable():
    for seed in range(30):
        env = make_env("shapes", {"grid": 5, "goals": ["big green triangle"], "cell_prob": 0.0})
        env.reset(seed)
        assert env.goal_mask(parse_goal("big green triangle")).any()


# -- predator-prey --------------------------------------------------------------

def prey_mismatches(name="prey-small", seed=0, steps=STEPS):
    env = make_env(name)
    bad = []
    reached = None
    for before, actions, res, after in _rollout(env, seed, steps):
        if before["t"] == 0:
            reached = np.zeros(env.n_agents, dtype=bool)
        prey = tuple(env.prey)
        deltas = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1), 4: (0, 0)}
        for i, a in enumerate(actions):
            if reached[i]:
                want = tuple(before["pos"][i])
            else:
                want = (min(max(before["pos"][i][0] + deltas[a][0], 0), env.grid_size - 1),
                        min(max(before["pos"][i][1] + deltas[a][1], 0), env.grid_size - 1))
            if want != tuple(after["pos"][i]):
                bad.append(("move", before["t"], i))
            reached[i] |= want == prey
            expect = 0.05 if reached[i] else -0.05
            if res.rewards[i] != expect:
                bad.append(("reward", before["t"], i, res.rewards[i], expect))
        if res.done != (bool(reached.all()) or after["t"] >= env.max_steps):
            bad.append(("done", before["t"]))
        # locality: prey bit only when the prey is inside the vision window
        v = env.vision
        side = 2 * v + 1
        for i in range(env.n_agents):
            patch = res.obs[i, :side * side * 3].reshape(side, side, 3)
            d = np.array(prey) - after["pos"][i]
            inside = np.all(np.abs(d) <= v)
            if patch[..., 1].sum() != float(inside):
                bad.append(("locality", before["t"], i))
            if inside and patch[d[0] + v, d[1] + v, 1] != 1:
                bad.append(("locality", before["t"], i))
    return bad


@pytest.mark.parametrize("name", ["prey-small", "prey-medium"])
def test_prey_oracle(name):
    assert prey_mismatches(name) == []


@pytest.mark.parametrize("name", ENV_NAMES)
def test_same_seed_same_trajectory(name):
    a = [r.obs for _, _, r, _ in _rollout(make_env(name), 5, 60)]
    b = [r.obs for _, _, r, _ in _rollout(make_env(name), 5, 60)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_step_contract():
    env = make_env("prey-small")
    env.reset(0)
    with pytest.raises(ValueError):
        env.step([0, 0])
    with pytest.raises(ValueError):
        env.step([0, 0, 9])
    with pytest.raises(ValueError):
        make_env("maze")
