import itertools
import math
from collections import defaultdict

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from commlab.analysis import (AnalysisError, attention_correlation, read_grid_csv, shifted_pairs, spatial_map,
                              spearman, team_size_series, write_grid_csv)


def brute_spearman(x, y):
    """Pearson correlation of average ranks, written out by hand."""
    def ranks(v):
        out = []
        for a in v:
            less = sum(1 for b in v if b < a)
            equal = sum(1 for b in v if b == a)
            out.append(less + (equal + 1) / 2)
        return out
    rx, ry = ranks(x), ranks(y)
    n = len(x)
    mx, my = sum(rx) / n, sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    return cov / math.sqrt(vx * vy)


def spearman_permutation_mismatches():
    """Every permutation of 6 elements against the brute-force oracle and 1 - 6 sum d^2 / (n(n^2-1))."""
    base = [3.5, -1.0, 7.25, 0.0, 2.0, 10.0]
    bad = 0
    for perm in itertools.permutations(range(6)):
        y = [base[i] for i in perm]
        rho = spearman(base, y)
        rank_x = np.argsort(np.argsort(base))
        rank_y = np.argsort(np.argsort(y))
        d2 = float(((rank_x - rank_y) ** 2).sum())
        closed = 1 - 6 * d2 / (6 * 35)
        if abs(rho - brute_spearman(base, y)) > 1e-12 or abs(rho - closed) > 1e-12:
            bad += 1
    return bad


def test_spearman_all_720_permutations():
    assert spearman_permutation_mismatches() == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4)), min_size=3, max_size=20))
def test_spearman_with_ties_matches_oracle(pairs):
    x, y = [p[0] for p in pairs], [p[1] for p in pairs]
    rho = spearman(x, y)
    if len(set(x)) == 1 or len(set(y)) == 1:
        assert rho is None
    else:
        assert rho == pytest.approx(brute_spearman(x, y), abs=1e-12)


def test_spearman_contract():
    assert spearman([1, 2], [3, 3]) is None
    assert spearman([1], [2]) is None
    with pytest.raises(AnalysisError):
        spearman([1, 2, 3], [1, 2])


def _records(seed=0, episodes=3, steps=6, n=4, grid=5):
    rng = np.random.default_rng(seed)
    out = []
    for ep in range(episodes):
        for t in range(1, steps + 1):
            alive = rng.random(n) < 0.7
            pos = [[int(rng.integers(grid)), int(rng.integers(grid))] if a else [-1, -1] for a in alive]
            for j in np.flatnonzero(alive):
                w = rng.random(n) * alive
                w = w / w.sum()
                p = rng.random()
                for r in range(2):
                    out.append({"episode": ep, "t": t, "round": r, "receiver": int(j),
                                "weights": w.tolist(), "gates": [True] * n, "alive": alive.tolist(),
                                "positions": pos, "action": 0, "action_probs": [1 - p, p]})
    return out


def groupby_oracle(records, kind, grid=5):
    groups = defaultdict(list)
    for r in records:
        if r["round"] != 0:
            continue
        if kind == "brake":
            groups[tuple(r["positions"][r["receiver"]])].append(r["action_probs"][1])
        else:
            for s, (w, a) in enumerate(zip(r["weights"], r["alive"])):
                if a:
                    groups[tuple(r["positions"][s])].append(w)
    out = np.full((grid, grid), np.nan)
    for (i, j), vals in groups.items():
        out[i, j] = sum(vals) / len(vals)
    return out


def spatial_mismatches():
    recs = _records()
    bad = 0
    for kind in ("brake", "attention"):
        got = spatial_map(recs, kind, shape=(5, 5))
        want = groupby_oracle(recs, kind)
        if not np.array_equal(np.isnan(got), np.isnan(want)):
            bad += 1
        elif not np.array_equal(got[~np.isnan(got)], want[~np.isnan(want)]):
            bad += 1
    return bad


def test_spatial_map_matches_groupby_exactly():
    assert spatial_mismatches() == 0


def test_grid_csv_round_trip(tmp_path):
    grid = spatial_map(_records(), "attention", shape=(5, 5))
    write_grid_csv(grid, tmp_path / "g.csv")
    back = read_grid_csv(tmp_path / "g.csv")
    np.testing.assert_array_equal(np.isnan(back), np.isnan(grid))
    np.testing.assert_array_equal(back[~np.isnan(back)], grid[~np.isnan(grid)])


def test_spatial_map_errors():
    with pytest.raises(AnalysisError):
        spatial_map([], "brake")
    with pytest.raises(AnalysisError):
        spatial_map(_records(), "speed")


def test_team_size_series_counts():
    rec = lambda t, j, w: {"episode": 0, "t": t, "round": 0, "receiver": j, "weights": w,
                           "gates": [True] * 3, "alive": [True, True, False], "positions": [[0, 0]] * 3,
                           "action": 0, "action_probs": [1, 0]}
    recs = [rec(1, 0, [0.95, 0.05, 0.0]), rec(1, 1, [0.5, 0.5, 0.0]),  # car 0 attended by 1
            rec(2, 0, [0.5, 0.5, 0.0]), rec(2, 1, [0.2, 0.8, 0.0])]    # both attended
    series = team_size_series(recs, threshold=0.1)
    np.testing.assert_array_equal(series[0][0], [2, 2])
    np.testing.assert_array_equal(series[0][1], [1, 2])


def test_shifted_pairs():
    series = {0: (np.arange(5), np.arange(10, 15)), 1: (np.arange(3), np.arange(20, 23))}
    x, y = shifted_pairs(series, 2)
    np.testing.assert_array_equal(x, [0, 1, 2, 0])
    np.testing.assert_array_equal(y, [12, 13, 14, 22])
    x, y = shifted_pairs(series, -1)
    np.testing.assert_array_equal(x, [1, 2, 3, 4, 1, 2])
    np.testing.assert_array_equal(y, [10, 11, 12, 13, 20, 21])


def test_attention_correlation_report():
    out = attention_correlation(_records(episodes=5, steps=12), threshold=0.1)
    assert out["n"] == 60 and out["threshold"] == 0.1
    if out["defined"]:
        assert -1 <= out["spearman"] <= 1
