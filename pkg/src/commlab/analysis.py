"""Post-hoc analyses over attention logs: spatial maps and team-size correlation.

Records are the JSONL rows written during training (one per alive receiver
per logged timestep and round) with keys ``episode``, ``t``, ``round``,
``receiver``, ``weights``, ``gates``, ``alive``, ``positions``, ``action``
and ``action_probs``.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy import stats

BRAKE = 1  # traffic action index


class AnalysisError(ValueError):
    pass


def load_records(path: str | Path) -> list[dict]:
    records = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _select(records: Iterable[dict], round_index: int) -> list[dict]:
    rows = [r for r in records if r.get("round", 0) == round_index]
    if not rows:
        raise AnalysisError("no attention records to analyze")
    return rows


def _grid_shape(rows: list[dict], shape: tuple[int, int] | None) -> tuple[int, int]:
    if shape is not None:
        return shape
    cells = np.array([p for r in rows for p, a in zip(r["positions"], r["alive"]) if a])
    if cells.size == 0:
        raise AnalysisError("records carry no alive positions")
    return int(cells[:, 0].max()) + 1, int(cells[:, 1].max()) + 1


def spatial_map(records: Iterable[dict], kind: str, shape: tuple[int, int] | None = None,
                round_index: int = 0, brake_index: int = BRAKE) -> np.ndarray:
    """Per-cell mean of a quantity; cells with no samples are NaN.

    ``brake``: the receiver's brake probability at the receiver's cell.
    ``attention``: every alive sender's received weight at the sender's cell
    (self included, so uniform attention over k cars gives 1/k).
    """
    if kind not in ("brake", "attention"):
        raise AnalysisError(f"unknown map kind {kind!r}")
    rows = _select(records, round_index)
    h, w = _grid_shape(rows, shape)
    total = np.zeros((h, w))
    count = np.zeros((h, w))
    for r in rows:
        pos = r["positions"]
        if kind == "brake":
            i, j = pos[r["receiver"]]
            total[i, j] += r["action_probs"][brake_index]
            count[i, j] += 1
        else:
            for s, (weight, alive) in enumerate(zip(r["weights"], r["alive"])):
                if alive:
                    i, j = pos[s]
                    total[i, j] += weight
                    count[i, j] += 1
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(count > 0, total / np.maximum(count, 1), np.nan)


def write_grid_csv(grid: np.ndarray, path: str | Path) -> None:
    """One CSV row per grid row; empty fields where no samples landed."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        for row in grid:
            writer.writerow(["" if math.isnan(v) else repr(float(v)) for v in row])


def read_grid_csv(path: str | Path) -> np.ndarray:
    with open(path, newline="") as f:
        return np.array([[float(v) if v != "" else np.nan for v in row] for row in csv.reader(f)])


def team_size_series(records: Iterable[dict], threshold: float = 0.1,
                     round_index: int = 0) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Per episode: (alive cars per t, attended cars per t).

    A car counts as attended at t when some other receiver gives it weight
    above ``threshold``.
    """
    rows = _select(records, round_index)
    alive_at: dict[tuple[int, int], int] = {}
    attended_at: dict[tuple[int, int], set] = defaultdict(set)
    for r in rows:
        key = (r["episode"], r["t"])
        alive_at[key] = int(sum(bool(a) for a in r["alive"]))
        attended_at.setdefault(key, set())
        for s, (weight, alive) in enumerate(zip(r["weights"], r["alive"])):
            if alive and s != r["receiver"] and weight > threshold:
                attended_at[key].add(s)
    episodes: dict[int, list] = defaultdict(list)
    for (ep, t) in sorted(alive_at):
        episodes[ep].append((alive_at[(ep, t)], len(attended_at[(ep, t)])))
    return {ep: (np.array([a for a, _ in v]), np.array([b for _, b in v])) for ep, v in episodes.items()}


def shifted_pairs(series: dict[int, tuple[np.ndarray, np.ndarray]], shift: int) -> tuple[np.ndarray, np.ndarray]:
    """Pair A[t] with B[t + shift] inside each episode, then concatenate."""
    xs, ys = [], []
    for a, b in series.values():
        n = len(a)
        if shift >= 0:
            xs.append(a[:max(n - shift, 0)])
            ys.append(b[shift:])
        else:
            xs.append(a[-shift:])
            ys.append(b[:max(n + shift, 0)])
    return np.concatenate(xs) if xs else np.zeros(0), np.concatenate(ys) if ys else np.zeros(0)


def spearman(x, y) -> float | None:
    """Rank correlation with average ranks for ties; None when undefined."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise AnalysisError("spearman needs two 1-d series of equal length")
    if len(x) < 2 or np.all(x == x[0]) or np.all(y == y[0]):
        return None
    return float(stats.spearmanr(x, y).statistic)


def attention_correlation(records: Iterable[dict], threshold: float = 0.1, shift: int = 0,
                          round_index: int = 0) -> dict:
    series = team_size_series(records, threshold, round_index)
    x, y = shifted_pairs(series, shift)
    if len(x) < 2:
        raise AnalysisError("correlation needs at least two timesteps")
    rho = spearman(x, y)
    return {"spearman": rho, "defined": rho is not None, "n": int(len(x)),
            "threshold": threshold, "shift": shift}
