"""Gridworld environments behind one contract, built by name."""

from __future__ import annotations

from .base import MOVE_NAMES, MOVES, MultiAgentEnv, StepResult
from .predator_prey import PredatorPreyEnv
from .shapes import ShapesEnv
from .traffic import TrafficJunctionEnv

ENV_NAMES = ("shapes", "traffic-easy", "traffic-hard", "prey-small", "prey-medium", "prey-large")

_PREY = {
    "prey-small": dict(n_agents=3, grid_size=5, vision=0, max_steps=20),
    "prey-medium": dict(n_agents=5, grid_size=10, vision=1, max_steps=40),
    "prey-large": dict(n_agents=10, grid_size=20, vision=1, max_steps=80),
}

# override key -> constructor keyword, per family
_ALIASES = {
    "grid": "grid_size",
    "agents": "n_agents",
    "horizon": "max_steps",
}


def _normalise(overrides: dict) -> dict:
    out = {}
    for k, v in (overrides or {}).items():
        if v is None:
            continue
        out[_ALIASES.get(k, k)] = v
    return out


def make_env(name: str, overrides: dict | None = None) -> MultiAgentEnv:
    """Build an environment with published defaults, then apply overrides.

    Accepted override keys: ``grid``/``grid_size``, ``agents``/``n_agents``,
    ``horizon``/``max_steps``, plus family-specific ones (``goals``,
    ``cell_prob``, ``n_max``, ``p_arrive``, ``vision``).
    """
    kw = _normalise(overrides or {})
    if name == "shapes":
        return ShapesEnv(**kw)
    if name in ("traffic-easy", "traffic-hard"):
        if "n_agents" in kw:
            kw["n_max"] = kw.pop("n_agents")
        return TrafficJunctionEnv(layout=name.split("-")[1], **kw)
    if name in _PREY:
        return PredatorPreyEnv(**{**_PREY[name], **kw})
    raise ValueError(f"unknown environment {name!r}; choose from {', '.join(ENV_NAMES)}")


__all__ = ["ENV_NAMES", "MOVES", "MOVE_NAMES", "MultiAgentEnv", "PredatorPreyEnv", "ShapesEnv",
           "StepResult", "TrafficJunctionEnv", "make_env"]
