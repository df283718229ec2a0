"""Run configuration: JSON on disk, CLI flags layered on top."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .comm import CommConfig


class ConfigError(ValueError):
    pass


ACTOR_BASELINES = ("none", "batch_mean", "counterfactual", "td_counterfactual")


@dataclass
class TrainConfig:
    env: str = "traffic-easy"
    env_overrides: dict = field(default_factory=dict)
    lr: float = 7e-4
    rmsprop_alpha: float = 0.99
    rmsprop_eps: float = 1e-5
    batch: int = 16
    gamma: float = 0.99
    entropy_coef: float = 0.01
    rollout_len: int = 20
    value_loss_coef: float = 0.5
    hidden: int = 128
    critic_hidden: int = 128
    comm: CommConfig = field(default_factory=CommConfig)
    seed: int = 0
    total_episodes: int = 20000
    reward_mode: str = "auto"          # team | individual | auto (individual for prey)
    grad_clip: float | None = None
    actor_baseline: str = "none"       # one of ACTOR_BASELINES; none = Q weighting as published
    normalize_actor_weights: bool = False  # standardize actor weights over acting agents per batch
    dtype: str = "float32"
    log_interval: int = 50             # iterations between metric rows
    checkpoint_interval: int = 0       # iterations; 0 = final only
    attention_log_every: int = 10      # log every k-th episode of batch slot 0; 0 = off
    eval_episodes: int = 500
    curriculum: dict | None = None     # {"start": p0, "end": p1, "episodes": n} for traffic arrivals

    def __post_init__(self):
        if isinstance(self.comm, dict):
            self.comm = CommConfig(**self.comm)
        positive = ("lr", "batch", "rollout_len", "hidden", "critic_hidden", "total_episodes")
        for name in positive:
            if getattr(self, name) < 0 or (name != "lr" and getattr(self, name) == 0):
                raise ConfigError(f"{name} must be positive")
        if not 0 <= self.gamma <= 1:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0 <= self.rmsprop_alpha < 1:
            raise ConfigError("rmsprop_alpha must lie in [0, 1)")
        if self.entropy_coef < 0 or self.value_loss_coef < 0:
            raise ConfigError("loss coefficients must be non-negative")
        if self.reward_mode not in ("team", "individual", "auto"):
            raise ConfigError(f"unknown reward_mode {self.reward_mode!r}")
        if self.actor_baseline not in ACTOR_BASELINES:
            raise ConfigError(f"unknown actor_baseline {self.actor_baseline!r}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"unknown dtype {self.dtype!r}")

    def resolved_reward_mode(self) -> str:
        if self.reward_mode != "auto":
            return self.reward_mode
        return "individual" if self.env.startswith("prey") else "team"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:10]


@dataclass
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    out_dir: str = "runs/default"

    def to_dict(self) -> dict:
        return {"train": self.train.to_dict(), "out_dir": self.out_dir}

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(train=TrainConfig.from_dict(d.get("train", {})), out_dir=d.get("out_dir", "runs/default"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))
