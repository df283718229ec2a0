"""Shared-parameter recurrent policy and the centralized critic."""

from __future__ import annotations

import threading
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .autograd import DimensionError, Tensor, ops
from .comm import CommConfig, CommLayer
from .nn import GruCell, Linear, ParamSpec, ParamStore

_exec = threading.local()


class CriticAccessError(RuntimeError):
    """The critic was invoked during decentralized execution."""


@contextmanager
def decentralized_execution():
    """Any critic call inside this block raises :class:`CriticAccessError`."""
    prev = getattr(_exec, "decentralized", False)
    _exec.decentralized = True
    try:
        yield
    finally:
        _exec.decentralized = prev


def in_decentralized_execution() -> bool:
    return getattr(_exec, "decentralized", False)


@dataclass
class PolicyOutput:
    logits: Tensor          # [M, n_actions]
    hidden: Tensor          # [M, hidden]
    signature: Tensor | None
    value: Tensor | None
    query: Tensor | None
    gate_logit: Tensor | None  # [M]


class PolicyNet:
    """Observation encoder -> GRU -> action head, plus message and gate heads.

    One instance (one parameter set) serves every agent slot; rows of the
    input batch are agents.
    """

    def __init__(self, store: ParamStore, obs_dim: int, n_actions: int, hidden: int,
                 comm: CommConfig, prefix: str = "policy"):
        self.obs_dim, self.n_actions, self.hidden, self.comm_config = obs_dim, n_actions, hidden, comm
        self.encoder = Linear(store, f"{prefix}.encoder")
        self.gru = GruCell(store, f"{prefix}.gru")
        self.action_head = Linear(store, f"{prefix}.action")
        self.comm = CommLayer(store, comm, prefix=f"{prefix}.comm")
        self.gate_head = Linear(store, f"{prefix}.gate") if comm.gating else None

    @staticmethod
    def spec(obs_dim: int, n_actions: int, hidden: int, comm: CommConfig,
             prefix: str = "policy") -> list[ParamSpec]:
        out = Linear.spec(f"{prefix}.encoder", obs_dim, hidden)
        out += GruCell.spec(f"{prefix}.gru", hidden + comm.d_v, hidden)
        out += Linear.spec(f"{prefix}.action", hidden, n_actions)
        out += CommLayer.spec(comm, hidden, prefix=f"{prefix}.comm")
        if comm.gating:
            out += Linear.spec(f"{prefix}.gate", hidden, 1)
        return out

    def initial_state(self, m: int, dtype=np.float32) -> tuple[Tensor, Tensor]:
        return (Tensor(np.zeros((m, self.hidden), dtype=dtype)),
                Tensor(np.zeros((m, self.comm_config.d_v), dtype=dtype)))

    def forward(self, obs: Tensor, c: Tensor, h_prev: Tensor) -> PolicyOutput:
        return policy_forward(self, obs, c, h_prev)


def policy_forward(net: PolicyNet, obs: Tensor, c: Tensor, h_prev: Tensor) -> PolicyOutput:
    """h = GRU([tanh(encode(obs)) || c], h_prev); heads read h."""
    if obs.shape[-1] != net.obs_dim:
        raise DimensionError(f"observation width {obs.shape[-1]} != {net.obs_dim}")
    if c.shape[-1] != net.comm_config.d_v or h_prev.shape[-1] != net.hidden:
        raise DimensionError(f"message {c.shape} / state {h_prev.shape} do not fit the policy")
    enc = ops.tanh(net.encoder(obs))
    h = net.gru(ops.concat([enc, c], axis=-1), h_prev)
    logits = net.action_head(h)
    k, v, q = net.comm.messages(h) if net.comm_config.mode != "none" else (None, None, None)
    gate = None
    if net.gate_head is not None:
        gate = ops.reshape(net.gate_head(h), (h.shape[0],))
    return PolicyOutput(logits, h, k, v, q, gate)


class Categorical:
    """Categorical distribution over the last axis of ``logits``."""

    def __init__(self, logits: Tensor):
        self.logits = logits
        self.log_probs = ops.log_softmax(logits)
        self.probs = np.exp(self.log_probs.data)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        cdf = np.cumsum(self.probs.astype(np.float64), axis=-1)
        u = rng.random(cdf.shape[:-1])[..., None] * cdf[..., -1:]
        return np.minimum((cdf <= u).sum(axis=-1), cdf.shape[-1] - 1)

    def greedy(self) -> np.ndarray:
        return self.probs.argmax(axis=-1)

    def log_prob(self, actions: np.ndarray) -> Tensor:
        return ops.gather(self.log_probs, actions)

    def entropy(self) -> Tensor:
        p = Tensor(self.probs) if not self.log_probs.requires_grad else ops.exp(self.log_probs)
        return ops.scale(ops.sum(ops.mul(p, self.log_probs), axis=-1), -1.0)


def sample_action(dist: Categorical, rng: np.random.Generator):
    """Draw actions; return them with their log-probabilities and the entropy."""
    a = dist.sample(rng)
    return a, dist.log_prob(a), dist.entropy()


class CriticNet:
    """Q(h_1..h_N, a_1..a_N) from the concatenation of [h_i || onehot(a_i)]."""

    def __init__(self, store: ParamStore, n_agents: int, hidden: int, n_actions: int,
                 critic_hidden: int = 128, out_dim: int = 1, prefix: str = "critic"):
        self.n_agents, self.hidden, self.n_actions, self.out_dim = n_agents, hidden, n_actions, out_dim
        self.fc = Linear(store, f"{prefix}.fc")
        self.out = Linear(store, f"{prefix}.out")
        self.calls = 0

    @staticmethod
    def spec(n_agents: int, hidden: int, n_actions: int, critic_hidden: int = 128,
             out_dim: int = 1, prefix: str = "critic") -> list[ParamSpec]:
        width = n_agents * (hidden + n_actions)
        return Linear.spec(f"{prefix}.fc", width, critic_hidden) + \
            Linear.spec(f"{prefix}.out", critic_hidden, out_dim)

    def __call__(self, h: Tensor, actions: np.ndarray, alive: np.ndarray | None = None) -> Tensor:
        return critic_forward(self, h, actions, alive)


def critic_forward(critic: CriticNet, h: Tensor, actions: np.ndarray,
                   alive: np.ndarray | None = None) -> Tensor:
    """``h`` is ``[B, N, hidden]``; ``actions`` int ``[B, N]``. Returns ``[B, out_dim]``.

    Dead slots (``alive`` false) contribute zero state and a zero action code.
    """
    if in_decentralized_execution():
        raise CriticAccessError("critic invoked during decentralized execution")
    critic.calls += 1
    if h.ndim != 3 or h.shape[1] != critic.n_agents or h.shape[2] != critic.hidden:
        raise DimensionError(
            f"critic expects [B, {critic.n_agents}, {critic.hidden}] states, got {h.shape}")
    b, n = actions.shape
    if n != critic.n_agents or b != h.shape[0]:
        raise DimensionError(f"critic expects actions [B, {critic.n_agents}], got {actions.shape}")
    onehot = np.zeros((b, n, critic.n_actions), dtype=h.data.dtype)
    np.put_along_axis(onehot, actions[..., None].astype(np.int64), 1.0, axis=-1)
    if alive is not None:
        keep = alive[..., None].astype(h.data.dtype)
        onehot *= keep
        h = ops.mul(h, Tensor(np.broadcast_to(keep, h.shape).copy()))
    x = ops.concat([h, Tensor(onehot)], axis=-1)
    x = ops.reshape(x, (b, n * (critic.hidden + critic.n_actions)))
    return critic.out(ops.tanh(critic.fc(x)))


def counterfactual_values(critic: CriticNet, h: np.ndarray, actions: np.ndarray,
                          alive: np.ndarray | None = None) -> np.ndarray:
    """Q with agent i's action replaced by each alternative, others fixed.

    Returns ``[B, N, n_actions, out_dim]``. Only the one-hot block of agent
    i changes, so the first layer is patched instead of re-evaluated.
    Dead slots get the unmodified joint value for every alternative.
    """
    if in_decentralized_execution():
        raise CriticAccessError("critic invoked during decentralized execution")
    critic.calls += 1
    b, n = actions.shape
    a, width = critic.n_actions, critic.hidden + critic.n_actions
    h = np.asarray(h, dtype=np.float64)
    alive = np.ones((b, n), dtype=bool) if alive is None else np.asarray(alive, dtype=bool)
    onehot = np.zeros((b, n, a))
    np.put_along_axis(onehot, actions[..., None].astype(np.int64), 1.0, axis=-1)
    onehot *= alive[..., None]
    x = np.concatenate([h * alive[..., None], onehot], axis=-1).reshape(b, n * width)
    w1 = critic.fc.weight.data.astype(np.float64)
    pre = x @ w1 + critic.fc.bias.data                                  # [B, C]
    rows = w1.reshape(n, width, -1)[:, critic.hidden:]                  # [N, A, C]
    current = np.einsum("bna,nac->bnc", onehot, rows)
    alt = pre[:, None, None] - current[:, :, None] + rows[None]         # [B, N, A, C]
    alt = np.where(alive[..., None, None], alt, pre[:, None, None])
    q = np.tanh(alt) @ critic.out.weight.data.astype(np.float64) + critic.out.bias.data
    return q
