"""Targeted inter-agent communication.

Each agent emits a signature ``k`` and a value ``v`` and predicts a query
``q`` from its hidden state. Receiver ``j`` weights sender ``i`` by
``softmax_i(q_j . k_i / sqrt(d_k))`` (self included) and takes the weighted
sum of values. Extra rounds refresh the hidden state with
``tanh(W [c || h])`` and repeat. ``mean_pool`` and ``none`` are the
ablations; optional hard gates mask senders.

Batched tensors use ``[B, N, .]`` for B parallel episodes of N agent slots.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .autograd import DimensionError, Tensor, ops
from .nn import Linear, ParamSpec, ParamStore

MODES = ("targeted", "mean_pool", "none")


class CommError(ValueError):
    pass


@dataclass
class CommConfig:
    d_k: int = 16
    d_v: int = 32
    rounds: int = 1
    mode: str = "targeted"
    gating: bool = False
    self_attention: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise CommError(f"unknown comm mode {self.mode!r}; expected one of {MODES}")
        if self.rounds < 1:
            raise CommError("rounds must be >= 1")
        if self.d_k < 1 or self.d_v < 1:
            raise CommError("message dimensions must be positive")
        if self.gating and self.mode == "none":
            raise CommError("gating requires communication (mode targeted or mean_pool)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Message:
    signature: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        self.signature = np.asarray(self.signature)
        self.value = np.asarray(self.value)

    @property
    def packed(self) -> np.ndarray:
        return np.concatenate([self.signature, self.value], axis=-1)


# -- single-receiver reference operations ---------------------------------------

def attention_weights(query, signatures, alive_mask=None, self_index: int | None = None,
                      self_alive: bool = True) -> np.ndarray:
    """Attention of one receiver over N senders (self included as a sender).

    When every sender is masked the result is one-hot on ``self_index`` if the
    receiver itself is alive, otherwise :class:`CommError`.
    """
    q = np.asarray(query, dtype=np.float64)
    k = np.asarray(signatures, dtype=np.float64)
    if k.ndim != 2 or q.shape != (k.shape[1],):
        raise DimensionError(f"query {q.shape} does not match signatures {k.shape}")
    n = k.shape[0]
    mask = np.ones(n, dtype=bool) if alive_mask is None else np.asarray(alive_mask, dtype=bool)
    if not mask.any():
        if self_index is not None and self_alive:
            out = np.zeros(n)
            out[self_index] = 1.0
            return out
        raise CommError("no unmasked sender")
    logits = Tensor(k @ q, dtype=np.float64)
    return ops.softmax(logits, 1.0 / math.sqrt(k.shape[1]), mask).data


def aggregate(alpha, values) -> np.ndarray:
    a = np.asarray(alpha)
    v = np.asarray(values)
    if v.ndim != 2 or a.shape != (v.shape[0],):
        raise DimensionError(f"weights {a.shape} do not match values {v.shape}")
    return a @ v


def mean_pool(values, alive_mask=None) -> np.ndarray:
    v = np.asarray(values)
    mask = np.ones(v.shape[0], dtype=bool) if alive_mask is None else np.asarray(alive_mask, bool)
    if not mask.any():
        return np.zeros(v.shape[1], dtype=v.dtype)
    return v[mask].mean(axis=0)


def multi_round_update(c: Tensor, h: Tensor, w: Tensor) -> Tensor:
    """``tanh([c || h] @ w)``; rows are agents. ``w`` is ``[d_v + hidden, hidden]``."""
    if c.ndim != h.ndim or c.shape[:-1] != h.shape[:-1]:
        raise DimensionError(f"message {c.shape} and state {h.shape} disagree")
    if w.shape != (c.shape[-1] + h.shape[-1], h.shape[-1]):
        raise DimensionError(f"round weight {w.shape} does not fit [{c.shape[-1]}+{h.shape[-1]}]")
    ch = ops.concat([c, h], axis=-1)
    if ch.ndim == 1:
        return ops.tanh(ops.reshape(ops.matmul(ops.reshape(ch, (1, -1)), w), (-1,)))
    return ops.tanh(ops.matmul(ch, w))


def gate_messages(gate_logits: Tensor, mode: str, rng: np.random.Generator | None = None):
    """Hard send gates from logits.

    ``train_sample`` draws Bernoulli(sigmoid(logit)) and returns the log
    probability of the draw on the tape; ``eval_threshold`` returns
    ``sigmoid(logit) > 0.5`` and ``None`` for the log probability.
    """
    p = 1.0 / (1.0 + np.exp(-gate_logits.data.astype(np.float64)))
    if mode == "eval_threshold":
        return p > 0.5, None
    if mode != "train_sample":
        raise ValueError(f"unknown gate mode {mode!r}")
    if rng is None:
        raise ValueError("train_sample needs an rng")
    gates = rng.random(p.shape) < p
    # log sigmoid(x) if on, log sigmoid(-x) if off, both as -softplus
    sign = np.where(gates, -1.0, 1.0).astype(gate_logits.data.dtype)
    logp = _neg_softplus(ops.mul(gate_logits, Tensor(sign)))
    return gates, logp


def _neg_softplus(x: Tensor) -> Tensor:
    """-log(1 + exp(x)), computed stably."""
    xd = x.data
    y = -(np.maximum(xd, 0) + np.log1p(np.exp(-np.abs(xd))))
    s = 1.0 / (1.0 + np.exp(-xd))
    return Tensor._result(y.astype(xd.dtype), (x,), lambda g: (-g * s.astype(xd.dtype),),
                          "neg_softplus")


# -- batched layer -----------------------------------------------------------------

def batched_attention(q: Tensor, k: Tensor, sender_mask: np.ndarray,
                      self_attention: bool = True) -> Tensor:
    """``alpha[b, j, i]`` for queries ``[B, N, d_k]`` and signatures ``[B, N, d_k]``.

    Rows with no admissible sender come out as zeros.
    """
    if q.shape != k.shape or q.ndim != 3:
        raise DimensionError(f"queries {q.shape} and signatures {k.shape} disagree")
    b, n, d_k = q.shape
    mask = np.broadcast_to(sender_mask[:, None, :], (b, n, n))
    if not self_attention:
        mask = mask & ~np.eye(n, dtype=bool)[None]
    logits = ops.bmm(q, ops.transpose(k))
    return ops.softmax(logits, 1.0 / math.sqrt(d_k), np.ascontiguousarray(mask))


def mean_pool_weights(sender_mask: np.ndarray, dtype) -> np.ndarray:
    """Uniform weights over admissible senders, identical for every receiver."""
    b, n = sender_mask.shape
    counts = sender_mask.sum(axis=1, keepdims=True)
    w = np.where(counts > 0, sender_mask / np.maximum(counts, 1), 0.0).astype(dtype)
    return np.ascontiguousarray(np.broadcast_to(w[:, None, :], (b, n, n)))


class CommLayer:
    """Heads and round update that turn hidden states into incoming messages."""

    def __init__(self, store: ParamStore, config: CommConfig, prefix: str = "comm"):
        self.config = config
        self.signature = self.query = self.value = None
        self.round_w = None
        if config.mode == "none":
            return
        self.value = Linear(store, f"{prefix}.value")
        if config.mode == "targeted":
            self.signature = Linear(store, f"{prefix}.signature")
            self.query = Linear(store, f"{prefix}.query")
        if config.rounds > 1:
            self.round_w = store[f"{prefix}.round.weight"]

    @staticmethod
    def spec(config: CommConfig, hidden: int, prefix: str = "comm") -> list[ParamSpec]:
        if config.mode == "none":
            return []
        out = Linear.spec(f"{prefix}.value", hidden, config.d_v)
        if config.mode == "targeted":
            out += Linear.spec(f"{prefix}.signature", hidden, config.d_k)
            out += Linear.spec(f"{prefix}.query", hidden, config.d_k)
        if config.rounds > 1:
            fan = config.d_v + hidden
            out.append(ParamSpec(f"{prefix}.round.weight", (fan, hidden), fan))
        return out

    def messages(self, h: Tensor):
        """(signature, value, query) predicted from flat states ``[B*N, hidden]``."""
        v = self.value(h)
        if self.config.mode != "targeted":
            return None, v, None
        return self.signature(h), v, self.query(h)

    def communicate(self, h: Tensor, sender_mask: np.ndarray):
        """Run all rounds; return flat incoming messages ``[B*N, d_v]`` and per-round weights.

        ``h`` is ``[B*N, hidden]`` and ``sender_mask`` is boolean ``[B, N]``.
        """
        cfg = self.config
        b, n = sender_mask.shape
        if h.shape[0] != b * n:
            raise DimensionError(f"states {h.shape} do not match mask {sender_mask.shape}")
        if cfg.mode == "none":
            return Tensor(np.zeros((b * n, cfg.d_v), dtype=h.data.dtype)), []
        weights = []
        state = h
        c = None
        for r in range(cfg.rounds):
            if r > 0:
                state = multi_round_update(c, state, self.round_w)
            k, v, q = self.messages(state)
            v3 = ops.reshape(v, (b, n, cfg.d_v))
            if cfg.mode == "targeted":
                alpha = batched_attention(ops.reshape(q, (b, n, cfg.d_k)),
                                          ops.reshape(k, (b, n, cfg.d_k)),
                                          sender_mask, cfg.self_attention)
            else:
                alpha = Tensor(mean_pool_weights(sender_mask, v.data.dtype))
            weights.append(alpha.data)
            c = ops.reshape(ops.bmm(alpha, v3), (b * n, cfg.d_v))
        return c, weights
