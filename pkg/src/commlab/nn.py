"""Linear layers, a GRU cell, the parameter store, RMSProp, and checkpoints."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .autograd import ContractError, DimensionError, Tensor, get_default_dtype, ops

INIT_SCHEME = "uniform(+-1/sqrt(fan_in)) weights, zero biases"


@dataclass(frozen=True)
class ParamSpec:
    name: str
    shape: tuple[int, ...]
    fan_in: int | None  # None marks a bias (zero-initialised)


class ParamStore:
    """Named parameters plus one RMSProp accumulator per parameter."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self.accum: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = Tensor(value, requires_grad=True)
        self._params[name] = t
        self.accum[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def num_scalars(self) -> int:
        return int(sum(t.size for t in self._params.values()))

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.zero_grad()

    def clear_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self._params.items()}

    def load_snapshot(self, values: dict[str, np.ndarray]) -> None:
        for k, v in values.items():
            if k not in self._params:
                raise KeyError(f"unknown parameter {k!r}")
            if v.shape != self._params[k].shape:
                raise DimensionError(f"{k}: shape {v.shape} != {self._params[k].shape}")
            self._params[k].data = np.asarray(v, dtype=self._params[k].data.dtype).copy()

    def grad_norm(self) -> float:
        total = 0.0
        for t in self._params.values():
            if t.grad is not None:
                total += float(np.sum(np.square(t.grad, dtype=np.float64)))
        return math.sqrt(total)

    def clip_grad_norm(self, max_norm: float) -> float:
        norm = self.grad_norm()
        if norm > max_norm > 0:
            factor = max_norm / (norm + 1e-12)
            for t in self._params.values():
                if t.grad is not None:
                    t.grad = t.grad * t.grad.dtype.type(factor)
        return norm


def init_params(spec: Iterable[ParamSpec], seed: int) -> ParamStore:
    """Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero, in spec order."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    dtype = get_default_dtype()
    for p in spec:
        if p.fan_in is None:
            value = np.zeros(p.shape, dtype=dtype)
        else:
            bound = 1.0 / math.sqrt(p.fan_in)
            value = rng.uniform(-bound, bound, size=p.shape).astype(dtype)
        store.add(p.name, value)
    return store


def zero_params(spec: Iterable[ParamSpec]) -> ParamStore:
    store = ParamStore()
    for p in spec:
        store.add(p.name, np.zeros(p.shape, dtype=get_default_dtype()))
    return store


# -- layers -------------------------------------------------------------------

class Linear:
    def __init__(self, store: ParamStore, name: str):
        self.weight = store[f"{name}.weight"]
        self.bias = store[f"{name}.bias"]

    @staticmethod
    def spec(name: str, n_in: int, n_out: int) -> list[ParamSpec]:
        return [ParamSpec(f"{name}.weight", (n_in, n_out), n_in),
                ParamSpec(f"{name}.bias", (n_out,), None)]

    @property
    def n_in(self) -> int:
        return self.weight.shape[0]

    @property
    def n_out(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self)


def linear(x: Tensor, layer: Linear) -> Tensor:
    if x.shape[-1] != layer.n_in:
        raise DimensionError(f"linear: input width {x.shape[-1]} != {layer.n_in}")
    return ops.linear(x, layer.weight, layer.bias)


class GruCell:
    """Single-layer GRU; reset gate multiplies h before the candidate weights."""

    def __init__(self, store: ParamStore, name: str):
        self.w_z = store[f"{name}.w_z"]
        self.w_r = store[f"{name}.w_r"]
        self.w_h = store[f"{name}.w_h"]
        self.b_z = store[f"{name}.b_z"]
        self.b_r = store[f"{name}.b_r"]
        self.b_h = store[f"{name}.b_h"]
        self.hidden_size = self.b_z.shape[0]
        self.input_size = self.w_z.shape[0] - self.hidden_size

    @staticmethod
    def spec(name: str, n_in: int, n_hid: int) -> list[ParamSpec]:
        fan = n_in + n_hid
        return [ParamSpec(f"{name}.w_z", (fan, n_hid), fan),
                ParamSpec(f"{name}.w_r", (fan, n_hid), fan),
                ParamSpec(f"{name}.w_h", (fan, n_hid), fan),
                ParamSpec(f"{name}.b_z", (n_hid,), None),
                ParamSpec(f"{name}.b_r", (n_hid,), None),
                ParamSpec(f"{name}.b_h", (n_hid,), None)]

    def __call__(self, x: Tensor, h: Tensor) -> Tensor:
        return gru_step(x, h, self)


def gru_step(x: Tensor, h: Tensor, cell: GruCell) -> Tensor:
    if x.shape[-1] != cell.input_size or h.shape[-1] != cell.hidden_size:
        raise DimensionError(
            f"gru_step: got x {x.shape}, h {h.shape}; cell is {cell.input_size}->{cell.hidden_size}")
    return ops.gru_cell(x, h, cell.w_z, cell.w_r, cell.w_h, cell.b_z, cell.b_r, cell.b_h)


# -- optimiser ----------------------------------------------------------------

def rmsprop_step(store: ParamStore, lr: float, alpha: float = 0.99, eps: float = 1e-5) -> None:
    """v <- a*v + (1-a)*g^2; theta <- theta - lr*g/(sqrt(v)+eps); then clear grads."""
    for name, p in store.items():
        if p.grad is None:
            raise ContractError(f"rmsprop_step: parameter {name!r} has no gradient")
    for name, p in store.items():
        g = p.grad
        dt = p.data.dtype.type
        v = store.accum[name]
        v *= dt(alpha)
        v += dt(1.0 - alpha) * g * g
        p.data = p.data - dt(lr) * g / (np.sqrt(v) + dt(eps))
        p.grad = None


# -- checkpoints ----------------------------------------------------------------

MANIFEST = "manifest.json"
BLOB = "params.bin"


def save_checkpoint(store: ParamStore, directory: str | Path, metadata: dict | None = None) -> Path:
    """Write ``manifest.json`` and a little-endian float32 blob in manifest order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries, chunks, offset = [], [], 0
    for name, t in store.items():
        arr = np.ascontiguousarray(t.data, dtype="<f4")
        entries.append({"name": name, "shape": list(t.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "format": "commlab-checkpoint-v1",
        "dtype": "<f4",
        "blob": BLOB,
        "params": entries,
        "metadata": {"init": INIT_SCHEME, **(metadata or {})},
    }
    (directory / BLOB).write_bytes(b"".join(chunks))
    (directory / MANIFEST).write_text(json.dumps(manifest, indent=2))
    return directory


def load_checkpoint(directory: str | Path) -> tuple[ParamStore, dict]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST
    if not manifest_path.exists():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    blob = (directory / manifest.get("blob", BLOB)).read_bytes()
    store = ParamStore()
    dtype = get_default_dtype()
    for e in manifest["params"]:
        shape = tuple(e["shape"])
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=e["offset"]).reshape(shape)
        store.add(e["name"], arr.astype(dtype))
    return store, manifest.get("metadata", {})
