"""Small numpy building blocks for the scalar (invariant) feature path.

Layers are frozen dataclasses holding float64 arrays. ``flatten`` and
``load_into`` convert any tree of such dataclasses (and lists of them) to and
from a flat ``{dotted.name: array}`` mapping, which is what the weights file
stores.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np


def uniform_init(rng: np.random.Generator, shape, fan_in: int, gain: float = 1.0) -> np.ndarray:
    bound = gain / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


@dataclass(frozen=True, eq=False)
class Linear:
    weight: np.ndarray  # (in, out)
    bias: Optional[np.ndarray] = None

    @classmethod
    def init(cls, rng, n_in: int, n_out: int, bias: bool = True, gain: float = 1.0) -> "Linear":
        w = uniform_init(rng, (n_in, n_out), n_in, gain)
        b = uniform_init(rng, (n_out,), n_in, gain) if bias else None
        return cls(w, b)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = x @ self.weight
        if self.bias is not None:
            y += self.bias
        return y


@dataclass(frozen=True, eq=False)
class LayerNorm:
    gamma: np.ndarray
    beta: np.ndarray
    eps: float = 1e-5

    @classmethod
    def init(cls, dim: int) -> "LayerNorm":
        return cls(np.ones(dim), np.zeros(dim))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        xc = x - x.mean(axis=-1, keepdims=True)
        var = np.einsum("...i,...i->...", xc, xc)[..., None] / x.shape[-1]
        xc *= 1.0 / np.sqrt(var + self.eps)
        xc *= self.gamma
        xc += self.beta
        return xc


@dataclass(frozen=True, eq=False)
class MLP:
    """Linear layers with ReLU between them (not after the last)."""

    layers: list

    @classmethod
    def init(cls, rng, dims: list[int], gain_last: float = 1.0) -> "MLP":
        layers = [
            Linear.init(rng, a, b, gain=gain_last if i == len(dims) - 2 else 1.0)
            for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))
        ]
        return cls(layers)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                np.maximum(x, 0.0, out=x)
        return x


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    x = x - x.max(axis=axis, keepdims=True)
    e = np.exp(x)
    return e / e.sum(axis=axis, keepdims=True)


def softplus(x):
    return np.logaddexp(0.0, x)


def sinusoidal_embedding(values: np.ndarray, dim: int, max_period: float = 10000.0) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    half = dim // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / half)
    args = values[..., None] * freqs
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=-1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros(emb.shape[:-1] + (1,))], axis=-1)
    return emb


def _is_array_field(value) -> bool:
    return isinstance(value, np.ndarray)


def flatten(tree: Any, prefix: str = "") -> dict[str, np.ndarray]:
    """Flatten nested dataclasses / lists into ``{dotted.name: array}``."""
    out: dict[str, np.ndarray] = {}
    if dataclasses.is_dataclass(tree):
        for f in dataclasses.fields(tree):
            value = getattr(tree, f.name)
            name = f"{prefix}{f.name}"
            if _is_array_field(value):
                out[name] = value
            elif dataclasses.is_dataclass(value) or isinstance(value, list):
                out.update(flatten(value, name + "."))
    elif isinstance(tree, list):
        for i, item in enumerate(tree):
            out.update(flatten(item, f"{prefix}{i}."))
    return out


def load_into(template: Any, arrays: dict[str, np.ndarray], prefix: str = "") -> Any:
    """Rebuild ``template`` with arrays taken from ``arrays`` (shapes must match)."""
    if dataclasses.is_dataclass(template):
        changes = {}
        for f in dataclasses.fields(template):
            value = getattr(template, f.name)
            name = f"{prefix}{f.name}"
            if _is_array_field(value):
                if name not in arrays:
                    raise KeyError(f"missing tensor {name!r}")
                arr = np.asarray(arrays[name], dtype=np.float64)
                if arr.shape != value.shape:
                    raise ValueError(f"tensor {name!r} has shape {arr.shape}, expected {value.shape}")
                changes[f.name] = arr
            elif dataclasses.is_dataclass(value) or isinstance(value, list):
                changes[f.name] = load_into(value, arrays, name + ".")
        return dataclasses.replace(template, **changes)
    if isinstance(template, list):
        return [load_into(item, arrays, f"{prefix}{i}.") for i, item in enumerate(template)]
    return template


def count_params(tree: Any) -> int:
    return int(sum(a.size for a in flatten(tree).values()))


def map_arrays(tree: Any, fn) -> Any:
    """Apply ``fn`` to every array leaf, e.g. to zero all weights."""
    flat = flatten(tree)
    return load_into(tree, {k: fn(v) for k, v in flat.items()})
