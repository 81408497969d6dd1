"""Learnable layers on multivector channels.

Inputs are arrays ``(..., channels, 16)``. All three layers commute with the
sandwich action of any unit motor applied to every channel.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import algebra as ga
from . import kernels

_GRADE_OF = ga.GRADES
# grade-4 has no e0 multiple
_HAS_E0_TERM = _GRADE_OF < 4


def _check_channels(x: np.ndarray, expected: int, what: str) -> None:
    if x.ndim < 2 or x.shape[-1] != 16 or x.shape[-2] != expected:
        raise ValueError(f"{what}: expected (..., {expected}, 16), got {x.shape}")


@dataclass(frozen=True, eq=False)
class EquiLinear:
    """Most general motor-equivariant linear map.

    ``out_n = sum_m [ sum_k w[n,m,k] <x_m>_k + sum_{k<4} v[n,m,k] e0 <x_m>_k ]``
    """

    w: np.ndarray  # (out, in, 5)
    v: np.ndarray  # (out, in, 4)

    def __post_init__(self):
        if self.w.ndim != 3 or self.w.shape[2] != 5 or self.v.shape != self.w.shape[:2] + (4,):
            raise ValueError(f"bad EquiLinear parameter shapes {self.w.shape}, {self.v.shape}")

    @classmethod
    def init(cls, rng: np.random.Generator, n_in: int, n_out: int) -> "EquiLinear":
        s = 1.0 / np.sqrt(9.0 * n_in)
        return cls(rng.uniform(-s, s, (n_out, n_in, 5)), rng.uniform(-s, s, (n_out, n_in, 4)))

    @classmethod
    def identity(cls, n: int) -> "EquiLinear":
        w = np.zeros((n, n, 5))
        w[np.arange(n), np.arange(n), :] = 1.0
        return cls(w, np.zeros((n, n, 4)))

    @property
    def n_in(self) -> int:
        return self.w.shape[1]

    @property
    def n_out(self) -> int:
        return self.w.shape[0]

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense ``(out*16, in*16)`` matrix acting on flattened channels."""
        diag = self.w[:, :, _GRADE_OF]  # (out, in, 16) weight of the source blade's grade
        e0w = np.where(_HAS_E0_TERM, self.v[:, :, np.minimum(_GRADE_OF, 3)], 0.0)
        mat = np.einsum("nmb,ab->namb", diag, np.eye(16)) + np.einsum("nmb,ab->namb", e0w, ga.E0_LEFT)
        return mat.reshape(self.n_out * 16, self.n_in * 16)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        _check_channels(x, self.n_in, "EquiLinear")
        flat = x.reshape(x.shape[:-2] + (self.n_in * 16,))
        return (flat @ self.matrix.T).reshape(x.shape[:-2] + (self.n_out, 16))


def compose_equi_linear(outer: EquiLinear, inner: EquiLinear) -> EquiLinear:
    """Single EquiLinear equal to ``outer(inner(x))``."""
    w = np.einsum("nmk,mlk->nlk", outer.w, inner.w)
    # e0 <.>_k after the grade-k path, or grade k+1 weight after an e0 shift
    v = np.einsum("nmk,mlk->nlk", outer.v, inner.w[:, :, :4]) + np.einsum(
        "nmk,mlk->nlk", outer.w[:, :, 1:], inner.v
    )
    return EquiLinear(w, v)


@dataclass(frozen=True, eq=False)
class GeometricBilinear:
    """Channel-wise geometric product and join of linearly mixed inputs, mixed again."""

    left_gp: EquiLinear
    right_gp: EquiLinear
    left_join: EquiLinear
    right_join: EquiLinear
    out: EquiLinear

    @classmethod
    def init(cls, rng, n_in_a: int, n_in_b: int, n_hidden: int, n_out: int) -> "GeometricBilinear":
        return cls(
            EquiLinear.init(rng, n_in_a, n_hidden),
            EquiLinear.init(rng, n_in_b, n_hidden),
            EquiLinear.init(rng, n_in_a, n_hidden),
            EquiLinear.init(rng, n_in_b, n_hidden),
            EquiLinear.init(rng, 2 * n_hidden, n_out),
        )

    def __call__(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        gp = ga.geometric_product(self.left_gp(a), self.right_gp(b))
        jn = ga.join(self.left_join(a), self.right_join(b))
        return self.out(np.concatenate([gp, jn], axis=-2))


def _graded_coefficients(weights: np.ndarray, sign: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Per-channel blade tables for ``sum_ijk W[n,i,j,k] < <X>_j op <Y>_k >_i``.

    A blade pair ``(a, b)`` lands on the single blade ``target[a, b]``, so the
    whole graded sum collapses to one coefficient per pair.
    """
    g_out = _GRADE_OF[target]  # (16, 16)
    g_a = _GRADE_OF[:, None].repeat(16, 1)
    g_b = _GRADE_OF[None, :].repeat(16, 0)
    return weights[:, g_out, g_a, g_b] * sign


@dataclass(frozen=True, eq=False)
class ManyBodyProduct:
    """Grade-resolved products of two linear views of the input plus a residual.

    ``O_n = sum_ijk (W <<X_n>_j <Y_n>_k>_i + Wj <<X_n>_j v <Y_n>_k>_i) + Y_n``
    """

    x_lin: EquiLinear
    y_lin: EquiLinear
    w_gp: np.ndarray  # (n, 5, 5, 5) indexed [channel, out grade, grade of X, grade of Y]
    w_join: np.ndarray

    @classmethod
    def init(cls, rng, n_in: int, n: int, scale: float = 0.1) -> "ManyBodyProduct":
        return cls(
            EquiLinear.init(rng, n_in, n),
            EquiLinear.init(rng, n_in, n),
            rng.uniform(-scale, scale, (n, 5, 5, 5)),
            rng.uniform(-scale, scale, (n, 5, 5, 5)),
        )

    @cached_property
    def _tables(self):
        return (
            _graded_coefficients(self.w_gp, ga.GP_SIGN, ga.GP_TARGET),
            _graded_coefficients(self.w_join, ga.JOIN_SIGN, ga.JOIN_TARGET),
        )

    def products(self, a: np.ndarray):
        """Return ``(quadratic part, residual Y)``."""
        X = self.x_lin(a)
        Y = self.y_lin(a)
        t_gp, t_join = self._tables
        quad = kernels.blade_bilinear(X, Y, t_gp, ga.GP_TARGET) + kernels.blade_bilinear(X, Y, t_join, ga.JOIN_TARGET)
        return quad, Y

    def __call__(self, a: np.ndarray) -> np.ndarray:
        quad, Y = self.products(a)
        return quad + Y


def equi_linear(params: EquiLinear, x: np.ndarray) -> np.ndarray:
    return params(x)


def geometric_bilinear(params: GeometricBilinear, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return params(a, b)


def many_body_product(params: ManyBodyProduct, a: np.ndarray) -> np.ndarray:
    return params(a)
