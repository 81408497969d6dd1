"""Self-test suite behind ``cliffordflow check-algebra``.

Each check draws its own random data from a seeded generator and reports a
worst-case error against a tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import algebra as ga
from . import kernels
from . import motors as mo
from .layers import EquiLinear, GeometricBilinear, ManyBodyProduct


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.error) and self.error <= self.tolerance)


def _bitmask_product(a: int, b: int) -> tuple[int, int]:
    """Blade product with blades as bitmasks (bit k <-> e_k); returns (sign, mask)."""
    swaps = 0
    shifted = a >> 1
    while shifted:
        swaps += bin(shifted & b).count("1")
        shifted >>= 1
    sign = -1 if swaps % 2 else 1
    if a & b & 1:  # e0 e0 = 0
        sign = 0
    return sign, a ^ b


def _mask(blade: tuple[int, ...]) -> int:
    return sum(1 << g for g in blade)


def check_cayley(rng) -> float:
    masks = [_mask(b) for b in ga.BLADES]
    index = {m: i for i, m in enumerate(masks)}
    bad = 0
    for i, a in enumerate(masks):
        for j, b in enumerate(masks):
            sign, m = _bitmask_product(a, b)
            got = ga.GP_SIGN[i, j]
            if got != sign or (sign != 0 and ga.GP_TARGET[i, j] != index[m]):
                bad += 1
    return float(bad)


def _rand(rng, *shape):
    return rng.standard_normal(shape + (16,))


def check_associativity(rng) -> float:
    a, b, c = _rand(rng, 500), _rand(rng, 500), _rand(rng, 500)
    lhs = ga.geometric_product(ga.geometric_product(a, b), c)
    rhs = ga.geometric_product(a, ga.geometric_product(b, c))
    return float(np.max(np.abs(lhs - rhs) / (1.0 + np.abs(lhs))))


def check_vector_wedge(rng) -> float:
    a = ga.grade_project(_rand(rng, 200), 1)
    b = ga.grade_project(_rand(rng, 200), 1)
    anti = 0.5 * (ga.geometric_product(a, b) - ga.geometric_product(b, a))
    return float(np.max(np.abs(ga.outer_product(a, b) - anti)))


def check_grade_sum(rng) -> float:
    x = _rand(rng, 200)
    return float(np.max(np.abs(sum(ga.grade_project(x, k) for k in range(5)) - x)))


def check_hodge_roundtrip(rng) -> float:
    x = _rand(rng, 200)
    return float(np.max(np.abs(ga.inverse_hodge_dual(ga.hodge_dual(x)) - x)))


def check_point_distance(rng) -> float:
    p, q = rng.uniform(-10, 10, (2, 200, 3))
    d = ga.dist_point_point(ga.embed_point(p), ga.embed_point(q))
    return float(np.max(np.abs(d - np.linalg.norm(p - q, axis=-1))))


def check_point_plane_distance(rng) -> float:
    n = rng.standard_normal((200, 3))
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    d = rng.uniform(-5, 5, 200)
    x = rng.uniform(-10, 10, (200, 3))
    got = ga.dist_point_plane(ga.embed_point(x), ga.embed_plane(n, d))
    return float(np.max(np.abs(got - np.abs(np.einsum("ni,ni->n", n, x) + d))))


def check_motor_action(rng) -> float:
    frames = mo.random_frames(rng, 200)
    pts = rng.uniform(-10, 10, (200, 5, 3))
    M = mo.motor_from_frame(frames)
    return float(np.max(np.abs(mo.motor_apply_points(M[:, None], pts) - frames.apply(pts))))


def _random_motor(rng, n=1):
    return mo.motor_from_frame(mo.random_frames(rng, n, scale=3.0))[:, None, :]


def _act(M, x):
    return ga.geometric_product(ga.geometric_product(M, x), ga.reverse(M))


def check_equilinear(rng) -> float:
    layer = EquiLinear.init(rng, 4, 3)
    x, M = _rand(rng, 50, 4), _random_motor(rng, 50)
    return float(np.max(np.abs(layer(_act(M, x)) - _act(M, layer(x)))))


def check_bilinear(rng) -> float:
    layer = GeometricBilinear.init(rng, 3, 2, 4, 3)
    a, b, M = _rand(rng, 50, 3), _rand(rng, 50, 2), _random_motor(rng, 50)
    return float(np.max(np.abs(layer(_act(M, a), _act(M, b)) - _act(M, layer(a, b)))))


def check_many_body(rng) -> float:
    layer = ManyBodyProduct.init(rng, 3, 4, scale=1.0)
    x, M = _rand(rng, 50, 3), _random_motor(rng, 50)
    return float(np.max(np.abs(layer(_act(M, x)) - _act(M, layer(x)))))


def check_kernel_backends(rng) -> float:
    if len(kernels.AVAILABLE) < 2:
        return 0.0
    a, b = _rand(rng, 64, 3), _rand(rng, 64, 3)
    results = []
    for name in kernels.AVAILABLE:
        with kernels.use_backend(name):
            results.append(ga.geometric_product(a, b))
    return float(max(np.max(np.abs(r - results[0])) for r in results))


CHECKS: list[tuple[str, Callable, float]] = [
    ("cayley table vs bitmask oracle (mismatches)", check_cayley, 0.0),
    ("associativity (relative)", check_associativity, 1e-12),
    ("vector wedge = antisymmetric part", check_vector_wedge, 1e-12),
    ("grade projections sum to input", check_grade_sum, 0.0),
    ("hodge dual round trip", check_hodge_roundtrip, 0.0),
    ("point-point distance", check_point_distance, 1e-10),
    ("point-plane distance", check_point_plane_distance, 1e-10),
    ("motor action vs matrix action", check_motor_action, 1e-10),
    ("EquiLinear equivariance", check_equilinear, 1e-8),
    ("geometric bilinear equivariance", check_bilinear, 1e-8),
    ("many-body product equivariance", check_many_body, 1e-8),
    ("kernel backends agree", check_kernel_backends, 1e-12),
]


def run_checks(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    return [CheckResult(name, fn(rng), tol) for name, fn, tol in CHECKS]
