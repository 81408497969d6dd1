"""Reference implementations used by the tests.

None of these import the package's product tables; they recompute everything
from first principles so that agreement is meaningful.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

NAMES = ["1", "e0", "e1", "e2", "e3", "e01", "e02", "e03", "e12", "e13", "e23",
         "e012", "e013", "e023", "e123", "e0123"]
SQUARE = {0: 0, 1: 1, 2: 1, 3: 1}


def _gens(name: str) -> list[int]:
    return [] if name == "1" else [int(ch) for ch in name[1:]]


def blade_product(left: str, right: str) -> tuple[int, str]:
    """Product of two basis blades by inversion counting.

    Moving each generator of ``right`` leftwards past the larger generators of
    ``left`` costs one sign flip per pair ``a > b``; equal generators then meet
    and contract through the metric.
    """
    a, b = _gens(left), _gens(right)
    flips = sum(1 for x in a for y in b if x > y)
    sign = -1 if flips % 2 else 1
    for g in set(a) & set(b):
        sign *= SQUARE[g]
    rest = sorted(set(a) ^ set(b))
    return sign, "1" if not rest else "e" + "".join(map(str, rest))


def cayley_oracle() -> tuple[np.ndarray, np.ndarray]:
    sign = np.zeros((16, 16), dtype=int)
    target = np.zeros((16, 16), dtype=int)
    for i, x in enumerate(NAMES):
        for j, y in enumerate(NAMES):
            s, name = blade_product(x, y)
            sign[i, j] = s
            target[i, j] = NAMES.index(name)
    return sign, target


def dense_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense geometric product via the oracle table, one pair at a time."""
    sign, target = cayley_oracle()
    out = np.zeros(16)
    for i in range(16):
        for j in range(16):
            if sign[i, j]:
                out[target[i, j]] += sign[i, j] * a[i] * b[j]
    return out


# Cartesian closed forms ------------------------------------------------------

def point_line_distance(x, u, v) -> float:
    """Distance from ``x`` to the line through ``u`` and ``v``."""
    d = np.asarray(v) - np.asarray(u)
    return float(np.linalg.norm(np.cross(np.asarray(x) - u, d)) / np.linalg.norm(d))


def plane_plane_angle(n1, n2) -> float:
    """Acute angle between planes with unit normals ``n1``, ``n2``."""
    return float(math.asin(min(1.0, np.linalg.norm(np.cross(n1, n2)))))


def plane_line_angle(n, direction) -> float:
    d = np.asarray(direction) / np.linalg.norm(direction)
    return float(math.asin(min(1.0, abs(float(np.dot(n, d))))))


def reflect_point(x, n, d) -> np.ndarray:
    """Mirror ``x`` in the plane ``n . y + d = 0`` (``n`` unit)."""
    x = np.asarray(x, dtype=float)
    return x - 2.0 * (np.dot(n, x) + d) * np.asarray(n)


def rodrigues(axis, angle) -> np.ndarray:
    k = np.asarray(axis, dtype=float)
    k = k / np.linalg.norm(k)
    K = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * K @ K


# Alignment and assignment ----------------------------------------------------

def rotation_grid(n_angles: int = 24, n_axes: int = 400, seed: int = 0) -> np.ndarray:
    """Rotations from a Fibonacci sphere of axes times evenly spaced angles."""
    i = np.arange(n_axes) + 0.5
    phi = np.arccos(1 - 2 * i / n_axes)
    theta = math.pi * (1 + 5 ** 0.5) * i
    axes = np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=-1)
    mats = [np.eye(3)]
    for ax in axes:
        for ang in np.linspace(0, math.pi, n_angles + 1)[1:]:
            mats.append(rodrigues(ax, ang))
    return np.array(mats)


def grid_rmsd(A, B, grid) -> float:
    """Minimum centred RMSD over a finite set of rotations."""
    a = A - A.mean(axis=0)
    b = B - B.mean(axis=0)
    diffs = np.einsum("rij,nj->rni", grid, a) - b
    return float(np.sqrt((diffs ** 2).sum(axis=(1, 2)).min() / len(A)))


def brute_force_assignment(C: np.ndarray) -> tuple[tuple[int, ...], float]:
    best, best_perm = math.inf, None
    for perm in itertools.permutations(range(C.shape[0])):
        cost = math.fsum(C[i, j] for i, j in enumerate(perm))
        if cost < best:
            best, best_perm = cost, perm
    return best_perm, best


# Uniform rotation angle law --------------------------------------------------

def so3_angle_cdf(theta):
    """CDF of the rotation angle of a Haar-random rotation, density (1 - cos)/pi."""
    theta = np.asarray(theta, dtype=float)
    return (theta - np.sin(theta)) / math.pi
