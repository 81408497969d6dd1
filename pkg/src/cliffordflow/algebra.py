"""Dense multivector arithmetic in the projective geometric algebra Cl(3,0,1).

Multivectors are float64 arrays whose last axis holds 16 coefficients in the
basis order::

    1, e0, e1, e2, e3, e01, e02, e03, e12, e13, e23,
    e012, e013, e023, e123, e0123

``e0`` squares to zero, ``e1..e3`` square to one. Every sign table in this
module is generated from a symbolic blade multiplication (concatenate the
generator lists, bubble-sort them while counting transpositions, contract
repeated generators through the metric), so the conventions are consistent by
construction rather than typed in by hand.

Geometric conventions:

* a plane ``n.x + d = 0`` is the vector ``n1 e1 + n2 e2 + n3 e3 + d e0``;
* a point is the meet of the three coordinate planes through it,
  ``(e1 - x e0) ^ (e2 - y e0) ^ (e3 - z e0) = e123 - x e023 + y e013 - z e012``;
* the Hodge dual of a basis blade ``X`` is the complementary blade ``s Xc``
  with the sign fixed by ``X (s Xc) = (X_e ~X_e) e0123`` (``X_e`` being ``X``
  with ``e0`` removed). This gives, e.g., ``*e03 = e12`` and ``*e0 = e123``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from . import kernels

NORM_TOL = 1e-9

BLADES: tuple[tuple[int, ...], ...] = (
    (),
    (0,), (1,), (2,), (3,),
    (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
    (0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3),
    (0, 1, 2, 3),
)
BLADE_NAMES = tuple("1" if not b else "e" + "".join(map(str, b)) for b in BLADES)
BLADE_INDEX = {b: i for i, b in enumerate(BLADES)}
METRIC = (0.0, 1.0, 1.0, 1.0)

GRADES = np.array([len(b) for b in BLADES])
GRADE_MASKS = np.stack([(GRADES == k).astype(np.float64) for k in range(5)])
# blades that contain e0 (degenerate direction)
E0_MASK = np.array([0 in b for b in BLADES])

IDX = {name: i for i, name in enumerate(BLADE_NAMES)}


def multiply_blades(left: tuple[int, ...], right: tuple[int, ...]) -> tuple[float, tuple[int, ...]]:
    """Symbolic product of two basis blades, returned as ``(sign, blade)``."""
    word = list(left) + list(right)
    sign = 1.0
    # bubble sort, one sign flip per transposition of distinct generators
    for end in range(len(word) - 1, 0, -1):
        for k in range(end):
            if word[k] > word[k + 1]:
                word[k], word[k + 1] = word[k + 1], word[k]
                sign = -sign
    out: list[int] = []
    for g in word:
        if out and out[-1] == g:
            out.pop()
            sign *= METRIC[g]
        else:
            out.append(g)
    return sign, tuple(out)


def _build_product_tables():
    sign = np.zeros((16, 16))
    target = np.zeros((16, 16), dtype=np.int64)
    for i, a in enumerate(BLADES):
        for j, b in enumerate(BLADES):
            s, blade = multiply_blades(a, b)
            sign[i, j] = s
            target[i, j] = BLADE_INDEX[blade]
    return sign, target


GP_SIGN, GP_TARGET = _build_product_tables()
GP_SIGN.setflags(write=False)
GP_TARGET.setflags(write=False)

# outer product keeps only the blade pairs with no shared generator
WEDGE_SIGN = np.array(
    [[GP_SIGN[i, j] if not set(a) & set(b) else 0.0 for j, b in enumerate(BLADES)] for i, a in enumerate(BLADES)]
)
WEDGE_SIGN.setflags(write=False)

REVERSE_SIGNS = np.array([(-1.0) ** (g * (g - 1) // 2) for g in GRADES])
INVOLUTION_SIGNS = np.array([(-1.0) ** g for g in GRADES])


def _build_hodge():
    perm = np.zeros(16, dtype=np.int64)
    signs = np.zeros(16)
    full = BLADE_INDEX[(0, 1, 2, 3)]
    for i, blade in enumerate(BLADES):
        comp = tuple(g for g in range(4) if g not in blade)
        j = BLADE_INDEX[comp]
        euclid = tuple(g for g in blade if g != 0)
        # X_e ~X_e for a Euclidean basis blade
        s_e, _ = multiply_blades(euclid, tuple(reversed(euclid)))
        s_xc, blade_xc = multiply_blades(blade, comp)
        assert BLADE_INDEX[blade_xc] == full and s_xc != 0
        perm[i] = j
        signs[i] = s_e / s_xc
    return perm, signs


# hodge_dual(x)[HODGE_PERM[i]] = HODGE_SIGNS[i] * x[i]
HODGE_PERM, HODGE_SIGNS = _build_hodge()


def _build_join_table():
    sign = np.zeros((16, 16))
    target = np.zeros((16, 16), dtype=np.int64)
    inv_perm = np.argsort(HODGE_PERM)
    for i in range(16):
        for j in range(16):
            # join(e_i, e_j) = inv_hodge(hodge(e_j) ^ hodge(e_i))
            dj, di = HODGE_PERM[j], HODGE_PERM[i]
            s = HODGE_SIGNS[j] * HODGE_SIGNS[i] * WEDGE_SIGN[dj, di]
            t = GP_TARGET[dj, di]
            # inverse dual maps blade t back to inv_perm[t] with the same sign
            sign[i, j] = s * HODGE_SIGNS[inv_perm[t]]
            target[i, j] = inv_perm[t]
    return sign, target


JOIN_SIGN, JOIN_TARGET = _build_join_table()
JOIN_SIGN.setflags(write=False)
JOIN_TARGET.setflags(write=False)

# left multiplication by e0 as a 16x16 matrix
E0_LEFT = np.zeros((16, 16))
for _j in range(16):
    E0_LEFT[GP_TARGET[1, _j], _j] += GP_SIGN[1, _j]
del _j


def basis(name: str) -> np.ndarray:
    """Coefficient vector of a single basis blade, e.g. ``basis("e12")``."""
    out = np.zeros(16)
    out[IDX[name]] = 1.0
    return out


def scalar(value: float) -> np.ndarray:
    out = np.zeros(16)
    out[0] = value
    return out


def geometric_product(a, b) -> np.ndarray:
    return kernels.blade_bilinear(a, b, GP_SIGN, GP_TARGET)


def outer_product(a, b) -> np.ndarray:
    """Exterior product (the meet)."""
    return kernels.blade_bilinear(a, b, WEDGE_SIGN, GP_TARGET)


def join(a, b) -> np.ndarray:
    """Regressive product ``inv_hodge(hodge(b) ^ hodge(a))``."""
    return kernels.blade_bilinear(a, b, JOIN_SIGN, JOIN_TARGET)


def reverse(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) * REVERSE_SIGNS


def grade_involution(x) -> np.ndarray:
    return np.asarray(x, dtype=np.float64) * INVOLUTION_SIGNS


def grade_project(x, k: int) -> np.ndarray:
    if k not in range(5):
        raise ValueError(f"grade must be in 0..4, got {k}")
    return np.asarray(x, dtype=np.float64) * GRADE_MASKS[k]


def grades_of(x, atol: float = 0.0) -> set[int]:
    x = np.asarray(x)
    return {int(GRADES[i]) for i in range(16) if np.any(np.abs(x[..., i]) > atol)}


def is_grade(x, k: int, atol: float = 0.0) -> bool:
    x = np.asarray(x)
    return bool(np.all(np.abs(x[..., GRADES != k]) <= atol))


def norm(x) -> np.ndarray:
    """``sqrt(<~x x>_0)``; only blades without e0 contribute."""
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(np.sum(x[..., ~E0_MASK] ** 2, axis=-1))


def hodge_dual(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    out[..., HODGE_PERM] = x * HODGE_SIGNS
    return out


def inverse_hodge_dual(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x[..., HODGE_PERM] * HODGE_SIGNS


def infinity_norm(x) -> np.ndarray:
    return norm(hodge_dual(x))


def inner_product_vectors(a, b) -> np.ndarray:
    """Symmetric part ``(ab + ba) / 2`` of two grade-1 multivectors, as a scalar."""
    if not (is_grade(a, 1) and is_grade(b, 1)):
        raise ValueError("inner_product_vectors expects pure grade-1 inputs")
    sym = 0.5 * (geometric_product(a, b) + geometric_product(b, a))
    return sym[..., 0]


def _check_unit(x, what: str) -> None:
    n = norm(x)
    if np.any(np.abs(n - 1.0) > NORM_TOL):
        raise ValueError(f"{what} must have unit norm (got {np.max(np.abs(n - 1.0)):.3e} deviation)")


def sandwich(versor, x, odd: bool = False) -> np.ndarray:
    """Apply a unit versor: ``V x ~V`` (even) or ``V x^ ~V`` (odd, i.e. reflections)."""
    _check_unit(versor, "versor")
    x = grade_involution(x) if odd else np.asarray(x, dtype=np.float64)
    return geometric_product(geometric_product(versor, x), reverse(versor))


def embed_point(x, y=None, z=None) -> np.ndarray:
    """Grade-3 point; accepts ``(x, y, z)`` scalars or an array ``(..., 3)``."""
    if y is None:
        p = np.asarray(x, dtype=np.float64)
    else:
        p = np.stack(np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (x, y, z))), axis=-1)
    out = np.zeros(p.shape[:-1] + (16,))
    out[..., IDX["e123"]] = 1.0
    out[..., IDX["e023"]] = -p[..., 0]
    out[..., IDX["e013"]] = p[..., 1]
    out[..., IDX["e012"]] = -p[..., 2]
    return out


def extract_point(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    w = P[..., IDX["e123"]]
    if np.any(w == 0.0):
        raise ValueError("cannot extract an ideal point (e123 coefficient is zero)")
    return np.stack([-P[..., IDX["e023"]] / w, P[..., IDX["e013"]] / w, -P[..., IDX["e012"]] / w], axis=-1)


def embed_plane(normal, d) -> np.ndarray:
    """Grade-1 plane ``{x : normal . x + d = 0}``."""
    n = np.asarray(normal, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    out = np.zeros(np.broadcast_shapes(n.shape[:-1], d.shape) + (16,))
    out[..., IDX["e0"]] = d
    out[..., IDX["e1"]] = n[..., 0]
    out[..., IDX["e2"]] = n[..., 1]
    out[..., IDX["e3"]] = n[..., 2]
    return out


# metric relations on normalized inputs

def dist_point_point(P1, P2) -> np.ndarray:
    _check_unit(P1, "point")
    _check_unit(P2, "point")
    return norm(join(P1, P2))


def dist_point_line(P, L) -> np.ndarray:
    _check_unit(P, "point")
    _check_unit(L, "line")
    return norm(join(P, L))


def dist_point_plane(P, p) -> np.ndarray:
    _check_unit(P, "point")
    _check_unit(p, "plane")
    return infinity_norm(outer_product(P, p))


def angle_plane_plane(p1, p2) -> np.ndarray:
    _check_unit(p1, "plane")
    _check_unit(p2, "plane")
    return np.arcsin(np.clip(norm(outer_product(p1, p2)), 0.0, 1.0))


def angle_plane_line(p, L) -> np.ndarray:
    _check_unit(p, "plane")
    _check_unit(L, "line")
    return np.arcsin(np.clip(norm(grade_project(geometric_product(p, L), 3)), 0.0, 1.0))


def normalize(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return x / norm(x)[..., None]


def cayley_table() -> dict:
    """Geometric product table as plain data (for the JSON debug dump)."""
    return {
        "basis": list(BLADE_NAMES),
        "entries": [
            [
                {"target": BLADE_NAMES[GP_TARGET[i, j]], "sign": int(GP_SIGN[i, j])}
                for j in range(16)
            ]
            for i in range(16)
        ],
    }


Scalar = Union[int, float]


@dataclass(frozen=True, eq=False)
class Multivector:
    """Thin value wrapper around a coefficient array with operator sugar.

    ``*`` geometric product, ``^`` outer product (meet), ``&`` join,
    ``~`` reversion.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (16,):
            raise ValueError(f"expected 16 coefficients, got shape {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def blade(cls, name: str, value: float = 1.0) -> "Multivector":
        return cls(value * basis(name))

    @classmethod
    def point(cls, x: float, y: float, z: float) -> "Multivector":
        return cls(embed_point(x, y, z))

    @classmethod
    def plane(cls, normal, d: float) -> "Multivector":
        return cls(embed_plane(normal, d))

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Multivector(scalar(other))
        return Multivector(self.coeffs + other.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return Multivector(-self.coeffs)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Multivector(other * self.coeffs)
        return Multivector(geometric_product(self.coeffs, other.coeffs))

    def __rmul__(self, other):
        if isinstance(other, (int, float)):
            return Multivector(other * self.coeffs)
        return NotImplemented

    def __xor__(self, other):
        return Multivector(outer_product(self.coeffs, other.coeffs))

    def __and__(self, other):
        return Multivector(join(self.coeffs, other.coeffs))

    def __invert__(self):
        return Multivector(reverse(self.coeffs))

    def grade(self, k: int) -> "Multivector":
        return Multivector(grade_project(self.coeffs, k))

    def involute(self) -> "Multivector":
        return Multivector(grade_involution(self.coeffs))

    def dual(self) -> "Multivector":
        return Multivector(hodge_dual(self.coeffs))

    def norm(self) -> float:
        return float(norm(self.coeffs))

    def inf_norm(self) -> float:
        return float(infinity_norm(self.coeffs))

    def allclose(self, other, atol: float = 1e-12) -> bool:
        if isinstance(other, (int, float)):
            other = Multivector(scalar(other))
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0.0, atol=atol))

    def __eq__(self, other):
        if isinstance(other, (int, float)):
            other = Multivector(scalar(other))
        if not isinstance(other, Multivector):
            return NotImplemented
        return bool(np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None

    def __repr__(self):
        terms = [f"{c:+g}{'' if n == '1' else '*' + n}" for c, n in zip(self.coeffs, BLADE_NAMES) if c != 0]
        return "Multivector(" + (" ".join(terms) if terms else "0") + ")"
