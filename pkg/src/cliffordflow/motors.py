"""Rigid-body frames, their motor representation, and SO(3) exponential maps.

A frame ``(R, x)`` acts on points as ``p -> R p + x``. Its motor is
``translator(x) * rotor(R)``: rotate about the origin, then translate. Unit
quaternions ``(w, x, y, z)`` correspond to rotors ``w - x e23 + y e13 - z e12``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as ga

ORTHO_TOL = 1e-9

# N, CA, C in the residue frame (Angstrom); C lies on the local x-axis and N in the xy-plane
IDEAL_BACKBONE = np.array(
    [
        [-0.572, 1.337, 0.0],
        [0.0, 0.0, 0.0],
        [1.526, 0.0, 0.0],
    ]
)

_W, _E23, _E13, _E12 = ga.IDX["1"], ga.IDX["e23"], ga.IDX["e13"], ga.IDX["e12"]
_E01, _E02, _E03 = ga.IDX["e01"], ga.IDX["e02"], ga.IDX["e03"]
EVEN_MASK = (ga.GRADES % 2 == 0)


class DegenerateResidueError(ValueError):
    def __init__(self, index: int, reason: str):
        super().__init__(f"residue {index}: {reason}")
        self.index = index


@dataclass(frozen=True)
class Frames:
    """Batch of rigid frames: ``rots`` ``(N, 3, 3)``, ``trans`` ``(N, 3)`` in Angstrom."""

    rots: np.ndarray
    trans: np.ndarray

    def __post_init__(self):
        rots = np.asarray(self.rots, dtype=np.float64)
        trans = np.asarray(self.trans, dtype=np.float64)
        if rots.ndim == 2:
            rots = rots[None]
        if trans.ndim == 1:
            trans = trans[None]
        if rots.shape[-2:] != (3, 3) or trans.shape[-1] != 3 or rots.shape[0] != trans.shape[0]:
            raise ValueError(f"inconsistent frame shapes {rots.shape} and {trans.shape}")
        object.__setattr__(self, "rots", rots)
        object.__setattr__(self, "trans", trans)

    def __len__(self):
        return self.rots.shape[0]

    @classmethod
    def identity(cls, n: int) -> "Frames":
        return cls(np.broadcast_to(np.eye(3), (n, 3, 3)).copy(), np.zeros((n, 3)))

    def validate(self) -> "Frames":
        check_rotation(self.rots)
        if not np.all(np.isfinite(self.trans)):
            raise ValueError("non-finite frame translation")
        return self

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map local points ``(N, ..., 3)`` to global coordinates."""
        extra = points.ndim - 2
        R = self.rots.reshape(self.rots.shape[:1] + (1,) * extra + (3, 3))
        x = self.trans.reshape(self.trans.shape[:1] + (1,) * extra + (3,))
        return np.einsum("...ij,...j->...i", R, points) + x

    def compose(self, other: "Frames") -> "Frames":
        """``self o other``: apply ``other`` first."""
        return Frames(self.rots @ other.rots, np.einsum("nij,nj->ni", self.rots, other.trans) + self.trans)

    def inverse(self) -> "Frames":
        rt = np.swapaxes(self.rots, -1, -2)
        return Frames(rt, -np.einsum("nij,nj->ni", rt, self.trans))

    def __getitem__(self, idx) -> "Frames":
        return Frames(self.rots[idx], self.trans[idx])


def check_rotation(R: np.ndarray, tol: float = ORTHO_TOL) -> None:
    R = np.asarray(R, dtype=np.float64)
    if not np.all(np.isfinite(R)):
        raise ValueError("rotation contains non-finite values")
    err = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max(initial=0.0)
    if err > tol:
        raise ValueError(f"rotation is not orthonormal (max |R^T R - I| = {err:.3e})")
    if np.any(np.abs(np.linalg.det(R) - 1.0) > tol):
        raise ValueError("rotation determinant is not +1")


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Nearest rotation in Frobenius norm."""
    U, _, Vt = np.linalg.svd(R)
    d = np.sign(np.linalg.det(U @ Vt))
    U = U.copy()
    U[..., :, -1] *= d[..., None]
    return U @ Vt


def hat(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    K = np.zeros(w.shape[:-1] + (3, 3))
    K[..., 0, 1], K[..., 0, 2] = -w[..., 2], w[..., 1]
    K[..., 1, 0], K[..., 1, 2] = w[..., 2], -w[..., 0]
    K[..., 2, 0], K[..., 2, 1] = -w[..., 1], w[..., 0]
    return K


def vee(K: np.ndarray) -> np.ndarray:
    return np.stack([K[..., 2, 1], K[..., 0, 2], K[..., 1, 0]], axis=-1)


def so3_exp(omega: np.ndarray) -> np.ndarray:
    """Rodrigues formula for rotation vectors ``(..., 3)``."""
    omega = np.asarray(omega, dtype=np.float64)
    theta = np.linalg.norm(omega, axis=-1)[..., None, None]
    K = hat(omega)
    small = theta < 1e-6
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + a * K + b * (K @ K)


def so3_log(R: np.ndarray, check: bool = True) -> np.ndarray:
    """Principal rotation vector (``|omega| <= pi``) of rotation matrices ``(..., 3, 3)``."""
    R = np.asarray(R, dtype=np.float64)
    if check:
        check_rotation(R)
    anti = 0.5 * vee(R - np.swapaxes(R, -1, -2))  # sin(theta) * axis
    s = np.linalg.norm(anti, axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(s, c)

    small = theta < 1e-6
    safe_s = np.where(s == 0.0, 1.0, s)
    scale = np.where(small, 1.0 + theta**2 / 6.0, theta / safe_s)
    out = scale[..., None] * anti

    near_pi = theta > np.pi - 1e-2
    if np.any(near_pi):
        Rn = R[near_pi]
        cn, tn, an = c[near_pi], theta[near_pi], anti[near_pi]
        # symmetric part: (R + R^T)/2 - cos(theta) I = (1 - cos(theta)) u u^T
        S = 0.5 * (Rn + np.swapaxes(Rn, -1, -2)) - cn[:, None, None] * np.eye(3)
        k = np.argmax(np.diagonal(S, axis1=-2, axis2=-1), axis=-1)
        col = S[np.arange(len(k)), :, k]
        u = col / np.linalg.norm(col, axis=-1, keepdims=True)
        # axis sign from the antisymmetric part; at exactly pi both signs are valid
        flip = np.einsum("ni,ni->n", u, an) < 0.0
        u[flip] *= -1.0
        out[near_pi] = tn[:, None] * u
    return out


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], -1),
            np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], -1),
            np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], -1),
        ],
        -2,
    )


def matrix_to_quat(R: np.ndarray) -> np.ndarray:
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0`` (Shepperd's method)."""
    R = np.asarray(R, dtype=np.float64)
    tr = np.trace(R, axis1=-2, axis2=-1)
    cands = np.stack(
        [
            np.stack([1 + tr, R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]], -1),
            np.stack([R[..., 2, 1] - R[..., 1, 2], 1 + 2 * R[..., 0, 0] - tr, R[..., 0, 1] + R[..., 1, 0], R[..., 0, 2] + R[..., 2, 0]], -1),
            np.stack([R[..., 0, 2] - R[..., 2, 0], R[..., 0, 1] + R[..., 1, 0], 1 + 2 * R[..., 1, 1] - tr, R[..., 1, 2] + R[..., 2, 1]], -1),
            np.stack([R[..., 1, 0] - R[..., 0, 1], R[..., 0, 2] + R[..., 2, 0], R[..., 1, 2] + R[..., 2, 1], 1 + 2 * R[..., 2, 2] - tr], -1),
        ],
        -2,
    )
    diag = np.stack([tr, R[..., 0, 0], R[..., 1, 1], R[..., 2, 2]], -1)
    k = np.argmax(diag, axis=-1)
    q = np.take_along_axis(cands, k[..., None, None], axis=-2)[..., 0, :]
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return np.where(q[..., :1] < 0, -q, q)


def rotor_from_quat(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    out = np.zeros(q.shape[:-1] + (16,))
    out[..., _W] = q[..., 0]
    out[..., _E23] = -q[..., 1]
    out[..., _E13] = q[..., 2]
    out[..., _E12] = -q[..., 3]
    return out


def quat_from_motor(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=np.float64)
    return np.stack([M[..., _W], -M[..., _E23], M[..., _E13], -M[..., _E12]], axis=-1)


def embed_rotor(b, c, d) -> np.ndarray:
    """Unit rotor from the quaternion ``(1, b, c, d) / sqrt(1 + b^2 + c^2 + d^2)``."""
    b, c, d = np.broadcast_arrays(*(np.asarray(v, dtype=np.float64) for v in (b, c, d)))
    q = np.stack([np.ones_like(b), b, c, d], axis=-1)
    return rotor_from_quat(q / np.sqrt(1.0 + b * b + c * c + d * d)[..., None])


def embed_translator(t) -> np.ndarray:
    """Motor translating every point by ``t``: ``1 - (t1 e01 + t2 e02 + t3 e03) / 2``."""
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros(t.shape[:-1] + (16,))
    out[..., _W] = 1.0
    out[..., _E01] = -0.5 * t[..., 0]
    out[..., _E02] = -0.5 * t[..., 1]
    out[..., _E03] = -0.5 * t[..., 2]
    return out


def motor_compose(a, b) -> np.ndarray:
    return ga.geometric_product(a, b)


def motor_inverse(m) -> np.ndarray:
    return ga.reverse(m)


def relative_motor(a, b) -> np.ndarray:
    """``a^-1 b``: ``b`` expressed in the frame of ``a``."""
    return ga.geometric_product(ga.reverse(a), b)


def check_motor(m, tol: float = ORTHO_TOL) -> None:
    m = np.asarray(m)
    if np.any(np.abs(m[..., ~EVEN_MASK]) > 0.0):
        raise ValueError("motor has odd-grade components")
    if np.any(np.abs(ga.norm(m) - 1.0) > tol):
        raise ValueError("motor is not unit norm")


def motor_from_frame(frames: Frames) -> np.ndarray:
    frames = frames if isinstance(frames, Frames) else Frames(*frames)
    check_rotation(frames.rots)
    rotor = rotor_from_quat(matrix_to_quat(frames.rots))
    return ga.geometric_product(embed_translator(frames.trans), rotor)


def frame_from_motor(M) -> Frames:
    M = np.asarray(M, dtype=np.float64)
    if M.ndim == 1:
        M = M[None]
    q = quat_from_motor(M)
    R = quat_to_matrix(q)
    # M = T R  =>  T = M ~R ; rotor part is q normalised
    rotor = rotor_from_quat(q / np.linalg.norm(q, axis=-1, keepdims=True))
    T = ga.geometric_product(M, ga.reverse(rotor))
    t = -2.0 * np.stack([T[..., _E01], T[..., _E02], T[..., _E03]], axis=-1)
    return Frames(R, t)


def motor_apply_points(M, points) -> np.ndarray:
    return ga.extract_point(ga.sandwich(M, ga.embed_point(points)))


def frames_from_backbone(atoms: np.ndarray, eps: float = 1e-6) -> Frames:
    """Gram-Schmidt frames from ``(N, 3, 3)`` atoms ordered N, CA, C per residue."""
    atoms = np.asarray(atoms, dtype=np.float64)
    if atoms.ndim != 3 or atoms.shape[1:] != (3, 3):
        raise ValueError(f"expected (n_residues, 3, 3) backbone atoms, got {atoms.shape}")
    n_at, ca, c_at = atoms[:, 0], atoms[:, 1], atoms[:, 2]
    v1 = c_at - ca
    v2 = n_at - ca
    n1 = np.linalg.norm(v1, axis=-1)
    for i in np.flatnonzero(n1 < eps):
        raise DegenerateResidueError(int(i), "C coincides with CA")
    u1 = v1 / n1[:, None]
    w2 = v2 - np.einsum("ni,ni->n", v2, u1)[:, None] * u1
    n2 = np.linalg.norm(w2, axis=-1)
    for i in np.flatnonzero(n2 < eps):
        raise DegenerateResidueError(int(i), "N, CA and C are collinear or coincident")
    u2 = w2 / n2[:, None]
    u3 = np.cross(u1, u2)
    return Frames(np.stack([u1, u2, u3], axis=-1), ca.copy())


def backbone_from_frames(frames: Frames, ideal: np.ndarray = IDEAL_BACKBONE) -> np.ndarray:
    """Place idealized N, CA, C atoms in every frame; returns ``(N, 3, 3)``."""
    ideal = np.asarray(ideal, dtype=np.float64)
    if ideal.shape != (3, 3) or np.any(ideal[1] != 0.0):
        raise ValueError("ideal backbone must be (3, 3) with CA at the local origin")
    atoms = np.einsum("nij,aj->nai", frames.rots, ideal) + frames.trans[:, None, :]
    atoms[:, 1] = frames.trans
    return atoms


def random_rotations(rng: np.random.Generator, n: int) -> np.ndarray:
    """Uniform rotations via normalized Gaussian quaternions."""
    q = rng.standard_normal((n, 4))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return quat_to_matrix(q)


def random_frames(rng: np.random.Generator, n: int, scale: float = 10.0) -> Frames:
    return Frames(random_rotations(rng, n), scale * rng.standard_normal((n, 3)))
