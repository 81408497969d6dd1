"""Flow matching on rigid frames: prior, geodesic paths, Euler sampling, alignment and OT."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linear_sum_assignment

from .motors import ORTHO_TOL, Frames, orthonormalize, random_rotations, so3_exp, so3_log

T_MAX = 1.0 - 1e-9


@dataclass(frozen=True)
class VectorFieldSample:
    rot_field: np.ndarray  # (N, 3) rad per unit time, body frame
    trans_field: np.ndarray  # (N, 3) Angstrom per unit time

    def __post_init__(self):
        rot = np.asarray(self.rot_field, dtype=np.float64)
        trans = np.asarray(self.trans_field, dtype=np.float64)
        if rot.shape != trans.shape or rot.ndim != 2 or rot.shape[1] != 3:
            raise ValueError(f"vector field parts must both be (N, 3), got {rot.shape} and {trans.shape}")
        object.__setattr__(self, "rot_field", rot)
        object.__setattr__(self, "trans_field", trans)

    def __len__(self):
        return self.rot_field.shape[0]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.rot_field)) and np.all(np.isfinite(self.trans_field)))


@dataclass(frozen=True)
class OtPlan:
    permutation: np.ndarray  # prior i is paired with target permutation[i]
    cost: float


def _check_t(t: float, upper: float = 1.0) -> float:
    t = float(t)
    if not (0.0 <= t <= upper):
        raise ValueError(f"flow time {t} outside [0, {upper}]")
    return t


def _check_pair(a: Frames, b: Frames) -> None:
    if len(a) != len(b):
        raise ValueError(f"frame lists differ in length ({len(a)} vs {len(b)})")


def center(frames: Frames) -> Frames:
    return Frames(frames.rots, frames.trans - frames.trans.mean(axis=0))


def sample_prior(n_residues: int, seed: Union[int, np.random.Generator]) -> Frames:
    """Uniform rotations and zero-centred standard normal translations."""
    if n_residues < 1:
        raise ValueError("n_residues must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    rots = random_rotations(rng, n_residues)
    trans = rng.standard_normal((n_residues, 3))
    return center(Frames(rots, trans))


def geodesic_interpolate(T0: Frames, T1: Frames, t: float) -> Frames:
    _check_pair(T0, T1)
    t = _check_t(t)
    if t == 0.0:
        return Frames(T0.rots.copy(), T0.trans.copy())
    if t == 1.0:
        return Frames(T1.rots.copy(), T1.trans.copy())
    rel = so3_log(np.swapaxes(T0.rots, -1, -2) @ T1.rots)
    rots = T0.rots @ so3_exp(t * rel)
    trans = (1.0 - t) * T0.trans + t * T1.trans
    return Frames(rots, trans)


def conditional_vector_field(Tt: Frames, T1: Frames, t: float) -> VectorFieldSample:
    """Velocity at ``Tt`` of the geodesic that reaches ``T1`` at time one."""
    _check_pair(Tt, T1)
    t = float(t)
    if not 0.0 <= t:
        raise ValueError(f"flow time {t} is negative")
    if t > T_MAX:
        raise ValueError(f"flow time {t} too close to 1; the conditional field is singular there")
    inv = 1.0 / (1.0 - t)
    rot = so3_log(np.swapaxes(Tt.rots, -1, -2) @ T1.rots) * inv
    trans = (T1.trans - Tt.trans) * inv
    return VectorFieldSample(rot, trans)


def _stack(fields) -> VectorFieldSample:
    if isinstance(fields, VectorFieldSample):
        return fields
    fields = list(fields)
    if not fields:
        raise ValueError("empty vector field list")
    return VectorFieldSample(
        np.concatenate([f.rot_field for f in fields]), np.concatenate([f.trans_field for f in fields])
    )


def fm_loss(
    predicted: Union[VectorFieldSample, Sequence[VectorFieldSample]],
    target: Union[VectorFieldSample, Sequence[VectorFieldSample]],
    rot_weight: float = 1.0,
    trans_weight: float = 1.0,
) -> float:
    """Weighted mean squared error over all ``6N`` field components."""
    if not isinstance(predicted, VectorFieldSample) and not isinstance(target, VectorFieldSample):
        if len(predicted) != len(target):
            raise ValueError("predicted and target lists differ in length")
    p, q = _stack(predicted), _stack(target)
    if len(p) != len(q):
        raise ValueError(f"field lengths differ ({len(p)} vs {len(q)})")
    dr = p.rot_field - q.rot_field
    dx = p.trans_field - q.trans_field
    total = rot_weight * np.sum(dr * dr) + trans_weight * np.sum(dx * dx)
    return float(total / (6 * len(p)))


FieldFn = Callable[[Frames, float], VectorFieldSample]


def euler_step(frames: Frames, field: VectorFieldSample, dt: float, recenter: bool = True) -> Frames:
    rots = frames.rots @ so3_exp(dt * field.rot_field)
    drift = np.abs(np.swapaxes(rots, -1, -2) @ rots - np.eye(3)).max()
    if drift > ORTHO_TOL:
        rots = orthonormalize(rots)
    trans = frames.trans + dt * field.trans_field
    if recenter:
        trans = trans - trans.mean(axis=0)
    return Frames(rots, trans)


def integrate_flow(
    initial: Frames,
    field_fn: FieldFn,
    n_steps: int,
    recenter: bool = True,
    callback: Optional[Callable[[int, float, Frames], None]] = None,
) -> Frames:
    """Explicit Euler from ``t = 0`` to ``t = 1`` with ``n_steps`` uniform steps."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    dt = 1.0 / n_steps
    frames = initial
    for k in range(n_steps):
        t = k * dt
        field = field_fn(frames, t)
        if len(field) != len(frames):
            raise ValueError("field_fn returned a field of the wrong length")
        if not field.is_finite():
            raise FloatingPointError(f"field_fn returned non-finite values at t={t}")
        frames = euler_step(frames, field, dt, recenter)
        if callback is not None:
            callback(k, t + dt, frames)
    return frames


def _centered(points: np.ndarray, what: str) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"{what}: expected (n, 3) points, got {points.shape}")
    if points.shape[0] < 3:
        raise ValueError(f"{what}: need at least 3 points")
    if not np.all(np.isfinite(points)):
        raise ValueError(f"{what}: non-finite coordinates")
    return points - points.mean(axis=0)


def _is_collinear(centered: np.ndarray) -> bool:
    sv = np.linalg.svd(centered, compute_uv=False)
    return bool(sv[1] <= 1e-9 * max(sv[0], 1e-300))


def kabsch_rmsd(A: np.ndarray, B: np.ndarray, allow_degenerate: bool = False) -> tuple[float, Frames]:
    """Minimal RMSD between ``A`` and ``B`` over proper rigid motions.

    The returned frame maps ``A`` onto ``B``. Collinear or coincident point
    sets have a non-unique optimal rotation and are rejected unless
    ``allow_degenerate`` is set, in which case one optimal rotation is returned.
    """
    a = _centered(A, "first point set")
    b = _centered(B, "second point set")
    if a.shape != b.shape:
        raise ValueError(f"point sets differ in size ({a.shape[0]} vs {b.shape[0]})")
    if not allow_degenerate and (_is_collinear(a) or _is_collinear(b)):
        raise ValueError("point set is collinear; the optimal alignment is not unique")
    U, S, Vt = np.linalg.svd(b.T @ a)
    d = 1.0 if np.linalg.det(U @ Vt) >= 0.0 else -1.0
    D = np.diag([1.0, 1.0, d])
    R = U @ D @ Vt
    # E = |a|^2 + |b|^2 - 2 tr(R a^T b), with the trace given by the signed singular values
    msd = (np.sum(a * a) + np.sum(b * b) - 2.0 * (S[0] + S[1] + d * S[2])) / a.shape[0]
    rmsd = math.sqrt(max(msd, 0.0))
    x = np.mean(np.asarray(B, dtype=np.float64), axis=0) - R @ np.mean(np.asarray(A, dtype=np.float64), axis=0)
    return rmsd, Frames(R, x)


def _ca_set(item) -> np.ndarray:
    return item.trans if isinstance(item, Frames) else np.asarray(item, dtype=np.float64)


def ot_cost_matrix(priors: Sequence, targets: Sequence) -> np.ndarray:
    if len(priors) != len(targets):
        raise ValueError(f"batch sizes differ ({len(priors)} vs {len(targets)})")
    P = [_ca_set(p) for p in priors]
    Q = [_ca_set(q) for q in targets]
    sizes = {p.shape for p in P} | {q.shape for q in Q}
    if len(sizes) > 1:
        raise ValueError("all proteins in an OT batch must have the same number of residues")
    C = np.empty((len(P), len(Q)))
    for i, p in enumerate(P):
        for j, q in enumerate(Q):
            C[i, j] = kabsch_rmsd(p, q, allow_degenerate=True)[0]
    return C


def plan_cost(C: np.ndarray, permutation: np.ndarray) -> float:
    return math.fsum(C[i, j] for i, j in enumerate(permutation))


def minibatch_ot(priors: Sequence, targets: Sequence) -> OtPlan:
    """Pair whole proteins by exact assignment on the aligned-RMSD cost."""
    if len(priors) == 0:
        raise ValueError("empty batch")
    C = ot_cost_matrix(priors, targets)
    rows, cols = linear_sum_assignment(C)
    perm = np.empty(len(rows), dtype=np.int64)
    perm[rows] = cols
    return OtPlan(perm, plan_cost(C, perm))
