"""Clifford frame attention, the motor backbone update, and the stacked network.

Frames enter the network in Angstrom and are converted to motors after
scaling translations by ``config.trans_scale``. Every geometric quantity that
feeds a learned layer is expressed in a residue's local frame, so scalar
outputs are invariant and predicted frames transform with a global motion.

The sequence transformer, node transition, edge update and input embedders are
plain stand-ins (post-norm multi-head attention, ReLU MLPs, RBF distance
features); only the attention block and backbone update follow the CFA
algorithm in detail.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import algebra as ga
from . import motors as mo
from .layers import EquiLinear, GeometricBilinear, ManyBodyProduct
from .nn import MLP, LayerNorm, Linear, count_params, relu, sinusoidal_embedding, softmax, softplus


@dataclass(frozen=True)
class CfaConfig:
    n_heads: int = 8
    node_dim: int = 240
    edge_dim: int = 120
    c_hidden: int = 128
    n_query_points: int = 8
    n_point_values: int = 8
    n_blocks: int = 6
    # stand-in sub-layers
    seq_tfmr_heads: int = 4
    seq_tfmr_layers: int = 2
    bb_hidden: int = 48
    edge_feat_dim: int = 64
    pos_emb_dim: int = 128
    time_emb_dim: int = 128
    n_rbf: int = 22
    rbf_max: float = 20.0
    trans_scale: float = 0.1

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) <= 0:
                raise ValueError(f"config field {f.name} must be positive")
        if self.node_dim % self.seq_tfmr_heads:
            raise ValueError("node_dim must be divisible by seq_tfmr_heads")

    @property
    def w_c(self) -> float:
        return float(np.sqrt(2.0 / (9.0 * self.n_query_points)))

    @property
    def w_l(self) -> float:
        return float(np.sqrt(1.0 / 3.0))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


class NonFiniteError(FloatingPointError):
    def __init__(self, stage: str):
        super().__init__(f"non-finite values produced in stage {stage!r}")
        self.stage = stage


def _finite(stage: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(stage)


_GAMMA_ONE = float(np.log(np.expm1(1.0)))  # softplus(_GAMMA_ONE) == 1


@dataclass(frozen=True, eq=False)
class CfaWeights:
    linear_q: Linear
    linear_k: Linear
    linear_v: Linear
    linear_qk_points: Linear
    linear_v_mv: Linear
    value_equi: EquiLinear
    linear_b: Linear
    head_weights: np.ndarray  # raw, gamma = softplus(raw)
    value_rel_equi: EquiLinear
    bilinear: GeometricBilinear
    many_body: ManyBodyProduct
    linear_out: Linear
    geo_out: EquiLinear

    @classmethod
    def init(cls, rng: np.random.Generator, cfg: CfaConfig) -> "CfaWeights":
        H, c, P, Pq, D, E = cfg.n_heads, cfg.c_hidden, cfg.n_point_values, cfg.n_query_points, cfg.node_dim, cfg.edge_dim
        concat_dim = H * (E + c + P * 16 + 2 * P + 16)
        return cls(
            linear_q=Linear.init(rng, D, H * c, bias=False),
            linear_k=Linear.init(rng, D, H * c, bias=False),
            linear_v=Linear.init(rng, D, H * c, bias=False),
            linear_qk_points=Linear.init(rng, D, H * Pq * 3 * 2, bias=False),
            linear_v_mv=Linear.init(rng, D, P * 16),
            value_equi=EquiLinear.init(rng, 2 * P, H * P),
            linear_b=Linear.init(rng, E, H, bias=False),
            head_weights=np.full(H, _GAMMA_ONE),
            value_rel_equi=EquiLinear.init(rng, P + 1, P),
            bilinear=GeometricBilinear.init(rng, P, P, P, P),
            many_body=ManyBodyProduct.init(rng, P, P),
            linear_out=Linear.init(rng, concat_dim, D),
            geo_out=EquiLinear.init(rng, H * P, P),
        )


def _frames_of(T: np.ndarray) -> mo.Frames:
    return mo.frame_from_motor(T)


def attention_scores(s, z, T, w: CfaWeights, cfg: CfaConfig, frames: Optional[mo.Frames] = None):
    """Per-head attention ``(H, N, N)``, rows summing to one."""
    N = s.shape[0]
    H, c, Pq = cfg.n_heads, cfg.c_hidden, cfg.n_query_points
    frames = frames if frames is not None else _frames_of(T)
    q = w.linear_q(s).reshape(N, H, c)
    k = w.linear_k(s).reshape(N, H, c)
    pts = w.linear_qk_points(s).reshape(N, H, Pq, 2, 3)
    q_pts = frames.apply(pts[..., 0, :])  # (N, H, Pq, 3) in the global frame
    k_pts = frames.apply(pts[..., 1, :])
    bias = np.moveaxis(w.linear_b(z), -1, 0)  # (H, N, N)
    qk = (q.transpose(1, 0, 2) @ k.transpose(1, 2, 0)) / np.sqrt(c)
    # sum_p |q_ip - k_jp|^2 expanded into norms and one batched matmul
    qf = q_pts.reshape(N, H, Pq * 3).transpose(1, 0, 2)
    kf = k_pts.reshape(N, H, Pq * 3).transpose(1, 0, 2)
    dist2 = (
        np.einsum("hic,hic->hi", qf, qf)[:, :, None]
        + np.einsum("hjc,hjc->hj", kf, kf)[:, None, :]
        - 2.0 * (qf @ kf.transpose(0, 2, 1))
    )
    gamma = softplus(w.head_weights)[:, None, None]
    logits = cfg.w_l * (qk + bias - 0.5 * gamma * cfg.w_c * dist2)
    return softmax(logits, axis=-1)



def _pair_aggregate(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``out[i, h] = sum_j a[h, i, j] x[i, j]`` for pair features ``x`` ``(N, N, ...)``."""
    N = x.shape[0]
    out = a.transpose(1, 0, 2) @ x.reshape(N, N, -1)
    return out.reshape((N, a.shape[0]) + x.shape[2:])


def _node_aggregate(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``out[i, h] = sum_j a[h, i, j] x[j, h]`` for per-head node features ``x`` ``(N, H, ...)``."""
    N, H = x.shape[:2]
    out = a @ x.reshape(N, H, -1).transpose(1, 0, 2)
    return out.transpose(1, 0, 2).reshape(x.shape)


def relative_motors(T: np.ndarray, canonical_sign: bool = True) -> np.ndarray:
    """All pairwise ``~T_i T_j`` as ``(N, N, 16)``.

    Motors from matrix frames carry an arbitrary sign per residue, and the
    aggregate below is linear in each motor, so every relative motor is moved
    to the hemisphere with non-negative scalar part. That makes it a function
    of the relative frame alone.
    """
    rel = ga.geometric_product(ga.reverse(T)[:, None, :], T[None, :, :])
    if canonical_sign:
        rel = np.where(rel[..., :1] < 0.0, -rel, rel)
    return rel


def aggregate_relative_frames(a: np.ndarray, T: np.ndarray, canonical_sign: bool = True) -> np.ndarray:
    """``T_rel[i, h] = sum_j a[h, i, j] ~T_i T_j`` (not unit norm in general)."""
    return _pair_aggregate(a, relative_motors(T, canonical_sign))


def _action_matrices(T: np.ndarray) -> np.ndarray:
    """``A[n]`` with ``x @ A[n] == T_n x ~T_n``; row ``k`` is the image of blade ``k``."""
    Tb = T[:, None, :]
    return ga.geometric_product(ga.geometric_product(Tb, np.eye(16)), ga.reverse(Tb))


def _apply_per_residue(A: np.ndarray, x: np.ndarray) -> np.ndarray:
    N = x.shape[0]
    return (x.reshape(N, -1, 16) @ A).reshape(x.shape)


def _to_global(T, x):
    return _apply_per_residue(_action_matrices(T), x)


def _to_local(T, x):
    return _apply_per_residue(_action_matrices(ga.reverse(T)), x)


def geometric_message_pass(a, T, V, T_rel, w: CfaWeights, return_parts: bool = False):
    """Aggregate multivector messages with the contracted (linear-cost) form.

    ``V`` is ``(N, H, P, 16)`` in local frames, ``T_rel`` is ``(N, H, 16)``.
    Returns the many-body output ``O`` of shape ``(N, H, P, 16)``.
    """
    V_tilde = w.value_rel_equi(np.concatenate([V, T_rel[:, :, None, :]], axis=-2))
    aggregated = _node_aggregate(a, _to_global(T, V_tilde))
    local = _to_local(T, aggregated)
    O = w.bilinear(local, V)
    out = w.many_body(O)
    if return_parts:
        return out, {"V_tilde": V_tilde, "bilinear": O}
    return out


def cfa_forward(s, G, z, T, w: CfaWeights, cfg: CfaConfig):
    """One attention block. Returns ``(s_update, G_update, T_rel)``."""
    N = s.shape[0]
    H, c, P = cfg.n_heads, cfg.c_hidden, cfg.n_point_values
    frames = _frames_of(T)

    a = attention_scores(s, z, T, w, cfg, frames)
    _finite("attention", a)

    V_p = w.linear_v_mv(s).reshape(N, P, 16)
    V = w.value_equi(np.concatenate([V_p, G], axis=-2)).reshape(N, H, P, 16)
    _finite("values", V)

    o_pair = _pair_aggregate(a, z)
    v = w.linear_v(s).reshape(N, H, c)
    o_scalar = _node_aggregate(a, v)

    T_rel = aggregate_relative_frames(a, T)
    _finite("relative_frames", T_rel)

    O = geometric_message_pass(a, T, V, T_rel, w)
    _finite("geometric_messages", O)

    feats = np.concatenate(
        [
            o_pair,
            o_scalar,
            O.reshape(N, H, P * 16),
            ga.norm(O),
            ga.infinity_norm(O),
            T_rel,
        ],
        axis=-1,
    ).reshape(N, -1)
    s_out = w.linear_out(feats)
    G_out = w.geo_out(O.reshape(N, H * P, 16))
    _finite("output", s_out, G_out)
    return s_out, G_out, T_rel


def backbone_update(s, G, T_rel, T, mlp: MLP) -> np.ndarray:
    """Predict a local rotor and translator from invariant features and apply them."""
    N = s.shape[0]
    feats = np.concatenate([s, G.reshape(N, -1), T_rel.reshape(N, -1)], axis=-1)
    out = mlp(feats)
    R = mo.embed_rotor(out[:, 0], out[:, 1], out[:, 2])
    S = mo.embed_translator(out[:, 3:6])
    return ga.geometric_product(ga.geometric_product(T, R), S)


# ---------------------------------------------------------------------------
# stand-in sub-layers


@dataclass(frozen=True, eq=False)
class AttentionLayer:
    """Post-norm transformer encoder layer over scalar node features."""

    wq: Linear
    wk: Linear
    wv: Linear
    wo: Linear
    ln1: LayerNorm
    ff: MLP
    ln2: LayerNorm

    @classmethod
    def init(cls, rng, dim: int):
        return cls(
            Linear.init(rng, dim, dim), Linear.init(rng, dim, dim), Linear.init(rng, dim, dim), Linear.init(rng, dim, dim),
            LayerNorm.init(dim), MLP.init(rng, [dim, dim, dim]), LayerNorm.init(dim),
        )

    def __call__(self, x: np.ndarray, n_heads: int) -> np.ndarray:
        N, D = x.shape
        dh = D // n_heads
        q = self.wq(x).reshape(N, n_heads, dh).transpose(1, 0, 2)
        k = self.wk(x).reshape(N, n_heads, dh).transpose(1, 2, 0)
        v = self.wv(x).reshape(N, n_heads, dh).transpose(1, 0, 2)
        att = softmax((q @ k) / np.sqrt(dh), axis=-1)
        y = self.wo((att @ v).transpose(1, 0, 2).reshape(N, D))
        x = self.ln1(x + y)
        return self.ln2(x + self.ff(x))


@dataclass(frozen=True, eq=False)
class BlockWeights:
    cfa: CfaWeights
    cfa_ln: LayerNorm
    scalar_mlp: MLP
    seq_tfmr: list
    post_tfmr: Linear
    node_transition: MLP
    node_ln: LayerNorm
    edge_mlp: MLP
    edge_ln: LayerNorm
    bb_update: MLP

    @classmethod
    def init(cls, rng, cfg: CfaConfig) -> "BlockWeights":
        D, E, P, H = cfg.node_dim, cfg.edge_dim, cfg.n_point_values, cfg.n_heads
        return cls(
            cfa=CfaWeights.init(rng, cfg),
            cfa_ln=LayerNorm.init(D),
            scalar_mlp=MLP.init(rng, [D, D, D]),
            seq_tfmr=[AttentionLayer.init(rng, D) for _ in range(cfg.seq_tfmr_layers)],
            post_tfmr=Linear.init(rng, D, D),
            node_transition=MLP.init(rng, [D, D, D, D]),
            node_ln=LayerNorm.init(D),
            edge_mlp=MLP.init(rng, [E + 2 * D, E, E]),
            edge_ln=LayerNorm.init(E),
            bb_update=MLP.init(rng, [D + 16 * P + 16 * H, cfg.bb_hidden, cfg.bb_hidden, 6], gain_last=0.1),
        )


@dataclass(frozen=True, eq=False)
class EmbedderWeights:
    node: Linear
    edge_node_proj: Linear
    edge_relpos: Linear
    edge_mlp: MLP
    edge_ln: LayerNorm

    @classmethod
    def init(cls, rng, cfg: CfaConfig) -> "EmbedderWeights":
        F = cfg.edge_feat_dim
        edge_in = 3 * F + 2 * cfg.n_rbf
        return cls(
            node=Linear.init(rng, cfg.pos_emb_dim + cfg.time_emb_dim, cfg.node_dim),
            edge_node_proj=Linear.init(rng, cfg.node_dim, F),
            edge_relpos=Linear.init(rng, F, F),
            edge_mlp=MLP.init(rng, [edge_in, cfg.edge_dim, cfg.edge_dim]),
            edge_ln=LayerNorm.init(cfg.edge_dim),
        )


@dataclass(frozen=True, eq=False)
class NetworkWeights:
    embed: EmbedderWeights
    blocks: list = field(default_factory=list)

    @classmethod
    def init(cls, rng: np.random.Generator, cfg: CfaConfig) -> "NetworkWeights":
        return cls(EmbedderWeights.init(rng, cfg), [BlockWeights.init(rng, cfg) for _ in range(cfg.n_blocks)])

    @classmethod
    def template(cls, cfg: CfaConfig) -> "NetworkWeights":
        """Correctly shaped tree whose values are meant to be overwritten (e.g. by a loader)."""
        return cls.init(np.random.default_rng(0), cfg)

    def parameter_counts(self) -> dict[str, int]:
        groups = {
            "embedding": count_params(self.embed),
            "cfa": sum(count_params(b.cfa) for b in self.blocks),
            "seq_transformer": sum(count_params(b.seq_tfmr) + count_params(b.post_tfmr) for b in self.blocks),
            "node_update": sum(
                count_params(b.cfa_ln) + count_params(b.scalar_mlp) + count_params(b.node_transition) + count_params(b.node_ln)
                for b in self.blocks
            ),
            "edge_update": sum(count_params(b.edge_mlp) + count_params(b.edge_ln) for b in self.blocks),
            "bb_update": sum(count_params(b.bb_update) for b in self.blocks),
        }
        groups["total"] = count_params(self)
        return groups


def init_weights(seed: int, cfg: CfaConfig) -> NetworkWeights:
    return NetworkWeights.init(np.random.default_rng(seed), cfg)


def rbf(d: np.ndarray, n: int, d_max: float) -> np.ndarray:
    centers = np.linspace(0.0, d_max, n)
    width = d_max / (n - 1)
    return np.exp(-(((d[..., None] - centers) / width) ** 2))


def _embed(frames: mo.Frames, t: float, w: EmbedderWeights, cfg: CfaConfig, self_cond, positional: bool):
    N = len(frames)
    idx = np.arange(N, dtype=np.float64) if positional else np.zeros(N)
    node_in = np.concatenate(
        [
            sinusoidal_embedding(idx, cfg.pos_emb_dim),
            np.broadcast_to(sinusoidal_embedding(np.array(t * 1000.0), cfg.time_emb_dim), (N, cfg.time_emb_dim)),
        ],
        axis=-1,
    )
    s = w.node(node_in)

    p = w.edge_node_proj(s)
    F = cfg.edge_feat_dim
    # relative offsets take only 2N - 1 values; embed those and gather
    offsets = np.arange(-(N - 1), N, dtype=np.float64) if positional else np.zeros(1)
    gather = (np.arange(N)[None, :] - np.arange(N)[:, None] + N - 1) if positional else np.zeros((N, N), dtype=np.intp)
    ca = frames.trans
    dist = np.linalg.norm(ca[:, None] - ca[None, :], axis=-1)
    dist_feat = rbf(dist, cfg.n_rbf, cfg.rbf_max)
    if self_cond is None:
        sc_feat = np.zeros((N, N, cfg.n_rbf))
    else:
        sc = np.asarray(self_cond, dtype=np.float64)
        sc_feat = rbf(np.linalg.norm(sc[:, None] - sc[None, :], axis=-1), cfg.n_rbf, cfg.rbf_max)
    # first edge layer split by input block so the (N, N, 2F) node cross term is never built
    first = w.edge_mlp.layers[0]
    Wi, Wj, Wr, Wrest = np.split(first.weight, [F, 2 * F, 3 * F])
    h = np.concatenate([dist_feat, sc_feat], axis=-1) @ Wrest
    # the relative-position block is projected once per offset, then gathered
    h += (w.edge_relpos(sinusoidal_embedding(offsets, F)) @ Wr)[gather]
    h += (p @ Wi + first.bias)[:, None, :]
    h += (p @ Wj)[None, :, :]
    z = w.edge_ln(_mlp_tail(np.maximum(h, 0.0, out=h), w.edge_mlp))
    return s, z


def _mlp_tail(h, mlp: MLP):
    for i, layer in enumerate(mlp.layers[1:], start=1):
        h = layer(h)
        if i < len(mlp.layers) - 1:
            np.maximum(h, 0.0, out=h)
    return h


def _edge_update(z, s, mlp: MLP, ln: LayerNorm):
    # first layer on concat(z_ij, s_i, s_j), evaluated without materialising the concat
    E = z.shape[-1]
    D = s.shape[-1]
    first = mlp.layers[0]
    Wz, Wi, Wj = first.weight[:E], first.weight[E:E + D], first.weight[E + D:]
    h = z @ Wz
    h += (s @ Wi + first.bias)[:, None, :]
    h += (s @ Wj)[None, :, :]
    h = _mlp_tail(np.maximum(h, 0.0, out=h), mlp)
    h += z
    return ln(h)


def run_block(s, G, z, T, bw: BlockWeights, cfg: CfaConfig, update_edges: bool = True):
    """One network block; returns updated ``(s, G, z, T)``.

    The edge update is skipped when ``update_edges`` is false (the last block,
    whose edge output nothing reads).
    """
    s_cfa, G_cfa, T_rel = cfa_forward(s, G, z, T, bw.cfa, cfg)
    s = bw.cfa_ln(s + s_cfa)
    G = G + G_cfa
    s = s + bw.scalar_mlp(s)
    h = s
    for layer in bw.seq_tfmr:
        h = layer(h, cfg.seq_tfmr_heads)
    s = s + bw.post_tfmr(h)
    s = bw.node_ln(s + bw.node_transition(s))
    _finite("node_update", s)
    if update_edges:
        z = _edge_update(z, s, bw.edge_mlp, bw.edge_ln)
        _finite("edge_update", z)
    T = backbone_update(s, G, T_rel, T, bw.bb_update)
    _finite("backbone_update", T)
    return s, G, z, T


def network_forward(
    frames: mo.Frames,
    t: float,
    weights: NetworkWeights,
    cfg: CfaConfig,
    self_cond: Optional[np.ndarray] = None,
    positional_encodings: bool = True,
) -> mo.Frames:
    """Predict denoised frames (Angstrom) from noisy frames at flow time ``t``."""
    if not 0.0 <= t <= 1.0 or not np.isfinite(t):
        raise ValueError(f"flow time must lie in [0, 1], got {t}")
    N = len(frames)
    if N < 2:
        raise ValueError("network_forward needs at least two residues")
    if len(weights.blocks) != cfg.n_blocks:
        raise ValueError("weights and config disagree on the number of blocks")
    s, z = _embed(frames, t, weights.embed, cfg, self_cond, positional_encodings)
    T = mo.motor_from_frame(mo.Frames(frames.rots, frames.trans * cfg.trans_scale))
    G = np.zeros((N, cfg.n_point_values, 16))
    last = len(weights.blocks) - 1
    for i, bw in enumerate(weights.blocks):
        s, G, z, T = run_block(s, G, z, T, bw, cfg, update_edges=i < last)
    out = mo.frame_from_motor(T)
    return mo.Frames(out.rots, out.trans / cfg.trans_scale)
