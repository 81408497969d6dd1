"""Backbone generation: prior sample, then Euler steps along the network's predicted field."""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .cfa import CfaConfig, NetworkWeights, network_forward
from .flow import VectorFieldSample, conditional_vector_field, integrate_flow, sample_prior
from .motors import Frames


def network_field(weights: NetworkWeights, cfg: CfaConfig, self_condition: bool = True):
    """Field function that predicts clean frames and heads straight for them.

    With self-conditioning the previous prediction's CA positions are fed back
    as an extra pair-distance feature.
    """
    state: dict[str, Optional[np.ndarray]] = {"previous": None}

    def field(frames: Frames, t: float) -> VectorFieldSample:
        pred = network_forward(frames, t, weights, cfg, self_cond=state["previous"])
        if self_condition:
            state["previous"] = pred.trans
        return conditional_vector_field(frames, pred, t)

    return field


def sample_backbone(
    weights: NetworkWeights,
    cfg: CfaConfig,
    n_residues: int,
    n_steps: int = 200,
    seed: int = 0,
    self_condition: bool = True,
    callback: Optional[Callable[[int, float, Frames], None]] = None,
) -> Frames:
    prior = sample_prior(n_residues, seed)
    return integrate_flow(prior, network_field(weights, cfg, self_condition), n_steps, callback=callback)
