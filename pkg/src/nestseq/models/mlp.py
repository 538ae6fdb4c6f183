"""Single-hidden-layer tanh MLP on an aggregated feature."""
from __future__ import annotations

import numpy as np

from ..numerics import sigmoid
from ..structures import AggregatedSample
from .loss import bce_loss
from .params import MlpParams, ModelError
from .rnn import ForwardTrace


def _as_x(x, D):
    if isinstance(x, AggregatedSample):
        x = x.feature
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.shape != (D,):
        raise ModelError(f"MLP input of shape {arr.shape} does not match D={D}")
    return arr


def mlp_forward(x, p):
    """``logit = V tanh(W1 x + b1) + c``; returns ``(logit, trace)``."""
    if not isinstance(p, MlpParams):
        raise ModelError(f"expected MlpParams, got {type(p).__name__}")
    x = _as_x(x, p.D)
    h = np.tanh(p.W1 @ x + p.b1)
    y = float(p.V[0] @ h + p.c)
    return y, ForwardTrace([x[None, :]], [h[None, :]], [None], np.array([y]))


def mlp_backward(trace, x, label, p):
    x = _as_x(x, p.D)
    if trace.hidden[0].shape != (1, p.H) or not np.array_equal(trace.inputs[0][0], x):
        raise ModelError("trace does not match these inputs/params")
    h = trace.hidden[0][0]
    dy = sigmoid(float(trace.logits[0])) - float(label)
    da = (1.0 - h * h) * (p.V[0] * dy)
    return MlpParams(np.outer(da, x), da, dy * h[None, :], dy)


def mlp_loss(x, label, p):
    y, _ = mlp_forward(x, p)
    return bce_loss(y, label)
