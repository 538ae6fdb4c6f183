"""MLP, many-to-one RNN and nested RNN with hand-derived gradients."""
from .gradcheck import (
    analytic_gradients,
    finite_difference_gradients,
    numerical_gradient,
    relative_errors,
)
from .io import load_params, model_kind, params_from_dict, params_to_dict, save_params
from .loss import bce_loss
from .mlp import mlp_backward, mlp_forward, mlp_loss
from .params import MlpParams, ModelError, RnnParams
from .rnn import (
    ForwardTrace,
    nest_backward,
    nest_forward,
    nest_loss,
    rnn_backward,
    rnn_forward,
    rnn_loss,
)

__all__ = [
    "ForwardTrace",
    "MlpParams",
    "ModelError",
    "RnnParams",
    "analytic_gradients",
    "bce_loss",
    "finite_difference_gradients",
    "load_params",
    "mlp_backward",
    "mlp_forward",
    "mlp_loss",
    "model_kind",
    "nest_backward",
    "nest_forward",
    "nest_loss",
    "numerical_gradient",
    "params_from_dict",
    "params_to_dict",
    "relative_errors",
    "rnn_backward",
    "rnn_forward",
    "rnn_loss",
    "save_params",
]
