"""Central finite differences, the correctness oracle for the backprop code."""
from __future__ import annotations

import math

import numpy as np

from ..numerics import SeededRng
from .mlp import mlp_backward, mlp_forward, mlp_loss
from .params import MlpParams, ModelError, RnnParams
from .rnn import (
    nest_backward,
    nest_forward,
    nest_loss,
    rnn_backward,
    rnn_forward,
    rnn_loss,
)

EPS = 1e-5


def numerical_gradient(loss_fn, params, eps=EPS):
    """``(L(theta+eps) - L(theta-eps)) / (2 eps)`` for every scalar parameter.

    ``loss_fn`` takes a params object; ``params`` itself is left untouched.
    """
    work = params.copy()
    grad = params.zeros_like()
    garr = grad.arrays()
    for name, arr in work.arrays().items():
        flat = arr.reshape(-1)
        gflat = garr[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn(work)
            flat[i] = orig - eps
            down = loss_fn(work)
            flat[i] = orig
            if not (math.isfinite(up) and math.isfinite(down)):
                raise ModelError(f"non-finite loss when perturbing {name}[{i}]")
            gflat[i] = (up - down) / (2.0 * eps)
    return grad


def loss_fn_for(model, inputs, labels):
    model = model.upper()
    if model == "MLP":
        return lambda p: mlp_loss(inputs, labels, p)
    if model == "RNN":
        return lambda p: rnn_loss(inputs, labels, p)
    if model == "NEST":
        return lambda p: nest_loss(inputs, p, labels)
    raise ValueError(f"unknown model kind {model!r}")


def finite_difference_gradients(model, inputs, labels, p, eps=EPS):
    """Numerical gradient of the model's loss.

    ``model`` is "MLP", "RNN" or "NEST"; for NEST ``labels`` is the per-stay
    list (``None`` = unlabeled) or ``None`` to read them off the sample.
    """
    return numerical_gradient(loss_fn_for(model, inputs, labels), p, eps)


def analytic_gradients(model, inputs, labels, p):
    model = model.upper()
    if model == "MLP":
        _, tr = mlp_forward(inputs, p)
        return mlp_backward(tr, inputs, labels, p)
    if model == "RNN":
        _, tr = rnn_forward(inputs, p)
        return rnn_backward(tr, inputs, labels, p)
    if model == "NEST":
        _, tr = nest_forward(inputs, p)
        return nest_backward(tr, inputs, labels, p)
    raise ValueError(f"unknown model kind {model!r}")


def relative_errors(analytic, numeric):
    """Per-tensor max of ``|g_a - g_fd| / max(1, |g_fd|)``."""
    a, n = analytic.arrays(), numeric.arrays()
    return {k: float(np.max(np.abs(a[k] - n[k]) / np.maximum(1.0, np.abs(n[k])), initial=0.0)) for k in n}


# ----------------------------------------------------------------------------
# randomized suite


def random_case(model, rng, hidden=(1, 3, 10), dims=(1, 3), max_len=6, max_hosp=4, init_sd=0.5):
    """A random (params, inputs, labels) triple for one model kind."""
    H = int(hidden[rng.integers(1, len(hidden))[0]])
    D = int(dims[rng.integers(1, len(dims))[0]])
    model = model.upper()
    if model == "MLP":
        p = MlpParams.init(rng, H, D, init_sd)
        x = rng.normal(D, 0.0, 1.0)
        return p, x, bool(rng.uniform(1)[0] < 0.5)
    if model == "RNN":
        p = RnnParams.init(rng, H, D, init_sd)
        tau = 1 + int(rng.integers(1, max_len)[0])
        return p, rng.normal(tau * D, 0.0, 1.0).reshape(tau, D), bool(rng.uniform(1)[0] < 0.5)
    if model == "NEST":
        p = RnnParams.init(rng, H, D, init_sd, nested=True)
        A = 1 + int(rng.integers(1, max_hosp)[0])
        groups = []
        for _ in range(A):
            tau = 1 + int(rng.integers(1, max_len)[0])
            groups.append(rng.normal(tau * D, 0.0, 1.0).reshape(tau, D))
        labels = [bool(u < 0.5) for u in rng.uniform(A)]
        # the last stay is usually unlabeled (no successor); keep both cases
        if A > 1 and rng.uniform(1)[0] < 0.5:
            labels[-1] = None
        return p, groups, labels
    raise ValueError(f"unknown model kind {model!r}")


def gradcheck_suite(models=("MLP", "RNN", "NEST"), n_cases=50, seed=0, tolerance=1e-6,
                    corrupt=False, **case_kw):
    """Compare analytic and central-difference gradients on random cases.

    Returns ``{model: {"worst": {tensor: err}, "failures": [case seeds], "cases": n}}``.
    ``corrupt`` perturbs every analytic ``W``/``W1`` gradient (a negative
    control that must be caught).
    """
    out = {}
    for m_i, model in enumerate(models):
        worst, failures = {}, []
        for case in range(n_cases):
            case_seed = SeededRng(seed).spawn(m_i * 1_000_000 + case).seed
            p, x, y = random_case(model, SeededRng(case_seed), **case_kw)
            g = analytic_gradients(model, x, y, p)
            if corrupt:
                for k in ("W", "W1"):
                    if hasattr(g, k):
                        setattr(g, k, getattr(g, k) * 1.001 + 1e-3)
            errs = relative_errors(g, finite_difference_gradients(model, x, y, p))
            for k, e in errs.items():
                worst[k] = max(worst.get(k, 0.0), e)
            if max(errs.values()) >= tolerance:
                failures.append(case_seed)
        out[model] = {"worst": worst, "failures": failures, "cases": n_cases}
    return out
