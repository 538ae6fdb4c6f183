"""Many-to-one RNN and the nested (rehospitalization) RNN, with hand-written backprop.

Plain RNN, for inputs ``m(1..tau)`` and ``h(0) = 0``::

    z(t) = W m(t) + U h(t-1) + b,   h(t) = tanh(z(t)),   y = V h(tau) + c

Nested RNN, one chain per stay ``a``; the first step of every stay reads the
last state of the previous stay through ``R``/``r`` instead of ``U``/``b``::

    z(1)_a = W m(1)_a + R h(tau_{a-1})_{a-1} + r
    z(t)_a = W m(t)_a + U h(t-1)_a + b          (t > 1)
    y_a    = V h(tau_a)_a + c

The state before the first stay is a zero vector. The loss is binary
cross-entropy on ``sigmoid(y)``, summed over labeled stays.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..numerics import sigmoid
from ..structures import NestedSample, SequenceSample
from .loss import bce_loss
from .params import ModelError, RnnParams


@dataclass
class ForwardTrace:
    """Cached activations from a forward pass.

    ``inputs[a]`` is the (tau_a, D) input block of group ``a``, ``hidden[a]``
    the (tau_a, H) hidden states and ``entry[a]`` the state fed into the first
    step of the group (``h0`` for a plain RNN, the previous stay's last state
    for the nested one).
    """

    inputs: list
    hidden: list
    entry: list
    logits: np.ndarray
    nested: bool = False
    extra: dict = field(default_factory=dict)

    @property
    def probs(self):
        return sigmoid(self.logits)


def as_inputs(x, D):
    """Coerce a sequence to a (tau, D) float array."""
    if isinstance(x, SequenceSample):
        x = x.features
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != D:
        raise ModelError(f"input of shape {np.shape(x)} does not match D={D}")
    if arr.shape[0] == 0:
        raise ModelError("empty input sequence")
    return arr


def _check_rnn(p):
    if not isinstance(p, RnnParams):
        raise ModelError(f"expected RnnParams, got {type(p).__name__}")


def _run_chain(X, p, first_step_pre):
    """tanh chain over X given the pre-activation contribution of the first step."""
    tau = X.shape[0]
    WX = X @ p.W.T
    Hs = np.empty((tau, p.H))
    h = np.tanh(WX[0] + first_step_pre)
    Hs[0] = h
    U, b = p.U, p.b
    for t in range(1, tau):
        h = np.tanh(WX[t] + U @ h + b)
        Hs[t] = h
    return Hs


def rnn_forward(seq, p, h0=None):
    """Forward pass of the many-to-one RNN.

    Returns ``(logit, trace)``. Any ``R``/``r`` in ``p`` are ignored.
    """
    _check_rnn(p)
    X = as_inputs(seq, p.D)
    h0 = np.zeros(p.H) if h0 is None else np.asarray(h0, dtype=np.float64)
    if h0.shape != (p.H,):
        raise ModelError(f"h0 has shape {h0.shape}, expected ({p.H},)")
    Hs = _run_chain(X, p, p.U @ h0 + p.b)
    y = float(p.V[0] @ Hs[-1] + p.c)
    return y, ForwardTrace([X], [Hs], [h0], np.array([y]))


def _check_trace(trace, p, groups):
    if len(trace.inputs) != len(groups):
        raise ModelError("trace does not match the input: different number of groups")
    for X, Xt, Hs in zip(groups, trace.inputs, trace.hidden):
        if X.shape != Xt.shape or not np.array_equal(X, Xt):
            raise ModelError("trace was produced from a different input")
        if Hs.shape != (X.shape[0], p.H):
            raise ModelError(f"trace hidden width {Hs.shape[1]} does not match params H={p.H}")


def rnn_backward(trace, seq, label, p):
    """Gradients of ``bce(y, label)`` w.r.t. W, U, V, b, c.

    The hidden-state gradient starts as ``V^T dL/dy`` at the last step and is
    carried back through ``U^T J``; ``R``/``r`` gradients (if present) are zero.
    """
    _check_rnn(p)
    X = as_inputs(seq, p.D)
    _check_trace(trace, p, [X])
    Hs, h0 = trace.hidden[0], trace.entry[0]
    y = float(trace.logits[0])
    dy = sigmoid(y) - float(label)

    tau = X.shape[0]
    dZ = np.empty_like(Hs)
    dh = p.V[0] * dy
    for t in range(tau - 1, -1, -1):
        dz = (1.0 - Hs[t] * Hs[t]) * dh
        dZ[t] = dz
        dh = p.U.T @ dz
    Hprev = np.vstack([h0[None, :], Hs[:-1]])

    g = p.zeros_like()
    g.W = dZ.T @ X
    g.U = dZ.T @ Hprev
    g.b = dZ.sum(axis=0)
    g.V = dy * Hs[-1][None, :]
    g.c = np.asarray(dy).reshape(())
    return g


def rnn_loss(seq, label, p, h0=None):
    y, _ = rnn_forward(seq, p, h0)
    return bce_loss(y, label)


def _groups(ns, D):
    if isinstance(ns, NestedSample):
        return [as_inputs(g, D) for g in ns.feature_groups]
    return [as_inputs(g, D) for g in ns]


def _per_hosp_labels(ns, labels, A):
    if labels is None:
        if not isinstance(ns, NestedSample):
            raise ModelError("labels are required when the input is not a NestedSample")
        labels = ns.per_hosp_labels()
    labels = list(labels)
    if len(labels) != A:
        raise ModelError(f"got {len(labels)} labels for {A} hospitalizations (use None for unlabeled)")
    return labels


def _check_nested(p):
    _check_rnn(p)
    if not p.nested:
        raise ModelError("nested model needs R and r")


def nest_forward(ns, p):
    """Forward pass over all stays of one patient; one logit per stay."""
    _check_nested(p)
    groups = _groups(ns, p.D)
    entry = np.zeros(p.H)
    hidden, entries, logits = [], [], np.empty(len(groups))
    for a, X in enumerate(groups):
        Hs = _run_chain(X, p, p.R @ entry + p.r)
        hidden.append(Hs)
        entries.append(entry)
        logits[a] = p.V[0] @ Hs[-1] + p.c
        entry = Hs[-1]
    return logits, ForwardTrace(groups, hidden, entries, logits, nested=True)


def nest_loss(ns, p, labels=None):
    """Total loss: sum of per-stay cross-entropies over labeled stays."""
    logits, _ = nest_forward(ns, p)
    labels = _per_hosp_labels(ns, labels, len(logits))
    return sum(bce_loss(y, l) for y, l in zip(logits, labels) if l is not None)


def nest_backward(trace, ns, labels, p):
    """Backprop through time over measurements and stays.

    ``labels`` has one entry per stay (``None`` = no loss term); pass ``None``
    to take them from the ``NestedSample``. The last state of stay ``a``
    receives ``V^T dL/dy_a`` plus ``R^T J`` times the gradient at the first
    state of stay ``a+1``. ``b`` and ``U`` collect only steps t > 1, ``R`` and
    ``r`` only first steps, ``W`` every step.
    """
    _check_nested(p)
    groups = _groups(ns, p.D)
    _check_trace(trace, p, groups)
    labels = _per_hosp_labels(ns, labels, len(groups))

    g = p.zeros_like()
    gV = np.zeros(p.H)
    gc = 0.0
    carry = np.zeros(p.H)  # gradient arriving at h(tau_a)_a from stay a+1
    UT, RT, v = p.U.T, p.R.T, p.V[0]
    for a in range(len(groups) - 1, -1, -1):
        X, Hs, entry = groups[a], trace.hidden[a], trace.entry[a]
        l = labels[a]
        dy = 0.0 if l is None else sigmoid(float(trace.logits[a])) - float(l)
        gV += dy * Hs[-1]
        gc += dy
        dh = v * dy + carry
        tau = X.shape[0]
        dZ = np.empty_like(Hs)
        for t in range(tau - 1, 0, -1):
            dz = (1.0 - Hs[t] * Hs[t]) * dh
            dZ[t] = dz
            dh = UT @ dz
        dz1 = (1.0 - Hs[0] * Hs[0]) * dh
        dZ[0] = dz1
        g.W += dZ.T @ X
        if tau > 1:
            g.U += dZ[1:].T @ Hs[:-1]
            g.b += dZ[1:].sum(axis=0)
        g.R += np.outer(dz1, entry)
        g.r += dz1
        carry = RT @ dz1
    g.V = gV[None, :]
    g.c = np.asarray(gc).reshape(())
    return g
