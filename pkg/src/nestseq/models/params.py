"""Parameter containers for the MLP and (nested) RNN.

Gradients use the same classes, so an optimizer can walk ``arrays()`` of the
parameters and of the gradients in lockstep.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional

import numpy as np


class ModelError(ValueError):
    """Shape mismatches and inconsistent traces."""


def _scalar(x):
    return np.asarray(x, dtype=np.float64).reshape(())


class _Params:
    NAMES: tuple[str, ...] = ()

    def arrays(self):
        """Name -> array for every parameter that is present (views, not copies)."""
        return {n: getattr(self, n) for n in self.NAMES if getattr(self, n) is not None}

    def copy(self):
        return type(self)(**{f.name: None if getattr(self, f.name) is None else getattr(self, f.name).copy()
                             for f in fields(self)})

    def zeros_like(self):
        return type(self)(**{f.name: None if getattr(self, f.name) is None else np.zeros_like(getattr(self, f.name))
                             for f in fields(self)})

    def n_params(self):
        return sum(a.size for a in self.arrays().values())

    def all_finite(self):
        return all(np.all(np.isfinite(a)) for a in self.arrays().values())

    def allclose(self, other, rtol=0.0, atol=0.0):
        a, b = self.arrays(), other.arrays()
        return a.keys() == b.keys() and all(np.allclose(a[k], b[k], rtol=rtol, atol=atol) for k in a)

    def __eq__(self, other):
        if type(self) is not type(other):
            return NotImplemented
        a, b = self.arrays(), other.arrays()
        return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)


@dataclass(eq=False)
class RnnParams(_Params):
    """Many-to-one RNN weights; ``R`` and ``r`` are present only for the nested model.

    Shapes: ``W`` (H, D), ``U`` (H, H), ``V`` (1, H), ``b`` (H,), ``c`` (),
    ``R`` (H, H), ``r`` (H,).
    """

    W: np.ndarray
    U: np.ndarray
    V: np.ndarray
    b: np.ndarray
    c: np.ndarray
    R: Optional[np.ndarray] = None
    r: Optional[np.ndarray] = None

    NAMES = ("W", "U", "V", "b", "c", "R", "r")

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.U = np.asarray(self.U, dtype=np.float64)
        self.V = np.asarray(self.V, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.c = _scalar(self.c)
        if (self.R is None) != (self.r is None):
            raise ModelError("R and r must be given together")
        if self.R is not None:
            self.R = np.asarray(self.R, dtype=np.float64)
            self.r = np.asarray(self.r, dtype=np.float64)
        H, D = self.W.shape if self.W.ndim == 2 else (-1, -1)
        expect = {"W": (H, D), "U": (H, H), "V": (1, H), "b": (H,)}
        if self.nested:
            expect.update(R=(H, H), r=(H,))
        for name, shape in expect.items():
            if H < 0 or getattr(self, name).shape != shape:
                raise ModelError(f"RnnParams.{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def H(self):
        return self.W.shape[0]

    @property
    def D(self):
        return self.W.shape[1]

    @property
    def nested(self):
        return self.R is not None

    @classmethod
    def zeros(cls, H, D=1, nested=False):
        return cls(
            np.zeros((H, D)), np.zeros((H, H)), np.zeros((1, H)), np.zeros(H), 0.0,
            np.zeros((H, H)) if nested else None, np.zeros(H) if nested else None,
        )

    @classmethod
    def init(cls, rng, H, D=1, sd=0.01, nested=False):
        """Draw W, U, V, b, c (then R, r when nested) in that order from ``rng``.

        The shared prefix means a nested model and a plain RNN drawn from the
        same seed start with identical W, U, V, b, c.
        """
        W = rng.normal(H * D, 0.0, sd).reshape(H, D)
        U = rng.normal(H * H, 0.0, sd).reshape(H, H)
        V = rng.normal(H, 0.0, sd).reshape(1, H)
        b = rng.normal(H, 0.0, sd)
        c = rng.normal(1, 0.0, sd)[0]
        R = r = None
        if nested:
            R = rng.normal(H * H, 0.0, sd).reshape(H, H)
            r = rng.normal(H, 0.0, sd)
        return cls(W, U, V, b, c, R, r)


@dataclass(eq=False)
class MlpParams(_Params):
    """One hidden tanh layer: ``W1`` (H, D), ``b1`` (H,), ``V`` (1, H), ``c`` ()."""

    W1: np.ndarray
    b1: np.ndarray
    V: np.ndarray
    c: np.ndarray

    NAMES = ("W1", "b1", "V", "c")

    def __post_init__(self):
        self.W1 = np.asarray(self.W1, dtype=np.float64)
        self.b1 = np.asarray(self.b1, dtype=np.float64)
        self.V = np.asarray(self.V, dtype=np.float64)
        self.c = _scalar(self.c)
        if self.W1.ndim != 2:
            raise ModelError(f"MlpParams.W1 must be 2-D, got shape {self.W1.shape}")
        H = self.W1.shape[0]
        for name, shape in {"b1": (H,), "V": (1, H)}.items():
            if getattr(self, name).shape != shape:
                raise ModelError(f"MlpParams.{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def H(self):
        return self.W1.shape[0]

    @property
    def D(self):
        return self.W1.shape[1]

    @classmethod
    def zeros(cls, H, D=1):
        return cls(np.zeros((H, D)), np.zeros(H), np.zeros((1, H)), 0.0)

    @classmethod
    def init(cls, rng, H, D=1, sd=0.01):
        W1 = rng.normal(H * D, 0.0, sd).reshape(H, D)
        b1 = rng.normal(H, 0.0, sd)
        V = rng.normal(H, 0.0, sd).reshape(1, H)
        c = rng.normal(1, 0.0, sd)[0]
        return cls(W1, b1, V, c)
