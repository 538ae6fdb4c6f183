"""Dense linear-algebra helpers, activations and a portable seeded RNG.

Matrices and vectors are plain ``float64`` numpy arrays (row-major). The
helpers here only add the shape checks and numerically careful forms the rest
of the package relies on.

The random generator is SplitMix64 (Steele, Lea & Flood, 2014), chosen because
it is tiny, fully specified and has published test vectors, so a seed gives the
same stream on any platform or language. Normal draws use the Box-Muller
transform on top of it.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "SeededRng",
    "as_matrix",
    "as_vector",
    "logit",
    "matvec",
    "mix64",
    "rng_normal",
    "sigmoid",
    "tanh_jacobian_diag",
    "tanh_vec",
]

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def as_matrix(m, name="matrix"):
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    return a


def as_vector(v, name="vector"):
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {a.shape}")
    return a


def matvec(m, v):
    """Matrix-vector product with an explicit shape check."""
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ValueError(
            f"dimension mismatch: matrix {m.shape[0]}x{m.shape[1]} times vector of length {v.shape[0]}"
        )
    return m @ v


def tanh_vec(v):
    return np.tanh(np.asarray(v, dtype=np.float64))


def tanh_jacobian_diag(h):
    """Diagonal of the tanh Jacobian, given the *activated* state ``h``.

    Returns ``1 - h**2``. Entries outside [-1, 1] cannot come from tanh and
    are rejected.
    """
    h = np.asarray(h, dtype=np.float64)
    if np.any(np.abs(h) > 1.0) or not np.all(np.isfinite(h)):
        raise ValueError("tanh_jacobian_diag expects activated values in [-1, 1]")
    return 1.0 - h * h


def sigmoid(x):
    """Logistic function, stable for large ``|x|`` (no overflow warnings)."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    if out.ndim == 0:
        return float(out)
    return out


def logit(p):
    p = np.asarray(p, dtype=np.float64)
    out = np.log(p) - np.log1p(-p)
    return float(out) if out.ndim == 0 else out


def mix64(z):
    """SplitMix64 output finalizer on a Python int."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SeededRng:
    """SplitMix64 stream.

    Parameters
    ----------
    seed : int
        Any integer; reduced modulo 2**64.

    Draws are generated in vectorised blocks, but the stream is identical to
    calling the scalar generator one value at a time, so the block size never
    changes results.
    """

    def __init__(self, seed):
        self.seed = int(seed) & _MASK64
        self._state = self.seed

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"

    def next_u64(self, n):
        n = int(n)
        if n < 0:
            raise ValueError("n must be nonnegative")
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self._state) + steps * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GAMMA) & _MASK64
        return z

    def uniform(self, n):
        """``n`` doubles in [0, 1) built from the top 53 bits of each output."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))

    def normal(self, n, mean=0.0, sd=1.0):
        if sd < 0:
            raise ValueError("sd must be >= 0")
        n = int(n)
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]  # (0, 1], keeps log finite
        u2 = u[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        z = np.empty(2 * pairs)
        z[0::2] = radius * np.cos(2.0 * np.pi * u2)
        z[1::2] = radius * np.sin(2.0 * np.pi * u2)
        return mean + sd * z[:n]

    def permutation(self, n):
        """Random permutation of ``range(n)`` (stable argsort of uniforms)."""
        return np.argsort(self.uniform(n), kind="stable")

    def integers(self, n, high):
        """``n`` integers uniform on ``[0, high)``."""
        return np.minimum((self.uniform(n) * high).astype(np.int64), high - 1)

    def spawn(self, key):
        """Independent child stream keyed by ``key``; does not advance ``self``."""
        return SeededRng(mix64(self.seed ^ mix64((int(key) * _GAMMA + 1) & _MASK64)))


def rng_normal(rng, n, mean=0.0, sd=1.0):
    return rng.normal(n, mean, sd)
