"""Dense float64 helpers, a fixed counter-based RNG and finite differences.

Matrices are plain C-contiguous ``numpy.float64`` arrays; the functions here
add the shape and finiteness checks the rest of the package relies on.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

_U64 = (1 << 64) - 1


class DimensionError(ValueError):
    """Operand shapes are incompatible."""


class NonFiniteError(ArithmeticError):
    """A computation produced NaN or Inf."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    out = a @ b
    if not np.isfinite(out).all():
        raise NonFiniteError(f"product of {a.shape} and {b.shape} is not finite")
    return out


def spectral_norm(w, iters: int = 200, tol: float = 1e-10) -> float:
    """Largest singular value of ``w`` by power iteration on ``w.T @ w``.

    The start vector is all-ones (normalized), so the result is reproducible.
    The estimate ``||w v||`` with unit ``v`` never exceeds the true norm.
    ``tol`` is relative to the current estimate, which keeps the iteration
    count (and so the result) invariant under rescaling of ``w``.
    """
    w = as_matrix(w, "w")
    if w.size == 0:
        raise DimensionError("spectral norm of an empty matrix")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not np.any(w):
        return 0.0

    v = np.full(w.shape[1], 1.0 / math.sqrt(w.shape[1]))
    if not np.any(w @ v):
        # all-ones start is orthogonal to the row space
        v = Rng(0).uniform(-1.0, 1.0, w.shape[1])
        v /= np.linalg.norm(v)

    sigma = 0.0
    for _ in range(iters):
        u = w @ v
        new_sigma = float(np.linalg.norm(u))
        v = w.T @ u
        vn = np.linalg.norm(v)
        if vn == 0.0:
            return new_sigma
        v /= vn
        if abs(new_sigma - sigma) <= tol * new_sigma:
            sigma = new_sigma
            break
        sigma = new_sigma
    return max(sigma, float(np.linalg.norm(w @ v)))


def central_diff(f: Callable[[float], float], x: float, h: float) -> float:
    if not h > 0:
        raise ValueError("step h must be positive")
    fp = f(x + h)
    fm = f(x - h)
    if not (math.isfinite(fp) and math.isfinite(fm)):
        raise NonFiniteError(f"f is not finite near x={x!r}: f(x+h)={fp!r}, f(x-h)={fm!r}")
    return (fp - fm) / (2.0 * h)


class Rng:
    """Seeded Philox4x64 stream.

    Floats are built from the raw 64-bit words (top 53 bits), never from
    numpy's distribution code, so a seed maps to the same values on every
    platform and numpy release.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _U64
        self._bitgen = np.random.Philox(key=self.seed)

    def raw(self, n: int) -> np.ndarray:
        return np.asarray(self._bitgen.random_raw(int(n)), dtype=np.uint64)

    def random(self, shape=()) -> np.ndarray | float:
        n = int(np.prod(shape)) if shape != () else 1
        words = self.raw(n) >> np.uint64(11)
        out = words.astype(np.float64) * (1.0 / 9007199254740992.0)
        if shape == ():
            return float(out[0])
        return out.reshape(shape)

    def uniform(self, low: float, high: float, shape=()) -> np.ndarray | float:
        u = self.random(shape)
        return low + (high - low) * u
