"""Activation families compared in the experiments.

Each :class:`Activation` carries its closed-form value, derivative and
activation-level Lipschitz constant. ``value``/``derivative`` are plain numpy
and serve as the reference; :meth:`Activation.forward` is the fused fast path
used by the network.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from . import _kernels


class Kind(str, Enum):
    HOSC = "hosc"
    SINE = "sine"
    SCALED_SINE = "scaled_sine"
    FINER = "finer"
    GAUSSIAN = "gaussian"
    # testing aid: makes a net purely linear
    IDENTITY = "identity"


PERIODIC = (Kind.HOSC, Kind.SINE, Kind.SCALED_SINE)


class UnboundedLipschitz(ValueError):
    """The activation has no finite global Lipschitz constant."""


class WrongKind(ValueError):
    pass


@dataclass(frozen=True)
class Activation:
    kind: Kind
    beta: float = 1.0
    omega0: float = 30.0
    sigma: float = 1.0
    finer_bias_range: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        for name in ("beta", "omega0", "sigma"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, v)
        k = float(self.finer_bias_range)
        if not (math.isfinite(k) and k >= 0):
            raise ValueError(f"finer_bias_range must be >= 0, got {k!r}")
        object.__setattr__(self, "finer_bias_range", k)

    @classmethod
    def hosc(cls, beta: float, omega0: float = 30.0) -> "Activation":
        return cls(Kind.HOSC, beta=beta, omega0=omega0)

    @classmethod
    def sine(cls, omega0: float = 30.0) -> "Activation":
        return cls(Kind.SINE, omega0=omega0)

    @classmethod
    def scaled_sine(cls, beta: float, omega0: float = 30.0) -> "Activation":
        return cls(Kind.SCALED_SINE, beta=beta, omega0=omega0)

    @classmethod
    def finer(cls, omega0: float = 30.0, k: float = 1.0) -> "Activation":
        return cls(Kind.FINER, omega0=omega0, finer_bias_range=k)

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "Activation":
        return cls(Kind.GAUSSIAN, sigma=sigma)

    @classmethod
    def gaussian_from_scale(cls, scale: float) -> "Activation":
        """Gaussian written as exp(-(scale*x)^2), i.e. sigma = 1/(sqrt(2) scale)."""
        return cls(Kind.GAUSSIAN, sigma=1.0 / (math.sqrt(2.0) * scale))

    @classmethod
    def identity(cls) -> "Activation":
        return cls(Kind.IDENTITY)

    @property
    def label(self) -> str:
        if self.kind is Kind.HOSC:
            return f"hosc(beta={self.beta:g},omega0={self.omega0:g})"
        if self.kind is Kind.SCALED_SINE:
            return f"scaled_sine(beta={self.beta:g},omega0={self.omega0:g})"
        if self.kind is Kind.SINE:
            return f"sine(omega0={self.omega0:g})"
        if self.kind is Kind.FINER:
            return f"finer(omega0={self.omega0:g},k={self.finer_bias_range:g})"
        if self.kind is Kind.GAUSSIAN:
            return f"gaussian(sigma={self.sigma:g})"
        return "identity"

    @property
    def period(self) -> float | None:
        if self.kind in PERIODIC:
            return 2.0 * math.pi / self.omega0
        return None

    @property
    def init_omega(self) -> float:
        """Frequency divisor used by SIREN-style hidden-layer init."""
        if self.kind in PERIODIC or self.kind is Kind.FINER:
            return self.omega0
        return 1.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = self.kind.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Activation":
        return cls(**d)

    # -- closed forms -----------------------------------------------------

    def value(self, x):
        x = np.asarray(x, dtype=np.float64)
        w = self.omega0
        if self.kind is Kind.HOSC:
            out = np.tanh(self.beta * np.sin(w * x))
        elif self.kind is Kind.SINE:
            out = np.sin(w * x)
        elif self.kind is Kind.SCALED_SINE:
            out = self.beta * np.sin(w * x)
        elif self.kind is Kind.FINER:
            out = np.sin(w * (np.abs(x) + 1.0) * x)
        elif self.kind is Kind.GAUSSIAN:
            out = np.exp(-(x * x) / (2.0 * self.sigma**2))
        else:
            out = x.copy()
        return out[()] if out.ndim == 0 else out

    def derivative(self, x):
        x = np.asarray(x, dtype=np.float64)
        w = self.omega0
        if self.kind is Kind.HOSC:
            sech = 1.0 / np.cosh(self.beta * np.sin(w * x))
            out = self.beta * w * np.cos(w * x) * sech * sech
        elif self.kind is Kind.SINE:
            out = w * np.cos(w * x)
        elif self.kind is Kind.SCALED_SINE:
            out = self.beta * w * np.cos(w * x)
        elif self.kind is Kind.FINER:
            # d/dx[(|x|+1)x] = 2|x| + 1, continuous through 0
            ax = np.abs(x)
            out = w * (2.0 * ax + 1.0) * np.cos(w * (ax + 1.0) * x)
        elif self.kind is Kind.GAUSSIAN:
            s2 = self.sigma**2
            out = -(x / s2) * np.exp(-(x * x) / (2.0 * s2))
        else:
            out = np.ones_like(x)
        return out[()] if out.ndim == 0 else out

    def lipschitz_constant(self) -> float:
        if self.kind in (Kind.HOSC, Kind.SCALED_SINE):
            return self.beta * self.omega0
        if self.kind is Kind.SINE:
            return self.omega0
        if self.kind is Kind.GAUSSIAN:
            return math.exp(-0.5) / self.sigma
        if self.kind is Kind.IDENTITY:
            return 1.0
        raise UnboundedLipschitz(
            "FINER's derivative omega0*(2|x|+1)*cos(...) grows with |x|; "
            "no global Lipschitz constant exists on the real line"
        )

    # -- asymptotic surrogates (HOSC only) --------------------------------

    def _require_hosc(self, what: str):
        if self.kind is not Kind.HOSC:
            raise WrongKind(f"{what} is defined for HOSC only, not {self.kind.value}")

    def small_beta_surrogate(self, x):
        """Third-order expansion beta*s - beta^3 s^3 / 3 with s = sin(omega0 x)."""
        self._require_hosc("small_beta_surrogate")
        s = np.sin(self.omega0 * np.asarray(x, dtype=np.float64))
        out = self.beta * s - (self.beta**3 / 3.0) * s**3
        return out[()] if out.ndim == 0 else out

    def square_wave_limit(self, x):
        """sign(sin(omega0 x)) with exact zeros at x = k*pi/omega0."""
        self._require_hosc("square_wave_limit")
        u = self.omega0 * np.asarray(x, dtype=np.float64)
        k = np.rint(u / math.pi)
        on_zero = np.abs(u - k * math.pi) <= 8.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(u))
        out = np.where(on_zero, 0.0, np.sign(np.sin(u)))
        return out[()] if out.ndim == 0 else out

    # -- fused network path -----------------------------------------------

    def forward(self, z: np.ndarray, bias: np.ndarray, h: np.ndarray | None = None, d: np.ndarray | None = None):
        """Return (value, derivative) of the activation at ``z + bias``.

        ``z`` is a C-contiguous (batch, units) float64 array; ``bias`` has
        shape (units,). ``h``/``d`` may be preallocated outputs; neither may
        alias ``z``.
        """
        if h is None:
            h = np.empty_like(z)
        if d is None:
            d = np.empty_like(z)
        kind = self.kind
        if kind is Kind.HOSC:
            bad = _kernels.hosc(z, bias, self.omega0, self.beta, h, d)
        elif kind is Kind.SINE:
            bad = _kernels.scaled_sine(z, bias, self.omega0, 1.0, h, d)
        elif kind is Kind.SCALED_SINE:
            bad = _kernels.scaled_sine(z, bias, self.omega0, self.beta, h, d)
        elif kind is Kind.FINER:
            bad = _kernels.finer(z, bias, self.omega0, 1.0, h, d)
        else:
            zb = z + bias
            d[...] = self.derivative(zb)
            h[...] = self.value(zb)
            return h, d
        if bad:
            # arguments beyond the kernels' reduction range
            zb = z + bias
            d[...] = self.derivative(zb)
            h[...] = self.value(zb)
        return h, d
