"""Coordinate MLP: SIREN-style init, forward pass, exact reverse-mode
gradients of the MSE loss, input Jacobians and Lipschitz certificates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .activations import Activation, Kind
from .numerics import DimensionError, Rng, as_matrix, spectral_norm

CHECKPOINT_VERSION = 1

# Rows per block in backward(). Small enough that a block's activations stay
# in cache; a fixed constant, so gradients are bit-identical across machines.
BLOCK_ROWS = 256


@dataclass(frozen=True)
class FourierEncoder:
    """Axis-aligned positional encoding with frequencies 2^j * pi, j < n."""

    num_frequencies: int = 10

    def __post_init__(self):
        if self.num_frequencies < 1:
            raise ValueError("num_frequencies must be >= 1")

    @property
    def frequencies(self) -> np.ndarray:
        return math.pi * 2.0 ** np.arange(self.num_frequencies)

    def encoded_dim(self, in_dim: int) -> int:
        return in_dim * 2 * self.num_frequencies

    def encode(self, coords: np.ndarray) -> np.ndarray:
        a = coords[:, :, None] * self.frequencies
        n = coords.shape[0]
        return np.ascontiguousarray(np.concatenate([np.sin(a).reshape(n, -1), np.cos(a).reshape(n, -1)], axis=1))


@dataclass(frozen=True)
class NetConfig:
    in_dim: int
    out_dim: int
    activation: Activation
    hidden_layers: int = 3
    width: int = 256
    output_linear: bool = True
    encoder: FourierEncoder | None = None
    init_seed: int = 0

    def __post_init__(self):
        if self.hidden_layers < 1 or self.width < 1 or self.in_dim < 1 or self.out_dim < 1:
            raise ValueError("hidden_layers, width, in_dim and out_dim must all be >= 1")

    def layer_shapes(self) -> list[tuple[int, int]]:
        """(fan_out, fan_in) per layer, input side first."""
        first = self.encoder.encoded_dim(self.in_dim) if self.encoder else self.in_dim
        if self.output_linear:
            dims = [first] + [self.width] * self.hidden_layers + [self.out_dim]
        else:
            dims = [first] + [self.width] * (self.hidden_layers - 1) + [self.out_dim]
        return [(dims[i + 1], dims[i]) for i in range(len(dims) - 1)]

    def activated(self) -> list[bool]:
        n = len(self.layer_shapes())
        return [not (self.output_linear and i == n - 1) for i in range(n)]

    def to_dict(self) -> dict:
        return {
            "in_dim": self.in_dim,
            "out_dim": self.out_dim,
            "activation": self.activation.to_dict(),
            "hidden_layers": self.hidden_layers,
            "width": self.width,
            "output_linear": self.output_linear,
            "fourier_frequencies": self.encoder.num_frequencies if self.encoder else 0,
            "init_seed": self.init_seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        d = dict(d)
        nf = d.pop("fourier_frequencies", 0)
        d["activation"] = Activation.from_dict(d["activation"])
        return cls(encoder=FourierEncoder(nf) if nf else None, **d)


@dataclass
class CoordinateNet:
    config: NetConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    _activated: list[bool] = field(init=False, repr=False)

    def __post_init__(self):
        shapes = self.config.layer_shapes()
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise DimensionError(f"expected {len(shapes)} layers, got {len(self.weights)} weights / {len(self.biases)} biases")
        for i, ((fo, fi), w, b) in enumerate(zip(shapes, self.weights, self.biases)):
            if w.shape != (fo, fi) or b.shape != (fo,):
                raise DimensionError(f"layer {i}: expected W {(fo, fi)}, b {(fo,)}; got {w.shape}, {b.shape}")
        self._activated = self.config.activated()

    @property
    def activation(self) -> Activation:
        return self.config.activation

    @property
    def num_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "CoordinateNet":
        return CoordinateNet(self.config, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.weights + self.biases])

    def set_flat_parameters(self, theta: np.ndarray) -> None:
        i = 0
        for p in self.weights + self.biases:
            p[...] = theta[i : i + p.size].reshape(p.shape)
            i += p.size


@dataclass
class GradientBundle:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    loss: float

    def flat(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.weights + self.biases])

    def scaled(self, c: float) -> "GradientBundle":
        return GradientBundle([c * g for g in self.weights], [c * g for g in self.biases], self.loss)


class BoundCertificate(NamedTuple):
    per_layer: list[float]
    product: float


def init_net(config: NetConfig) -> CoordinateNet:
    """SIREN-style init: first layer U(-1/n, 1/n), later layers
    U(-sqrt(6/n)/w0, sqrt(6/n)/w0). beta never enters the init."""
    rng = Rng(config.init_seed)
    act = config.activation
    omega = 1.0 if config.encoder is not None else act.init_omega
    weights, biases = [], []
    for i, ((fo, fi), on) in enumerate(zip(config.layer_shapes(), config.activated())):
        bound = 1.0 / fi if i == 0 else math.sqrt(6.0 / fi) / omega
        weights.append(rng.uniform(-bound, bound, (fo, fi)))
        if on and act.kind is Kind.FINER:
            k = act.finer_bias_range
            biases.append(rng.uniform(-k, k, (fo,)))
        else:
            biases.append(np.zeros(fo))
    return CoordinateNet(config, weights, biases)


def _prepare_input(net: CoordinateNet, coords) -> np.ndarray:
    x = as_matrix(coords, "coords")
    if x.shape[1] != net.config.in_dim:
        raise DimensionError(f"coords have {x.shape[1]} columns, net expects in_dim={net.config.in_dim}")
    if net.config.encoder is not None:
        x = net.config.encoder.encode(x)
    return x


def _forward_trace(net: CoordinateNet, x: np.ndarray):
    """Layer inputs and activation derivatives needed by the backward pass."""
    act = net.activation
    inputs, derivs = [], []
    h = x
    for w, b, on in zip(net.weights, net.biases, net._activated):
        inputs.append(h)
        z = h @ w.T
        if on:
            h, d = act.forward(z, b, d=None)
            derivs.append(d)
        else:
            z += b
            h = z
            derivs.append(None)
    return h, inputs, derivs


def forward(net: CoordinateNet, coords) -> np.ndarray:
    x = _prepare_input(net, coords)
    act = net.activation
    h = x
    for w, b, on in zip(net.weights, net.biases, net._activated):
        z = h @ w.T
        if on:
            h, _ = act.forward(z, b)
        else:
            z += b
            h = z
    return h


def backward(net: CoordinateNet, coords, targets) -> GradientBundle:
    """Gradient of mean((f(coords) - targets)^2) over all entries.

    The batch is processed in blocks of BLOCK_ROWS rows and the per-block
    gradients summed, which is the same full-batch gradient up to summation
    order but avoids streaming every activation through main memory.
    """
    x = _prepare_input(net, coords)
    t = as_matrix(targets, "targets")
    if t.shape != (x.shape[0], net.config.out_dim):
        raise DimensionError(f"targets shape {t.shape} does not match ({x.shape[0]}, {net.config.out_dim})")
    n = len(net.weights)
    gw = [np.zeros_like(w) for w in net.weights]
    gb = [np.zeros_like(b) for b in net.biases]
    scale = 2.0 / t.size
    sq = 0.0
    for start in range(0, x.shape[0], BLOCK_ROWS):
        out, inputs, derivs = _forward_trace(net, x[start : start + BLOCK_ROWS])
        resid = out - t[start : start + BLOCK_ROWS]
        sq += float(np.sum(resid * resid))
        delta = resid * scale
        for i in range(n - 1, -1, -1):
            if derivs[i] is not None:
                delta *= derivs[i]
            gw[i] += delta.T @ inputs[i]
            gb[i] += delta.sum(axis=0)
            if i > 0:
                delta = delta @ net.weights[i]
    return GradientBundle(gw, gb, sq / t.size)


def loss(net: CoordinateNet, coords, targets) -> float:
    r = forward(net, coords) - as_matrix(targets, "targets")
    return float(np.mean(r * r))


def input_jacobian(net: CoordinateNet, x) -> np.ndarray:
    """d outputs / d inputs at a single point, as an (out_dim, in_dim) matrix."""
    if net.config.encoder is not None:
        raise ValueError("input_jacobian is defined for raw-coordinate nets only (encoder present)")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    x = _prepare_input(net, x)
    act = net.activation
    jac = np.eye(net.config.in_dim)
    h = x
    for w, b, on in zip(net.weights, net.biases, net._activated):
        z = h @ w.T
        jac = w @ jac
        if on:
            h, d = act.forward(z, b)
            jac = d[0][:, None] * jac
        else:
            h = z + b
    return jac


def parameter_jacobian(net: CoordinateNet, coords) -> np.ndarray:
    """Per-sample gradients of a scalar-output net, shape (batch, n_params).

    Column order matches :meth:`CoordinateNet.flat_parameters` (all weights,
    then all biases).
    """
    if net.config.out_dim != 1:
        raise DimensionError("parameter_jacobian needs a scalar-output net")
    x = _prepare_input(net, coords)
    out, inputs, derivs = _forward_trace(net, x)
    nb = x.shape[0]
    n = len(net.weights)
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    delta = np.ones((nb, 1))
    for i in range(n - 1, -1, -1):
        if derivs[i] is not None:
            delta = delta * derivs[i]
        gw[i] = (delta[:, :, None] * inputs[i][:, None, :]).reshape(nb, -1)
        gb[i] = delta
        if i > 0:
            delta = delta @ net.weights[i]
    return np.concatenate(gw + gb, axis=1)


def layer_bound_certificate(net: CoordinateNet) -> BoundCertificate:
    """Per-layer Lipschitz factors L_act * ||W||_2 and their product.

    A linear output layer contributes ||W||_2. The product upper-bounds the
    spectral norm of the input Jacobian everywhere.
    """
    if net.config.encoder is not None:
        raise ValueError("certificate is defined for raw-coordinate nets only (encoder present)")
    lip = net.activation.lipschitz_constant()
    factors = []
    for w, on in zip(net.weights, net._activated):
        s = spectral_norm(w)
        factors.append(lip * s if on else s)
    return BoundCertificate(factors, float(np.prod(factors)))


def save_checkpoint(net: CoordinateNet, path) -> None:
    arrays = {f"w{i}": w for i, w in enumerate(net.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(net.biases)})
    meta = json.dumps({"format": "hosc-checkpoint", "version": CHECKPOINT_VERSION, "config": net.config.to_dict()})
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.frombuffer(meta.encode(), dtype=np.uint8), **arrays)


def load_checkpoint(path) -> CoordinateNet:
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(bytes(z["meta"]).decode())
        if meta.get("format") != "hosc-checkpoint" or meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
        config = NetConfig.from_dict(meta["config"])
        n = len(config.layer_shapes())
        weights = [z[f"w{i}"].astype(np.float64) for i in range(n)]
        biases = [z[f"b{i}"].astype(np.float64) for i in range(n)]
    return CoordinateNet(config, weights, biases)
