"""Adam and the deterministic full-batch training loop."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .activations import Activation, Kind
from .network import CoordinateNet, GradientBundle, backward, loss as net_loss
from .signals import MetricRecord, SignalDataset, metric_from_loss

# per-activation learning rates used for image and audio fitting
LR_PERIODIC = 5e-4
LR_GAUSSIAN = 5e-3
LR_ENCODED = 1e-3


def default_lr(activation: Activation, encoded: bool = False) -> float:
    if encoded:
        return LR_ENCODED
    if activation.kind is Kind.GAUSSIAN:
        return LR_GAUSSIAN
    return LR_PERIODIC


class NonFiniteGradient(ArithmeticError):
    def __init__(self, block: str):
        super().__init__(f"non-finite gradient in {block}")
        self.block = block


class DivergenceError(RuntimeError):
    """Training loss became non-finite. ``epoch`` is 1-based."""

    def __init__(self, epoch: int, trace: list[MetricRecord] | None = None):
        super().__init__(f"loss diverged at epoch {epoch}")
        self.epoch = epoch
        self.trace = trace or []


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_net(cls, net: CoordinateNet, lr: float) -> "AdamState":
        params = net.weights + net.biases
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], lr)


def adam_step(state: AdamState, net: CoordinateNet, grads: GradientBundle):
    """One bias-corrected Adam update, applied in place. Returns (net, state)."""
    params = net.weights + net.biases
    gs = grads.weights + grads.biases
    if len(gs) != len(params) or len(state.m) != len(params):
        raise ValueError("gradient bundle / optimizer state do not match the net")
    n_w = len(net.weights)
    for i, (p, g) in enumerate(zip(params, gs)):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter shape {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteGradient(f"weights[{i}]" if i < n_w else f"biases[{i - n_w}]")

    state.step_count += 1
    t = state.step_count
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    for p, g, m, v in zip(params, gs, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return net, state


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    lr: float | None = None
    loss: str = "mse"
    log_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr is not None and not (self.lr > 0 and math.isfinite(self.lr)):
            raise ValueError("lr must be positive")
        if self.loss != "mse":
            raise ValueError(f"unsupported loss {self.loss!r}")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")


@dataclass
class TrainRun:
    net: CoordinateNet
    trace: list[MetricRecord]
    final: MetricRecord
    best_loss: float
    lr: float
    optimizer: AdamState = field(repr=False)


def train(
    net: CoordinateNet,
    data: SignalDataset,
    cfg: TrainConfig,
    on_log: Callable[[MetricRecord], None] | None = None,
) -> TrainRun:
    """Full-batch Adam on the MSE loss. Mutates and returns ``net``.

    Logged records hold the loss measured before that epoch's update, on the
    [0, 1] metric scale. Raises :class:`DivergenceError` on a non-finite loss.
    """
    if data.coords.shape[1] != net.config.in_dim or data.targets.shape[1] != net.config.out_dim:
        raise ValueError(
            f"dataset is {data.coords.shape[1]}->{data.targets.shape[1]}, "
            f"net is {net.config.in_dim}->{net.config.out_dim}"
        )
    lr = cfg.lr if cfg.lr is not None else default_lr(net.activation, net.config.encoder is not None)
    state = AdamState.for_net(net, lr)
    trace: list[MetricRecord] = []
    best = math.inf
    for epoch in range(1, cfg.epochs + 1):
        # overflow is caught below as a non-finite loss
        with np.errstate(over="ignore", invalid="ignore"):
            grads = backward(net, data.coords, data.targets)
        if not math.isfinite(grads.loss):
            raise DivergenceError(epoch, trace)
        best = min(best, grads.loss)
        if epoch == 1 or epoch % cfg.log_every == 0:
            rec = metric_from_loss(grads.loss, epoch)
            trace.append(rec)
            if on_log is not None:
                on_log(rec)
        try:
            adam_step(state, net, grads)
        except NonFiniteGradient as exc:
            raise DivergenceError(epoch, trace) from exc

    with np.errstate(over="ignore", invalid="ignore"):
        final_loss = net_loss(net, data.coords, data.targets)
    if not math.isfinite(final_loss):
        raise DivergenceError(cfg.epochs, trace)
    best = min(best, final_loss)
    return TrainRun(net, trace, metric_from_loss(final_loss, cfg.epochs), best, lr, state)
