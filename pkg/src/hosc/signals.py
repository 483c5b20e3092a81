"""Coordinate datasets for images, audio and volumes, plus metrics.

Coordinates and values are mapped to [-1, 1]. Grids include both endpoints
(``linspace(-1, 1, n)``), and rows are ordered row-major with the x
(column / sample) axis varying fastest.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import DimensionError, as_matrix


@dataclass(frozen=True)
class ImageBuffer:
    """8-bit image, ``pixels`` shaped (height, width, channels), channels 1 or 3."""

    pixels: np.ndarray
    maxval: int = 255

    def __post_init__(self):
        if self.pixels.ndim != 3 or self.pixels.shape[2] not in (1, 3):
            raise DimensionError(f"pixels must be (h, w, 1|3), got {self.pixels.shape}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]


@dataclass(frozen=True)
class WaveBuffer:
    samples: np.ndarray  # int16, mono
    sample_rate: int


@dataclass(frozen=True)
class ImageDomain:
    width: int
    height: int
    channels: int


@dataclass(frozen=True)
class AudioDomain:
    samples: int
    sample_rate: int


@dataclass(frozen=True)
class VolumeDomain:
    width: int
    height: int
    frames: int
    channels: int


@dataclass(frozen=True)
class SignalDataset:
    coords: np.ndarray
    targets: np.ndarray
    domain: ImageDomain | AudioDomain | VolumeDomain
    # original value that maps to +1 (image maxval, audio peak)
    value_scale: float

    def __len__(self) -> int:
        return self.coords.shape[0]


@dataclass(frozen=True)
class MetricRecord:
    mse: float
    psnr_db: float
    epoch: int = 0

    def as_row(self) -> dict:
        return {"epoch": self.epoch, "mse": repr(self.mse), "psnr_db": format_psnr(self.psnr_db)}


def format_psnr(p: float) -> str:
    return "inf" if math.isinf(p) else repr(p)


def psnr_from_mse(mse: float) -> float:
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def metric_from_loss(loss: float, epoch: int = 0) -> MetricRecord:
    """Training loss lives on the [-1, 1] scale; metrics on [0, 1] (factor 1/4)."""
    mse = loss / 4.0
    return MetricRecord(mse, psnr_from_mse(mse), epoch)


def _grid(n: int) -> np.ndarray:
    return np.linspace(-1.0, 1.0, n)


def image_to_dataset(img: ImageBuffer) -> SignalDataset:
    h, w, c = img.pixels.shape
    if h * w == 0:
        raise ValueError("empty image")
    if h < 2 or w < 2:
        raise ValueError(f"image must be at least 2x2, got {w}x{h}")
    xs, ys = np.meshgrid(_grid(w), _grid(h))
    coords = np.stack([xs.ravel(), ys.ravel()], axis=1)
    targets = img.pixels.reshape(h * w, c).astype(np.float64) * (2.0 / img.maxval) - 1.0
    return SignalDataset(coords, np.ascontiguousarray(targets), ImageDomain(w, h, c), float(img.maxval))


def audio_to_dataset(wave: WaveBuffer, peak: float | None = None) -> SignalDataset:
    s = np.asarray(wave.samples).astype(np.float64).ravel()
    if s.size < 2:
        raise ValueError("audio needs at least 2 samples")
    if peak is None:
        peak = float(np.max(np.abs(s)))
    if peak == 0.0:
        raise ValueError("silent clip: peak normalization undefined")
    coords = _grid(s.size)[:, None]
    targets = (s / peak)[:, None]
    return SignalDataset(coords, targets, AudioDomain(s.size, wave.sample_rate), float(peak))


def volume_to_dataset(frames: np.ndarray, maxval: int = 255) -> SignalDataset:
    """``frames`` shaped (frames, height, width, channels); coords are (x, y, t)."""
    if frames.ndim != 4:
        raise DimensionError(f"frames must be (t, h, w, c), got {frames.shape}")
    t, h, w, c = frames.shape
    if min(t, h, w) < 2:
        raise ValueError("volume extents must all be >= 2")
    ts, ys, xs = np.meshgrid(_grid(t), _grid(h), _grid(w), indexing="ij")
    coords = np.stack([xs.ravel(), ys.ravel(), ts.ravel()], axis=1)
    targets = frames.reshape(-1, c).astype(np.float64) * (2.0 / maxval) - 1.0
    return SignalDataset(coords, np.ascontiguousarray(targets), VolumeDomain(w, h, t, c), float(maxval))


def metrics(pred, target, epoch: int = 0) -> MetricRecord:
    p = as_matrix(pred, "pred")
    t = as_matrix(target, "target")
    if p.shape != t.shape:
        raise DimensionError(f"pred {p.shape} and target {t.shape} differ")
    diff = (p + 1.0) * 0.5 - (t + 1.0) * 0.5
    mse = float(np.mean(diff * diff))
    return MetricRecord(mse, psnr_from_mse(mse), epoch)


def values_to_buffer(values: np.ndarray, data: SignalDataset):
    """Inverse value mapping, clamp, quantize and reshape to the domain."""
    dom = data.domain
    if values.shape != data.targets.shape:
        raise DimensionError(f"values {values.shape} do not match dataset targets {data.targets.shape}")
    if isinstance(dom, AudioDomain):
        s = np.rint(values[:, 0] * data.value_scale)
        return WaveBuffer(np.clip(s, -32768, 32767).astype(np.int16), dom.sample_rate)
    q = np.rint((values + 1.0) * 0.5 * data.value_scale)
    q = np.clip(q, 0, data.value_scale).astype(np.uint8)
    if isinstance(dom, ImageDomain):
        return ImageBuffer(q.reshape(dom.height, dom.width, dom.channels), int(data.value_scale))
    return q.reshape(dom.frames, dom.height, dom.width, dom.channels)


def reconstruct(net, data: SignalDataset):
    from .network import forward

    if net.config.in_dim != data.coords.shape[1] or net.config.out_dim != data.targets.shape[1]:
        raise DimensionError(
            f"net is {net.config.in_dim}->{net.config.out_dim}, "
            f"dataset is {data.coords.shape[1]}->{data.targets.shape[1]}"
        )
    return values_to_buffer(forward(net, data.coords), data)


# -- built-in signals ------------------------------------------------------


def checkerboard(size: int = 64, squares: int = 8) -> ImageBuffer:
    idx = np.arange(size) * squares // size
    board = (idx[:, None] + idx[None, :]) % 2
    return ImageBuffer((board * 255).astype(np.uint8)[:, :, None])


def _rotated_board(size: int, square: float, degrees: float) -> np.ndarray:
    t = math.radians(degrees)
    yy, xx = np.mgrid[0:size, 0:size] + 0.5 - size / 2
    u = (math.cos(t) * xx + math.sin(t) * yy) / square
    v = (-math.sin(t) * xx + math.cos(t) * yy) / square
    return ((np.floor(u) + np.floor(v)) % 2).astype(np.float64)


def checker_gradient(size: int = 64) -> ImageBuffer:
    """RGB composite: each channel is half a rotated checkerboard (squares
    of 2.5, 2.2 and 3.3 px) and half a smooth ramp (horizontal, vertical,
    radial). Sharp edges at several scales and angles sit on top of slowly
    varying regions."""
    ramp = np.linspace(0.0, 1.0, size)
    gx = np.broadcast_to(ramp[None, :], (size, size))
    gy = np.broadcast_to(ramp[:, None], (size, size))
    yy, xx = np.mgrid[0:size, 0:size]
    rad = np.clip(np.hypot(xx - size / 2, yy - size / 2) / (size / math.sqrt(2)), 0.0, 1.0)
    r = 0.5 * _rotated_board(size, 2.5, 30.0) + 0.5 * gx
    g = 0.5 * _rotated_board(size, 2.2, -20.0) + 0.5 * gy
    b = 0.5 * _rotated_board(size, 3.3, 60.0) + 0.5 * rad
    rgb = np.stack([r, g, b], axis=2)
    return ImageBuffer(np.rint(rgb * 255).astype(np.uint8))


def multitone(sample_rate: int = 16000, duration: float = 1.0, freqs=(200.0, 900.0, 3700.0), peak: float = 0.9) -> WaveBuffer:
    n = int(round(sample_rate * duration))
    t = np.arange(n) / sample_rate
    x = sum(np.sin(2.0 * math.pi * f * t) for f in freqs)
    x = x / np.max(np.abs(x)) * peak
    return WaveBuffer(np.rint(x * 32767).astype(np.int16), sample_rate)
