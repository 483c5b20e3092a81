import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from hosc.activations import Activation
from hosc.network import NetConfig, init_net
from hosc.numerics import DimensionError, Rng
from hosc.signals import (
    AudioDomain,
    ImageBuffer,
    ImageDomain,
    WaveBuffer,
    audio_to_dataset,
    checker_gradient,
    checkerboard,
    format_psnr,
    image_to_dataset,
    metric_from_loss,
    metrics,
    multitone,
    psnr_from_mse,
    reconstruct,
    values_to_buffer,
    volume_to_dataset,
)


def naive_mse(pred, target):
    total = 0.0
    n = 0
    for p_row, t_row in zip(pred, target):
        for p, t in zip(p_row, t_row):
            d = (p + 1.0) / 2.0 - (t + 1.0) / 2.0
            total += d * d
            n += 1
    return total / n


class TestImageDataset:
    def test_white(self):
        d = image_to_dataset(ImageBuffer(np.full((2, 2, 3), 255, np.uint8)))
        assert len(d) == 4
        assert_array_equal(d.targets, np.ones((4, 3)))
        assert d.domain == ImageDomain(2, 2, 3)

    def test_corner_order(self):
        d = image_to_dataset(ImageBuffer(np.zeros((2, 2, 1), np.uint8)))
        assert_array_equal(d.coords, [[-1, -1], [1, -1], [-1, 1], [1, 1]])

    def test_mid_gray(self):
        d = image_to_dataset(ImageBuffer(np.full((3, 3, 1), 128, np.uint8)))
        assert np.all(np.abs(d.targets) <= 2.0 / 255)

    def test_non_square_order(self):
        px = np.arange(6, dtype=np.uint8).reshape(2, 3, 1)
        d = image_to_dataset(ImageBuffer(px))
        assert_allclose(d.coords[:3, 0], [-1, 0, 1])
        assert_allclose(d.coords[:3, 1], [-1, -1, -1])
        assert_allclose((d.targets[:, 0] + 1) * 255 / 2, np.arange(6), atol=1e-12)

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            image_to_dataset(ImageBuffer(np.zeros((1, 5, 1), np.uint8)))
        with pytest.raises(ValueError):
            image_to_dataset(ImageBuffer(np.zeros((0, 0, 3), np.uint8)))

    def test_bad_channels(self):
        with pytest.raises(DimensionError):
            ImageBuffer(np.zeros((2, 2, 2), np.uint8))


class TestAudioDataset:
    def test_peak_normalization(self):
        d = audio_to_dataset(WaveBuffer(np.array([0, 1000, -1000], np.int16), 8000))
        assert_array_equal(d.targets[:, 0], [0.0, 1.0, -1.0])

    def test_coords(self):
        d = audio_to_dataset(WaveBuffer(np.array([1, 2, 3, 4, 5], np.int16), 8000))
        assert_allclose(d.coords[:, 0], [-1, -0.5, 0, 0.5, 1])
        assert d.domain == AudioDomain(5, 8000)

    def test_pcm_peak(self):
        d = audio_to_dataset(WaveBuffer(np.array([16384, 0], np.int16), 8000), peak=32768)
        assert d.targets[0, 0] == 0.5

    def test_silence(self):
        with pytest.raises(ValueError, match="silent"):
            audio_to_dataset(WaveBuffer(np.zeros(10, np.int16), 8000))

    def test_too_short(self):
        with pytest.raises(ValueError):
            audio_to_dataset(WaveBuffer(np.array([5], np.int16), 8000))


class TestVolume:
    def test_shape_and_order(self):
        frames = np.zeros((2, 3, 4, 1), np.uint8)
        d = volume_to_dataset(frames)
        assert d.coords.shape == (24, 3)
        assert_allclose(d.coords[:4, 0], np.linspace(-1, 1, 4))
        assert d.coords[0, 2] == -1 and d.coords[-1, 2] == 1
        out = values_to_buffer(d.targets, d)
        assert_array_equal(out, frames)


class TestMetrics:
    def test_identical(self):
        t = Rng(0).uniform(-1, 1, (5, 3))
        m = metrics(t, t)
        assert m.mse == 0.0 and math.isinf(m.psnr_db)
        assert format_psnr(m.psnr_db) == "inf"

    def test_constant_error(self):
        t = np.zeros((4, 2))
        m = metrics(t + 0.2, t)  # 0.1 on the [0, 1] scale
        assert m.mse == pytest.approx(0.01, rel=1e-12)
        assert m.psnr_db == pytest.approx(20.0, rel=1e-12)

    def test_naive_oracle(self):
        r = Rng(3)
        p, t = r.uniform(-1, 1, (30, 3)), r.uniform(-1, 1, (30, 3))
        assert metrics(p, t).mse == pytest.approx(naive_mse(p, t), abs=1e-12)

    def test_symmetric(self):
        r = Rng(4)
        p, t = r.uniform(-1, 1, (9, 2)), r.uniform(-1, 1, (9, 2))
        assert metrics(p, t).mse == metrics(t, p).mse

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            metrics(np.zeros((2, 2)), np.zeros((2, 3)))

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(1e-12, 10.0), min_size=2, max_size=20, unique=True))
    def test_psnr_decreasing(self, mses):
        mses = sorted(mses)
        # rungs one ulp apart can round to the same log10
        assume(all(b > a * (1 + 1e-9) for a, b in zip(mses, mses[1:])))
        ps = [psnr_from_mse(m) for m in mses]
        assert all(a > b for a, b in zip(ps, ps[1:]))

    def test_loss_scale(self):
        # training loss on [-1, 1] is 4x the metric mse on [0, 1]
        r = Rng(5)
        p, t = r.uniform(-1, 1, (10, 1)), r.uniform(-1, 1, (10, 1))
        loss = float(np.mean((p - t) ** 2))
        assert metric_from_loss(loss).mse == pytest.approx(metrics(p, t).mse, rel=1e-14)


class TestReconstruct:
    def test_constant_black(self):
        d = image_to_dataset(checkerboard(8, 2))
        net = init_net(NetConfig(2, 1, Activation.sine(), hidden_layers=1, width=4))
        for w in net.weights:
            w[...] = 0.0
        net.biases[-1][...] = -1.0
        img = reconstruct(net, d)
        assert img.pixels.shape == (8, 8, 1)
        assert not np.any(img.pixels)

    def test_identity_round_trip(self):
        px = (Rng(1).random((16, 16, 3)) * 256).astype(np.uint8)
        d = image_to_dataset(ImageBuffer(px))
        back = values_to_buffer(d.targets, d)
        assert np.max(np.abs(back.pixels.astype(int) - px.astype(int))) <= 1

    def test_audio_length(self):
        wave = multitone(800, 0.5)
        d = audio_to_dataset(wave)
        net = init_net(NetConfig(1, 1, Activation.sine(), hidden_layers=1, width=4))
        out = reconstruct(net, d)
        assert out.samples.shape == (400,)
        assert out.sample_rate == 800
        assert_array_equal(values_to_buffer(d.targets, d).samples, wave.samples)

    def test_clamps(self):
        d = image_to_dataset(checkerboard(4, 2))
        img = values_to_buffer(np.full_like(d.targets, 3.0), d)
        assert np.all(img.pixels == 255)

    def test_dimension_mismatch(self):
        d = image_to_dataset(checker_gradient(8))
        net = init_net(NetConfig(2, 1, Activation.sine(), hidden_layers=1, width=4))
        with pytest.raises(DimensionError):
            reconstruct(net, d)


class TestBuiltins:
    def test_checkerboard(self):
        img = checkerboard(64, 8)
        assert img.pixels.shape == (64, 64, 1)
        assert img.pixels[0, 0, 0] == 0 and img.pixels[0, 8, 0] == 255 and img.pixels[8, 8, 0] == 0

    def test_checker_gradient(self):
        img = checker_gradient(64)
        assert img.pixels.shape == (64, 64, 3)
        assert img.pixels.dtype == np.uint8
        assert len(np.unique(img.pixels)) > 32
        assert_array_equal(checker_gradient(64).pixels, img.pixels)

    def test_multitone_spectrum(self):
        w = multitone(16000, 1.0)
        assert w.samples.shape == (16000,)
        assert np.max(np.abs(w.samples)) == round(0.9 * 32767)
        spec = np.abs(np.fft.rfft(w.samples.astype(float)))
        top = sorted(np.argsort(spec)[-3:])
        assert top == [200, 900, 3700]
