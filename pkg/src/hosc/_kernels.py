"""Fused activation kernels for the training hot path.

numpy's float64 ``sin``/``cos``/``tanh`` are scalar libm calls, which makes
them the dominant cost of a full-batch epoch. These loops use branch-free
polynomial kernels (fdlibm sin/cos, cephes exp/tanh coefficients) that LLVM
can vectorize, and write value and derivative in one pass over the
pre-activations. Accuracy is about 1 ulp; ``activations`` keeps the numpy
closed forms as the reference route.

Every kernel returns the number of arguments outside ``SAFE_ARG``; callers
fall back to numpy for those batches, where the Cody-Waite reduction below
is no longer exact.
"""

import math

import numba
import numpy as np

SAFE_ARG = 1.0e5

_TWO_OVER_PI = 6.36619772367581382433e-01
# pi/2 split into 33-bit pieces; k * _PIO2_1 is exact for |k| < 2**20
_PIO2_1 = 1.57079632673412561417e00
_PIO2_2 = 6.07710050630396597660e-11
_PIO2_3 = 2.02226624871116645580e-21

_S1 = -1.66666666666666324348e-01
_S2 = 8.33333333332248946124e-03
_S3 = -1.98412698298579493134e-04
_S4 = 2.75573137070700676789e-06
_S5 = -2.50507602534068634195e-08
_S6 = 1.58969099521155010221e-10

_C1 = 4.16666666666666019037e-02
_C2 = -1.38888888888741095749e-03
_C3 = 2.48015872894767294178e-05
_C4 = -2.75573143513906633035e-07
_C5 = 2.08757232129817482790e-09
_C6 = -1.13596475577881948265e-11

_LOG2E = 1.4426950408889634073599
_LN2_HI = 6.93145751953125e-1
_LN2_LO = 1.42860682030941723212e-6
_EP0 = 1.26177193074810590878e-4
_EP1 = 3.02994407707441961300e-2
_EP2 = 9.99999999999999999910e-1
_EQ0 = 3.00198505138664455042e-6
_EQ1 = 2.52448340349684104192e-3
_EQ2 = 2.27265548208155028766e-1
_EQ3 = 2.00000000000000000009e0

_TP0 = -9.64399179425052238628e-1
_TP1 = -9.92877231001918586564e1
_TP2 = -1.61468768441708447952e3
_TQ0 = 1.12811678491632931402e2
_TQ1 = 2.23548839060100448583e3
_TQ2 = 4.84406305325125486048e3

_JIT = dict(fastmath={"contract"}, error_model="numpy", cache=True)


@numba.njit(inline="always")
def _sincos(x):
    k = math.floor(x * _TWO_OVER_PI + 0.5)
    r = ((x - k * _PIO2_1) - k * _PIO2_2) - k * _PIO2_3
    z = r * r
    s = r + r * z * (_S1 + z * (_S2 + z * (_S3 + z * (_S4 + z * (_S5 + z * _S6)))))
    hz = 0.5 * z
    w = 1.0 - hz
    c = w + (((1.0 - w) - hz) + z * z * (_C1 + z * (_C2 + z * (_C3 + z * (_C4 + z * (_C5 + z * _C6))))))
    q = k - 4.0 * math.floor(k * 0.25)
    sn = s if q == 0.0 else (c if q == 1.0 else (-s if q == 2.0 else -c))
    cs = c if q == 0.0 else (-s if q == 1.0 else (-c if q == 2.0 else s))
    return sn, cs


@numba.njit(inline="always")
def _exp_bounded(y):
    # valid for 0 <= y <= 40; 2**n assembled from its binary digits (n < 64)
    n = math.floor(y * _LOG2E + 0.5)
    r = (y - n * _LN2_HI) - n * _LN2_LO
    rr = r * r
    px = r * ((_EP0 * rr + _EP1) * rr + _EP2)
    qx = ((_EQ0 * rr + _EQ1) * rr + _EQ2) * rr + _EQ3
    p = 1.0
    p = p * 4294967296.0 if n >= 32.0 else p
    n = n - 32.0 if n >= 32.0 else n
    p = p * 65536.0 if n >= 16.0 else p
    n = n - 16.0 if n >= 16.0 else n
    p = p * 256.0 if n >= 8.0 else p
    n = n - 8.0 if n >= 8.0 else n
    p = p * 16.0 if n >= 4.0 else p
    n = n - 4.0 if n >= 4.0 else n
    p = p * 4.0 if n >= 2.0 else p
    n = n - 2.0 if n >= 2.0 else n
    p = p * 2.0 if n >= 1.0 else p
    return (1.0 + 2.0 * (px / (qx - px))) * p


@numba.njit(inline="always")
def _tanh(x):
    ax = abs(x)
    ax = ax if ax < 20.0 else 20.0
    z = x * x
    small = x + x * z * (((_TP0 * z + _TP1) * z + _TP2) / (((z + _TQ0) * z + _TQ1) * z + _TQ2))
    big = 1.0 - 2.0 / (_exp_bounded(2.0 * ax) + 1.0)
    big = big if x >= 0.0 else -big
    out = small if ax < 0.625 else big
    # propagate NaN, which the clamp above would hide
    return out + (x - x)


@numba.njit(**_JIT)
def sincos(x, s_out, c_out):
    xf = x.ravel()
    sf = s_out.ravel()
    cf = c_out.ravel()
    bad = 0
    for i in range(xf.size):
        sf[i], cf[i] = _sincos(xf[i])
        bad += abs(xf[i]) > SAFE_ARG
    return bad


@numba.njit(**_JIT)
def tanh(x, out):
    xf = x.ravel()
    of = out.ravel()
    for i in range(xf.size):
        of[i] = _tanh(xf[i])


@numba.njit(**_JIT)
def hosc(z, bias, omega0, beta, h, d):
    """h = tanh(beta sin(omega0 (z + bias))), d = dh/dz; in-place into h, d."""
    n, m = z.shape
    scale = beta * omega0
    bad = 0
    for i in range(n):
        for j in range(m):
            a = omega0 * (z[i, j] + bias[j])
            s, c = _sincos(a)
            t = _tanh(beta * s)
            h[i, j] = t
            d[i, j] = scale * c * (1.0 - t * t)
            bad += abs(a) > SAFE_ARG
    return bad


@numba.njit(**_JIT)
def scaled_sine(z, bias, omega0, beta, h, d):
    n, m = z.shape
    scale = beta * omega0
    bad = 0
    for i in range(n):
        for j in range(m):
            a = omega0 * (z[i, j] + bias[j])
            s, c = _sincos(a)
            h[i, j] = beta * s
            d[i, j] = scale * c
            bad += abs(a) > SAFE_ARG
    return bad


@numba.njit(**_JIT)
def finer(z, bias, omega0, beta, h, d):
    n, m = z.shape
    bad = 0
    for i in range(n):
        for j in range(m):
            x = z[i, j] + bias[j]
            ax = abs(x)
            a = omega0 * (ax + 1.0) * x
            s, c = _sincos(a)
            h[i, j] = s
            d[i, j] = omega0 * (2.0 * ax + 1.0) * c
            bad += abs(a) > SAFE_ARG
    return bad


def warmup():
    """Compile (or load from cache) every kernel once."""
    z = np.zeros((1, 1))
    b = np.zeros(1)
    h = np.empty((1, 1))
    d = np.empty((1, 1))
    for k in (hosc, scaled_sine, finer):
        k(z, b, 1.0, 1.0, h, d)
    sincos(z, h, d)
    tanh(z, h)
