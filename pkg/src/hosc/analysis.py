"""Numerical checks of HOSC's analytical properties and the empirical NTK.

Everything here evaluates the closed forms in :mod:`hosc.activations` on
dense grids; nothing is fitted.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .activations import Activation, Kind
from .network import CoordinateNet, NetConfig, init_net, parameter_jacobian

GATING_GRID = 200_001


def dense_grid(omega0: float) -> np.ndarray:
    """200*ceil(omega0) + 1 points spanning one carrier period, endpoints included."""
    return np.linspace(0.0, 2.0 * math.pi / omega0, 200 * math.ceil(omega0) + 1)


@dataclass(frozen=True)
class LipschitzScan:
    sup: float
    argmax: float
    grid_step: float
    # set for FINER: the scan covers one window only, the true sup is infinite
    unbounded: bool = False

    def distance_to_peak_set(self, omega0: float) -> float:
        """Distance from argmax to the nearest k*pi/omega0."""
        step = math.pi / omega0
        return abs(self.argmax - round(self.argmax / step) * step)


def empirical_lipschitz(a: Activation, grid_points: int = 200_000) -> LipschitzScan:
    """max |a'(x)| over a uniform grid on one period [0, 2 pi / omega0).

    Non-periodic kinds use [-6 sigma, 6 sigma] (Gaussian) or the window
    [0, 2 pi / omega0] (FINER, flagged unbounded).
    """
    if grid_points < 1000:
        raise ValueError("need at least 1000 grid points per period")
    if a.kind is Kind.GAUSSIAN:
        lo, hi = -6.0 * a.sigma, 6.0 * a.sigma
    elif a.kind is Kind.IDENTITY:
        lo, hi = -1.0, 1.0
    else:
        lo, hi = 0.0, 2.0 * math.pi / a.omega0
    step = (hi - lo) / grid_points
    x = lo + step * np.arange(grid_points)
    g = np.abs(a.derivative(x))
    i = int(np.argmax(g))
    return LipschitzScan(float(g[i]), float(x[i]), step, unbounded=a.kind is Kind.FINER)


@dataclass(frozen=True)
class GatingQuery:
    kappa: float
    beta: float
    omega0: float = 1.0
    grid_points: int = GATING_GRID

    def __post_init__(self):
        if not 0.0 < self.kappa < 1.0:
            raise ValueError(f"kappa must lie strictly inside (0, 1), got {self.kappa}")
        if not (self.beta > 0 and self.omega0 > 0):
            raise ValueError("beta and omega0 must be positive")
        if self.grid_points < 1:
            raise ValueError("grid_points must be positive")


@dataclass(frozen=True)
class GatingResult:
    empirical_measure: float
    analytic_bound: float
    cell: float

    @property
    def within_bound(self) -> bool:
        return self.empirical_measure <= self.analytic_bound + self.cell


def gating_bound(kappa: float, beta: float, omega0: float) -> float:
    """(4/omega0) * arcsin(min(1, arcosh(1/sqrt(kappa)) / beta))."""
    c = math.acosh(1.0 / math.sqrt(kappa))
    return 4.0 / omega0 * math.asin(min(1.0, c / beta))


def gating_measure(q: GatingQuery) -> GatingResult:
    """Measure of {x in one period : |HOSC'(x)| >= kappa*beta*omega0} by the
    midpoint rule, next to its analytic upper bound."""
    period = 2.0 * math.pi / q.omega0
    cell = period / q.grid_points
    u = (np.arange(q.grid_points) + 0.5) * (2.0 * math.pi / q.grid_points)
    # |f'| / (beta omega0) = |cos u| sech^2(beta sin u)
    sech = 1.0 / np.cosh(q.beta * np.sin(u))
    ratio = np.abs(np.cos(u)) * sech * sech
    count = int(np.count_nonzero(ratio >= q.kappa))
    return GatingResult(count * cell, gating_bound(q.kappa, q.beta, q.omega0), cell)


@dataclass(frozen=True)
class AsymptoticRow:
    beta: float
    small_beta_gap: float
    square_wave_gap: float


def asymptotic_report(betas: Sequence[float], omega0: float = 1.0, grid=None) -> list[AsymptoticRow]:
    """Sup-gaps of HOSC to beta*sin (small beta) and to sign(sin) away from
    the carrier zeros (|sin| >= 0.1), per beta."""
    x = dense_grid(omega0) if grid is None else np.asarray(grid, dtype=np.float64)
    s = np.sin(omega0 * x)
    away = np.abs(s) >= 0.1
    rows = []
    for beta in betas:
        if not beta > 0:
            raise ValueError(f"beta must be positive, got {beta}")
        a = Activation.hosc(beta, omega0)
        v = a.value(x)
        small = float(np.max(np.abs(v - beta * s)))
        square = float(np.max(np.abs(v[away] - a.square_wave_limit(x[away])))) if away.any() else 0.0
        rows.append(AsymptoticRow(float(beta), max(small, 0.0), max(square, 0.0)))
    return rows


# -- empirical NTK ----------------------------------------------------------


class DegenerateKernel(ValueError):
    pass


@dataclass
class NtkReport:
    activations: list[Activation]
    raw_kernels: list[np.ndarray]
    corr_kernels: list[np.ndarray]
    mean_diag: list[float]
    dominance_ratio: list[float]
    seeds: int
    grid: np.ndarray

    @property
    def betas(self) -> list[float | None]:
        return [a.beta if a.kind in (Kind.HOSC, Kind.SCALED_SINE) else None for a in self.activations]

    @property
    def labels(self) -> list[str]:
        return [a.label for a in self.activations]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["activation", "beta", "omega0", "mean_diag", "dominance_ratio", "seeds", "grid_points"])
            for a, md, dr in zip(self.activations, self.mean_diag, self.dominance_ratio):
                beta = a.beta if a.kind in (Kind.HOSC, Kind.SCALED_SINE) else ""
                w.writerow([a.kind.value, beta, a.omega0, repr(md), repr(dr), self.seeds, self.grid.size])

    def save_kernels(self, path) -> None:
        arrays = {}
        for i, (raw, corr) in enumerate(zip(self.raw_kernels, self.corr_kernels)):
            arrays[f"raw_{i}"] = raw
            arrays[f"corr_{i}"] = corr
        labels = np.array(self.labels)
        with open(path, "wb") as fh:
            np.savez(fh, grid=self.grid, labels=labels, **arrays)


def kernel_statistics(k: np.ndarray) -> tuple[float, float]:
    """(mean of the diagonal, diagonal mean / std of the off-diagonal)."""
    diag = np.diag(k)
    off = k[~np.eye(k.shape[0], dtype=bool)]
    sd = float(np.std(off))
    md = float(np.mean(diag))
    return md, (md / sd if sd > 0 else math.inf)


def correlation_kernel(k: np.ndarray) -> np.ndarray:
    d = np.diag(k)
    if np.any(d <= 0):
        raise DegenerateKernel("kernel has a non-positive diagonal entry; correlation undefined")
    s = np.sqrt(d)
    c = k / s[:, None] / s[None, :]
    np.fill_diagonal(c, 1.0)
    return c


def empirical_ntk(
    activations: Sequence[Activation],
    grid_points: int = 128,
    hidden_width: int = 64,
    seeds: int = 8,
    param_hook: Callable[[CoordinateNet], None] | None = None,
    include_output_bias: bool = False,
) -> NtkReport:
    """Seed-averaged NTK of a 1 -> width -> 1 net on linspace(-1, 1, grid_points).

    Seed ``s`` gives the same initial parameters for every activation (beta
    does not enter the init). Raw kernels are averaged over seeds first and
    then correlation-normalized. ``param_hook`` may overwrite parameters in
    place after init (test aid).

    The output bias is left out of the gradient by default: it adds the same
    constant 1 to every entry whatever beta is, so with it the kernel no
    longer scales with beta and the small-beta kernel is swamped by it.
    """
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    x = np.linspace(-1.0, 1.0, grid_points)[:, None]
    raws, corrs, mds, drs = [], [], [], []
    for act in activations:
        k = np.zeros((grid_points, grid_points))
        for s in range(seeds):
            net = init_net(NetConfig(1, 1, act, hidden_layers=1, width=hidden_width, init_seed=s))
            if param_hook is not None:
                param_hook(net)
            j = parameter_jacobian(net, x)
            if not include_output_bias:
                j = j[:, :-1]  # last column is the output bias
            k += j @ j.T
        k /= seeds
        k = 0.5 * (k + k.T)
        if not np.any(k):
            raise DegenerateKernel(f"all parameter gradients vanish for {act.label}")
        raws.append(k)
        corrs.append(correlation_kernel(k))
        md, dr = kernel_statistics(k)
        mds.append(md)
        drs.append(dr)
    return NtkReport(list(activations), raws, corrs, mds, drs, seeds, x[:, 0].copy())


@dataclass(frozen=True)
class NtkVerdict:
    holds: bool
    mean_diag_ok: bool
    dominance_ok: bool


def _nondecreasing(v: Sequence[float], slack: float) -> bool:
    return all(b >= a * (1.0 - slack) for a, b in zip(v, v[1:]))


def ntk_monotonicity(report: NtkReport, slack: float = 0.02) -> NtkVerdict:
    """Both statistics nondecreasing along the report's order, up to a
    relative ``slack``."""
    md = _nondecreasing(report.mean_diag, slack)
    dr = _nondecreasing(report.dominance_ratio, slack)
    return NtkVerdict(md and dr, md, dr)
