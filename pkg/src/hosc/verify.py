"""The analytical check suite behind ``hosc verify``.

Each check prints one line::

    PASS lipschitz_sup beta=2 omega0=30 measured=6.000000e+01 <= bound=6.000000e+01

``bound_scale`` multiplies the gating bound; values below 1 act as a
negative control that must make the gating check fail.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .activations import Activation
from .analysis import (
    GatingQuery,
    asymptotic_report,
    empirical_lipschitz,
    empirical_ntk,
    gating_measure,
    ntk_monotonicity,
)

LIPSCHITZ_CASES = [(b, w) for b in (0.5, 2.0, 14.0) for w in (1.0, 30.0)]
GATING_KAPPAS = (0.1, 0.3, 0.5, 0.7, 0.9)
GATING_BETAS = (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0)
SCALING_BETAS = (10.0, 20.0, 50.0)
NTK_LADDER = (0.5, 1.0, 2.0, 5.0, 10.0)

SMALL_BETA_LIMIT = 3.334e-4
SQUARE_WAVE_LIMIT = 1e-4
SCALING_SPREAD = 0.15
NTK_SIREN_GAP = 0.05


@dataclass(frozen=True)
class Check:
    name: str
    params: str
    measured: float
    relation: str
    bound: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name} {self.params} measured={self.measured:.6e} {self.relation} bound={self.bound:.6e}"


@dataclass
class VerifyReport:
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]


def lipschitz_checks() -> list[Check]:
    out = []
    for beta, w in LIPSCHITZ_CASES:
        a = Activation.hosc(beta, w)
        scan = empirical_lipschitz(a)
        bound = a.lipschitz_constant()
        rel = abs(scan.sup - bound) / bound
        p = f"beta={beta:g} omega0={w:g}"
        out.append(Check("lipschitz_sup", p, scan.sup, "~=", bound, rel <= 1e-6))
        dist = scan.distance_to_peak_set(w)
        out.append(Check("lipschitz_argmax", p, dist, "<=", scan.grid_step, dist <= scan.grid_step))
    return out


def gating_checks(bound_scale: float = 1.0, omega0: float = 1.0) -> list[Check]:
    out = []
    for kappa in GATING_KAPPAS:
        for beta in GATING_BETAS:
            r = gating_measure(GatingQuery(kappa, beta, omega0))
            bound = r.analytic_bound * bound_scale + r.cell
            out.append(
                Check("gating_measure", f"kappa={kappa:g} beta={beta:g}", r.empirical_measure, "<=", bound, r.empirical_measure <= bound)
            )
    scaled = [gating_measure(GatingQuery(0.5, b, omega0)).empirical_measure * b for b in SCALING_BETAS]
    spread = (max(scaled) - min(scaled)) / max(scaled)
    out.append(Check("gating_inverse_beta_scaling", "kappa=0.5 beta=10,20,50", spread, "<", SCALING_SPREAD, spread < SCALING_SPREAD))
    return out


def asymptotic_checks() -> list[Check]:
    small = asymptotic_report([0.1])[0].small_beta_gap
    square = asymptotic_report([50.0])[0].square_wave_gap
    return [
        Check("small_beta_limit", "beta=0.1", small, "<=", SMALL_BETA_LIMIT, small <= SMALL_BETA_LIMIT),
        Check("square_wave_limit", "beta=50 |sin|>=0.1", square, "<=", SQUARE_WAVE_LIMIT, square <= SQUARE_WAVE_LIMIT),
    ]


def ntk_checks(seeds: int = 8, grid_points: int = 128, width: int = 64, omega0: float = 30.0) -> list[Check]:
    ladder = empirical_ntk([Activation.hosc(b, omega0) for b in NTK_LADDER], grid_points, width, seeds)
    out = []
    asym = max(float(np.max(np.abs(k - k.T))) for k in ladder.raw_kernels)
    out.append(Check("ntk_symmetric", "ladder", asym, "<=", 0.0, asym <= 0.0))
    min_eig = min(float(np.linalg.eigvalsh(k)[0] / np.linalg.eigvalsh(k)[-1]) for k in ladder.raw_kernels)
    out.append(Check("ntk_psd", "ladder min eig/max eig", min_eig, ">=", -1e-10, min_eig >= -1e-10))
    verdict = ntk_monotonicity(ladder)
    worst_md = min(b / a for a, b in zip(ladder.mean_diag, ladder.mean_diag[1:]))
    worst_dr = min(b / a for a, b in zip(ladder.dominance_ratio, ladder.dominance_ratio[1:]))
    out.append(Check("ntk_mean_diag_nondecreasing", "min step ratio", worst_md, ">=", 0.98, verdict.mean_diag_ok))
    out.append(Check("ntk_dominance_nondecreasing", "min step ratio", worst_dr, ">=", 0.98, verdict.dominance_ok))
    pair = empirical_ntk([Activation.hosc(0.1, omega0), Activation.sine(omega0)], grid_points, width, seeds)
    gap = float(np.max(np.abs(pair.corr_kernels[0] - pair.corr_kernels[1])))
    out.append(Check("ntk_small_beta_matches_sine", "beta=0.1 vs sine", gap, "<=", NTK_SIREN_GAP, gap <= NTK_SIREN_GAP))
    return out


def run_verify(out: Callable[[str], None] | None = print, bound_scale: float = 1.0, include_ntk: bool = True) -> VerifyReport:
    checks: list[Check] = []
    groups = [lipschitz_checks, lambda: gating_checks(bound_scale), asymptotic_checks]
    if include_ntk:
        groups.append(ntk_checks)
    for g in groups:
        for c in g():
            checks.append(c)
            if out is not None:
                out(c.line())
    report = VerifyReport(checks)
    if out is not None:
        n_fail = len(report.failures())
        out(f"{'OK' if report.passed else 'FAILED'} {len(checks) - n_fail}/{len(checks)} checks passed")
    return report
