"""Exact spectral analysis of the difference dynamics on Gaussian targets.

Diagonal quadratic targets decouple into scalar modes of curvature lam, so
the coupled difference process is governed by the 2x2 matrix of
:func:`langevin_contract.certificates.transition_matrix_P` per mode.  This
module computes mode eigenvalues (closed forms for the kinetic
Euler-Maruyama and BAO schemes, direct eigensolves otherwise), monotone
stability thresholds, the exact BAO mode rate, and grid scans.

Two different decay notions are reported and never conflated: the spectral
radius governs the asymptotic decay of the mode, while the certified rate
c(h) bounds the weighted norm uniformly at every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .certificates import transition_matrix_P
from .integrators import KINETIC_SCHEMES, Scheme, StepParams


class SpectralError(ValueError):
    """Invalid spectral query."""


@dataclass(frozen=True)
class SpectralReport:
    """Eigenvalues of one mode's difference map and its contraction flag."""

    scheme: Scheme
    lam: float
    h: float
    gamma: float
    eigenvalues: tuple[complex, complex]
    spectral_radius: float
    contractive: bool  # spectral radius < 1


def _eig_pair(trace: float, det: float) -> tuple[complex, complex]:
    """Eigenvalues of a 2x2 from trace and determinant, small root via
    det / big root so it never cancels to zero spuriously."""
    disc = trace * trace - 4.0 * det
    if disc < 0.0:
        r = math.sqrt(-disc)
        return (complex(trace / 2.0, r / 2.0), complex(trace / 2.0, -r / 2.0))
    r = math.sqrt(disc)
    big = 0.5 * (trace + r) if trace >= 0.0 else 0.5 * (trace - r)
    if big == 0.0:
        return (0.0 + 0.0j, 0.0 + 0.0j)
    return (complex(big), complex(det / big))


def mode_eigenvalues(scheme: Scheme, lam: float, params: StepParams) -> tuple[complex, complex]:
    """Both eigenvalues of the mode transition matrix.

    Closed forms (evaluated in the cancellation-free trace/det form):
      kinetic_em:  (2 - gamma h +/- h sqrt(gamma^2 - 4 lam)) / 2
      bao:         (1 + eta - h^2 lam +/- sqrt((1 + eta - h^2 lam)^2 - 4 eta)) / 2
    Other schemes use the trace and determinant of the 2x2 mode matrix.
    """
    scheme = Scheme(scheme)
    if lam <= 0.0:
        raise SpectralError(f"lam must be positive, got {lam}")
    if scheme not in KINETIC_SCHEMES:
        raise SpectralError(f"{scheme.value} has no 2x2 mode matrix; its mode factor is 1 - h lam")
    h, g = params.h, params.gamma
    if scheme is Scheme.KINETIC_EM:
        return _eig_pair(2.0 - g * h, 1.0 - g * h + h * h * lam)
    if scheme is Scheme.BAO:
        return _eig_pair(1.0 + params.eta - h * h * lam, params.eta)
    P = transition_matrix_P_any(scheme, lam, params)
    return _eig_pair(P[0, 0] + P[1, 1], P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0])


def transition_matrix_P_any(scheme: Scheme, lam: float, params: StepParams) -> np.ndarray:
    """Certificate-block matrix where one exists, full composition otherwise.

    The certificate blocks of baoab/obabo are cyclic rearrangements of the
    full compositions, so either choice has the same spectrum; first-order
    permutations use their literal one-step maps.
    """
    from .certificates import UnsupportedScheme, step_matrix

    try:
        return transition_matrix_P(scheme, lam, params)
    except UnsupportedScheme:
        return step_matrix(scheme, lam, params)


def mode_report(scheme: Scheme, lam: float, params: StepParams) -> SpectralReport:
    eigs = mode_eigenvalues(scheme, lam, params)
    radius = max(abs(eigs[0]), abs(eigs[1]))
    return SpectralReport(
        scheme=Scheme(scheme),
        lam=lam,
        h=params.h,
        gamma=params.gamma,
        eigenvalues=eigs,
        spectral_radius=radius,
        contractive=bool(radius < 1.0),
    )


def _monotone_stable(scheme: Scheme, lam: float, gamma: float, h: float) -> bool:
    """Stability in the monotone-contraction sense: every eigenvalue has
    modulus < 1 and strictly positive real part.

    The positive-real-part requirement is what makes the threshold match
    the closed forms 2/(gamma + sqrt(gamma^2 - 4 lam)) (kinetic EM) and
    sqrt((1 + eta)/lam) (BAO); on the pure radius criterion both schemes
    stay stable somewhat beyond those points with oscillating modes.
    """
    eigs = mode_eigenvalues(scheme, lam, StepParams(h, gamma))
    return all(abs(e) < 1.0 and e.real > 0.0 for e in eigs)


def stability_threshold(
    scheme: Scheme,
    lam: float,
    gamma: float,
    h_cap: float = 1e6,
    tol: float = 1e-10,
) -> float:
    """Largest monotonically stable h, located by bisection.

    Raises when no stable stepsize below the search cap exists.
    """
    scheme = Scheme(scheme)
    lo = 0.0
    probe = min(1.0 / math.sqrt(lam), h_cap)
    for _ in range(80):
        if _monotone_stable(scheme, lam, gamma, probe):
            lo = probe
            break
        probe /= 2.0
    else:
        raise SpectralError(
            f"no stable stepsize found for {scheme.value} below cap at gamma={gamma}, lam={lam}"
        )
    hi = lo
    while hi < h_cap and _monotone_stable(scheme, lam, gamma, hi):
        lo = hi
        hi = min(2.0 * hi, h_cap)
    if hi >= h_cap and _monotone_stable(scheme, lam, gamma, hi):
        raise SpectralError(f"still stable at the search cap h={h_cap}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _monotone_stable(scheme, lam, gamma, mid):
            lo = mid
        else:
            hi = mid
    return lo


def bao_exact_rate(m: float, h: float, gamma: float) -> float:
    """Exact squared-distance mode rate of BAO at curvature m.

    Real-eigenvalue branch:
        c_N = 1 - eta + h^2 m - sqrt((1 - eta + h^2 m)^2 - 4 h^2 m).
    When the discriminant is negative the eigenvalues form a conjugate
    pair of modulus sqrt(eta) and the modulus-based squared rate
    1 - eta is returned instead.
    """
    if m <= 0.0 or h <= 0.0 or gamma <= 0.0:
        raise SpectralError("m, h, gamma must be positive")
    eta = math.exp(-gamma * h)
    s0 = 1.0 - eta + h * h * m
    disc = s0 * s0 - 4.0 * h * h * m
    if disc < 0.0:
        return 1.0 - eta
    return s0 - math.sqrt(disc)


@dataclass(frozen=True)
class ScanRow:
    """Per-(h, gamma) scan entry over both extreme curvatures."""

    scheme: Scheme
    h: float
    gamma: float
    reports: tuple[SpectralReport, SpectralReport]
    contractive: bool
    worst_rate: float  # 1 - max mode radius


def gaussian_scan(scheme: Scheme, m: float, M: float, gamma: float, h_grid) -> list[ScanRow]:
    """Spectral reports over an h grid at both extreme curvatures.

    A row is contractive only when both the m- and M-modes have spectral
    radius below one; the reported rate is one minus the worst radius.
    """
    h_grid = list(h_grid)
    if not h_grid:
        raise SpectralError("h grid must be non-empty")
    rows = []
    for h in h_grid:
        params = StepParams(h, gamma)
        rep = (mode_report(scheme, m, params), mode_report(scheme, M, params))
        radius = max(r.spectral_radius for r in rep)
        rows.append(
            ScanRow(
                scheme=Scheme(scheme),
                h=h,
                gamma=gamma,
                reports=rep,
                contractive=all(r.contractive for r in rep),
                worst_rate=1.0 - radius,
            )
        )
    return rows
