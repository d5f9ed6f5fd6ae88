"""Contraction certificates via positive definiteness of H = (1-c) W - P^T W P.

For a quadratic form with structure matrix W = [[1, b], [b, a]] and a
difference-process update z' = P z (P depends on the mean-value Hessian Q),
one-step contraction at rate c is equivalent to H being positive definite.
Because every entry of H is a polynomial in Q, and Q is symmetric with
spectrum in [m, M], the problem reduces to scalar polynomial positivity:

    H = [[A(Q), B(Q)], [B(Q), C(Q)]]  is PD
    iff  A(lam) > 0 and (AC - B^2)(lam) > 0 for every lam in [m, M].

The module builds P and the A/B/C polynomials per scheme, certifies
positivity on a dense grid backed by a derivative bound (so the grid
minimum genuinely implies positivity between nodes), and cross-checks the
polynomial route against direct 2x2 eigenvalues at every grid point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from numpy.polynomial import polynomial as npoly

from .coupling import certified_rate
from .integrators import Scheme, StepParams


class CertificateError(ValueError):
    """Invalid certificate request."""


class UnsupportedScheme(CertificateError):
    """Scheme has no direct certificate (first-order permutations route
    through bao/oab via the boundary-operator argument)."""


#: schemes with a direct A/B/C certificate; baoab and obabo are analyzed
#: through their conjugate single-gradient blocks (see transition_matrix_P)
CERTIFICATE_SCHEMES = (
    Scheme.KINETIC_EM,
    Scheme.BAO,
    Scheme.OAB,
    Scheme.BAOAB,
    Scheme.OBABO,
    Scheme.SES,
)

GRID_POINTS = 2048


def transition_matrix_P(scheme: Scheme, lam: float, params: StepParams) -> np.ndarray:
    """Difference-process one-step matrix for a scalar mode Q = lam.

    For baoab and obabo this is the conjugate block actually certified
    (A(h/2) B(h) A(h/2) O(h) and A(h) B(h/2) O(h) B(h/2) respectively),
    which shares its spectrum with the full composition; use
    :func:`step_matrix` for the literal one-step map.  eta = exp(-gamma h)
    in all entries.
    """
    scheme = Scheme(scheme)
    h, g = params.h, params.gamma
    eta = params.eta
    if scheme is Scheme.KINETIC_EM:
        return np.array([[1.0, h], [-h * lam, 1.0 - g * h]])
    if scheme is Scheme.BAO:
        return np.array([[1.0 - h * h * lam, h], [-h * eta * lam, eta]])
    if scheme is Scheme.OAB:
        return np.array([[1.0, h * eta], [-h * lam, eta - h * h * eta * lam]])
    if scheme is Scheme.BAOAB:
        return np.array(
            [
                [1.0 - h * h * lam / 2.0, h - h**3 * lam / 4.0],
                [-h * eta * lam, eta - h * h * eta * lam / 2.0],
            ]
        )
    if scheme is Scheme.OBABO:
        half = 0.5 * h * (1.0 + eta)
        return np.array([[1.0, h], [-half * lam, eta - h * half * lam]])
    if scheme is Scheme.SES:
        al = -math.expm1(-g * h) / g
        be = (g * h + math.expm1(-g * h)) / g**2
        return np.array([[1.0 - be * lam, al], [-al * lam, eta]])
    raise UnsupportedScheme(f"no certificate block for {scheme.value}")


def step_matrix(scheme: Scheme, lam: float, params: StepParams) -> np.ndarray:
    """Exact one-step difference map of the integrator on a scalar mode.

    Equals :func:`transition_matrix_P` except for baoab/obabo (full
    symmetric compositions) and the overdamped schemes (position row only;
    the velocity passes through).
    """
    scheme = Scheme(scheme)
    h = params.h

    if scheme in (Scheme.OVERDAMPED_EM, Scheme.LM):
        return np.array([[1.0 - h * lam, 0.0], [0.0, 1.0]])

    def A(t):
        return np.array([[1.0, t], [0.0, 1.0]])

    def B(t):
        return np.array([[1.0, 0.0], [-t * lam, 1.0]])

    def O(e):
        return np.array([[1.0, 0.0], [0.0, e]])

    def compose(*ops):
        # operators apply left to right: right-multiply onto the state
        out = np.eye(2)
        for op in ops:
            out = op @ out
        return out

    eta = params.eta
    table = {
        Scheme.BAO: (B(h), A(h), O(eta)),
        Scheme.OAB: (O(eta), A(h), B(h)),
        Scheme.ABO: (A(h), B(h), O(eta)),
        Scheme.BOA: (B(h), O(eta), A(h)),
        Scheme.OBA: (O(eta), B(h), A(h)),
        Scheme.AOB: (A(h), O(eta), B(h)),
        Scheme.BAOAB: (B(h / 2), A(h / 2), O(eta), A(h / 2), B(h / 2)),
    }
    if scheme in table:
        return compose(*table[scheme])
    if scheme is Scheme.OBABO:
        es = params.eta_half
        return compose(O(es), B(h / 2), A(h), B(h / 2), O(es))
    return transition_matrix_P(scheme, lam, params)


@dataclass(frozen=True)
class AbcPolynomials:
    """Entries of H as polynomials in lam (ascending coefficients, deg <= 2)."""

    scheme: Scheme
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray


def build_abc(scheme: Scheme, params: StepParams, a: float, b: float, c: float) -> AbcPolynomials:
    """Coefficient form of A, B, C for the certificate block of ``scheme``.

    With the scheme's certified (a, b) the constant term of B collapses to
    -b c, which is what makes the m-independent stepsize thresholds work.
    """
    scheme = Scheme(scheme)
    h, g = params.h, params.gamma
    eta = params.eta
    if scheme is Scheme.KINETIC_EM:
        A = [-c, 2.0 * b * h, -h * h * a]
        B = [-c * b + h * (b * g - 1.0), h * (a + h * (b - a * g)), 0.0]
        C = [-c * a + h * (2.0 * a * g - 2.0 * b - h * (1.0 - 2.0 * b * g + a * g * g)), 0.0, 0.0]
    elif scheme is Scheme.BAO:
        A = [-c, 2.0 * (b * eta + h) * h, -(a * eta**2 + 2.0 * b * eta * h + h * h) * h * h]
        B = [b * (1.0 - eta) - h - b * c, (a * eta**2 + 2.0 * b * eta * h + h * h) * h, 0.0]
        C = [a * (1.0 - eta**2) - 2.0 * b * eta * h - h * h - a * c, 0.0, 0.0]
    elif scheme is Scheme.OAB:
        A = [-c, 2.0 * b * h, -a * h * h]
        B = [
            b * (1.0 - eta) - eta * h - b * c,
            a * eta * h + 2.0 * b * eta * h * h,
            -a * eta * h**3,
        ]
        C = [
            a * (1.0 - eta**2) - 2.0 * b * eta**2 * h - eta**2 * h * h - a * c,
            2.0 * a * eta**2 * h * h + 2.0 * b * eta**2 * h**3,
            -a * eta**2 * h**4,
        ]
    elif scheme is Scheme.BAOAB:
        A = [
            -c,
            2.0 * b * eta * h + h * h,
            -a * eta**2 * h * h - b * eta * h**3 - h**4 / 4.0,
        ]
        B = [
            b * (1.0 - eta) - h - b * c,
            a * eta**2 * h + 2.0 * b * eta * h * h + 0.75 * h**3,
            -0.5 * a * eta**2 * h**3 - 0.5 * b * eta * h**4 - h**5 / 8.0,
        ]
        C = [
            a * (1.0 - eta**2) - 2.0 * b * eta * h - h * h - a * c,
            a * eta**2 * h * h + 1.5 * b * eta * h**3 + 0.5 * h**4,
            -0.25 * a * eta**2 * h**4 - 0.25 * b * eta * h**5 - h**6 / 16.0,
        ]
    elif scheme is Scheme.OBABO:
        A = [-c, b * h * (1.0 + eta), -((1.0 + eta) ** 2) * a * h * h / 4.0]
        B = [
            b * (1.0 - eta) - h - b * c,
            (0.5 * a * eta + b * h) * (eta + 1.0) * h,
            -((eta + 1.0) ** 2) * a * h**3 / 4.0,
        ]
        C = [
            a * (1.0 - eta**2) - 2.0 * b * eta * h - h * h - a * c,
            (a * eta + b * h) * (eta + 1.0) * h * h,
            -a * (eta + 1.0) ** 2 * h**4 / 4.0,
        ]
    elif scheme is Scheme.SES:
        al = -math.expm1(-g * h) / g
        be = (g * h + math.expm1(-g * h)) / g**2
        A = [-c, 2.0 * (b * al + be), -(a * al**2 + 2.0 * b * al * be + be**2)]
        B = [
            b * (1.0 - eta) - al - b * c,
            a * al * eta + b * al**2 + b * be * eta + al * be,
            0.0,
        ]
        C = [a * (1.0 - eta**2) - a * c - 2.0 * b * eta * al - al * al, 0.0, 0.0]
    else:
        raise UnsupportedScheme(
            f"{scheme.value} has no direct certificate; use its bao/oab route"
        )
    return AbcPolynomials(scheme, np.array(A), np.array(B), np.array(C))


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of a positivity check over lam in [m, M].

    ``norm_valid`` records b^2 < a; outside that region the weight matrix
    is indefinite, the quadratic form is not a norm, and ``passed`` is
    forced False regardless of the polynomial margins.
    """

    scheme: Scheme
    m: float
    M: float
    gamma: float
    h: float
    a: float
    b: float
    c: float
    passed: bool
    min_margin_A: float
    min_margin_ACB2: float
    worst_lambda: float
    oracle_min_eig: float
    oracle_agrees: bool
    norm_valid: bool
    grid_points: int
    eta_convention: str = "exp(-gamma h)"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["scheme"] = self.scheme.value
        return d


def _derivative_bound(coeffs: np.ndarray, hi: float) -> float:
    """sup |d/dlam p(lam)| on [0, hi] via the coarse coefficient bound."""
    return float(sum(k * abs(ck) * hi ** (k - 1) for k, ck in enumerate(coeffs) if k > 0))


def _min_eig_H(norm_matrix: np.ndarray, P: np.ndarray, c: float) -> float:
    H = (1.0 - c) * norm_matrix - P.T @ norm_matrix @ P
    tr, det = H[0, 0] + H[1, 1], H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
    return 0.5 * (tr - math.sqrt(max(tr * tr - 4.0 * det, 0.0)))


def _min_eig_H_grid(scheme: Scheme, lams: np.ndarray, params: StepParams, W: np.ndarray, c: float) -> np.ndarray:
    """Vectorized min eigenvalue of H over the lam grid.

    Every certificate block applies the kick operator once, so P is affine
    in lam: P(lam) = P(0) + lam (P(1) - P(0)).
    """
    P0 = transition_matrix_P(scheme, 0.0, params)
    P1 = transition_matrix_P(scheme, 1.0, params) - P0
    Pg = P0[np.newaxis] + lams[:, np.newaxis, np.newaxis] * P1[np.newaxis]
    Hg = (1.0 - c) * W[np.newaxis] - np.einsum("nki,kl,nlj->nij", Pg, W, Pg)
    tr = Hg[:, 0, 0] + Hg[:, 1, 1]
    det = Hg[:, 0, 0] * Hg[:, 1, 1] - Hg[:, 0, 1] * Hg[:, 1, 0]
    return 0.5 * (tr - np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0)))


def check_certificate(
    scheme: Scheme,
    m: float,
    M: float,
    gamma: float,
    h: float,
    a: float | None = None,
    b: float | None = None,
    c: float | None = None,
    grid_points: int = GRID_POINTS,
) -> CertificateReport:
    """Certify A > 0 and AC - B^2 > 0 on lam in [m, M].

    Defaults (a, b, c) to the scheme's certified triple.  AC - B^2 is
    expanded by coefficient convolution (degree <= 4), then both
    polynomials are evaluated on a uniform grid; positivity is asserted
    only when the grid minimum exceeds L * dlam / 2 with L the coarse
    derivative bound, which rules out a sign change between nodes.  Each
    grid point is independently checked by the minimum eigenvalue of the
    2x2 matrix H assembled from P, and the sign agreement of the two
    routes is reported.
    """
    scheme = Scheme(scheme)
    if not (0.0 < m <= M):
        raise CertificateError(f"need 0 < m <= M, got m={m}, M={M}")
    rate = certified_rate(scheme, m, M, gamma, h)
    a = rate.a if a is None else a
    b = rate.b if b is None else b
    c = rate.c if c is None else c
    params = StepParams(h, gamma)
    abc = build_abc(scheme, params, a, b, c)

    lams = np.linspace(m, M, grid_points) if M > m else np.array([m])
    pa = npoly.polyval(lams, abc.A)
    quartic = npoly.polysub(npoly.polymul(abc.A, abc.C), npoly.polymul(abc.B, abc.B))
    pq = npoly.polyval(lams, quartic)

    if M > m:
        dlam = (M - m) / (grid_points - 1)
        guard_a = _derivative_bound(abc.A, M) * dlam / 2.0
        guard_q = _derivative_bound(quartic, M) * dlam / 2.0
    else:
        guard_a = guard_q = 0.0
    norm_valid = b * b < a
    passed = bool(norm_valid and pa.min() > guard_a and pq.min() > guard_q)

    norm_matrix = np.array([[1.0, b], [b, a]])
    eigs = _min_eig_H_grid(scheme, lams, params, norm_matrix, c)
    poly_pd = (pa > 0.0) & (pq > 0.0)
    oracle_pd = eigs > 0.0
    agrees = bool(np.array_equal(poly_pd, oracle_pd))

    worst = int(np.argmin(np.minimum(pa / lams, pq / lams)))
    return CertificateReport(
        scheme=scheme,
        m=m,
        M=M,
        gamma=gamma,
        h=h,
        a=a,
        b=b,
        c=c,
        passed=passed,
        min_margin_A=float((pa / lams).min()),
        min_margin_ACB2=float((pq / lams).min()),
        worst_lambda=float(lams[worst]),
        oracle_min_eig=float(eigs.min()),
        oracle_agrees=agrees,
        norm_valid=norm_valid,
        grid_points=len(lams),
    )


def max_certified_rate(
    scheme: Scheme,
    m: float,
    M: float,
    gamma: float,
    h: float,
    tol: float = 1e-10,
) -> float:
    """Largest c in (0, 1) passing the certificate with the scheme's (a, b).

    H is monotone decreasing in c, so bisection applies.  Raises when even
    c = 0 fails (no contraction certified at these parameters).
    """
    rate = certified_rate(scheme, m, M, gamma, h)

    def passes(c: float) -> bool:
        return check_certificate(scheme, m, M, gamma, h, a=rate.a, b=rate.b, c=c).passed

    if not passes(0.0):
        raise CertificateError(
            f"{Scheme(scheme).value} certifies no contraction at h={h}, gamma={gamma}"
        )
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_certified_stepsize(
    scheme: Scheme,
    m: float,
    M: float,
    gamma: float,
    h_cap: float = 10.0,
    tol: float = 1e-8,
) -> float:
    """Largest h whose certificate passes with the certified (a, b, c)(h).

    The pass region is an interval (0, h*) in practice; a geometric search
    brackets h*, then bisection resolves it to ``tol``.  Returns 0.0 when
    no stepsize passes (friction below the scheme's implicit floor).
    """

    def passes(h: float) -> bool:
        if h <= 0.0:
            return False
        try:
            return check_certificate(scheme, m, M, gamma, h).passed
        except (CertificateError, OverflowError):
            return False

    lo, probe = 0.0, h_cap
    for _ in range(60):
        if passes(probe):
            lo = probe
            break
        probe /= 2.0
    else:
        return 0.0
    while lo < h_cap and passes(min(h_cap, 2.0 * lo)):
        lo = min(h_cap, 2.0 * lo)
    if lo >= h_cap:
        return h_cap
    hi = min(h_cap, 2.0 * lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return lo


# boundary-operator amplification templates: per operator word, the
# coefficient pair (c1, c2) such that the squared norm of the mapped
# difference is at most 3 (c1 |xbar|^2 + c2 |vbar|^2); the bound constant
# is then 3 max(c1, c2 / a).  Words use full-step A/B unless noted.
def _pair_coeffs(op: str, a: float, h: float, M: float) -> tuple[float, float]:
    hM2 = h * h * M * M
    if op == "A":
        return 1.0, h * h + a / 2.0
    if op == "B":
        return 0.5 + a * hM2, a
    if op == "O":
        return 0.5, a / 2.0
    if op == "AB":
        return 1.0 + 2.0 * hM2 * a, h * h + a + 2.0 * h * h * hM2 * a
    if op == "BA":
        return 1.0 + a * hM2, h * h + a
    if op == "OB":  # half-step B
        return 0.5 + a * hM2 / 4.0, a
    if op == "BAO":  # half-step B and A, full O
        return 1.0 + a * hM2 / 4.0 + h * h * hM2 / 8.0, h * h / 2.0 + a
    if op == "ABO":  # full A, half-step B and O
        return 1.0 + a * hM2 / 2.0, a + h * h + a * h * h * hM2 / 2.0
    raise CertificateError(f"unsupported boundary operator {op!r}")


#: constants the amplification bounds must stay below at a = 1/M,
#: h <= 1/(2 sqrt(M)); the chain entry covers ["AB", "O"] compositions
REFERENCE_BOUND_CONSTANTS = {"AB": 7.0, "BAO": 7.0, "ABO": 8.0, "OB": 6.0, "AB,O": 27.0}


def composition_bound(ops, a: float, h: float, M: float) -> float:
    """Squared-norm amplification constant of a boundary-operator word list.

    Each word contributes 3 max(c1, c2 / a) from its coefficient template;
    a list multiplies the per-word constants (the decomposition argument
    that reduces permuted splittings to the bao/oab certificates).  At
    h = 0 a single word degenerates to the pure norm-equivalence factor 3.
    """
    if isinstance(ops, str):
        ops = [ops]
    if not ops:
        raise CertificateError("empty operator list")
    total = 1.0
    for op in ops:
        c1, c2 = _pair_coeffs(op, a, h, M)
        total *= 3.0 * max(c1, c2 / a)
    return total
