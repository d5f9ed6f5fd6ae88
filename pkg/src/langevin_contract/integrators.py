"""One-step maps for overdamped and kinetic Langevin discretizations.

Covered schemes: overdamped Euler-Maruyama and its averaged-noise variant
(LM); the kinetic Euler-Maruyama scheme; all six first-order splittings of
the B (velocity kick), A (position drift) and O (exact Ornstein-Uhlenbeck)
pieces; the symmetric second-order splittings BAOAB and OBABO; and the
stochastic exponential Euler scheme (SES) with its correlated noise pair.

Update rules for the elementary pieces (operators apply left to right, so
"BAO" kicks, drifts, then refreshes):

    B: v <- v - h * grad U(x)
    A: x <- x + h * v
    O: v <- eta * v + sqrt(1 - eta^2) * xi,   eta = exp(-gamma * tau)

with tau the duration of the O sub-step (h for single-O schemes, h/2 for
each half of OBABO).  Step functions are pure: identical inputs give
bit-identical outputs, and two states stepped with shared noise have a
noise-independent difference (the basis of synchronous coupling).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .potentials import Potential


class IntegratorError(ValueError):
    """Invalid scheme, parameters or noise for a step."""


class Scheme(str, enum.Enum):
    OVERDAMPED_EM = "overdamped_em"
    LM = "lm"
    KINETIC_EM = "kinetic_em"
    BAO = "bao"
    OAB = "oab"
    ABO = "abo"
    BOA = "boa"
    OBA = "oba"
    AOB = "aob"
    BAOAB = "baoab"
    OBABO = "obabo"
    SES = "ses"


OVERDAMPED_SCHEMES = (Scheme.OVERDAMPED_EM, Scheme.LM)
FIRST_ORDER_SPLITTINGS = (Scheme.BAO, Scheme.OAB, Scheme.ABO, Scheme.BOA, Scheme.OBA, Scheme.AOB)
KINETIC_SCHEMES = tuple(s for s in Scheme if s not in OVERDAMPED_SCHEMES)


@dataclass(frozen=True)
class PhaseState:
    """Position-velocity pair z = (x, v); arrays share shape (..., d)."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.v, dtype=float)
        if x.shape != v.shape:
            raise IntegratorError(f"x and v must share a shape, got {x.shape} vs {v.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.x.shape[-1]


@dataclass(frozen=True)
class StepParams:
    """Stepsize h and friction gamma; eta values are derived on demand."""

    h: float
    gamma: float

    def __post_init__(self):
        if not self.h > 0.0:
            raise IntegratorError(f"h must be positive, got {self.h}")
        if not self.gamma > 0.0:
            raise IntegratorError(f"gamma must be positive, got {self.gamma}")

    @property
    def eta(self) -> float:
        """exp(-gamma h): the damping of a full-step O piece."""
        return math.exp(-self.gamma * self.h)

    @property
    def eta_half(self) -> float:
        """exp(-gamma h / 2): the damping of each OBABO half-step O piece."""
        return math.exp(-self.gamma * self.h / 2.0)

    def o_substep_eta(self, scheme: Scheme) -> float:
        return self.eta_half if scheme is Scheme.OBABO else self.eta


def noise_requirements(scheme: Scheme) -> int:
    """Number of independent standard-normal d-vectors consumed per step.

    OBABO refreshes twice; SES consumes two raw vectors that are mixed into
    a single correlated (position, velocity) pair by :func:`ses_noise`.
    All other schemes consume one vector.
    """
    return 2 if scheme in (Scheme.OBABO, Scheme.SES) else 1


def sub_step_B(state: PhaseState, h: float, potential: Potential) -> PhaseState:
    """Velocity kick v <- v - h grad U(x); x untouched."""
    if not h > 0.0:
        raise IntegratorError(f"sub-step size must be positive, got {h}")
    return PhaseState(state.x, state.v - h * potential.gradient(state.x))


def sub_step_A(state: PhaseState, h: float) -> PhaseState:
    """Position drift x <- x + h v; v untouched."""
    if not h > 0.0:
        raise IntegratorError(f"sub-step size must be positive, got {h}")
    return PhaseState(state.x + h * state.v, state.v)


def sub_step_O(state: PhaseState, eta: float, xi: np.ndarray) -> PhaseState:
    """Exact OU refresh v <- eta v + sqrt(1 - eta^2) xi; x untouched.

    eta = exp(-gamma tau) lies in (0, 1) mathematically; exactly 0.0 is
    accepted because it is the float underflow of extreme friction.
    """
    if not 0.0 <= eta < 1.0:
        raise IntegratorError(f"eta must lie in [0, 1), got {eta}")
    return PhaseState(state.x, eta * state.v + math.sqrt(1.0 - eta * eta) * xi)


def _ses_g(u: float) -> float:
    """u - 2(1 - e^-u) + (1 - e^-2u)/2, series-protected for small u."""
    if u < 1e-2:
        # u^3/3 - u^4/4 + 7u^5/60: relative error O(u^3) of the next term
        return u**3 * (1.0 / 3.0 + u * (-0.25 + u * (7.0 / 60.0)))
    return u + 2.0 * math.expm1(-u) - 0.5 * math.expm1(-2.0 * u)


def ses_covariance(params: StepParams) -> tuple[float, float, float]:
    """(var_position, var_velocity, covariance) of the SES noise pair.

    Ito isometry for the exact OU solution with frozen gradient gives

        var(zeta)  = (2/gamma) (h - 2(1-eta)/gamma + (1-eta^2)/(2 gamma))
        var(omega) = 1 - eta^2
        cov        = (1 - eta)^2 / gamma

    with eta = exp(-gamma h).
    """
    g, h = params.gamma, params.h
    u = g * h
    var_pos = 2.0 * _ses_g(u) / g**2
    var_vel = -math.expm1(-2.0 * u)
    cov = math.expm1(-u) ** 2 / g
    return var_pos, var_vel, cov


def ses_noise(params: StepParams, xi_pair: tuple[np.ndarray, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Correlate a standard-normal pair into the SES (zeta, omega) draw.

    Applies the lower-triangular Cholesky factor of the 2x2 covariance from
    :func:`ses_covariance`, position component first.
    """
    var_pos, var_vel, cov = ses_covariance(params)
    schur = var_vel - cov * cov / var_pos
    if var_pos <= 0.0 or schur <= 0.0:
        raise IntegratorError(
            f"SES noise covariance not positive definite at h={params.h}, gamma={params.gamma}"
        )
    l11 = math.sqrt(var_pos)
    l21 = cov / l11
    l22 = math.sqrt(schur)
    xi1, xi2 = xi_pair
    return l11 * xi1, l21 * xi1 + l22 * xi2


def _as_noise(scheme: Scheme, noise, dim: int) -> np.ndarray:
    arr = np.asarray(noise, dtype=float)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    need = noise_requirements(scheme)
    if arr.shape[0] != need or arr.shape[-1] != dim:
        raise IntegratorError(
            f"{scheme.value} needs noise of shape ({need}, ..., {dim}), got {arr.shape}"
        )
    return arr


def step(
    scheme: Scheme,
    potential: Potential,
    state: PhaseState,
    params: StepParams,
    noise,
    prev_noise: np.ndarray | None = None,
) -> PhaseState:
    """Advance one step of the given scheme.

    ``noise`` holds ``noise_requirements(scheme)`` standard-normal draws of
    shape (d,) (stacked along the first axis).  LM additionally needs
    ``prev_noise``, the draw consumed at the previous step; the chain
    runner threads it (seeded with a primer draw at chain start).
    """
    scheme = Scheme(scheme)
    xi = _as_noise(scheme, noise, state.dim)
    prev = None if prev_noise is None else np.asarray(prev_noise, dtype=float)
    x, v = _step_arrays(scheme, potential, state.x, state.v, params, xi, prev)
    return PhaseState(x, v)


def _step_arrays(scheme, potential, x, v, params, xi, prev_noise=None):
    """Array-level step core (no state wrapping); shared by the runners."""
    h, g = params.h, params.gamma

    if scheme is Scheme.OVERDAMPED_EM:
        return x - h * potential.gradient(x) + math.sqrt(2.0 * h) * xi[0], v
    if scheme is Scheme.LM:
        if prev_noise is None:
            raise IntegratorError("LM needs prev_noise (the previous step's draw)")
        avg = 0.5 * (xi[0] + prev_noise)
        return x - h * potential.gradient(x) + math.sqrt(2.0 * h) * avg, v
    if scheme is Scheme.KINETIC_EM:
        vn = v - h * potential.gradient(x) - g * h * v + math.sqrt(2.0 * g * h) * xi[0]
        return x + h * v, vn
    if scheme is Scheme.SES:
        eta = params.eta
        al = -math.expm1(-g * h) / g  # (1 - eta)/gamma without cancellation
        be = (g * h + math.expm1(-g * h)) / g**2  # (gamma h + eta - 1)/gamma^2
        zeta, omega = ses_noise(params, (xi[0], xi[1]))
        grad = potential.gradient(x)
        return x + al * v - be * grad + zeta, eta * v - al * grad + omega
    if scheme in FIRST_ORDER_SPLITTINGS:
        eta = params.eta
        s = math.sqrt(1.0 - eta * eta)
        for op in scheme.value:
            if op == "b":
                v = v - h * potential.gradient(x)
            elif op == "a":
                x = x + h * v
            else:
                v = eta * v + s * xi[0]
        return x, v
    if scheme is Scheme.BAOAB:
        eta = params.eta
        s = math.sqrt(1.0 - eta * eta)
        half = 0.5 * h
        v = v - half * potential.gradient(x)
        x = x + half * v
        v = eta * v + s * xi[0]
        x = x + half * v
        return x, v - half * potential.gradient(x)
    if scheme is Scheme.OBABO:
        eta = params.eta_half
        s = math.sqrt(1.0 - eta * eta)
        half = 0.5 * h
        v = eta * v + s * xi[0]
        v = v - half * potential.gradient(x)
        x = x + h * v
        v = v - half * potential.gradient(x)
        return x, eta * v + s * xi[1]
    raise IntegratorError(f"unknown scheme {scheme!r}")


class _ScalarQuadratic(Potential):
    """Internal 1-d quadratic mode U(x) = lam x^2 / 2 used for probing."""

    def __init__(self, lam: float):
        super().__init__(1, lam, lam)
        self.lam = float(lam)

    def value(self, x):
        return 0.5 * self.lam * np.sum(np.asarray(x, dtype=float) ** 2, axis=-1)

    def gradient(self, x):
        return self.lam * np.asarray(x, dtype=float)

    def hessian(self, x):
        return np.array([[self.lam]])


def affine_mode_map(scheme: Scheme, lam: float, params: StepParams) -> tuple[np.ndarray, np.ndarray]:
    """(P, N) of the exact one-step affine map z' = P z + N xi on a 1-d
    quadratic mode of curvature lam.

    Extracted by probing :func:`step` on basis states and unit noises, so
    it is the integrator's own map by construction.  Not defined for LM
    (carries cross-step noise state).
    """
    scheme = Scheme(scheme)
    if scheme is Scheme.LM:
        raise IntegratorError("LM carries cached noise; no memoryless affine map")
    pot = _ScalarQuadratic(lam)
    k = noise_requirements(scheme)
    zeros = np.zeros((k, 1))

    def img(x0, v0, xi):
        z = step(scheme, pot, PhaseState(np.array([x0]), np.array([v0])), params, xi)
        return np.array([z.x[0], z.v[0]])

    P = np.column_stack([img(1.0, 0.0, zeros), img(0.0, 1.0, zeros)])
    cols = []
    for j in range(k):
        e = np.zeros((k, 1))
        e[j, 0] = 1.0
        cols.append(img(0.0, 0.0, e))
    return P, np.column_stack(cols)


def simulate_mode_chain(
    scheme: Scheme,
    lam: float,
    params: StepParams,
    x0: float,
    v0: float,
    noise: np.ndarray,
) -> np.ndarray:
    """Positions of an n-step chain on a 1-d quadratic mode.

    ``noise`` has shape (n, k) with k = noise_requirements(scheme).  Uses
    the exact affine map from :func:`affine_mode_map` in a scalar loop, so
    long chains (10^6 steps) stay cheap; agrees with stepping the
    integrator directly to floating-point accuracy.
    """
    P, N = affine_mode_map(scheme, lam, params)
    noise = np.asarray(noise, dtype=float)
    if noise.ndim != 2 or noise.shape[1] != N.shape[1]:
        raise IntegratorError(f"noise must have shape (n, {N.shape[1]}), got {noise.shape}")
    p00, p01 = float(P[0, 0]), float(P[0, 1])
    p10, p11 = float(P[1, 0]), float(P[1, 1])
    ncols = [[float(N[0, j]), float(N[1, j])] for j in range(N.shape[1])]
    xs = np.empty(noise.shape[0] + 1)
    x, v = float(x0), float(v0)
    xs[0] = x
    rows = noise.tolist()
    for i, row in enumerate(rows):
        nx = p00 * x + p01 * v
        nv = p10 * x + p11 * v
        for (n0, n1), w in zip(ncols, row):
            nx += n0 * w
            nv += n1 * w
        x, v = nx, nv
        xs[i + 1] = x
    if not math.isfinite(x) or not math.isfinite(v):
        raise IntegratorError("chain diverged to non-finite state")
    return xs
