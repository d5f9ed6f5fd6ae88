import math

import numpy as np
import pytest

from langevin_contract.certificates import (
    CERTIFICATE_SCHEMES,
    CertificateError,
    REFERENCE_BOUND_CONSTANTS,
    UnsupportedScheme,
    build_abc,
    check_certificate,
    composition_bound,
    max_certified_rate,
    max_certified_stepsize,
    step_matrix,
    transition_matrix_P,
)
from langevin_contract.coupling import certified_rate, certified_stepsize_threshold
from langevin_contract.integrators import Scheme, StepParams


def test_transition_matrix_identity_at_h_zero_limit():
    # h -> 0: P -> I (checked at a tiny stepsize)
    P = transition_matrix_P(Scheme.KINETIC_EM, 3.0, StepParams(1e-12, 4.0))
    assert np.allclose(P, np.eye(2), atol=1e-10)


def test_transition_matrix_kinetic_em_example():
    P = transition_matrix_P(Scheme.KINETIC_EM, 1.0, StepParams(0.1, 4.0))
    assert np.allclose(P, [[1.0, 0.1], [-0.1, 0.6]], atol=1e-15)


def test_transition_matrix_bao_example():
    eta = math.exp(-0.5)
    P = transition_matrix_P(Scheme.BAO, 1.0, StepParams(0.1, 5.0))
    assert np.allclose(P, [[0.99, 0.1], [-0.1 * eta, eta]], atol=1e-15)


def test_build_abc_kinetic_em_coefficients():
    a, b, c = 0.25, 0.25, 0.0125
    abc = build_abc(Scheme.KINETIC_EM, StepParams(0.1, 4.0), a, b, c)
    assert np.allclose(abc.A, [-c, 2 * b * 0.1, -0.01 * a])


def test_build_abc_simplified_B_constant_term():
    # with the certified (a, b) the constant term of B is exactly -b c
    for scheme in CERTIFICATE_SCHEMES:
        gamma = 12.0 if scheme is not Scheme.SES else 12.0
        h = 0.8 * certified_stepsize_threshold(scheme, 1.0, 4.0, gamma)
        assert h > 0
        r = certified_rate(scheme, 1.0, 4.0, gamma, h)
        abc = build_abc(scheme, StepParams(h, gamma), r.a, r.b, r.c)
        assert abc.B[0] == pytest.approx(-r.b * r.c, rel=1e-9, abs=1e-18), scheme


def test_build_abc_degenerate_step():
    # c = 0 and h -> 0: A -> 0, consistent with P -> I
    abc = build_abc(Scheme.BAO, StepParams(1e-10, 2.0), 0.5, 0.1, 0.0)
    assert np.abs(abc.A).max() <= 1e-9


def test_build_abc_unsupported_schemes():
    for scheme in (Scheme.ABO, Scheme.BOA, Scheme.OBA, Scheme.AOB, Scheme.OVERDAMPED_EM):
        with pytest.raises(UnsupportedScheme):
            build_abc(scheme, StepParams(0.1, 4.0), 0.5, 0.1, 0.01)


@pytest.mark.parametrize("scheme", CERTIFICATE_SCHEMES)
def test_abc_polynomials_match_numeric_H(scheme):
    # strong transcription oracle: A, B, C evaluated at lam must equal the
    # entries of H = (1-c) W - P^T W P assembled from matrices
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = 10 ** rng.uniform(-1, 1)
        M = m * 10 ** rng.uniform(0, 2)
        gamma = 10 ** rng.uniform(-0.5, 2)
        h = 10 ** rng.uniform(-4, -0.3)
        a, b, c = 1 / M, rng.uniform(0, 1 / math.sqrt(M)), rng.uniform(0, 0.5)
        lam = rng.uniform(m, M)
        params = StepParams(h, gamma)
        abc = build_abc(scheme, params, a, b, c)
        P = transition_matrix_P(scheme, lam, params)
        W = np.array([[1.0, b], [b, a]])
        H = (1 - c) * W - P.T @ W @ P
        scale = max(1e-30, np.abs(H).max())
        for coeffs, entry in ((abc.A, H[0, 0]), (abc.B, H[0, 1]), (abc.C, H[1, 1])):
            val = coeffs[0] + coeffs[1] * lam + coeffs[2] * lam * lam
            assert abs(val - entry) <= 1e-12 * scale


def test_check_certificate_kinetic_em_example():
    rep = check_certificate(Scheme.KINETIC_EM, 1.0, 4.0, 4.0, 0.1)
    assert rep.passed and rep.oracle_agrees
    # P_A(lam)/(h lam) at lam = 1 equals -m/(2 gamma) + 2/gamma - h/M = 0.35
    abc = build_abc(Scheme.KINETIC_EM, StepParams(0.1, 4.0), rep.a, rep.b, rep.c)
    pa1 = abc.A[0] + abc.A[1] + abc.A[2]
    assert pa1 / 0.1 == pytest.approx(0.35)
    assert rep.min_margin_A > 0 and rep.min_margin_ACB2 > 0
    assert 1.0 <= rep.worst_lambda <= 4.0


def test_check_certificate_rejects_overclaimed_rate():
    # doubling c beyond m h / gamma (4x the certified rate) breaks the
    # certificate at threshold parameters, while 2x still passes
    m, M, gamma = 4.0, 4.0, 4.0  # gamma^2 = 4M exactly
    h = 0.999 * 0.5 / gamma
    assert check_certificate(Scheme.KINETIC_EM, m, M, gamma, h, c=2 * m * h / gamma).passed is False
    assert check_certificate(Scheme.KINETIC_EM, m, M, gamma, h, c=m * h / gamma).passed is True


def test_check_certificate_single_point_interval():
    # m = M: one lambda; polynomial and oracle signs must agree there
    rep = check_certificate(Scheme.BAO, 2.0, 2.0, 8.0, 0.05)
    assert rep.grid_points == 1
    assert rep.passed and rep.oracle_agrees
    assert rep.worst_lambda == 2.0


@pytest.mark.parametrize("scheme", CERTIFICATE_SCHEMES)
def test_certificate_passes_on_admissible_draws(scheme):
    # reduced-count randomized suite; the full 10^3-per-scheme version runs
    # in the acceptance module
    rng = np.random.default_rng(1)
    floors = {
        Scheme.KINETIC_EM: lambda M: 2 * math.sqrt(M),
        Scheme.SES: lambda M: 5 * math.sqrt(M),
        Scheme.BAO: lambda M: math.sqrt(6 * M),
        Scheme.OAB: lambda M: math.sqrt(6 * M),
        Scheme.BAOAB: lambda M: 2 * math.sqrt(M),
        Scheme.OBABO: lambda M: 2 * math.sqrt(M),
    }
    done = 0
    while done < 50:
        m = 10 ** rng.uniform(-1, 0.5)
        M = m * 10 ** rng.uniform(0, 2)
        gamma = floors[scheme](M) * 10 ** rng.uniform(0.05, 1)
        hmax = certified_stepsize_threshold(scheme, m, M, gamma)
        if hmax <= 0:
            continue
        h = rng.uniform(0.05, 0.999) * hmax
        rep = check_certificate(scheme, m, M, gamma, h)
        assert rep.passed, (m, M, gamma, h, rep)
        assert rep.oracle_agrees
        assert rep.oracle_min_eig > 0
        done += 1


def test_max_certified_rate_dominates_certified_rate():
    cases = [
        (Scheme.KINETIC_EM, 1.0, 4.0, 4.0, 0.1),
        (Scheme.BAOAB, 1.0, 4.0, 8.0, None),
        (Scheme.SES, 1.0, 4.0, 11.0, None),
    ]
    for scheme, m, M, gamma, h in cases:
        if h is None:
            h = 0.8 * certified_stepsize_threshold(scheme, m, M, gamma)
        r = certified_rate(scheme, m, M, gamma, h)
        c_max = max_certified_rate(scheme, m, M, gamma, h)
        assert c_max >= r.c


def test_max_certified_rate_errors_when_nothing_certifiable():
    with pytest.raises(CertificateError):
        max_certified_rate(Scheme.KINETIC_EM, 1.0, 4.0, 4.0, 5.0)


def test_max_certified_rate_unimodal_in_h():
    # the certifiable rate grows with h away from zero and collapses to
    # zero at the edge of the certifiable stepsize range
    hs = [0.02, 0.05, 0.08, 0.11]
    vals = [max_certified_rate(Scheme.BAO, 1.0, 1.0, 5.0, h) for h in hs]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    h_edge = max_certified_stepsize(Scheme.BAO, 1.0, 1.0, 5.0)
    peak = max_certified_rate(Scheme.BAO, 1.0, 1.0, 5.0, 0.75 * h_edge)
    near_edge = max_certified_rate(Scheme.BAO, 1.0, 1.0, 5.0, 0.999 * h_edge)
    assert near_edge < peak


def test_max_certified_stepsize_bao_bracket():
    # certified threshold lands inside [1, 2] x (1 - eta)/sqrt(6M)
    h = max_certified_stepsize(Scheme.BAO, 1.0, 1.0, 5.0)
    eta = math.exp(-5.0 * h)
    assert (1 - eta) / math.sqrt(6.0) <= h <= 2 * (1 - eta) / math.sqrt(6.0)
    # and it is at least the hypothesis threshold (sufficient condition)
    assert h >= certified_stepsize_threshold(Scheme.BAO, 1.0, 1.0, 5.0)


def test_step_matrix_overdamped():
    P = step_matrix(Scheme.OVERDAMPED_EM, 2.0, StepParams(0.1, 1.0))
    assert np.allclose(P, [[0.8, 0.0], [0.0, 1.0]])


def test_composition_bound_values():
    M = 4.0
    a = 1.0 / M
    h = 0.5 / math.sqrt(M)  # the regime h <= 1/(2 sqrt(M))
    assert composition_bound("AB", a, h, M) <= REFERENCE_BOUND_CONSTANTS["AB"]
    assert composition_bound("OB", a, h, M) <= REFERENCE_BOUND_CONSTANTS["OB"]
    assert composition_bound("BAO", a, h, M) <= REFERENCE_BOUND_CONSTANTS["BAO"]
    assert composition_bound("ABO", a, h, M) <= REFERENCE_BOUND_CONSTANTS["ABO"]
    assert composition_bound(["AB", "O"], a, h, M) <= REFERENCE_BOUND_CONSTANTS["AB,O"]


def test_composition_bound_identity_limit():
    # h = 0: a single word reduces to the pure norm-equivalence factor 3
    assert composition_bound("AB", 0.25, 0.0, 4.0) == pytest.approx(3.0)
    assert composition_bound("BA", 0.25, 0.0, 4.0) == pytest.approx(3.0)
    assert composition_bound("A", 0.25, 0.0, 4.0) == pytest.approx(3.0)
    assert composition_bound("B", 0.25, 0.0, 4.0) == pytest.approx(3.0)


def test_composition_bound_unsupported():
    with pytest.raises(CertificateError):
        composition_bound("XYZ", 0.25, 0.1, 4.0)
    with pytest.raises(CertificateError):
        composition_bound([], 0.25, 0.1, 4.0)


def test_stepsize_restriction_scaling_in_gamma():
    # restriction ~ 1/gamma for the kinetic Euler scheme, ~ 1/sqrt(M)
    # (gamma-independent) for the kick-drift-refresh splittings
    M = 4.0
    em = [max_certified_stepsize(Scheme.KINETIC_EM, 1.0, M, g) for g in (11.0, 22.0, 44.0)]
    assert em[0] / em[1] == pytest.approx(2.0, rel=0.05)
    assert em[1] / em[2] == pytest.approx(2.0, rel=0.05)
    bao = [max_certified_stepsize(Scheme.BAO, 1.0, M, g) for g in (11.0, 22.0, 44.0)]
    assert max(bao) / min(bao) <= 1.05
    # hypothesis thresholds carry the same scaling
    hyp = [certified_stepsize_threshold(Scheme.SES, 1.0, M, g) for g in (11.0, 22.0, 44.0)]
    assert hyp[0] / hyp[2] == pytest.approx(4.0, rel=1e-12)


def test_best_certified_rate_scales_like_m_over_M():
    # best rate ~ m/M: at gamma tied to sqrt(M) the certified rate at 80%
    # of the threshold scales like m/M across condition numbers
    vals = []
    for M in (4.0, 16.0, 64.0):
        gamma = 11.0 * math.sqrt(M / 4.0)
        h = 0.8 * certified_stepsize_threshold(Scheme.BAOAB, 1.0, M, gamma)
        vals.append(max_certified_rate(Scheme.BAOAB, 1.0, M, gamma, h) * M)
    assert max(vals) / min(vals) <= 1.2  # m/M scaling collapses the values
