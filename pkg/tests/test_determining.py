import math
import warnings

import pytest

from itosym import (CaseParams, DriftSpec, NoiseSpec, Symmetry, build_symmetry,
                    classify, first_order_residual, ito_laplacian, make_problem,
                    probe_points, remark16_criterion, residuals, w_obstruction)
from itosym import determining
from itosym.determining import DeterminingError


# -- Ito Laplacian -------------------------------------------------------------

def test_laplacian_of_linear_phi():
    val = ito_laplacian(lambda x, t, w: x, lambda x, t: 0.7 * x, (1.3, 0.2, 0.1))
    assert abs(val) <= 1e-9


def test_laplacian_of_w_squared():
    val = ito_laplacian(lambda x, t, w: w * w, lambda x, t: 1.0, (1.0, 0.0, 0.4))
    assert val == pytest.approx(2.0, abs=1e-9)


def test_laplacian_annihilates_travelling_profile():
    # psi(x - s w) with constant sigma = s
    s = 1.5
    val = ito_laplacian(lambda x, t, w: (x - s * w) ** 3, lambda x, t: s,
                        (1.2, 0.3, -0.4))
    assert abs(val) <= 1e-7


# -- determining residuals ------------------------------------------------------

def test_trivial_symmetry_residuals_exactly_zero():
    prob = make_problem(DriftSpec.expression("0"), NoiseSpec.constant(1.0))
    sym = Symmetry(phi=lambda x, t, w: 1.0, r=0.0)
    r1, r2 = residuals(prob, sym, (0.3, 0.5, -0.2))
    assert r1 == 0.0 and r2 == 0.0


def test_table4_case_b_fixture_residuals():
    noise = NoiseSpec.simple(1.0, 2.0)
    prob = make_problem(DriftSpec.family("B", CaseParams(c0=1.0, c1=1.0)), noise)
    sym = classify(prob).symmetry
    r1, r2 = residuals(prob, sym, (1.5, 0.7, 0.3))
    assert abs(r1) <= 1e-6 and abs(r2) <= 1e-6


def test_perturbed_symmetry_breaks_first_equation_only():
    noise = NoiseSpec.simple(1.0, 2.0)
    prob = make_problem(DriftSpec.family("B", CaseParams(c0=1.0, c1=1.0)), noise)
    pert = Symmetry(phi=lambda x, t, w: x * x * math.exp(-0.9 * t), r=0.0)
    r1, r2 = residuals(prob, pert, (1.5, 0.7, 0.3))
    assert abs(r1) > 1e-3
    assert abs(r2) <= 1e-8


# -- first-order form -------------------------------------------------------------

def test_first_order_matches_r1_for_constant_noise():
    noise = NoiseSpec.constant(1.0)
    prob = make_problem(DriftSpec.family("B", CaseParams(c0=0.5, c1=-0.8)), noise)
    sym = classify(prob).symmetry
    for pt in probe_points(10, seed=21):
        r1, r2 = residuals(prob, sym, pt)
        assert abs(r2) <= 1e-8
        fo = first_order_residual(prob, sym, pt)
        assert abs(fo - r1) <= 1e-7
        assert abs(fo) <= 1e-6


def test_first_order_zero_phi():
    prob = make_problem(DriftSpec.expression("x"), NoiseSpec.constant(1.0))
    sym = Symmetry(phi=lambda x, t, w: 0.0, r=0.0)
    assert first_order_residual(prob, sym, (1.0, 0.1, 0.2)) == 0.0


def test_first_order_warns_outside_precondition():
    prob = make_problem(DriftSpec.expression("x"), NoiseSpec.simple(1.0, 2.0))
    bad = Symmetry(phi=lambda x, t, w: 1.0 + w, r=0.0)  # violates R2
    with pytest.warns(UserWarning, match="R2"):
        first_order_residual(prob, bad, (1.0, 0.1, 0.2))


# -- W-obstruction -----------------------------------------------------------------

def test_w_obstruction_values():
    assert w_obstruction(NoiseSpec.simple(1.0, 2.0), 1.0, 1.0) == 2.0
    assert w_obstruction(NoiseSpec.simple(1.0, 2.0), 0.0, 1.7) == 0.0
    assert w_obstruction(NoiseSpec.simple(2.0, 3.0), 0.5, 1.0) == 6.0


def test_w_obstruction_needs_power_law():
    with pytest.raises(DeterminingError):
        w_obstruction(NoiseSpec.constant(1.0), 1.0, 1.0)


def test_fit_w_coefficient_returns_zero():
    noise = NoiseSpec.simple(1.0, 2.0)
    prob = make_problem(DriftSpec.family("A", CaseParams(c=0.6)), noise)
    std = build_symmetry(classify(prob), noise, P="u")
    fam = determining.appendix_d_family(std, noise)
    rhat = determining.fit_w_coefficient(prob, fam, probe_points(30, seed=31))
    assert abs(rhat) <= 1e-8
    # case B family as well
    prob_b = make_problem(DriftSpec.family("B", CaseParams(c0=0.4, c1=-0.5)), noise)
    fam_b = determining.appendix_d_family(classify(prob_b).symmetry, noise)
    assert abs(determining.fit_w_coefficient(prob_b, fam_b,
                                             probe_points(30, seed=32))) <= 1e-8


def test_appendix_d_candidates_satisfy_second_equation():
    noise = NoiseSpec.simple(1.0, 2.0)
    prob = make_problem(DriftSpec.family("A", CaseParams(c=0.6)), noise)
    fam = determining.appendix_d_family(build_symmetry(classify(prob), noise, P="u"),
                                        noise)
    cand = fam(0.7)
    for pt in probe_points(10, seed=33):
        _, r2 = residuals(prob, cand, pt)
        assert abs(r2) <= 1e-8


# -- Ito-type criterion --------------------------------------------------------------

def test_remark16_deterministic_symmetry_is_exactly_zero():
    noise = NoiseSpec.constant(1.0)
    prob = make_problem(DriftSpec.family("B", CaseParams(c0=1.0, c1=-1.0)), noise)
    sym = classify(prob).symmetry
    for pt in probe_points(5, seed=41):
        assert remark16_criterion(prob, sym, pt) == 0.0


def test_remark16_case_c_matches_analytic_value():
    # residual = -beta^2 s^2 b exp(beta (s w + A(t))) for the exponential family
    noise = NoiseSpec.constant(1.0)
    prob = make_problem(DriftSpec.family("C", CaseParams(c0=0.0, c1=1.0, beta=1.0)),
                        noise)
    sym = classify(prob).symmetry
    x, t, w = 1.0, 0.4, 0.2
    got = remark16_criterion(prob, sym, (x, t, w))
    assert abs(got) == pytest.approx(math.exp(w), rel=1e-3)


def test_remark16_scales_with_beta_squared():
    noise = NoiseSpec.constant(1.0)
    vals = {}
    for beta in (0.3, 0.15):
        prob = make_problem(
            DriftSpec.family("C", CaseParams(c0=0.0, c1=1.0, beta=beta)), noise)
        vals[beta] = abs(remark16_criterion(prob, classify(prob).symmetry,
                                            (1.0, 0.4, 0.2)))
    assert vals[0.3] / vals[0.15] == pytest.approx(4.0, rel=0.05)


def test_remark16_case_a_random_symmetry_reports_finite_value():
    noise = NoiseSpec.constant(1.0)
    prob = make_problem(DriftSpec.family("A", CaseParams(c=0.7)), noise)
    sym = build_symmetry(classify(prob), noise)  # P = identity, random
    val = remark16_criterion(prob, sym, (2.5, 0.4, 0.2))
    assert math.isfinite(val)


def test_remark16_rejects_w_symmetries_and_vanishing_phi():
    noise = NoiseSpec.constant(1.0)
    prob = make_problem(DriftSpec.family("A", CaseParams(c=0.7)), noise)
    omega = Symmetry(phi=lambda x, t, w: x, r=1.0)
    with pytest.raises(DeterminingError):
        remark16_criterion(prob, omega, (1.0, 0.1, 0.0))
    zero_at = Symmetry(phi=lambda x, t, w: x - 1.0, r=0.0)
    with pytest.raises(DeterminingError, match="vanishes"):
        remark16_criterion(prob, zero_at, (1.0, 0.1, 0.0))
