import math

import numpy as np
import pytest

from itosym import (CaseParams, DriftSpec, NoiseSpec, build_symmetry,
                    build_w_symmetry, classify, construct_drift, make_problem)
from itosym import classifier, determining, exprlang
from itosym.classifier import ClassifierError


def texpr(source):
    return exprlang.parse(source, allowed_names={"t"})


# -- drift construction ---------------------------------------------------------

def test_construct_drift_power_law_a():
    noise = NoiseSpec.simple(1.0, 2.0)
    prob = make_problem(construct_drift("A", CaseParams(c=3.0), noise), noise)
    for x in (0.5, 1.0, 2.0):
        assert prob.f(x) == pytest.approx(3 * x**2 + x**3, rel=1e-14)


def test_construct_drift_power_law_b():
    noise = NoiseSpec.simple(1.0, 2.0)
    prob = make_problem(construct_drift("B", CaseParams(c0=0.0, c1=1.0), noise), noise)
    for x in (0.5, 1.0, 2.0):
        assert prob.f(x) == pytest.approx(x + x**3, rel=1e-14)


def test_construct_drift_driftless_brownian():
    noise = NoiseSpec.constant(1.0)
    prob = make_problem(construct_drift("A", CaseParams(c=0.0), noise), noise)
    assert prob.f(1.3) == 0.0


@pytest.mark.parametrize("case,params", [
    ("B", CaseParams(c0=1.0, c1=0.0)),
    ("C", CaseParams(c0=1.0, c1=0.0, beta=1.0)),
    ("C", CaseParams(c0=1.0, c1=1.0, beta=0.0)),
])
def test_construct_drift_rejects_degenerate_params(case, params):
    with pytest.raises(ClassifierError):
        construct_drift(case, params, NoiseSpec.constant(1.0))


# -- classification -------------------------------------------------------------

def test_classify_constant_drift_is_case_a():
    prob = make_problem(DriftSpec.expression("3"), NoiseSpec.constant(1.0))
    res = classify(prob)
    assert res.case == "A"
    assert res.params.c == pytest.approx(3.0, abs=1e-12)


def test_classify_affine_drift():
    prob = make_problem(DriftSpec.expression("1 + 2*x"), NoiseSpec.constant(1.0))
    res = classify(prob)
    assert res.case == "B"
    assert res.params.c0 == pytest.approx(1.0, abs=1e-9)
    assert res.params.c1 == pytest.approx(2.0, abs=1e-9)


def test_classify_exponential_drift_difference_ratio():
    # F(y) = 1 + 0.5 e^{-y} sampled on y in [0.5, 1.5] with step 0.1
    prob = make_problem(DriftSpec.expression("1 + 0.5*exp(-x)"), NoiseSpec.constant(1.0))
    res = classify(prob, grid=np.linspace(0.5, 1.5, 11))
    assert res.case == "C"
    assert res.params.c0 == pytest.approx(1.0, abs=1e-6)
    assert res.params.c1 == pytest.approx(0.5, abs=1e-6)
    assert res.params.beta == pytest.approx(-1.0, abs=1e-6)


def test_classify_precedence_constant_never_case_b():
    noise = NoiseSpec.constant(1.0)
    prob = make_problem(DriftSpec.expression("0.7"), noise)
    assert classify(prob).case == "A"


def test_classify_quadratic_drift_unclassified():
    prob = make_problem(DriftSpec.expression("x^2"), NoiseSpec.constant(1.0))
    res = classify(prob)
    assert res.case == "unclassified"
    assert res.symmetry is None
    assert res.residual > 0


def test_classify_grid_too_small():
    prob = make_problem(DriftSpec.expression("x"), NoiseSpec.constant(1.0))
    with pytest.raises(ClassifierError, match="grid too small"):
        classify(prob, grid=np.linspace(0.0, 1.0, 4))


def test_classify_unsamplable_drift():
    prob = make_problem(DriftSpec.expression("sqrt(x - 3)"), NoiseSpec.constant(1.0))
    with pytest.raises(ClassifierError):
        classify(prob)


def test_classify_round_trip_sample():
    rng = np.random.Generator(np.random.PCG64(11))
    for _ in range(30):
        case = str(rng.choice(["A", "B", "C"]))
        k = float(rng.choice([-1.0, 0.5, 2.0, 3.0]))
        s = float(rng.uniform(0.5, 2.0))
        noise = NoiseSpec.simple(s, k)
        if case == "A":
            params = CaseParams(c=float(rng.uniform(-2, 2)))
        elif case == "B":
            params = CaseParams(c0=float(rng.uniform(-2, 2)),
                                c1=float(rng.choice([-1, 1])) * float(rng.uniform(0.05, 2)))
        else:
            params = CaseParams(c0=float(rng.uniform(-2, 2)),
                                c1=float(rng.choice([-1, 1])) * float(rng.uniform(0.05, 2)),
                                beta=float(rng.choice([-1, 1])) * float(rng.uniform(0.05, 1.5)))
        prob = make_problem(construct_drift(case, params, noise), noise)
        res = classify(prob)
        assert res.case == case
        for name in ("c", "c0", "c1", "beta"):
            want = getattr(params, name)
            if want is not None:
                assert getattr(res.params, name) == pytest.approx(want, abs=1e-6)


# -- symmetry construction --------------------------------------------------------

def test_build_symmetry_power_law_case_a_identity_p():
    noise = NoiseSpec.simple(1.0, 2.0)
    prob = make_problem(construct_drift("A", CaseParams(c=3.0), noise), noise)
    sym = build_symmetry(classify(prob), noise)  # P defaults to identity
    # phi = x^2 (x^{-1}/(-1) - w - 3t)
    x, t, w = 2.0, 0.1, 0.2
    assert sym.phi(x, t, w) == pytest.approx(4.0 * (-0.5 - 0.2 - 0.3), rel=1e-12)


def test_build_symmetry_constant_noise_case_b():
    noise = NoiseSpec.constant(1.0)
    res = classify(make_problem(construct_drift("B", CaseParams(c0=0.0, c1=2.0), noise),
                                noise))
    sym = build_symmetry(res, noise)
    assert sym.phi(5.0, 0.3, -1.0) == pytest.approx(math.exp(0.6), rel=1e-12)


def test_build_symmetry_constant_noise_case_c():
    noise = NoiseSpec.constant(1.0)
    res = classify(make_problem(
        construct_drift("C", CaseParams(c0=1.0, c1=0.5, beta=0.5), noise), noise))
    sym = build_symmetry(res, noise)
    x, t, w = 1.2, 0.4, 0.3
    assert sym.phi(x, t, w) == pytest.approx(math.exp(0.5 * (x - w - t)), rel=1e-10)


def test_build_symmetry_unclassified_rejected():
    from itosym.model import ClassificationResult
    with pytest.raises(ClassifierError):
        build_symmetry(ClassificationResult("unclassified", None, 1.0),
                       NoiseSpec.constant(1.0))


# -- W-symmetries ------------------------------------------------------------------

def test_w_symmetry_case_a():
    noise = NoiseSpec.constant(1.0)
    omega = build_w_symmetry("A", CaseParams(c=2.0), 1.0, noise)
    assert omega.phi(1.0, 0.5, 0.7) == pytest.approx(1.0 - 2.0 * 0.5, abs=1e-14)
    assert omega.r == 1.0


def test_w_symmetry_case_b_gamma_zero():
    noise = NoiseSpec.constant(1.0)
    omega = build_w_symmetry("B", CaseParams(c0=1.0, c1=-1.0), 1.0, noise, gamma=0.0)
    assert omega.phi(1.0, 0.9, 0.1) == pytest.approx(0.0, abs=1e-14)  # x - 1


def test_w_symmetry_case_c_rejected():
    with pytest.raises(ClassifierError, match="no proper W-symmetry"):
        build_w_symmetry("C", CaseParams(c0=1.0, c1=1.0, beta=1.0), 1.0,
                         NoiseSpec.constant(1.0))


def test_w_symmetry_needs_constant_noise_and_nonzero_r():
    with pytest.raises(ClassifierError):
        build_w_symmetry("A", CaseParams(c=1.0), 1.0, NoiseSpec.simple(1.0, 2.0))
    with pytest.raises(ClassifierError):
        build_w_symmetry("A", CaseParams(c=1.0), 0.0, NoiseSpec.constant(1.0))


def test_w_symmetry_general_time_dependent_case_b():
    noise = NoiseSpec.constant(1.0)
    params = CaseParams(a=texpr("sin(t)"), b=texpr("-1 + 0.5*cos(t)"),
                        B=texpr("-t + 0.5*sin(t)"))
    omega = build_w_symmetry("B", params, 1.0, noise, gamma=0.2)
    prob = make_problem(DriftSpec.family("B", params), noise)
    pts = determining.probe_points(15, seed=6)
    r1, r2 = determining.max_residuals(prob, omega, pts)
    assert max(r1, r2) <= 1e-6


def test_w_symmetry_gamma_spans_solutions():
    noise = NoiseSpec.constant(1.0)
    prob = make_problem(construct_drift("B", CaseParams(c0=1.0, c1=-1.0), noise), noise)
    for gamma in (-1.0, 0.0, 2.5):
        omega = build_w_symmetry("B", CaseParams(c0=1.0, c1=-1.0), 1.0, noise,
                                 gamma=gamma)
        r1, r2 = determining.max_residuals(prob, omega,
                                           determining.probe_points(10, seed=8))
        assert max(r1, r2) <= 1e-6


# -- time-dependent constant-noise classification -----------------------------------

def test_time_dependent_case_a():
    prob = make_problem(DriftSpec.expression("cos(t)"), NoiseSpec.constant(1.0))
    res = classify(prob)
    assert res.case == "A"
    sym = res.symmetry
    pts = determining.probe_points(15, seed=12)
    r1, r2 = determining.max_residuals(prob, sym, pts)
    assert max(r1, r2) <= 1e-6


def test_time_dependent_case_b():
    prob = make_problem(DriftSpec.expression("sin(t) + (0.5*cos(t) - 1)*x"),
                        NoiseSpec.constant(0.8))
    res = classify(prob)
    assert res.case == "B"
    b = res.params.b
    assert b(0.0) == pytest.approx(-0.5, abs=1e-8)
    assert res.params.a(0.4) == pytest.approx(math.sin(0.4), abs=1e-8)
    pts = determining.probe_points(12, seed=13)
    r1, r2 = determining.max_residuals(prob, res.symmetry, pts)
    assert max(r1, r2) <= 1e-6


def test_time_dependent_case_c():
    prob = make_problem(DriftSpec.expression("cos(t) + (0.5 + 0.2*sin(t))*exp(0.7*x)"),
                        NoiseSpec.constant(1.0))
    res = classify(prob)
    assert res.case == "C"
    assert res.params.beta == pytest.approx(0.7, abs=1e-6)
    pts = determining.probe_points(12, seed=14)
    r1, r2 = determining.max_residuals(prob, res.symmetry, pts)
    assert max(r1, r2) <= 1e-6


def test_time_dependent_needs_constant_noise():
    prob = make_problem(DriftSpec.expression("x*t"), NoiseSpec.simple(1.0, 2.0))
    with pytest.raises(ClassifierError):
        classify(prob)


# -- expression symmetries ------------------------------------------------------------

def test_expression_symmetry():
    sym = classifier.expression_symmetry("x^2*exp(-t)", r=0.0)
    assert sym.phi(2.0, 0.0, 0.0) == 4.0
    assert sym.label == "x ^ 2.0 * exp(-t)"
