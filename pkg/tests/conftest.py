"""Shared fixtures: the curated set of symmetric equations used by the
determining-equation and acceptance suites.

Every entry is (name, problem, symmetry) with moderate parameter sizes so
that the finite-difference residual oracle stays well inside the 1e-6
tolerance it is audited against.
"""

import pytest

from itosym import (CaseParams, ClassificationResult, DriftSpec, NoiseSpec,
                    build_symmetry, classify, make_problem)
from itosym import exprlang


def texpr(source):
    return exprlang.parse(source, allowed_names={"t"})


def build_fixture_set():
    out = []
    const1 = NoiseSpec.constant(1.0)

    # constant noise, autonomous drifts
    prob_a = make_problem(DriftSpec.family("A", CaseParams(c=0.7)), const1)
    res_a = classify(prob_a)
    for P in ("1", "u", "exp(u)"):
        out.append((f"const-A-P={P}", prob_a, build_symmetry(res_a, const1, P=P)))
    const15 = NoiseSpec.constant(1.5)
    prob_b = make_problem(DriftSpec.family("B", CaseParams(c0=0.5, c1=-0.8)), const15)
    out.append(("const-B", prob_b, classify(prob_b).symmetry))
    prob_c = make_problem(DriftSpec.family("C", CaseParams(c0=0.4, c1=0.6, beta=0.9)),
                          const1)
    out.append(("const-C", prob_c, classify(prob_c).symmetry))

    # constant noise, time-dependent coefficients
    pa = CaseParams(h=texpr("cos(t)"), H=texpr("sin(t)"))
    prob = make_problem(DriftSpec.family("A", pa), const1)
    out.append(("timedep-A", prob,
                build_symmetry(ClassificationResult("A", pa, 0.0), const1, P="u")))
    const08 = NoiseSpec.constant(0.8)
    pb = CaseParams(a=texpr("sin(t)"), b=texpr("-1 + 0.5*cos(t)"),
                    B=texpr("-t + 0.5*sin(t)"))
    prob = make_problem(DriftSpec.family("B", pb), const08)
    out.append(("timedep-B", prob,
                build_symmetry(ClassificationResult("B", pb, 0.0), const08)))
    pc = CaseParams(a=texpr("cos(t)"), A=texpr("sin(t)"),
                    b=texpr("0.5 + 0.2*sin(t)"), beta=0.7)
    prob = make_problem(DriftSpec.family("C", pc), const1)
    out.append(("timedep-C", prob,
                build_symmetry(ClassificationResult("C", pc, 0.0), const1)))

    # power-law noise, one block per exponent
    power_block = {  # k: (s, beta for case C)
        -1.0: (1.0, 0.4),
        0.5: (2.0, 0.8),
        2.0: (1.0, 0.6),
        3.0: (0.5, 0.7),
    }
    for k, (s, beta) in power_block.items():
        noise = NoiseSpec.simple(s, k)
        prob = make_problem(DriftSpec.family("A", CaseParams(c=0.6)), noise)
        res = classify(prob)
        p_choices = ("1", "u", "exp(u)") if k == 2.0 else ("u",)
        for P in p_choices:
            out.append((f"power-A-k={k}-P={P}", prob,
                        build_symmetry(res, noise, P=P)))
        prob = make_problem(DriftSpec.family("B", CaseParams(c0=0.4, c1=-0.5)), noise)
        out.append((f"power-B-k={k}", prob, classify(prob).symmetry))
        prob = make_problem(
            DriftSpec.family("C", CaseParams(c0=0.3, c1=0.4, beta=beta)), noise)
        out.append((f"power-C-k={k}", prob, classify(prob).symmetry))
    return out


@pytest.fixture(scope="session")
def fixture_set():
    return build_fixture_set()
