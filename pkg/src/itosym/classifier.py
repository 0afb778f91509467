"""Detection of the symmetric drift families and construction of their
symmetries.

The classifier samples the unit-noise drift F(y) on a grid and tests, in
order, whether it is constant (case A), affine (case B) or
constant-plus-exponential (case C, via the difference-ratio estimator).
The order matters: the families are nested degenerations (B with c1 = 0 is
A, C with c1 = 0 is A), so a drift passing an earlier test never reaches a
later one.  Constants are recovered in y-space and mapped back to the
x-space normalization of the power-law tables.

For constant noise with a time-dependent drift, classification runs on
structure tests instead: f_xx = 0 selects A/B, constant f_xx/f_x selects C,
and the time-dependent coefficients are recovered as callables with
quadrature-backed primitives.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Sequence

import numpy as np

from . import exprlang, model, numdiff, transforms
from .model import (CaseParams, ClassificationResult, DriftSpec, NoiseSpec,
                    SdeProblem, Symmetry)

logger = logging.getLogger(__name__)

FAMILY_TOL = 1e-8   # exact family inputs
EXPR_TOL = 1e-6     # parsed expression inputs
MIN_GRID = 6
DIFF_FLOOR = 1e-10  # smallest |F(y_{i+1}) - F(y_i)| the ratio estimator accepts


class ClassifierError(Exception):
    pass


def construct_drift(case: str, params: CaseParams, noise: NoiseSpec) -> DriftSpec:
    """Closed-form drift of a symmetric family (power-law or constant noise)."""
    if noise.kind not in ("constant", "simple"):
        raise ClassifierError("families are defined for constant or simple noise")
    if case not in model.CASES:
        raise ClassifierError(f"unknown case {case!r}")
    if case == "B" and params.c1 == 0.0:
        raise ClassifierError("case B requires c1 != 0")
    if case == "C":
        if params.c1 == 0.0:
            raise ClassifierError("case C requires c1 != 0")
        if not params.beta:
            raise ClassifierError("case C requires beta != 0")
    drift = DriftSpec.family(case, params)
    # fail fast if the family cannot be evaluated with this noise
    model.family_drift_fn(case, params, noise)
    return drift


def default_grid(problem: SdeProblem, n: int = 40,
                 x_window: tuple[float, float] = (0.7, 2.5)) -> np.ndarray:
    """Uniform y-grid spanning the image of the x-window, direction-corrected
    (g may be decreasing)."""
    sf = transforms.standard_form(problem)
    a, b = sorted((sf.g(x_window[0]), sf.g(x_window[1])))
    return np.linspace(a, b, n)


def _params_from_unit(case: str, noise: NoiseSpec, c0u: float,
                      c1u: float | None = None,
                      beta_u: float | None = None) -> CaseParams:
    """Map constants of the unit-noise drift back to the x-space tables."""
    s = noise.s
    if noise.kind == "constant":
        if case == "A":
            return CaseParams(c=s * c0u)
        if case == "B":
            return CaseParams(c0=s * c0u, c1=c1u)
        return CaseParams(c0=s * c0u, c1=s * c1u, beta=beta_u / s)
    k = noise.k
    e1 = 1.0 - k
    if case == "A":
        return CaseParams(c=s * c0u)
    if case == "B":
        return CaseParams(c0=s * c0u, c1=c1u / e1)
    return CaseParams(c0=s * c0u, c1=s * c1u, beta=beta_u / (s * e1))


def classify(problem: SdeProblem, grid: Sequence[float] | None = None,
             tol: float | None = None) -> ClassificationResult:
    """Detect the family, recover its constants and attach the symmetry.

    Returns case "unclassified" (residual = best failed fit) when no family
    matches.  Simple noise requires an autonomous drift; a time-dependent
    drift with constant noise goes through the structure tests.
    """
    noise = problem.noise
    if noise.kind not in ("constant", "simple"):
        raise ClassifierError("classification needs constant or simple noise")
    if tol is None:
        tol = FAMILY_TOL if problem.drift.kind == "family" else EXPR_TOL
    if not problem.autonomous:
        if noise.kind != "constant":
            raise ClassifierError("time-dependent drifts are classified for "
                                  "constant noise only")
        return _classify_time_dependent(problem, tol)

    if grid is None:
        grid = default_grid(problem)
    ys = np.asarray(grid, dtype=float)
    if len(ys) < MIN_GRID:
        raise ClassifierError(f"grid too small ({len(ys)} points, need {MIN_GRID})")
    sf = transforms.standard_form(problem)
    F = np.array([sf.F(float(y)) for y in ys])
    if not np.all(np.isfinite(F)):
        raise ClassifierError("non-finite drift samples on the grid")

    # case A: constant F
    c0u = float(np.mean(F))
    resid_a = float(np.max(np.abs(F - c0u)))
    if resid_a <= tol * (1.0 + abs(c0u)):
        params = _params_from_unit("A", noise, c0u)
        sym = build_symmetry(ClassificationResult("A", params, resid_a), noise)
        return ClassificationResult("A", params, resid_a, sym)

    # case B: affine F, least squares
    slope, intercept = np.polyfit(ys, F, 1)
    resid_b = float(np.max(np.abs(F - (intercept + slope * ys))))
    scale_b = 1.0 + float(np.max(np.abs(F)))
    if resid_b <= tol * scale_b:
        params = _params_from_unit("B", noise, float(intercept), float(slope))
        sym = build_symmetry(ClassificationResult("B", params, resid_b), noise)
        return ClassificationResult("B", params, resid_b, sym)

    # case C: constant + exponential, difference-ratio estimator
    best = min(resid_a, resid_b)
    steps = np.diff(ys)
    if np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        delta = float(steps[0])
        d = np.diff(F)
        if np.all(np.abs(d) > DIFF_FLOOR):
            rho = d[1:] / d[:-1]
            rho_bar = float(np.mean(rho))
            if rho_bar > 0.0 and float(np.max(np.abs(rho - rho_bar))) <= tol * (
                    1.0 + abs(rho_bar)):
                beta_u = math.log(rho_bar) / delta
                c1u = float(d[0] / (math.exp(beta_u * ys[0])
                                    * (math.exp(beta_u * delta) - 1.0)))
                c0u = float(np.mean(F - c1u * np.exp(beta_u * ys)))
                fit = c0u + c1u * np.exp(beta_u * ys)
                resid_c = float(np.max(np.abs(F - fit)))
                if resid_c <= tol * scale_b:
                    params = _params_from_unit("C", noise, c0u, c1u, beta_u)
                    sym = build_symmetry(ClassificationResult("C", params, resid_c),
                                         noise)
                    return ClassificationResult("C", params, resid_c, sym)
                best = min(best, resid_c)
    return ClassificationResult(model.UNCLASSIFIED, None, best, None)


def _time_primitive(fn: Callable[[float], float]) -> Callable[[float], float]:
    return lambda t: transforms.quad(fn, 0.0, t)


def _classify_time_dependent(problem: SdeProblem, tol: float) -> ClassificationResult:
    """Structure tests on an (x, t) product grid for constant noise."""
    xs = model.domain_samples(problem.domain, 5)
    ts = np.linspace(0.0, 1.0, 7)
    f = problem.f
    fx = np.array([[numdiff.d1(lambda v: f(v, t), x) for x in xs] for t in ts])
    fxx = np.array([[numdiff.d2(lambda v: f(v, t), x) for x in xs] for t in ts])
    fscale = 1.0 + max(abs(f(x, t)) for x in xs for t in ts)

    def is_flat(arr: np.ndarray) -> bool:
        mean = float(np.mean(arr))
        return float(np.max(arr) - np.min(arr)) <= tol * (1.0 + abs(mean))

    if float(np.max(np.abs(fx))) <= tol * fscale:
        h = lambda t: f(xs[0], t)
        params = CaseParams(h=h, H=_time_primitive(h))
        resid = max(abs(f(x, t) - h(t)) for x in xs for t in ts)
        sym = build_symmetry(ClassificationResult("A", params, resid), problem.noise)
        return ClassificationResult("A", params, resid, sym)

    if float(np.max(np.abs(fxx))) <= tol * fscale:
        x_ref = xs[2]
        b = lambda t: numdiff.d1(lambda v: f(v, t), x_ref)
        a = lambda t: f(x_ref, t) - b(t) * x_ref
        resid = max(abs(f(x, t) - (a(t) + b(t) * x)) for x in xs for t in ts)
        if resid <= tol * fscale:
            params = CaseParams(a=a, b=b, B=_time_primitive(b))
            sym = build_symmetry(ClassificationResult("B", params, resid),
                                 problem.noise)
            return ClassificationResult("B", params, resid, sym)
        return ClassificationResult(model.UNCLASSIFIED, None, resid, None)

    ratio = fxx / fx
    if is_flat(ratio):
        beta = float(np.mean(ratio))
        x_ref = xs[2]
        b = lambda t: numdiff.d1(lambda v: f(v, t), x_ref) / (
            beta * math.exp(beta * x_ref))
        a = lambda t: f(x_ref, t) - b(t) * math.exp(beta * x_ref)
        resid = max(abs(f(x, t) - (a(t) + b(t) * math.exp(beta * x)))
                    for x in xs for t in ts)
        if resid <= tol * fscale:
            params = CaseParams(beta=beta, a=a, A=_time_primitive(a), b=b)
            sym = build_symmetry(ClassificationResult("C", params, resid),
                                 problem.noise)
            return ClassificationResult("C", params, resid, sym)
    return ClassificationResult(model.UNCLASSIFIED, None, math.inf, None)


# ---------------------------------------------------------------------------
# symmetry construction


def _coerce_p(P) -> tuple[Callable[[float], float], exprlang.Expr | None, str]:
    if P is None:
        logger.info("case A symmetry: no P supplied, defaulting to the identity")
        return (lambda u: u), exprlang.Var("u"), "u"
    if isinstance(P, str):
        tree = exprlang.parse(P, allowed_names={"u"})
        return (lambda u: exprlang.evaluate(tree, {"u": u})), tree, exprlang.to_source(tree)
    if isinstance(P, (exprlang.Num, exprlang.Var, exprlang.Neg, exprlang.Bin,
                      exprlang.Call)):
        return (lambda u: exprlang.evaluate(P, {"u": u})), P, exprlang.to_source(P)
    if callable(P):
        return P, None, getattr(P, "__name__", "P")
    raise ClassifierError(f"cannot interpret P = {P!r}")


def build_symmetry(result: ClassificationResult, noise: NoiseSpec,
                   P=None) -> Symmetry:
    """Standard (r = 0) symmetry of a classified equation.

    Power-law noise:
        A: phi = x^k P(x^(1-k)/(1-k) - s w - c t)
        B: phi = x^k exp((1-k) c1 t)
        C: phi = x^k exp(beta (x^(1-k) - (1-k)(s w + c0 t)))
    Constant noise (time-dependent coefficients reduce to c t etc. in the
    autonomous case):
        A: phi = P(x - s w - H(t));  B: phi = exp(B(t));
        C: phi = exp(beta (x - s w - A(t)))
    """
    if not result.classified:
        raise ClassifierError("cannot build a symmetry for an unclassified equation")
    case, params = result.case, result.params
    s = noise.s

    if noise.kind == "simple":
        k = noise.k
        e1 = 1.0 - k
        if case == "A":
            p_fun, p_expr, p_src = _coerce_p(P)
            c = float(params.c)

            def phi(x, t, w):
                return x ** k * p_fun(x ** e1 / e1 - s * w - c * t)

            label = f"x^{k:g} * P(x^{e1:g}/{e1:g} - {s:g}*w - {c:g}*t), P(u) = {p_src}"
            return Symmetry(phi=phi, r=0.0, case="A", params=params, noise=noise,
                            p_fun=p_fun, p_expr=p_expr, label=label, source="table4")
        if case == "B":
            c1 = float(params.c1)

            def phi(x, t, w):
                return x ** k * math.exp(e1 * c1 * t)

            label = f"x^{k:g} * exp({e1 * c1:g}*t)"
            return Symmetry(phi=phi, r=0.0, case="B", params=params, noise=noise,
                            label=label, source="table4")
        beta, c0 = float(params.beta), float(params.c0)

        def phi(x, t, w):
            return x ** k * math.exp(beta * (x ** e1 - e1 * (s * w + c0 * t)))

        label = (f"x^{k:g} * exp({beta:g}*(x^{e1:g} - {e1:g}*({s:g}*w + {c0:g}*t)))")
        return Symmetry(phi=phi, r=0.0, case="C", params=params, noise=noise,
                        label=label, source="table4")

    if noise.kind != "constant":
        raise ClassifierError("symmetries are tabulated for constant or simple noise")
    autonomous = params.is_autonomous(case)
    source = "table2" if autonomous else "table1"
    if case == "A":
        p_fun, p_expr, p_src = _coerce_p(P)
        H = params.H_fn()

        def phi(x, t, w):
            return p_fun(x - s * w - H(t))

        head = f"{params.c:g}*t" if autonomous and params.c is not None else "H(t)"
        label = f"P(x - {s:g}*w - {head}), P(u) = {p_src}"
        return Symmetry(phi=phi, r=0.0, case="A", params=params, noise=noise,
                        p_fun=p_fun, p_expr=p_expr, label=label, source=source)
    if case == "B":
        B = params.B_fn()

        def phi(x, t, w):
            return math.exp(B(t))

        label = (f"exp({params.c1:g}*t)" if autonomous and params.c1 is not None
                 else "exp(B(t))")
        return Symmetry(phi=phi, r=0.0, case="B", params=params, noise=noise,
                        label=label, source=source)
    beta = float(params.beta)
    A = params.A_fn()

    def phi(x, t, w):
        return math.exp(beta * (x - s * w - A(t)))

    head = f"{params.c0:g}*t" if autonomous and params.c0 is not None else "A(t)"
    label = f"exp({beta:g}*(x - {s:g}*w - {head}))"
    return Symmetry(phi=phi, r=0.0, case="C", params=params, noise=noise,
                    label=label, source=source)


def build_w_symmetry(case: str, params: CaseParams, r: float, noise: NoiseSpec,
                     gamma: float = 0.0) -> Symmetry:
    """Strict proper W-symmetry part omega(x,t;w) for constant noise.

    Autonomous forms: case A omega = r (x - c t); case B
    omega = r (x + (c0/c1)(1 + gamma e^(c1 t))).  With time-dependent
    coefficients: case A omega = r (x - H(t)); case B
    omega = r (x - e^(B(t)) int_0^t e^(-B) a dtau + gamma e^(B(t))), the
    gamma term being the hidden integration constant (a multiple of the
    standard symmetry).  Case C admits no proper W-symmetry.
    """
    if noise.kind != "constant":
        raise ClassifierError("proper W-symmetries exist only for constant noise "
                              "(and the excluded multiplicative case)")
    if r == 0.0:
        raise ClassifierError("a proper W-symmetry needs r != 0")
    if case == "C":
        raise ClassifierError("case C admits no proper W-symmetry")
    if case == "A":
        H = params.H_fn()

        def phi(x, t, w):
            return r * (x - H(t))

        head = f"{params.c:g}*t" if params.h is None and params.c is not None else "H(t)"
        return Symmetry(phi=phi, r=r, case="A", params=params, noise=noise,
                        label=f"{r:g}*(x - {head})", source="w")
    if case != "B":
        raise ClassifierError(f"unknown case {case!r}")
    if params.is_autonomous("B"):
        c0, c1 = float(params.c0), float(params.c1)

        def phi(x, t, w):
            return r * (x + (c0 / c1) * (1.0 + gamma * math.exp(c1 * t)))

        label = f"{r:g}*(x + {c0 / c1:g}*(1 + {gamma:g}*exp({c1:g}*t)))"
        return Symmetry(phi=phi, r=r, case="B", params=params, noise=noise,
                        label=label, source="w")
    a = params.a_fn()
    B = params.B_fn()

    def phi(x, t, w):
        tail = transforms.quad(lambda tau: math.exp(-B(tau)) * a(tau), 0.0, t)
        return r * (x - math.exp(B(t)) * tail + gamma * math.exp(B(t)))

    return Symmetry(phi=phi, r=r, case="B", params=params, noise=noise,
                    label=f"{r:g}*(x - exp(B(t))*int_0^t exp(-B)a + "
                          f"{gamma:g}*exp(B(t)))", source="w")


def expression_symmetry(source: str, r: float = 0.0,
                        constants: dict[str, float] | None = None) -> Symmetry:
    """Symmetry candidate from a user-supplied phi(x,t,w) expression."""
    constants = dict(constants or {})
    tree = exprlang.parse(source, allowed_names={"x", "t", "w"} | set(constants))

    def phi(x, t, w):
        bindings = dict(constants)
        bindings.update(x=x, t=t, w=w)
        return exprlang.evaluate(tree, bindings)

    return Symmetry(phi=phi, r=float(r), label=exprlang.to_source(tree), source=None)
