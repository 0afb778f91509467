"""Domain types shared by every other module.

Conventions used throughout the package:

* the equation is dx = f(x,t) dt + sigma(x,t) dw with sigma either a constant
  s or the power law s * x^k (k != 0, 1);
* the three symmetric drift families are tagged "A", "B", "C"; autonomous
  families are described by constants (c, c0, c1, beta), time-dependent
  constant-noise families by coefficient functions with explicit primitives
  (h/H for case A, a + b/B for case B, a/A + b for case C);
* symmetries are vector fields phi(x,t;w) d/dx + r w d/dw, with r = 0 for
  standard symmetries.

All types are immutable values after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

import numpy as np

from . import exprlang, numdiff
from .exprlang import Expr

CASES = ("A", "B", "C")
UNCLASSIFIED = "unclassified"

#: a time-dependent coefficient: expression in t, plain float, or callable
TimeFn = Expr | float | Callable[[float], float]


class ModelError(Exception):
    pass


def time_fn(obj: TimeFn | None, fallback: float | None = None) -> Callable[[float], float]:
    """Coerce a coefficient spec into a callable of t."""
    if obj is None:
        if fallback is None:
            raise ModelError("missing time coefficient")
        value = float(fallback)
        return lambda t: value
    if isinstance(obj, (int, float)):
        value = float(obj)
        return lambda t: value
    if isinstance(obj, (exprlang.Num, exprlang.Var, exprlang.Neg, exprlang.Bin,
                        exprlang.Call)):
        return lambda t: exprlang.evaluate(obj, {"t": t})
    if callable(obj):
        return obj
    raise ModelError(f"cannot interpret {obj!r} as a function of t")


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseSpec:
    """Noise coefficient: constant s, simple power s*x^k, or an opaque
    callable produced by a change of variables (runtime only)."""

    kind: str  # "constant" | "simple" | "opaque"
    s: float = 1.0
    k: float | None = None
    fn: Callable[[float, float], float] | None = None

    @staticmethod
    def constant(s: float) -> "NoiseSpec":
        return NoiseSpec(kind="constant", s=float(s))

    @staticmethod
    def simple(s: float, k: float) -> "NoiseSpec":
        return NoiseSpec(kind="simple", s=float(s), k=float(k))

    @staticmethod
    def opaque(fn: Callable[[float, float], float]) -> "NoiseSpec":
        return NoiseSpec(kind="opaque", s=math.nan, fn=fn)

    def sigma(self, x: float, t: float = 0.0) -> float:
        if self.kind == "constant":
            return self.s
        if self.kind == "simple":
            return self.s * x ** self.k
        return self.fn(x, t)

    def sigma_x(self, x: float, t: float = 0.0) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "simple":
            return self.s * self.k * x ** (self.k - 1.0)
        return numdiff.partial1(self.fn, (x, t), 0)

    def sigma_xx(self, x: float, t: float = 0.0) -> float:
        if self.kind == "constant":
            return 0.0
        if self.kind == "simple":
            return self.s * self.k * (self.k - 1.0) * x ** (self.k - 2.0)
        return numdiff.partial2(self.fn, (x, t), 0)

    def sigma_t(self, x: float, t: float = 0.0) -> float:
        if self.kind == "opaque":
            return numdiff.partial1(self.fn, (x, t), 1)
        return 0.0


# ---------------------------------------------------------------------------
# drift families


@dataclass(frozen=True)
class CaseParams:
    """Constants and time-dependent coefficients of the symmetric families.

    Autonomous families use c (case A), c0/c1 (cases B, C) and beta (case C).
    Time-dependent constant-noise families use the coefficient functions with
    their primitives, in the naming of the time-dependent classification
    table: case A drift h(t) with primitive H; case B drift a(t) + b(t)*x
    with primitive B of b; case C drift a(t) + b(t)*exp(beta*x) with
    primitive A of a.  Primitives are supplied, not computed symbolically,
    and are cross-checked by finite differences in validate().
    """

    c: float | None = None
    c0: float | None = None
    c1: float | None = None
    beta: float | None = None
    h: TimeFn | None = None
    H: TimeFn | None = None
    a: TimeFn | None = None
    A: TimeFn | None = None
    b: TimeFn | None = None
    B: TimeFn | None = None

    def h_fn(self) -> Callable[[float], float]:
        return time_fn(self.h, self.c)

    def H_fn(self) -> Callable[[float], float]:
        if self.H is None and self.h is None and self.c is not None:
            c = float(self.c)
            return lambda t: c * t
        return time_fn(self.H)

    def a_fn(self) -> Callable[[float], float]:
        return time_fn(self.a, self.c0)

    def A_fn(self) -> Callable[[float], float]:
        if self.A is None and self.a is None and self.c0 is not None:
            c0 = float(self.c0)
            return lambda t: c0 * t
        return time_fn(self.A)

    def b_fn(self) -> Callable[[float], float]:
        return time_fn(self.b, self.c1)

    def B_fn(self) -> Callable[[float], float]:
        if self.B is None and self.b is None and self.c1 is not None:
            c1 = float(self.c1)
            return lambda t: c1 * t
        return time_fn(self.B)

    def is_autonomous(self, case: str) -> bool:
        if case == "A":
            return self.h is None
        if case == "B":
            return self.a is None and self.b is None
        return self.a is None and self.b is None


def family_drift_fn(case: str, params: CaseParams,
                    noise: NoiseSpec) -> Callable[[float, float], float]:
    """Closed-form drift of a symmetric family for the given noise.

    Simple noise s*x^k:
        A: f = c x^k + (1/2) s^2 k x^(2k-1)
        B: f = c0 x^k + c1 x + (1/2) s^2 k x^(2k-1)
        C: f = c0 x^k + c1 x^k exp(beta x^(1-k)) + (1/2) s^2 k x^(2k-1)
    Constant noise s:
        A: f = h(t);  B: f = a(t) + b(t) x;  C: f = a(t) + b(t) exp(beta x)
    """
    if case not in CASES:
        raise ModelError(f"unknown case {case!r}")
    if noise.kind == "simple":
        s, k = noise.s, noise.k
        half = 0.5 * s * s * k
        if case == "A":
            c = float(params.c)
            return lambda x, t: c * x ** k + half * x ** (2 * k - 1)
        if case == "B":
            c0, c1 = float(params.c0), float(params.c1)
            return lambda x, t: c0 * x ** k + c1 * x + half * x ** (2 * k - 1)
        c0, c1, beta = float(params.c0), float(params.c1), float(params.beta)
        return lambda x, t: (c0 * x ** k
                             + c1 * x ** k * math.exp(beta * x ** (1 - k))
                             + half * x ** (2 * k - 1))
    if noise.kind == "constant":
        if case == "A":
            h = params.h_fn()
            return lambda x, t: h(t)
        if case == "B":
            a, b = params.a_fn(), params.b_fn()
            return lambda x, t: a(t) + b(t) * x
        a, b, beta = params.a_fn(), params.b_fn(), float(params.beta)
        return lambda x, t: a(t) + b(t) * math.exp(beta * x)
    raise ModelError("family drifts are defined for constant or simple noise only")


@dataclass(frozen=True)
class DriftSpec:
    """Drift: a symmetric family (case + params), a parsed expression over
    x, t and named constants, or an opaque callable (runtime only)."""

    kind: str  # "family" | "expr" | "opaque"
    case: str | None = None
    params: CaseParams | None = None
    expr: Expr | None = None
    constants: Mapping[str, float] = field(default_factory=dict)
    fn: Callable[[float, float], float] | None = None

    @staticmethod
    def family(case: str, params: CaseParams) -> "DriftSpec":
        return DriftSpec(kind="family", case=case, params=params)

    @staticmethod
    def expression(source: str | Expr,
                   constants: Mapping[str, float] | None = None) -> "DriftSpec":
        constants = dict(constants or {})
        if isinstance(source, str):
            allowed = {"x", "t"} | set(constants)
            tree = exprlang.parse(source, allowed_names=allowed)
        else:
            tree = source
        return DriftSpec(kind="expr", expr=tree, constants=constants)

    @staticmethod
    def opaque(fn: Callable[[float, float], float]) -> "DriftSpec":
        return DriftSpec(kind="opaque", fn=fn)


# ---------------------------------------------------------------------------
# the problem


@dataclass(frozen=True)
class SdeProblem:
    """A drift/noise pair with its validity domain (open interval)."""

    drift: DriftSpec
    noise: NoiseSpec
    domain: tuple[float, float]
    autonomous: bool

    def f(self, x: float, t: float = 0.0) -> float:
        d = self.drift
        if d.kind == "family":
            return family_drift_fn(d.case, d.params, self.noise)(x, t)
        if d.kind == "expr":
            bindings = dict(d.constants)
            bindings["x"] = x
            bindings["t"] = t
            return exprlang.evaluate(d.expr, bindings)
        return d.fn(x, t)

    def sigma(self, x: float, t: float = 0.0) -> float:
        return self.noise.sigma(x, t)

    def sigma_x(self, x: float, t: float = 0.0) -> float:
        return self.noise.sigma_x(x, t)

    def in_domain(self, x: float) -> bool:
        lo, hi = self.domain
        return lo < x < hi


def default_domain(noise: NoiseSpec) -> tuple[float, float]:
    """(-inf, inf) for constant noise, (0, inf) for power-law noise: the
    x^(1-k) and log branches are single-valued there."""
    if noise.kind == "simple":
        return (0.0, math.inf)
    return (-math.inf, math.inf)


def domain_samples(domain: tuple[float, float], n: int = 5) -> list[float]:
    lo, hi = domain
    if math.isinf(lo) and math.isinf(hi):
        return [-2.0, -0.5, 0.5, 1.0, 2.5][:n]
    if math.isinf(hi):
        base = lo if math.isfinite(lo) else 0.0
        return [base + d for d in (0.5, 1.0, 1.7, 2.5, 3.0)][:n]
    if math.isinf(lo):
        return [hi - d for d in (0.5, 1.0, 1.7, 2.5, 3.0)][:n]
    return list(np.linspace(lo, hi, n + 2)[1:-1])


def _probe_autonomous(f: Callable[[float, float], float],
                      domain: tuple[float, float]) -> bool:
    for x in domain_samples(domain, 4):
        try:
            ref = f(x, 0.0)
            if any(abs(f(x, t) - ref) > 1e-12 * (1.0 + abs(ref))
                   for t in (0.31, 0.77, 1.43)):
                return False
        except exprlang.ExprError:
            return False
    return True


def make_problem(drift: DriftSpec, noise: NoiseSpec,
                 domain: tuple[float, float] | None = None) -> SdeProblem:
    """Assemble a problem, filling in the default domain and probing the
    drift for time dependence."""
    if domain is None:
        domain = default_domain(noise)
    domain = (float(domain[0]), float(domain[1]))
    if drift.kind == "family":
        autonomous = drift.params.is_autonomous(drift.case)
    elif drift.kind == "expr":
        autonomous = "t" not in exprlang.free_variables(drift.expr)
    else:
        probe = SdeProblem(drift, noise, domain, autonomous=False)
        autonomous = _probe_autonomous(probe.f, domain)
    if noise.kind == "opaque":
        autonomous = False
    return SdeProblem(drift=drift, noise=noise, domain=domain, autonomous=autonomous)


# ---------------------------------------------------------------------------
# symmetries


@dataclass(frozen=True, eq=False)
class Symmetry:
    """A symmetry vector field phi(x,t;w) d/dx + r w d/dw.

    phi must be nonzero on the sub-domain where the Kozlov map is used (the
    map divides by phi).  `source` tags recognized closed-form families so
    the transforms module can use exact Kozlov maps: "table2" / "table1"
    (constant noise, autonomous / time-dependent), "table4" (simple noise),
    "w" (strict proper W-symmetry part), None for ad-hoc evaluators.
    """

    phi: Callable[[float, float, float], float]
    r: float = 0.0
    case: str | None = None
    params: CaseParams | None = None
    noise: NoiseSpec | None = None
    p_fun: Callable[[float], float] | None = None
    p_expr: Expr | None = None
    label: str = ""
    source: str | None = None

    def __call__(self, x: float, t: float, w: float) -> float:
        return self.phi(x, t, w)


# ---------------------------------------------------------------------------
# paths


@dataclass(frozen=True, eq=False)
class WienerPath:
    """A seeded discrete Brownian trajectory on a uniform grid.

    w(t0) = 0; increments are Normal(0, dt) draws produced deterministically
    from (seed, path_index, level) via numpy's PCG64 bit generator, so
    regenerating with identical arguments is bit-identical.
    """

    times: np.ndarray
    values: np.ndarray
    seed: int
    path_index: int
    level: int = 0

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.times.shape != self.values.shape or self.times.ndim != 1:
            raise ModelError("times and values must be matching 1-d arrays")
        for arr in (self.times, self.values):
            try:
                arr.setflags(write=False)
            except ValueError:
                pass

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1


@dataclass(frozen=True, eq=False)
class SolutionPath:
    """States x(t_i) on the grid of a WienerPath.

    If the trajectory leaves the SDE domain or stops being finite, the path
    is truncated: truncated_at holds the first exit index and later states
    are NaN.
    """

    times: np.ndarray
    states: np.ndarray
    method: str
    truncated_at: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))
        for arr in (self.times, self.states):
            try:
                arr.setflags(write=False)
            except ValueError:
                pass

    @property
    def ok(self) -> bool:
        return self.truncated_at is None

    @property
    def endpoint(self) -> float:
        return float(self.states[-1])


@dataclass(frozen=True, eq=False)
class ClassificationResult:
    case: str  # "A" | "B" | "C" | "unclassified"
    params: CaseParams | None
    residual: float
    symmetry: Symmetry | None = None

    @property
    def classified(self) -> bool:
        return self.case in CASES


# ---------------------------------------------------------------------------
# validation


def _check_primitive(name: str, fn: Callable[[float], float],
                     prim: Callable[[float], float], out: list[str]) -> None:
    for t in (0.1, 0.45, 0.9):
        try:
            deriv = numdiff.d1(prim, t)
            want = fn(t)
        except exprlang.ExprError as exc:
            out.append(f"{name}: evaluation failed: {exc}")
            return
        if abs(deriv - want) > 1e-6 * (1.0 + abs(want)):
            out.append(f"{name}: primitive mismatch at t={t} "
                       f"(d/dt primitive = {deriv:.6g}, coefficient = {want:.6g})")
            return


def validate(problem: SdeProblem) -> list[str]:
    """Collect invariant violations; an empty list means the problem is
    well-formed.  Reports, never raises."""
    out: list[str] = []
    noise = problem.noise
    if noise.kind in ("constant", "simple") and noise.s == 0.0:
        out.append("s must be nonzero (the equation would be deterministic)")
    if noise.kind == "simple":
        if noise.k == 1.0:
            out.append("k = 1 out of scope (multiplicative noise)")
        elif noise.k == 0.0:
            out.append("k = 0 must be declared as constant noise")
        if noise.k is not None and noise.k != int(noise.k) and problem.domain[0] < 0.0:
            out.append("non-integer k requires the domain x > 0")

    drift = problem.drift
    if drift.kind == "family":
        p = drift.params
        if drift.case == "A" and p.c is None and p.h is None:
            out.append("case A requires c or h(t)")
        if drift.case == "B":
            if p.c1 == 0.0:
                out.append("case B requires c1 != 0 (c1 = 0 degenerates to case A)")
            if p.c0 is None and p.a is None:
                out.append("case B requires c0 or a(t)")
            if p.c1 is None and p.b is None:
                out.append("case B requires c1 or b(t)")
        if drift.case == "C":
            if p.c1 == 0.0:
                out.append("case C requires c1 != 0 (c1 = 0 degenerates to case A)")
            if p.beta in (None, 0.0):
                out.append("case C requires beta != 0")
        for name, cf, prim in (("h/H", p.h, p.H), ("a/A", p.a, p.A), ("b/B", p.b, p.B)):
            if cf is not None and prim is not None:
                _check_primitive(name, time_fn(cf), time_fn(prim), out)

    samples = domain_samples(problem.domain, 4)
    for x in samples:
        try:
            value = problem.f(x, 0.2)
        except exprlang.ExprError as exc:
            out.append(f"drift not evaluable at x={x:.3g}: {exc}")
            break
        if not math.isfinite(value):
            out.append(f"drift not finite at x={x:.3g}")
            break
    if problem.autonomous:
        for x in samples:
            try:
                if abs(problem.f(x, 0.0) - problem.f(x, 0.83)) > 1e-10 * (
                        1.0 + abs(problem.f(x, 0.0))):
                    out.append("autonomous flag set but drift depends on t")
                    break
            except exprlang.ExprError:
                break
    if noise.kind == "opaque":
        if all(abs(noise.sigma(x, 0.0)) < 1e-14 for x in samples):
            out.append("noise is identically zero on the domain")
    return out


# ---------------------------------------------------------------------------
# JSON forms
#
# The external schema for a problem is
#   { "drift": {"family": "B", "params": {...}} | {"expr": "...",
#     "constants"?: {...}},
#     "noise": {"kind": "simple", "s": 1.0, "k": 2.0} |
#              {"kind": "constant", "s": 1.0},
#     "domain": [lo, hi] }           (null entries mean +-infinity)


def _timefn_to_json(obj: TimeFn | None) -> Any:
    if obj is None:
        return None
    if isinstance(obj, (int, float)):
        return float(obj)
    if isinstance(obj, (exprlang.Num, exprlang.Var, exprlang.Neg, exprlang.Bin,
                        exprlang.Call)):
        return exprlang.to_source(obj)
    raise ModelError("callable coefficients have no JSON form")


def _timefn_from_json(obj: Any) -> TimeFn | None:
    if obj is None:
        return None
    if isinstance(obj, (int, float)):
        return float(obj)
    return exprlang.parse(obj, allowed_names={"t"})


_PARAM_FLOATS = ("c", "c0", "c1", "beta")
_PARAM_FNS = ("h", "H", "a", "A", "b", "B")


def caseparams_to_json(p: CaseParams) -> dict:
    out: dict[str, Any] = {}
    for name in _PARAM_FLOATS:
        v = getattr(p, name)
        if v is not None:
            out[name] = float(v)
    for name in _PARAM_FNS:
        v = _timefn_to_json(getattr(p, name))
        if v is not None:
            out[name] = v
    return out


def caseparams_from_json(d: Mapping[str, Any]) -> CaseParams:
    kwargs: dict[str, Any] = {}
    for name in _PARAM_FLOATS:
        if name in d:
            kwargs[name] = float(d[name])
    for name in _PARAM_FNS:
        if name in d:
            kwargs[name] = _timefn_from_json(d[name])
    return CaseParams(**kwargs)


def noise_to_json(noise: NoiseSpec) -> dict:
    if noise.kind == "constant":
        return {"kind": "constant", "s": noise.s}
    if noise.kind == "simple":
        return {"kind": "simple", "s": noise.s, "k": noise.k}
    raise ModelError("opaque noise has no JSON form")


def noise_from_json(d: Mapping[str, Any]) -> NoiseSpec:
    kind = d.get("kind")
    if kind == "constant":
        return NoiseSpec.constant(float(d["s"]))
    if kind == "simple":
        return NoiseSpec.simple(float(d["s"]), float(d["k"]))
    raise ModelError(f"unknown noise kind {kind!r}")


def drift_to_json(drift: DriftSpec) -> dict:
    if drift.kind == "family":
        return {"family": drift.case, "params": caseparams_to_json(drift.params)}
    if drift.kind == "expr":
        out: dict[str, Any] = {"expr": exprlang.to_source(drift.expr)}
        if drift.constants:
            out["constants"] = {k: float(v) for k, v in sorted(drift.constants.items())}
        return out
    raise ModelError("opaque drift has no JSON form")


def drift_from_json(d: Mapping[str, Any]) -> DriftSpec:
    if "family" in d:
        case = d["family"]
        if case not in CASES:
            raise ModelError(f"unknown family {case!r}")
        return DriftSpec.family(case, caseparams_from_json(d.get("params", {})))
    if "expr" in d:
        return DriftSpec.expression(d["expr"], d.get("constants"))
    raise ModelError("drift must carry either 'family' or 'expr'")


def _bound_to_json(v: float) -> Any:
    return None if math.isinf(v) else v


def _bound_from_json(v: Any, default: float) -> float:
    return default if v is None else float(v)


def problem_to_json(problem: SdeProblem) -> dict:
    return {
        "drift": drift_to_json(problem.drift),
        "noise": noise_to_json(problem.noise),
        "domain": [_bound_to_json(problem.domain[0]),
                   _bound_to_json(problem.domain[1])],
    }


def problem_from_json(d: Mapping[str, Any]) -> SdeProblem:
    try:
        drift = drift_from_json(d["drift"])
        noise = noise_from_json(d["noise"])
    except KeyError as exc:
        raise ModelError(f"missing config field {exc}") from None
    domain = None
    if d.get("domain") is not None:
        raw = d["domain"]
        if len(raw) != 2:
            raise ModelError("domain must be [lo, hi]")
        lo_default, hi_default = default_domain(noise)
        domain = (_bound_from_json(raw[0], lo_default),
                  _bound_from_json(raw[1], hi_default))
    return make_problem(drift, noise, domain)


def wiener_to_json(path: WienerPath) -> dict:
    return {
        "times": [float(v) for v in path.times],
        "values": [float(v) for v in path.values],
        "seed": int(path.seed),
        "pathIndex": int(path.path_index),
        "level": int(path.level),
    }


def wiener_from_json(d: Mapping[str, Any]) -> WienerPath:
    return WienerPath(times=np.array(d["times"], dtype=float),
                      values=np.array(d["values"], dtype=float),
                      seed=int(d["seed"]), path_index=int(d["pathIndex"]),
                      level=int(d.get("level", 0)))


def solution_to_json(path: SolutionPath) -> dict:
    return {
        "times": [float(v) for v in path.times],
        "states": [None if math.isnan(v) else float(v) for v in path.states],
        "method": path.method,
        "truncatedAt": path.truncated_at,
    }


def solution_from_json(d: Mapping[str, Any]) -> SolutionPath:
    states = np.array([math.nan if v is None else float(v) for v in d["states"]])
    return SolutionPath(times=np.array(d["times"], dtype=float), states=states,
                        method=d["method"], truncated_at=d.get("truncatedAt"))


def symmetry_to_json(sym: Symmetry) -> dict:
    out: dict[str, Any] = {"r": float(sym.r), "case": sym.case, "label": sym.label,
                           "source": sym.source}
    if sym.params is not None:
        out["params"] = caseparams_to_json(sym.params)
    if sym.noise is not None:
        out["noise"] = noise_to_json(sym.noise)
    if sym.p_expr is not None:
        out["P"] = exprlang.to_source(sym.p_expr)
    return out


def classification_to_json(result: ClassificationResult) -> dict:
    return {
        "case": result.case if result.classified else "unclassified",
        "params": caseparams_to_json(result.params) if result.params else None,
        "residual": float(result.residual),
        "symmetry": symmetry_to_json(result.symmetry) if result.symmetry else None,
    }
