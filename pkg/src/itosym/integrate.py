"""Wiener-path generation, exact pathwise integrators and reference schemes.

Exact solutions for the constant-noise families (solving dx = f dt + s dw
for a *given* realization of w):

    A:  x(t) = x0 + int a dtau + s (w(t) - w(t0))
    B:  y = e^(-B(t)) x with B(t0) = 0 solves dy = a e^(-B) dt + s e^(-B) dw;
        the dw integral is an Ito (left-point) sum over the path increments
    C:  y = -(1/beta) e^(-beta (x - s w - A(t))) solves
        dy = e^(beta (s w + A)) b dt; inverting the anchored relation gives
        x(t) = s w(t) + A(t) - (1/beta) log[e^(-beta x0) - beta I(t)],
        I(t) = int_{t0}^{t} e^(beta(s w + A)) b dtau (left-point sum); the
        log argument crossing zero is the finite-time blow-up of the SDE.

Power-law noise is integrated by mapping through the standard-form change of
variables and back.  dt-integrals of time-only integrands use per-step
Simpson quadrature; dt-integrals with w-dependent integrands use left-point
sums, the only choice consistent with the Ito calculus.

Paths are seeded per (seed, pathIndex, level) through numpy's PCG64, and
grid refinement draws Brownian-bridge midpoints at the next level, so every
scheme at every resolution sees the same underlying Brownian motion.
Blow-ups are data, not failures: truncated paths carry the first exit index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import classifier, numdiff, transforms
from .exprlang import ExprError
from .model import (CaseParams, ClassificationResult, NoiseSpec, SdeProblem,
                    SolutionPath, WienerPath)

DEGENERATE_ERROR = 1e-8


class IntegrateError(Exception):
    pass


# ---------------------------------------------------------------------------
# paths


def _rng(seed: int, path_index: int, level: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([int(seed), int(path_index), int(level)])))


def wiener_path(seed: int, path_index: int, t0: float = 0.0, t1: float = 1.0,
                n: int = 100) -> WienerPath:
    """Sample w on a uniform n-step grid; w(t0) = 0, increments N(0, dt)."""
    if n < 1 or not t1 > t0:
        raise IntegrateError("need n >= 1 and t1 > t0")
    times = np.linspace(t0, t1, n + 1)
    dt = (t1 - t0) / n
    increments = _rng(seed, path_index, 0).standard_normal(n) * math.sqrt(dt)
    values = np.concatenate(([0.0], np.cumsum(increments)))
    return WienerPath(times=times, values=values, seed=seed,
                      path_index=path_index, level=0)


def zero_path(t0: float = 0.0, t1: float = 1.0, n: int = 100) -> WienerPath:
    """The w = 0 path (for deterministic reductions)."""
    times = np.linspace(t0, t1, n + 1)
    return WienerPath(times=times, values=np.zeros(n + 1), seed=0,
                      path_index=0, level=0)


def refine(path: WienerPath) -> WienerPath:
    """Double the resolution by Brownian-bridge conditioning.

    Coarse points are preserved bitwise; midpoints are drawn at level + 1 of
    the same (seed, pathIndex) stream as N(mean of endpoints, dt/4).
    """
    steps = np.diff(path.times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
        raise IntegrateError("refine needs a uniform grid")
    n = path.n_steps
    level = path.level + 1
    z = _rng(path.seed, path.path_index, level).standard_normal(n)
    mids = 0.5 * (path.values[:-1] + path.values[1:]) + 0.5 * math.sqrt(path.dt) * z
    times = np.empty(2 * n + 1)
    values = np.empty(2 * n + 1)
    times[::2] = path.times
    times[1::2] = 0.5 * (path.times[:-1] + path.times[1:])
    values[::2] = path.values
    values[1::2] = mids
    return WienerPath(times=times, values=values, seed=path.seed,
                      path_index=path.path_index, level=level)


# ---------------------------------------------------------------------------
# exact integrators (constant noise)


def _simpson_step(fn: Callable[[float], float], a: float, b: float) -> float:
    return (b - a) / 6.0 * (fn(a) + 4.0 * fn(0.5 * (a + b)) + fn(b))


def _truncate(times: np.ndarray, states: np.ndarray, idx: int,
              method: str) -> SolutionPath:
    states[idx:] = math.nan
    return SolutionPath(times=times, states=states, method=method,
                        truncated_at=idx)


def exact_case_a(params: CaseParams, noise: NoiseSpec, x0: float,
                 path: WienerPath) -> SolutionPath:
    """x(t) = x0 + int h dtau + s (w - w(t0)); Simpson for the dtau term."""
    a = params.h_fn()
    s = noise.s
    times, w = path.times, path.values
    states = np.empty_like(w)
    states[0] = x0
    integral = 0.0
    for i in range(path.n_steps):
        integral += _simpson_step(a, float(times[i]), float(times[i + 1]))
        states[i + 1] = x0 + integral + s * (w[i + 1] - w[0])
    return SolutionPath(times=times, states=states, method="ExactA")


def exact_case_b(params: CaseParams, noise: NoiseSpec, x0: float,
                 path: WienerPath) -> SolutionPath:
    """Linear-drift solution through y = e^(-B) x with B(t0) = 0."""
    a = params.a_fn()
    B_raw = params.B_fn()
    b0 = B_raw(float(path.times[0]))
    B = lambda t: B_raw(t) - b0
    s = noise.s
    times, w = path.times, path.values
    states = np.empty_like(w)
    states[0] = x0
    y = float(x0)
    for i in range(path.n_steps):
        ti, ti1 = float(times[i]), float(times[i + 1])
        y += _simpson_step(lambda tau: a(tau) * math.exp(-B(tau)), ti, ti1)
        y += s * math.exp(-B(ti)) * (w[i + 1] - w[i])
        xi1 = math.exp(B(ti1)) * y
        if not math.isfinite(xi1):
            return _truncate(times, states, i + 1, "ExactB")
        states[i + 1] = xi1
    return SolutionPath(times=times, states=states, method="ExactB")


def exact_case_c(params: CaseParams, noise: NoiseSpec, x0: float,
                 path: WienerPath) -> SolutionPath:
    """Exponential-drift solution; truncates at the log-argument zero
    crossing (finite-time explosion)."""
    beta = float(params.beta)
    b = params.b_fn()
    A_raw = params.A_fn()
    a0 = A_raw(float(path.times[0]))
    A = lambda t: A_raw(t) - a0
    s = noise.s
    times, w = path.times, path.values
    states = np.empty_like(w)
    states[0] = x0
    q0 = math.exp(-beta * (x0 - s * w[0]))
    integral = 0.0
    for i in range(path.n_steps):
        ti, ti1 = float(times[i]), float(times[i + 1])
        integral += math.exp(beta * (s * w[i] + A(ti))) * b(ti) * (ti1 - ti)
        q = q0 - beta * integral
        if q <= 0.0 or not math.isfinite(q):
            return _truncate(times, states, i + 1, "ExactC")
        states[i + 1] = -math.log(q) / beta + s * w[i + 1] + A(ti1)
    return SolutionPath(times=times, states=states, method="ExactC")


# ---------------------------------------------------------------------------
# reference schemes


def euler_maruyama(problem: SdeProblem, x0: float,
                   path: WienerPath) -> SolutionPath:
    """x_{n+1} = x_n + f dt + sigma dw."""
    times, w = path.times, path.values
    states = np.empty_like(w)
    states[0] = x0
    x = float(x0)
    for i in range(path.n_steps):
        ti = float(times[i])
        dt = float(times[i + 1] - times[i])
        dw = float(w[i + 1] - w[i])
        try:
            x = float(x + problem.f(x, ti) * dt + problem.sigma(x, ti) * dw)
        except (ExprError, ValueError, TypeError, OverflowError):
            return _truncate(times, states, i + 1, "EulerMaruyama")
        if not (math.isfinite(x) and problem.in_domain(x)):
            return _truncate(times, states, i + 1, "EulerMaruyama")
        states[i + 1] = x
    return SolutionPath(times=times, states=states, method="EulerMaruyama")


def milstein(problem: SdeProblem, x0: float, path: WienerPath) -> SolutionPath:
    """Euler-Maruyama plus the sigma sigma_x (dw^2 - dt)/2 correction;
    sigma_x by the package stencil.  Coincides with EM for constant noise."""
    times, w = path.times, path.values
    states = np.empty_like(w)
    states[0] = x0
    x = float(x0)
    for i in range(path.n_steps):
        ti = float(times[i])
        dt = float(times[i + 1] - times[i])
        dw = float(w[i + 1] - w[i])
        try:
            sig = problem.sigma(x, ti)
            sig_x = numdiff.d1(lambda v: problem.sigma(v, ti), x)
            x = float(x + problem.f(x, ti) * dt + sig * dw
                      + 0.5 * sig * sig_x * (dw * dw - dt))
        except (ExprError, ValueError, TypeError, OverflowError):
            return _truncate(times, states, i + 1, "Milstein")
        if not (math.isfinite(x) and problem.in_domain(x)):
            return _truncate(times, states, i + 1, "Milstein")
        states[i + 1] = x
    return SolutionPath(times=times, states=states, method="Milstein")


# ---------------------------------------------------------------------------
# power-law noise via the standard form


def exact_simple_noise(problem: SdeProblem, x0: float, path: WienerPath,
                       result: ClassificationResult | None = None) -> SolutionPath:
    """Map x0 into the unit-noise image, integrate there exactly, map back.

    The image drift constants follow from F(y) = [f/sigma - sigma_x/2](xi):
    case A c' = c/s; case B (c0', c1') = (c0/s, (1-k) c1); case C
    (c0', c1', beta') = (c0/s, c1/s, beta s (1-k)).  The pullback truncates
    where s(1-k)y leaves the positive half-line (x escaping to 0 or inf).
    """
    if problem.noise.kind != "simple":
        raise IntegrateError("exact_simple_noise needs power-law noise")
    if result is None:
        result = classifier.classify(problem)
    if not result.classified:
        raise IntegrateError("equation is not in a symmetric family")
    s, k = problem.noise.s, problem.noise.k
    e1 = 1.0 - k
    sf = transforms.standard_form(problem)
    y0 = sf.g(x0)
    unit = NoiseSpec.constant(1.0)
    p = result.params
    if result.case == "A":
        image = exact_case_a(CaseParams(c=float(p.c) / s), unit, y0, path)
    elif result.case == "B":
        image = exact_case_b(CaseParams(c0=float(p.c0) / s, c1=e1 * float(p.c1)),
                             unit, y0, path)
    else:
        image = exact_case_c(CaseParams(c0=float(p.c0) / s, c1=float(p.c1) / s,
                                        beta=float(p.beta) * s * e1),
                             unit, y0, path)
    states = np.empty_like(image.states)
    states[0] = x0
    limit = image.truncated_at if image.truncated_at is not None else len(states)
    for i in range(1, len(states)):
        if i >= limit:
            return _truncate(path.times, states, limit, image.method)
        try:
            states[i] = sf.xi(float(image.states[i]))
        except transforms.TransformDomainError:
            return _truncate(path.times, states, i, image.method)
    return SolutionPath(times=path.times, states=states, method=image.method)


def exact_solver(problem: SdeProblem,
                 result: ClassificationResult | None = None
                 ) -> Callable[[SdeProblem, float, WienerPath], SolutionPath]:
    """Uniform (problem, x0, path) -> SolutionPath wrapper over the exact
    integrators, dispatching on noise kind and detected case."""
    if result is None:
        result = classifier.classify(problem)
    if not result.classified:
        raise IntegrateError("equation is not in a symmetric family")
    if problem.noise.kind == "simple":
        def solve(prob: SdeProblem, x0: float, path: WienerPath) -> SolutionPath:
            return exact_simple_noise(prob, x0, path, result)
        return solve
    table = {"A": exact_case_a, "B": exact_case_b, "C": exact_case_c}
    integrator = table[result.case]

    def solve(prob: SdeProblem, x0: float, path: WienerPath) -> SolutionPath:
        return integrator(result.params, prob.noise, x0, path)

    return solve


# ---------------------------------------------------------------------------
# diagnostics


def ito_defect(problem: SdeProblem, sol: SolutionPath, path: WienerPath) -> float:
    """x(T) - x(t0) - sum f dt - sum sigma dw along the grid (left-point
    Ito sums); tends to 0 as dt -> 0 iff the path solves the equation."""
    if sol.truncated_at is not None:
        raise IntegrateError("defect undefined on a truncated path")
    times, w, x = path.times, path.values, sol.states
    acc = 0.0
    for i in range(len(times) - 1):
        dt = float(times[i + 1] - times[i])
        acc += problem.f(float(x[i]), float(times[i])) * dt
        acc += problem.sigma(float(x[i]), float(times[i])) * float(w[i + 1] - w[i])
    return float(x[-1] - x[0]) - acc


@dataclass(frozen=True)
class ErrorReport:
    endpoint_abs_error: float
    max_abs_error: float
    dt: float
    n_paths: int


def error_report(pairs: Sequence[tuple[SolutionPath, SolutionPath]],
                 dt: float) -> ErrorReport:
    """Mean endpoint error and worst gridpoint error over (reference, test)
    pairs; truncated pairs must be filtered by the caller."""
    if not pairs:
        raise IntegrateError("no surviving paths to compare")
    ends = [abs(a.endpoint - b.endpoint) for a, b in pairs]
    worst = max(float(np.max(np.abs(a.states - b.states))) for a, b in pairs)
    return ErrorReport(endpoint_abs_error=float(np.mean(ends)),
                       max_abs_error=worst, dt=dt, n_paths=len(pairs))


@dataclass(frozen=True)
class ConvergenceRow:
    dt: float
    mean_endpoint_error: float
    n_paths: int


@dataclass(frozen=True, eq=False)
class ConvergenceStudy:
    rows: tuple[ConvergenceRow, ...]
    slope: float
    degenerate: bool


def convergence_study(problem: SdeProblem,
                      exact: Callable[[SdeProblem, float, WienerPath], SolutionPath],
                      scheme: Callable[[SdeProblem, float, WienerPath], SolutionPath],
                      levels: int = 5, n_paths: int = 100, seed: int = 0,
                      x0: float = 1.0, t0: float = 0.0, t1: float = 1.0,
                      n_base: int = 16, ref_extra: int = 2) -> ConvergenceStudy:
    """Strong-error table over nested grids plus the fitted log-log slope.

    Grids are nested by Brownian-bridge refinement; the reference is the
    exact integrator run ref_extra levels beyond the finest scheme grid.
    Paths where the reference (or a level's scheme run) truncates are
    dropped from that mean.  If errors underflow 1e-8 the fit is flagged
    degenerate and the slope is NaN.
    """
    if levels < 4:
        raise IntegrateError("need at least 4 nested levels")
    errs: list[list[float]] = [[] for _ in range(levels)]
    for p in range(n_paths):
        chain = [wiener_path(seed, p, t0, t1, n_base)]
        for _ in range(levels - 1 + ref_extra):
            chain.append(refine(chain[-1]))
        ref_sol = exact(problem, x0, chain[-1])
        if not ref_sol.ok:
            continue
        for lvl in range(levels):
            sol = scheme(problem, x0, chain[lvl])
            if sol.ok:
                errs[lvl].append(abs(sol.endpoint - ref_sol.endpoint))
    rows = []
    for lvl in range(levels):
        dt = (t1 - t0) / (n_base * 2 ** lvl)
        used = len(errs[lvl])
        mean = float(np.mean(errs[lvl])) if used else math.nan
        rows.append(ConvergenceRow(dt=dt, mean_endpoint_error=mean, n_paths=used))
    finite = [(r.dt, r.mean_endpoint_error) for r in rows
              if r.n_paths > 0 and math.isfinite(r.mean_endpoint_error)]
    degenerate = (len(finite) < 2
                  or any(e < DEGENERATE_ERROR for _, e in finite))
    if degenerate:
        slope = math.nan
    else:
        dts, means = zip(*finite)
        slope = float(np.polyfit(np.log(dts), np.log(means), 1)[0])
    return ConvergenceStudy(rows=tuple(rows), slope=slope, degenerate=degenerate)
