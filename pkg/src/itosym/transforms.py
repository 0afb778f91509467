"""Change-of-variable machinery.

Three maps live here:

* the standard-form reduction y = g(x) = integral dx/sigma that turns any
  equation with declared noise into one with unit noise, together with its
  inverse xi and the transformed drift F(y) = [f/sigma - sigma'/2](xi(y));
* the Kozlov map y = integral_{x0}^{x} dx'/phi(x',t;w) attached to a
  symmetry, with closed forms for the recognized families and adaptive
  quadrature as a fallback;
* the general change of variables x~ = g(x) acting on an equation
  (f~ = f g_x + sigma^2 g_xx / 2, sigma~ = sigma g_x) and on a symmetry
  (phi~ = g_x phi), both composed with the inverse map.

All indefinite integrals are anchored: the anchor x0 defaults to 1.0 on
x > 0 domains and 0.0 otherwise, and is always explicit in the formulas.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad as _scipy_quad
from scipy.optimize import brentq

from . import model, numdiff
from .exprlang import ExprError
from .model import NoiseSpec, SdeProblem, Symmetry

QUAD_ABS_TOL = 1e-10
QUAD_LIMIT = 2 ** 15


class TransformError(Exception):
    pass


class TransformDomainError(TransformError):
    """A map was evaluated outside the image of its domain."""


class SingularMapError(TransformError):
    """phi vanishes inside a Kozlov integration range."""


class YDependenceError(TransformError):
    """Reduced coefficients disagree between probes: not a symmetry."""


class NonInvertibleMapError(TransformError):
    pass


def quad(fn: Callable[[float], float], a: float, b: float) -> float:
    """Adaptive (Gauss-Kronrod) quadrature to absolute tolerance 1e-10,
    at most 2^15 subintervals."""
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        value, _ = _scipy_quad(fn, a, b, epsabs=QUAD_ABS_TOL, epsrel=1e-10,
                               limit=QUAD_LIMIT)
    return value


def default_anchor(domain: tuple[float, float]) -> float:
    return 1.0 if domain[0] >= 0.0 else 0.0


# ---------------------------------------------------------------------------
# standard form


@dataclass(frozen=True, eq=False)
class StandardForm:
    """Unit-noise image of a problem: y = g(x), x = xi(y), dy = F(y,t)dt + dw."""

    g: Callable[[float], float]
    xi: Callable[[float], float]
    F: Callable[..., float]
    source: SdeProblem


def standard_form(problem: SdeProblem) -> StandardForm:
    """Reduce to unit noise.

    Simple noise: g(x) = x^(1-k) / (s (1-k)), xi(y) = (s (1-k) y)^(1/(1-k)).
    Constant noise: g(x) = x/s, xi(y) = s y.
    F(y,t) = [f/sigma - sigma_x/2](xi(y), t).
    """
    noise = problem.noise
    if noise.kind == "constant":
        s = noise.s

        def g(x: float) -> float:
            return x / s

        def xi(y: float) -> float:
            return s * y

    elif noise.kind == "simple":
        s, k = noise.s, noise.k
        e1 = 1.0 - k

        def g(x: float) -> float:
            return x ** e1 / (s * e1)

        def xi(y: float) -> float:
            base = s * e1 * y
            if base <= 0.0:
                raise TransformDomainError(
                    f"y = {y:.6g} is outside the image of the domain "
                    f"(s(1-k)y = {base:.6g} must be positive)")
            return base ** (1.0 / e1)

    else:
        raise TransformError("standard form needs constant or simple noise")

    def F(y: float, t: float = 0.0) -> float:
        x = xi(y)
        return problem.f(x, t) / noise.sigma(x, t) - 0.5 * noise.sigma_x(x, t)

    return StandardForm(g=g, xi=xi, F=F, source=problem)


def transformed_drift_at(sf: StandardForm, y: float, t: float = 0.0) -> float:
    return sf.F(y, t)


# ---------------------------------------------------------------------------
# Kozlov map


@dataclass(frozen=True, eq=False)
class KozlovMap:
    """Anchored symmetry-adapted coordinate y(x,t,w) with its inverse."""

    forward: Callable[[float, float, float], float]
    inverse: Callable[[float, float, float], float]
    anchor: float
    symmetry: Symmetry


def _phi_domain(symmetry: Symmetry) -> tuple[float, float]:
    if symmetry.noise is not None:
        return model.default_domain(symmetry.noise)
    return (-math.inf, math.inf)


def _quadrature_map(symmetry: Symmetry, x0: float) -> KozlovMap:
    domain = _phi_domain(symmetry)

    def forward(x: float, t: float, w: float) -> float:
        lo, hi = min(x0, x), max(x0, x)
        if lo < hi:
            samples = np.linspace(lo, hi, 65)
            vals = [symmetry.phi(float(v), t, w) for v in samples]
            if any(abs(v) < 1e-12 for v in vals) or (min(vals) < 0.0 < max(vals)):
                raise SingularMapError(
                    f"phi vanishes between x0 = {x0:.6g} and x = {x:.6g}")
        return quad(lambda v: 1.0 / symmetry.phi(v, t, w), x0, x)

    def inverse(y: float, t: float, w: float) -> float:
        def defect(x: float) -> float:
            return forward(x, t, w) - y

        # Expand a bracket around the anchor.  The map is monotone on the
        # phi != 0 component containing x0 and diverges at a zero crossing,
        # so a side backs off (rather than fails) when it steps across one.
        lo, hi = domain
        a = b = x0
        fa = fb = defect(x0)
        step_a = step_b = 0.25 * max(1.0, abs(x0))
        floor = 1e-9 * max(1.0, abs(x0))
        for _ in range(200):
            if fa * fb <= 0.0 and a < b:
                return brentq(defect, a, b, xtol=1e-13, rtol=4e-15)
            moved = False
            if step_a > floor:
                cand = a - step_a
                if math.isfinite(lo):
                    cand = max(cand, lo + 1e-12)
                if cand < a:
                    try:
                        fa_new = defect(cand)
                        a, fa = cand, fa_new
                        step_a *= 2.0
                        moved = True
                    except (SingularMapError, TransformDomainError, ExprError,
                            ValueError, OverflowError):
                        step_a *= 0.25
                        moved = True
                else:
                    step_a = 0.0
            if step_b > floor:
                cand = b + step_b
                if math.isfinite(hi):
                    cand = min(cand, hi - 1e-12)
                if cand > b:
                    try:
                        fb_new = defect(cand)
                        b, fb = cand, fb_new
                        step_b *= 2.0
                        moved = True
                    except (SingularMapError, TransformDomainError, ExprError,
                            ValueError, OverflowError):
                        step_b *= 0.25
                        moved = True
                else:
                    step_b = 0.0
            if not moved:
                raise TransformDomainError(
                    f"y = {y:.6g} is not reachable from the anchor x0 = {x0:.6g}")
        raise TransformDomainError(f"could not bracket y = {y:.6g}")

    return KozlovMap(forward=forward, inverse=inverse, anchor=x0, symmetry=symmetry)


def kozlov_map(symmetry: Symmetry, x0: float | None = None) -> KozlovMap:
    """Build y = integral_{x0}^{x} dx'/phi with its inverse.

    Closed forms cover the recognized constant-noise and power-law families
    (cases B and C); everything else (notably case A with arbitrary P) goes
    through adaptive quadrature plus root-finding.
    """
    if x0 is None:
        x0 = default_anchor(_phi_domain(symmetry))
    p = symmetry.params
    noise = symmetry.noise

    if symmetry.source in ("table1", "table2") and symmetry.case == "B":
        B = p.B_fn()

        def forward(x: float, t: float, w: float) -> float:
            return math.exp(-B(t)) * (x - x0)

        def inverse(y: float, t: float, w: float) -> float:
            return x0 + math.exp(B(t)) * y

        return KozlovMap(forward, inverse, x0, symmetry)

    if symmetry.source in ("table1", "table2") and symmetry.case == "C":
        beta, s = float(p.beta), noise.s
        A = p.A_fn()

        def forward(x: float, t: float, w: float) -> float:
            u = s * w + A(t)
            return math.exp(beta * u) * (math.exp(-beta * x0) - math.exp(-beta * x)) / beta

        def inverse(y: float, t: float, w: float) -> float:
            u = s * w + A(t)
            val = math.exp(-beta * x0) - beta * y * math.exp(-beta * u)
            if val <= 0.0:
                raise TransformDomainError(
                    f"y = {y:.6g} is outside the image of the Kozlov map")
            return -math.log(val) / beta

        return KozlovMap(forward, inverse, x0, symmetry)

    if symmetry.source == "table4" and symmetry.case == "B":
        s, k = noise.s, noise.k
        e1 = 1.0 - k
        c1 = float(p.c1)

        def forward(x: float, t: float, w: float) -> float:
            return math.exp(-e1 * c1 * t) * (x ** e1 - x0 ** e1) / e1

        def inverse(y: float, t: float, w: float) -> float:
            base = x0 ** e1 + e1 * y * math.exp(e1 * c1 * t)
            if base <= 0.0:
                raise TransformDomainError(
                    f"y = {y:.6g} is outside the image of the Kozlov map")
            return base ** (1.0 / e1)

        return KozlovMap(forward, inverse, x0, symmetry)

    if symmetry.source == "table4" and symmetry.case == "C":
        s, k = noise.s, noise.k
        e1 = 1.0 - k
        beta, c0 = float(p.beta), float(p.c0)

        def forward(x: float, t: float, w: float) -> float:
            u = s * w + c0 * t
            return (math.exp(beta * e1 * u)
                    * (math.exp(-beta * x0 ** e1) - math.exp(-beta * x ** e1))
                    / (beta * e1))

        def inverse(y: float, t: float, w: float) -> float:
            u = s * w + c0 * t
            val = math.exp(-beta * x0 ** e1) - beta * e1 * y * math.exp(-beta * e1 * u)
            if val <= 0.0:
                raise TransformDomainError(
                    f"y = {y:.6g} is outside the image of the Kozlov map")
            base = -math.log(val) / beta
            if base <= 0.0:
                raise TransformDomainError(
                    f"y = {y:.6g} maps outside the x > 0 domain")
            return base ** (1.0 / e1)

        return KozlovMap(forward, inverse, x0, symmetry)

    return _quadrature_map(symmetry, x0)


# ---------------------------------------------------------------------------
# reduced coefficients (the Kozlov-transformed equation dy = F(t)dt + S(t)dw)


@dataclass(frozen=True, eq=False)
class ReducedCoefficients:
    """Time-only coefficients of the Kozlov-reduced equation.

    F(t) = f/phi - sigma sigma_x / (2 phi) - integral phi_t/phi^2 dx and
    S(t) = sigma/phi, evaluated along the anchored map.  (For w-free phi
    the middle term equals the sigma^2 phi_x / (2 phi^2) form, by the
    second determining equation; the sigma sigma_x form is the one that is
    y-independent for random symmetries as well.)  S is a genuine (x-free)
    noise coefficient only for w-free symmetries; for random symmetries it
    retains x/w dependence, which is what the Ito-type criterion detects.
    """

    F: Callable[[float], float]
    S: Callable[[float], float]
    probes: tuple[float, float]


def reduced_drift_at(problem: SdeProblem, symmetry: Symmetry, x: float,
                      t: float, w: float, x0: float) -> float:
    phi = symmetry.phi

    def phi_t(v: float) -> float:
        return numdiff.partial1(phi, (v, t, w), 1)

    tail = quad(lambda v: phi_t(v) / phi(v, t, w) ** 2, x0, x)
    sig = problem.sigma(x, t)
    sig_x = problem.sigma_x(x, t)
    ph = phi(x, t, w)
    return problem.f(x, t) / ph - 0.5 * sig * sig_x / ph - tail


def reduced_coefficients(problem: SdeProblem, symmetry: Symmetry, t: float,
                         y_probes: tuple[float, float] | None = None,
                         w: float = 0.0,
                         anchor: float | None = None) -> ReducedCoefficients:
    """Evaluate F(t), S(t) and assert their y-independence at two probes.

    Disagreement beyond 1e-5 signals that the input is not a symmetry of the
    problem and raises YDependenceError.
    """
    if anchor is None:
        anchor = default_anchor(problem.domain)
    kmap = kozlov_map(symmetry, anchor)
    if y_probes is None:
        samples = model.domain_samples(problem.domain, 5)
        x_probes = (samples[1], samples[3])
    else:
        x_probes = (kmap.inverse(y_probes[0], t, w), kmap.inverse(y_probes[1], t, w))

    def F_at(tt: float) -> float:
        f1 = reduced_drift_at(problem, symmetry, x_probes[0], tt, w, anchor)
        f2 = reduced_drift_at(problem, symmetry, x_probes[1], tt, w, anchor)
        if abs(f1 - f2) > 1e-5 * (1.0 + abs(f1)):
            raise YDependenceError(
                f"reduced drift differs between probes ({f1:.8g} vs {f2:.8g}); "
                "the input is not a symmetry of this equation")
        return f1

    def S_at(tt: float) -> float:
        x = x_probes[0]
        return problem.sigma(x, tt) / symmetry.phi(x, tt, w)

    value = F_at(t)  # validate at the requested time
    del value
    return ReducedCoefficients(F=F_at, S=S_at, probes=x_probes)


def reduced_noise_spread(problem: SdeProblem, symmetry: Symmetry, t: float,
                         w: float = 0.0) -> float:
    """Max spread of sigma/phi across domain probes; ~0 iff phi is w-free."""
    xs = model.domain_samples(problem.domain, 5)
    vals = [problem.sigma(x, t) / symmetry.phi(x, t, w) for x in xs]
    return max(vals) - min(vals)


# ---------------------------------------------------------------------------
# general change of variables (conservation of symmetries)


@dataclass(frozen=True, eq=False)
class GMap:
    """A monotone change of variables x~ = g(x).

    Supply fwd_x / fwd_xx when the derivatives are known in closed form;
    the stencil fallback is accurate enough for the map itself but its
    noise gets amplified when the transformed coefficients are
    differentiated again (residual checks), so analytic derivatives are
    strongly preferred there.
    """

    fwd: Callable[[float], float]
    inv: Callable[[float], float] | None = None
    fwd_x: Callable[[float], float] | None = None
    fwd_xx: Callable[[float], float] | None = None
    label: str = ""

    @staticmethod
    def affine(alpha: float, offset: float = 0.0) -> "GMap":
        if alpha == 0.0:
            raise NonInvertibleMapError("affine map needs a nonzero slope")
        return GMap(fwd=lambda x: alpha * x + offset,
                    inv=lambda y: (y - offset) / alpha,
                    fwd_x=lambda x: alpha,
                    fwd_xx=lambda x: 0.0,
                    label=f"{alpha:g}*x{offset:+g}")

    def g_x(self, x: float) -> float:
        if self.fwd_x is not None:
            return self.fwd_x(x)
        return numdiff.d1(self.fwd, x)

    def g_xx(self, x: float) -> float:
        if self.fwd_xx is not None:
            return self.fwd_xx(x)
        return numdiff.d2(self.fwd, x)


def _map_inverse(gmap: GMap, domain: tuple[float, float]) -> Callable[[float], float]:
    if gmap.inv is not None:
        return gmap.inv
    lo, hi = domain

    def inv(y: float) -> float:
        def defect(x: float) -> float:
            return gmap.fwd(x) - y

        a = b = default_anchor(domain)
        fa = fb = defect(a)
        step = 0.5
        for _ in range(80):
            if fa * fb <= 0.0 and a < b:
                return brentq(defect, a, b, xtol=1e-13, rtol=4e-15)
            a = max(a - step, lo + 1e-12 if math.isfinite(lo) else a - step)
            b = min(b + step, hi - 1e-12 if math.isfinite(hi) else b + step)
            fa, fb = defect(a), defect(b)
            step *= 2.0
        raise NonInvertibleMapError(f"could not invert map at {y:.6g}")

    return inv


def _image_domain(gmap: GMap, domain: tuple[float, float]) -> tuple[float, float]:
    lo, hi = domain
    samples = model.domain_samples(domain, 3)
    increasing = gmap.g_x(samples[1]) > 0.0

    def edge(v: float, sign: float) -> float:
        if math.isinf(v):
            return sign * math.inf if increasing else -sign * math.inf
        return gmap.fwd(v)

    a, b = edge(lo, -1.0), edge(hi, +1.0)
    return (min(a, b), max(a, b))


def transform_sde(problem: SdeProblem, gmap: GMap) -> SdeProblem:
    """Rewrite the equation in x~ = g(x): f~ = f g_x + sigma^2 g_xx / 2 and
    sigma~ = sigma g_x, composed with the inverse map."""
    for x in model.domain_samples(problem.domain, 4):
        if abs(gmap.g_x(x)) < 1e-12:
            raise NonInvertibleMapError(f"g_x vanishes at x = {x:.6g}")
    inv = _map_inverse(gmap, problem.domain)

    def new_f(xt: float, t: float) -> float:
        x = inv(xt)
        return (problem.f(x, t) * gmap.g_x(x)
                + 0.5 * problem.sigma(x, t) ** 2 * gmap.g_xx(x))

    def new_sigma(xt: float, t: float) -> float:
        x = inv(xt)
        return problem.sigma(x, t) * gmap.g_x(x)

    new_domain = _image_domain(gmap, problem.domain)
    return model.make_problem(model.DriftSpec.opaque(new_f),
                              NoiseSpec.opaque(new_sigma), new_domain)


def transform_symmetry(symmetry: Symmetry, gmap: GMap,
                       noise: NoiseSpec | None = None,
                       domain: tuple[float, float] | None = None) -> Symmetry:
    """Push a symmetry through x~ = g(x): phi~ = (g_x phi) o inverse.

    Standard symmetries (r = 0) are preserved exactly.  Proper W-symmetries
    are preserved only when the noise coefficient stays spatially constant;
    a non-affine map (g_xx != 0) breaks that, so the call warns and the
    transformed field will generally fail the determining equations.
    """
    if noise is None:
        noise = symmetry.noise
    if domain is None:
        domain = model.default_domain(noise) if noise is not None else (-math.inf, math.inf)
    if symmetry.r != 0.0:
        samples = model.domain_samples(domain, 4)
        nonaffine = any(abs(gmap.g_xx(x)) > 1e-8 for x in samples)
        spatially_varying = noise is not None and any(
            abs(noise.sigma_x(x)) > 1e-10 for x in samples)
        if nonaffine or spatially_varying:
            warnings.warn(
                "W-symmetries (r != 0) are preserved under a change of variables "
                "only if the noise coefficient satisfies sigma_x = 0; this map "
                "does not keep it constant", stacklevel=2)
    inv = _map_inverse(gmap, domain)

    def new_phi(xt: float, t: float, w: float) -> float:
        x = inv(xt)
        return gmap.g_x(x) * symmetry.phi(x, t, w)

    label = f"({gmap.label or 'g'}_x * phi) o inverse" if symmetry.label else ""
    return Symmetry(phi=new_phi, r=symmetry.r, case=symmetry.case, params=None,
                    noise=None, label=label or symmetry.label, source=None)
