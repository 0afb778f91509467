"""Numerical verification oracle for symmetry candidates.

A vector field phi(x,t;w) d/dx + r w d/dw is a symmetry of
dx = f dt + sigma dw exactly when both determining residuals vanish:

    R1 = phi_t + f phi_x - phi f_x + (1/2) Delta(phi)
    R2 = phi_w + sigma phi_x - phi sigma_x - r sigma

with the Ito Laplacian Delta(phi) = phi_ww + 2 sigma phi_xw + sigma^2 phi_xx.
On solutions of R2 = 0 the second-order R1 collapses to the first-order form

    phi_t + F phi_x - F_x phi + r sigma sigma_x,   F := f - sigma sigma_x / 2.

Everything is evaluated with the package-wide finite-difference stencils, so
the tolerances quoted in the tests refer to this oracle, not to exact
derivatives.  Probe points default to x in [0.5, 3], t in [0, 1],
w in [-1, 1], drawn from a seeded generator.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

import numpy as np

from . import numdiff
from .model import NoiseSpec, SdeProblem, Symmetry

Point = tuple[float, float, float]


class DeterminingError(Exception):
    pass


def probe_points(n: int, seed: int = 0,
                 x_range: tuple[float, float] = (0.5, 3.0),
                 t_range: tuple[float, float] = (0.0, 1.0),
                 w_range: tuple[float, float] = (-1.0, 1.0)) -> list[Point]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))
    xs = rng.uniform(*x_range, size=n)
    ts = rng.uniform(*t_range, size=n)
    ws = rng.uniform(*w_range, size=n)
    return [(float(x), float(t), float(w)) for x, t, w in zip(xs, ts, ws)]


def ito_laplacian(phi: Callable[[float, float, float], float],
                  sigma: Callable[[float, float], float], point: Point) -> float:
    """Delta(phi) = phi_ww + 2 sigma phi_xw + sigma^2 phi_xx at (x,t,w)."""
    x, t, w = point
    sig = sigma(x, t)
    phi_ww = numdiff.partial2(phi, point, 2)
    phi_xw = numdiff.partial_mixed(phi, point, 0, 2)
    phi_xx = numdiff.partial2(phi, point, 0)
    return phi_ww + 2.0 * sig * phi_xw + sig * sig * phi_xx


def residuals(problem: SdeProblem, symmetry: Symmetry,
              point: Point) -> tuple[float, float]:
    """Both determining residuals (R1, R2) at a point."""
    x, t, w = point
    phi = symmetry.phi
    sig = problem.sigma(x, t)
    sig_x = problem.sigma_x(x, t)
    phi_val = phi(x, t, w)
    phi_x = numdiff.partial1(phi, point, 0)
    phi_t = numdiff.partial1(phi, point, 1)
    phi_w = numdiff.partial1(phi, point, 2)
    f_x = numdiff.d1(lambda v: problem.f(v, t), x)
    lap = ito_laplacian(phi, problem.sigma, point)
    r1 = phi_t + problem.f(x, t) * phi_x - phi_val * f_x + 0.5 * lap
    r2 = phi_w + sig * phi_x - phi_val * sig_x - symmetry.r * sig
    return r1, r2


def max_residuals(problem: SdeProblem, symmetry: Symmetry,
                  points: Sequence[Point]) -> tuple[float, float]:
    r1s, r2s = zip(*(residuals(problem, symmetry, pt) for pt in points))
    return max(abs(v) for v in r1s), max(abs(v) for v in r2s)


def first_order_residual(problem: SdeProblem, symmetry: Symmetry, point: Point,
                         r2_tol: float = 1e-6) -> float:
    """Residual of the first-order form; equivalent to R1 only where R2 = 0.

    If |R2| exceeds r2_tol at the point, the equivalence precondition fails
    and a warning is emitted (the value is still returned).
    """
    x, t, w = point
    _, r2 = residuals(problem, symmetry, point)
    if abs(r2) > r2_tol:
        warnings.warn(f"first-order form evaluated where |R2| = {abs(r2):.3g} "
                      f"> {r2_tol:g}; not equivalent to R1 here", stacklevel=2)
    phi = symmetry.phi
    sig = problem.sigma(x, t)
    sig_x = problem.sigma_x(x, t)
    sig_xx = problem.noise.sigma_xx(x, t)
    fmod = problem.f(x, t) - 0.5 * sig * sig_x
    f_x = numdiff.d1(lambda v: problem.f(v, t), x)
    fmod_x = f_x - 0.5 * (sig_x * sig_x + sig * sig_xx)
    phi_x = numdiff.partial1(phi, point, 0)
    phi_t = numdiff.partial1(phi, point, 1)
    return phi_t + fmod * phi_x - fmod_x * phi(x, t, w) + symmetry.r * sig * sig_x


def w_obstruction(noise: NoiseSpec, r: float, x: float) -> float:
    """Coefficient k s^2 r x^(2k-1) whose required vanishing forces r = 0
    for simple non-constant noise (no proper W-symmetries)."""
    if noise.kind != "simple":
        raise DeterminingError("the W-obstruction is defined for simple noise")
    k, s = noise.k, noise.s
    return k * s * s * r * x ** (2.0 * k - 1.0)


def appendix_d_family(std_symmetry: Symmetry,
                      noise: NoiseSpec) -> Callable[[float], Symmetry]:
    """W-symmetry candidates phi_r = phi_std - r x/(k-1) with Y_r including
    r w d/dw; the characteristic solution of the inhomogeneous first-order
    determining equation for simple noise."""
    if noise.kind != "simple":
        raise DeterminingError("candidate family is defined for simple noise")
    k = noise.k

    def make(r: float) -> Symmetry:
        def phi(x: float, t: float, w: float) -> float:
            return std_symmetry.phi(x, t, w) - r / (k - 1.0) * x

        return Symmetry(phi=phi, r=r, case=std_symmetry.case, params=std_symmetry.params,
                        noise=noise, label="appendix-D candidate", source=None)

    return make


def fit_w_coefficient(problem: SdeProblem, family: Callable[[float], Symmetry],
                      points: Sequence[Point]) -> float:
    """Least-squares r minimizing the mean square of (R1, R2) over the
    family; the residuals are affine in r, so the fit is closed-form."""
    num = 0.0
    den = 0.0
    s0, s1 = family(0.0), family(1.0)
    for pt in points:
        base = residuals(problem, s0, pt)
        bumped = residuals(problem, s1, pt)
        for a, b in zip(base, (bumped[0] - base[0], bumped[1] - base[1])):
            num += a * b
            den += b * b
    if den == 0.0:
        raise DeterminingError("degenerate family: residuals do not depend on r")
    return -num / den


def remark16_criterion(problem: SdeProblem, symmetry: Symmetry,
                       point: Point) -> float:
    """Ito-type criterion for the Kozlov reduction under a standard symmetry.

    With gamma := d/dw (1/phi), the reduction yields an Ito equation iff

        sigma gamma_t + sigma_t gamma
            - f gamma_w - (sigma gamma_ww + sigma^2 gamma_xw)/2 = 0.

    Returns that residual; it vanishes identically for w-free phi and is
    nonzero for the random case-C symmetries (proportional to
    beta^2 s^2 b(t) exp(beta(s w + A(t)))).
    """
    if symmetry.r != 0.0:
        raise DeterminingError("the Ito-type criterion applies to standard "
                               "symmetries (r = 0) only")
    x, t, w = point
    phi = symmetry.phi
    if abs(phi(x, t, w)) < 1e-12:
        raise DeterminingError(f"phi vanishes at {point}")

    def gamma(xx: float, tt: float, ww: float) -> float:
        return numdiff.partial1(lambda *args: 1.0 / phi(*args), (xx, tt, ww), 2)

    pt = (x, t, w)
    sig = problem.sigma(x, t)
    sig_t = problem.noise.sigma_t(x, t)
    g_val = gamma(*pt)
    g_t = numdiff.partial1(gamma, pt, 1)
    g_w = numdiff.partial1(gamma, pt, 2)
    g_ww = numdiff.partial2(gamma, pt, 2)
    g_xw = numdiff.partial_mixed(gamma, pt, 0, 2)
    return (sig * g_t + sig_t * g_val - problem.f(x, t) * g_w
            - 0.5 * (sig * g_ww + sig * sig * g_xw))
