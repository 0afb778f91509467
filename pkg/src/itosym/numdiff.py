"""Fourth-order finite-difference stencils.

Single differentiation policy for the whole package: every numerical
derivative (expression partials, determining-equation residuals, Milstein's
sigma_x, ...) goes through these helpers, so stated tolerances always refer
to the same stencils.

Steps are scaled to the coordinate magnitude.  First derivatives use the
classic 4th-order central stencil with h = 1e-5 * max(1, |x|).  Pure second
derivatives use the 5-point 4th-order stencil with the wider h = 1e-3 *
max(1, |x|), and mixed second derivatives compose two first-derivative
stencils at h = 5e-4 * max(1, |x|) per axis; the wider steps balance the
eps/h^2 roundoff of second differences against the O(h^4) truncation.
"""

from __future__ import annotations

from typing import Callable, Sequence

H1_REL = 1e-5
H2_REL = 1e-3
HMIX_REL = 5e-4


def _scale(x: float, rel: float) -> float:
    return rel * max(1.0, abs(x))


def d1(fn: Callable[[float], float], x: float, h: float | None = None) -> float:
    """First derivative of a scalar function, 4th-order central difference.

    Grouped as paired differences so that a function constant along the
    axis differentiates to exactly 0.0.
    """
    if h is None:
        h = _scale(x, H1_REL)
    return (8 * (fn(x + h) - fn(x - h)) - (fn(x + 2 * h) - fn(x - 2 * h))) / (12 * h)


def d2(fn: Callable[[float], float], x: float, h: float | None = None) -> float:
    """Second derivative of a scalar function, 5-point 4th-order stencil
    (paired differences against f(x), exact zero for constants)."""
    if h is None:
        h = _scale(x, H2_REL)
    f0 = fn(x)
    near = (fn(x + h) - f0) + (fn(x - h) - f0)
    far = (fn(x + 2 * h) - f0) + (fn(x - 2 * h) - f0)
    return (16 * near - far) / (12 * h * h)


def _shifted(fn: Callable[..., float], args: Sequence[float], i: int) -> Callable[[float], float]:
    base = list(args)

    def g(v: float) -> float:
        pt = list(base)
        pt[i] = v
        return fn(*pt)

    return g


def partial1(fn: Callable[..., float], args: Sequence[float], i: int,
             h: float | None = None) -> float:
    """First partial derivative of fn(*args) along argument i."""
    return d1(_shifted(fn, args, i), args[i], h)


def partial2(fn: Callable[..., float], args: Sequence[float], i: int,
             h: float | None = None) -> float:
    """Pure second partial derivative of fn(*args) along argument i."""
    return d2(_shifted(fn, args, i), args[i], h)


def partial_mixed(fn: Callable[..., float], args: Sequence[float], i: int, j: int,
                  h: float | None = None) -> float:
    """Mixed second partial d^2 fn / d args[i] d args[j] (i != j)."""
    hi = h if h is not None else _scale(args[i], HMIX_REL)
    hj = h if h is not None else _scale(args[j], HMIX_REL)

    def inner(v: float) -> float:
        pt = list(args)
        pt[i] = v
        return partial1(fn, pt, j, hj)

    return d1(inner, args[i], hi)
