"""Fiber map along the mass-preserving dilation and projection onto the manifold.

For a state ``(u, v)`` the curve ``t -> (t^2 u(t.), t^2 v(t.))`` changes the
energy in closed form::

    f(t)  = t^4 A/2 + t^4 log(1/t) B/4 + t^4 C/4 - t^(4p-2) D/(2p)
    f'(t) = 2 t^3 A + t^3 (4 log(1/t) - 1) B/4 + t^3 C - (4p-2) t^(4p-3) D/(2p)

with ``A`` the kinetic energy, ``B`` the squared total mass, ``C`` the log
form and ``D`` the nonlinear term.  ``g(t) = f'(t) / t^3`` is strictly
decreasing for ``p >= 2`` whenever ``B`` or ``D`` is positive, so its unique
zero ``t0`` can be bracketed and bisected unconditionally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateFiberError, ProjectionError, ZeroStateError
from .functionals import Components, StatePair, components
from .grid import rescale
from .kernel import KernelTable

#: Smallest admissible projection scalar; below it the projection is reported as failed.
T0_FLOOR = 1e-8
#: Largest bracket end tried before giving up.
T0_CEIL = 1e8


@dataclass(frozen=True)
class FiberCoefficients:
    """The four scalars that determine ``f(t)`` exactly."""

    A: float
    B: float
    C: float
    D: float
    p: float
    beta: float = 0.0

    def value(self, t: float) -> float:
        return fiber_value(self, t)

    def derivative(self, t: float) -> float:
        return fiber_derivative(self, t)

    def reduced_derivative(self, t: float) -> float:
        """``g(t) = f'(t) / t^3``, strictly decreasing in ``t``."""
        _check_t(t)
        p = self.p
        return (2.0 * self.A + (4.0 * math.log(1.0 / t) - 1.0) * self.B / 4.0 + self.C
                - (4.0 * p - 2.0) / (2.0 * p) * t ** (4.0 * p - 6.0) * self.D)

    def reduced_slope(self, t: float) -> float:
        """``g'(t)``."""
        p = self.p
        return -self.B / t - (4.0 * p - 2.0) / (2.0 * p) * (4.0 * p - 6.0) * t ** (4.0 * p - 7.0) * self.D

    @property
    def scale(self) -> float:
        return max(self.A, self.D)


def _check_t(t: float) -> None:
    if not (t > 0.0 and math.isfinite(t)):
        raise ValueError(f"t must be positive and finite, got {t!r}")


def coefficients_from_components(c: Components, beta: float, p: float) -> FiberCoefficients:
    return FiberCoefficients(A=c.kinetic, B=c.mass * c.mass, C=c.V, D=c.psi, p=float(p), beta=float(beta))


def fiber_coeffs(s: StatePair, beta: float, p: float, kernel: KernelTable) -> FiberCoefficients:
    """Extract ``(A, B, C, D)`` from a nonzero state."""
    if s.is_zero():
        raise ZeroStateError("the zero state has no fiber")
    return coefficients_from_components(components(s, beta, p, kernel), beta, p)


def fiber_value(c: FiberCoefficients, t: float) -> float:
    """``f(t)``."""
    _check_t(t)
    t4 = t ** 4
    return (t4 * c.A / 2.0 + t4 * math.log(1.0 / t) * c.B / 4.0 + t4 * c.C / 4.0
            - t ** (4.0 * c.p - 2.0) * c.D / (2.0 * c.p))


def fiber_derivative(c: FiberCoefficients, t: float) -> float:
    """``f'(t)``; ``t f'(t)`` equals the manifold functional of the dilated state."""
    _check_t(t)
    t3 = t ** 3
    return (2.0 * t3 * c.A + t3 * (4.0 * math.log(1.0 / t) - 1.0) * c.B / 4.0 + t3 * c.C
            - (4.0 * c.p - 2.0) * t ** (4.0 * c.p - 3.0) * c.D / (2.0 * c.p))


def solve_t0(c: FiberCoefficients, rtol: float = 1e-15) -> float:
    """Unique positive zero of ``f'`` by bracket doubling, bisection and one Newton step."""
    if not c.D > 0.0:
        raise DegenerateFiberError(f"nonlinear coefficient D = {c.D!r} must be positive")
    if c.p < 2.0:
        raise ValueError(f"p must be >= 2, got {c.p!r}")
    g = c.reduced_derivative
    lo = hi = 1.0
    while g(lo) <= 0.0:
        lo *= 0.5
        if lo < T0_FLOOR:
            raise ProjectionError(f"fiber root below floor {T0_FLOOR:g} (coefficients {c})")
    while g(hi) >= 0.0:
        hi *= 2.0
        if hi > T0_CEIL:
            raise ProjectionError(f"fiber root above {T0_CEIL:g} (coefficients {c})")
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= rtol * hi:
            break
    t = 0.5 * (lo + hi)
    slope = c.reduced_slope(t)
    if slope < 0.0:
        t_newton = t - g(t) / slope
        if lo <= t_newton <= hi and abs(g(t_newton)) <= abs(g(t)):
            t = t_newton
    if t < T0_FLOOR:
        raise ProjectionError(f"fiber root {t:g} below floor {T0_FLOOR:g}")
    return t


def fiber_max(c: FiberCoefficients) -> tuple[float, float]:
    """``(t0, f(t0))``: the fiber maximiser and the exact maximal energy."""
    t0 = solve_t0(c)
    return t0, fiber_value(c, t0)


def project(s: StatePair, beta: float, p: float, kernel: KernelTable) -> tuple[float, StatePair]:
    """Project a nonzero state onto the manifold; returns ``(t0, dilated state)``."""
    c = fiber_coeffs(s, beta, p, kernel)
    t0 = solve_t0(c)
    return t0, StatePair(rescale(s.u, t0), rescale(s.v, t0))
