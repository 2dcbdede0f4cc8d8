"""Scalar functionals of a state pair and the L2 gradient of the energy.

With ``A = ||grad u||^2 + ||grad v||^2`` (kinetic), ``M = ||u||^2 + ||v||^2``,
``V`` the log-kernel form and ``psi`` the coupled nonlinear term, the
quantities reported for a state are::

    I      = A/2 + V/4 - psi/(2p)
    J      = 2A - M^2/4 + V - (2 - 1/p) psi
    P      = V + M^2/4 - psi/p
    nehari = A + V - psi

``J`` is evaluated from its own formula, so ``J = 2 nehari - P`` holds up to
rounding and serves as a consistency check.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NonFiniteEnergyError
from .grid import Field, GridSpec, NormCache, check_same_grid, grad_norm_sq, l2_norm_sq, laplacian
from .kernel import KernelTable, _raise_mismatch, potential_values

RECORD_KEYS = ("I", "J", "P", "psi", "V", "nehari", "kinetic", "mass_sq_sum", "beta", "p")


@dataclass(frozen=True, eq=False)
class StatePair:
    """The pair ``(u, v)`` on one grid."""

    u: Field
    v: Field

    def __post_init__(self) -> None:
        check_same_grid(self.u, self.v)

    @property
    def spec(self) -> GridSpec:
        return self.u.spec

    @classmethod
    def from_arrays(cls, spec: GridSpec, u, v) -> "StatePair":
        return cls(Field(spec, u), Field(spec, v))

    def norms(self, p: float = 2.0, lam: float = 2.0) -> tuple[NormCache, NormCache]:
        """Per-component :class:`NormCache` (recomputed on each call)."""
        return NormCache.of(self.u, p, lam), NormCache.of(self.v, p, lam)

    def swapped(self) -> "StatePair":
        return StatePair(self.v, self.u)

    def scaled(self, a: float) -> "StatePair":
        return StatePair(self.u * a, self.v * a)

    def is_zero(self) -> bool:
        return not (np.any(self.u.values) or np.any(self.v.values))

    def l2_norms(self) -> tuple[float, float]:
        return math.sqrt(l2_norm_sq(self.u)), math.sqrt(l2_norm_sq(self.v))


def _check_params(beta: float, p: float) -> None:
    if not beta >= 0.0:
        raise ValueError(f"beta must be >= 0, got {beta!r}")
    if not p >= 2.0:
        raise ValueError(f"p must be >= 2, got {p!r}")


def _check_kernel(s: StatePair, kernel: KernelTable) -> None:
    if s.spec != kernel.spec:
        _raise_mismatch(s.spec, kernel.spec)


def psi_beta(s: StatePair, beta: float, p: float) -> float:
    """``||u||_2p^2p + ||v||_2p^2p + 2 beta int |u v|^p``."""
    _check_params(beta, p)
    au, av = np.abs(s.u.values), np.abs(s.v.values)
    integrand = au ** (2 * p) + av ** (2 * p)
    if beta != 0.0:
        integrand = integrand + 2.0 * beta * (au * av) ** p
    return float(s.spec.cell_area * np.sum(integrand))


@dataclass(frozen=True)
class Components:
    """Raw ingredients shared by the report, the fiber map and the gradient."""

    kinetic: float
    mass: float
    V: float
    psi: float
    phi: np.ndarray


def components(s: StatePair, beta: float, p: float, kernel: KernelTable) -> Components:
    """Evaluate kinetic energy, mass, ``V``, ``psi`` and the potential in one pass."""
    _check_params(beta, p)
    _check_kernel(s, kernel)
    spec = s.spec
    u, v = s.u.values, s.v.values
    rho = u * u + v * v
    phi = potential_values(rho, kernel)
    return Components(
        kinetic=grad_norm_sq(s.u) + grad_norm_sq(s.v),
        mass=float(spec.cell_area * np.sum(rho)),
        V=float(spec.cell_area * np.sum(phi * rho)),
        psi=psi_beta(s, beta, p),
        phi=phi,
    )


@dataclass(frozen=True)
class EnergyReport:
    """Energy-type diagnostics of one state."""

    I: float
    J: float
    P: float
    psi: float
    V: float
    nehari: float
    kinetic: float
    mass_sq_sum: float
    beta: float
    p: float

    @property
    def scale(self) -> float:
        """Characteristic magnitude ``max(kinetic, psi)`` for relative residuals."""
        return max(self.kinetic, self.psi)

    def as_record(self) -> dict[str, float]:
        return {k: float(v) for k, v in asdict(self).items()}

    @classmethod
    def from_components(cls, c: Components, beta: float, p: float) -> "EnergyReport":
        A, B, V, psi = c.kinetic, c.mass * c.mass, c.V, c.psi
        nehari = A + V - psi
        P = V + B / 4.0 - psi / p
        rep = cls(
            I=A / 2.0 + V / 4.0 - psi / (2.0 * p),
            J=2.0 * A - B / 4.0 + V - (2.0 - 1.0 / p) * psi,
            P=P,
            psi=psi,
            V=V,
            nehari=nehari,
            kinetic=A,
            mass_sq_sum=c.mass,
            beta=float(beta),
            p=float(p),
        )
        if not all(math.isfinite(x) for x in asdict(rep).values()):
            raise NonFiniteEnergyError(f"non-finite energy report: {rep}")
        return rep


def energy_report(s: StatePair, beta: float, p: float, kernel: KernelTable) -> EnergyReport:
    """Compute :class:`EnergyReport` for the state ``s``."""
    return EnergyReport.from_components(components(s, beta, p, kernel), beta, p)


def nonlinear_term(a: np.ndarray, b: np.ndarray, beta: float, p: float) -> np.ndarray:
    """``|a|^(2p-2) a + beta |b|^p |a|^(p-2) a`` with the value 0 where ``a = 0``."""
    aa = np.abs(a)
    sgn = np.sign(a)
    out = sgn * aa ** (2 * p - 1)
    if beta != 0.0:
        out = out + beta * np.abs(b) ** p * sgn * aa ** (p - 1)
    return out


def gradient(s: StatePair, beta: float, p: float, kernel: KernelTable) -> tuple[Field, Field]:
    """L2 gradient ``(g_u, g_v)`` of the energy ``I``."""
    c = components(s, beta, p, kernel)
    return gradient_from_components(s, c, beta, p)


def gradient_from_components(s: StatePair, c: Components, beta: float, p: float) -> tuple[Field, Field]:
    u, v = s.u.values, s.v.values
    gu = -laplacian(s.u) + c.phi * u - nonlinear_term(u, v, beta, p)
    gv = -laplacian(s.v) + c.phi * v - nonlinear_term(v, u, beta, p)
    return Field(s.spec, gu), Field(s.spec, gv)


def pairing(a: tuple[Field, Field], b: tuple[Field, Field]) -> float:
    """L2 inner product of two field pairs."""
    spec = check_same_grid(a[0], a[1], b[0], b[1])
    return float(spec.cell_area * (np.sum(a[0].values * b[0].values) + np.sum(a[1].values * b[1].values)))
