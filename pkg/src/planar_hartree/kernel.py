"""Free-space convolution with the planar logarithmic kernel.

The potential ``phi(x) = int log|x - y| rho(y) dy`` is evaluated as a linear
(non-circular) discrete convolution: the density is zero padded onto a
``2n x 2n`` lattice, multiplied in Fourier space by the transform of the
tabulated kernel ``log|d|`` and cropped back to ``n x n``.  Every displacement
``d = (a, b) h`` with ``|a|, |b| < n`` appears exactly once in the padded
table, so no wrap-around contaminates the far field.

The kernel is singular at ``d = 0``.  Two choices for the origin entry are
available:

``"lattice"`` (default)
    ``log h - log(Gamma(1/4)^2 / (2 sqrt(pi)))``.  This is the value that makes
    the punctured lattice sum of ``log|d|`` against a smooth density agree
    with the integral up to ``O(h^4)``; it follows from the Kronecker limit
    formula for the square lattice.
``"cell_average"``
    Mean of ``log|z|`` over one grid cell centred at the origin,
    ``log(h / sqrt 2) - 3/2 + pi/4``.  Simpler to motivate but only
    ``O(h^2)`` accurate, which visibly pollutes Pohozaev diagnostics at
    ``n = 128``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import GridMismatchError
from .grid import LAMBDA_MIN, Field, GridSpec, check_same_grid

#: ``log(Gamma(1/4)^2 / (2 sqrt(pi)))``, the square-lattice correction constant.
LATTICE_LOG_CONSTANT = math.log(math.gamma(0.25) ** 2 / (2.0 * math.sqrt(math.pi)))

#: Mean of ``log|z|`` over the unit square ``[-1/2, 1/2]^2``.
UNIT_CELL_LOG_MEAN = math.log(1.0 / math.sqrt(2.0)) - 1.5 + math.pi / 4.0

ORIGIN_RULES = ("lattice", "cell_average")


def cell_average_log(h: float) -> float:
    """Mean of ``log|z|`` over the square cell of side ``h`` centred at 0."""
    return math.log(h) + UNIT_CELL_LOG_MEAN


def lattice_origin_log(h: float) -> float:
    """Origin weight giving fourth-order accuracy of the punctured lattice sum."""
    return math.log(h) - LATTICE_LOG_CONSTANT


def _displacements(spec: GridSpec) -> np.ndarray:
    """``|d|`` on the padded ``2n x 2n`` FFT layout (index m -> m or m - 2n)."""
    n = spec.n
    m = np.arange(2 * n)
    m = np.where(m < n, m, m - 2 * n) * spec.h
    return np.hypot(m[:, None], m[None, :])


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Tabulated ``log|d|`` on the padded displacement lattice plus its transform."""

    spec: GridSpec
    samples: np.ndarray
    origin_rule: str
    spectrum: np.ndarray = field(repr=False)

    @property
    def origin_value(self) -> float:
        return float(self.samples[0, 0])

    def entry(self, a: int, b: int) -> float:
        """Kernel value at displacement ``(a h, b h)``."""
        n2 = 2 * self.spec.n
        return float(self.samples[a % n2, b % n2])


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=16)
def build_kernel(spec: GridSpec, origin: str = "lattice") -> KernelTable:
    """Tabulate the log kernel for ``spec``; tables are cached and read-only."""
    if origin not in ORIGIN_RULES:
        raise ValueError(f"origin rule must be one of {ORIGIN_RULES}, got {origin!r}")
    R = _displacements(spec)
    R[0, 0] = 1.0
    K = np.log(R)
    K[0, 0] = lattice_origin_log(spec.h) if origin == "lattice" else cell_average_log(spec.h)
    return KernelTable(spec, _freeze(K), origin, _freeze(np.fft.rfft2(K)))


@dataclass(frozen=True, eq=False)
class Density:
    """Nonnegative source ``rho`` (normally ``u^2 + v^2``) on a grid."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64, copy=True).reshape(self.spec.n, self.spec.n)
        if not np.all(np.isfinite(vals)):
            raise ValueError("density must be finite")
        if np.any(vals < 0.0):
            raise ValueError("density must be nonnegative")
        object.__setattr__(self, "values", _freeze(vals))

    def mass(self) -> float:
        return float(self.spec.cell_area * np.sum(self.values))


def density(u: Field, v: Field | None = None) -> Density:
    """``rho = u^2 + v^2`` (``v`` optional)."""
    rho = u.values ** 2
    if v is not None:
        check_same_grid(u, v)
        rho = rho + v.values ** 2
    return Density(u.spec, rho)


def _raise_mismatch(a: GridSpec, b: GridSpec) -> None:
    raise GridMismatchError(f"grid mismatch: {a} vs {b}")


def _convolve(values: np.ndarray, spec: GridSpec, spectrum: np.ndarray) -> np.ndarray:
    n = spec.n
    padded = np.zeros((2 * n, 2 * n))
    padded[:n, :n] = values
    out = np.fft.irfft2(np.fft.rfft2(padded) * spectrum, s=(2 * n, 2 * n))
    return spec.cell_area * out[:n, :n]


def potential_values(rho: np.ndarray, kernel: KernelTable) -> np.ndarray:
    """Array-level convolution ``h^2 * sum_j K(x_i - x_j) rho_j`` (no validation)."""
    return _convolve(rho, kernel.spec, kernel.spectrum)


def log_potential(rho: Density, kernel: KernelTable) -> Field:
    """Newtonian potential ``phi = log|.| * rho`` sampled on the grid."""
    if rho.spec != kernel.spec:
        _raise_mismatch(rho.spec, kernel.spec)
    return Field(rho.spec, potential_values(rho.values, kernel))


def V_form(u: Field, v: Field, kernel: KernelTable) -> float:
    """Quadratic form ``int int log|x - y| rho(x) rho(y)`` with ``rho = u^2 + v^2``."""
    spec = check_same_grid(u, v)
    if spec != kernel.spec:
        _raise_mismatch(spec, kernel.spec)
    rho = u.values ** 2 + v.values ** 2
    phi = potential_values(rho, kernel)
    return float(spec.cell_area * np.sum(phi * rho))


@lru_cache(maxsize=16)
def _split_spectra(spec: GridSpec, origin: str, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Transforms of ``log(lam + |d|)`` and ``log(1 + lam/|d|)``.

    The second table is defined as the first minus the log kernel, so the
    decomposition ``log r = log(lam + r) - log(1 + lam / r)`` holds entry by
    entry, including the regularised origin.
    """
    K = build_kernel(spec, origin).samples
    R = _displacements(spec)
    K1 = np.log(lam + R)
    K2 = K1 - K
    return _freeze(np.fft.rfft2(K1)), _freeze(np.fft.rfft2(K2))


def V_split(u: Field, v: Field, lam: float, kernel: KernelTable) -> tuple[float, float]:
    """Return ``(V1, V2)`` with ``V = V1 - V2`` for the weight parameter ``lam``."""
    if not lam > LAMBDA_MIN:
        raise ValueError(f"lambda must exceed e^(1/4) = {LAMBDA_MIN:.6f}, got {lam!r}")
    spec = check_same_grid(u, v)
    if spec != kernel.spec:
        _raise_mismatch(spec, kernel.spec)
    S1, S2 = _split_spectra(spec, kernel.origin_rule, float(lam))
    rho = u.values ** 2 + v.values ** 2
    V1 = spec.cell_area * np.sum(_convolve(rho, spec, S1) * rho)
    V2 = spec.cell_area * np.sum(_convolve(rho, spec, S2) * rho)
    return float(V1), float(V2)
