"""Truncated uniform grid on the plane, single-field norms and the rescale map.

The plane is replaced by the square ``[-L, L]^2`` sampled at ``n`` cell
centres per axis, ``x_i = -L + (i + 1/2) h`` with ``h = 2L/n``.  Integrals are
plain midpoint sums ``h^2 * sum(...)``; derivatives are spectral (Fourier
multiplier ``|k|^2``), consistent with the periodic extension used by the FFT
convolution in :mod:`planar_hartree.kernel`.

Fields are immutable: :class:`Field` stores a read-only ``(n, n)`` float64
array and every operation returns a new object.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import GridMismatchError

#: Lower bound (exclusive) for the weight parameter of the log-weighted norm.
LAMBDA_MIN = math.exp(0.25)


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Square grid ``[-L, L]^2`` with ``n`` cell-centred nodes per axis.

    Attributes
    ----------
    L : float
        Half width of the computational square.
    n : int
        Nodes per axis; a power of two, at least 16.
    """

    L: float
    n: int

    def __post_init__(self) -> None:
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValueError(f"n must be an integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "L", float(self.L))
        if not math.isfinite(self.L) or self.L <= 0.0:
            raise ValueError(f"half width L must be positive and finite, got {self.L!r}")
        if not _is_power_of_two(self.n):
            raise ValueError(f"n must be a power of two, got {self.n}")
        if self.n < 16:
            raise ValueError(f"n must be at least 16, got {self.n}")

    @property
    def h(self) -> float:
        """Grid spacing ``2L/n``."""
        return 2.0 * self.L / self.n

    @property
    def cell_area(self) -> float:
        return self.h * self.h

    @cached_property
    def x(self) -> np.ndarray:
        """1-D node coordinates (cell centres)."""
        x = -self.L + (np.arange(self.n) + 0.5) * self.h
        x.setflags(write=False)
        return x

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """``(X, Y)`` coordinate arrays, ``indexing='ij'`` (row index = x)."""
        X, Y = np.meshgrid(self.x, self.x, indexing="ij")
        X.setflags(write=False)
        Y.setflags(write=False)
        return X, Y

    @cached_property
    def radius(self) -> np.ndarray:
        """``|x|`` at every node; never zero thanks to cell centring."""
        X, Y = self.mesh
        r = np.hypot(X, Y)
        r.setflags(write=False)
        return r

    @cached_property
    def k2(self) -> np.ndarray:
        """Squared angular wavenumber ``|k|^2`` on the FFT layout."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        k2 = k[:, None] ** 2 + k[None, :] ** 2
        k2.setflags(write=False)
        return k2

    def zeros(self) -> "Field":
        return Field(self, np.zeros((self.n, self.n)))

    def sample(self, func) -> "Field":
        """Evaluate ``func(X, Y)`` on the nodes and wrap it as a field."""
        X, Y = self.mesh
        return Field(self, np.broadcast_to(func(X, Y), (self.n, self.n)))


def make_grid(L: float, n: int) -> GridSpec:
    """Build a :class:`GridSpec`, validating ``L > 0`` and ``n`` a power of two >= 16."""
    return GridSpec(L, n)


class Field:
    """A real scalar function sampled on a :class:`GridSpec`.

    ``values`` may be given either as an ``(n, n)`` array or as a flat
    row-major vector of length ``n^2``.  The stored array is a private
    read-only float64 copy.
    """

    __slots__ = ("spec", "values")

    def __init__(self, spec: GridSpec, values) -> None:
        arr = np.array(values, dtype=np.float64, copy=True)
        n = spec.n
        if arr.ndim == 1:
            if arr.size != n * n:
                raise ValueError(f"expected {n * n} values, got {arr.size}")
            arr = arr.reshape(n, n)
        if arr.shape != (n, n):
            raise ValueError(f"expected shape {(n, n)}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "spec", spec)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("Field is immutable")

    def __reduce__(self):
        return (Field, (self.spec, np.array(self.values)))

    def __repr__(self) -> str:
        return f"Field(n={self.spec.n}, L={self.spec.L}, max|u|={np.abs(self.values).max():.3g})"

    @property
    def flat(self) -> np.ndarray:
        """Row-major flat view of the values."""
        return self.values.reshape(-1)

    def with_values(self, values) -> "Field":
        return Field(self.spec, values)

    def __mul__(self, a: float) -> "Field":
        return Field(self.spec, self.values * float(a))

    __rmul__ = __mul__

    def __add__(self, other: "Field") -> "Field":
        check_same_grid(self, other)
        return Field(self.spec, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        check_same_grid(self, other)
        return Field(self.spec, self.values - other.values)

    def positive_part(self) -> "Field":
        return Field(self.spec, np.maximum(self.values, 0.0))


def check_same_grid(*fields: Field) -> GridSpec:
    spec = fields[0].spec
    for f in fields[1:]:
        if f.spec != spec:
            raise GridMismatchError(f"grid mismatch: {spec} vs {f.spec}")
    return spec


# ---------------------------------------------------------------------------
# Norms and quadrature
# ---------------------------------------------------------------------------

def integrate(spec: GridSpec, values: np.ndarray) -> float:
    """Midpoint quadrature ``h^2 * sum(values)``."""
    return float(spec.cell_area * np.sum(values))


def l2_norm_sq(u: Field) -> float:
    """``||u||_2^2`` by midpoint quadrature."""
    return integrate(u.spec, u.values * u.values)


def grad_norm_sq(u: Field) -> float:
    """``||grad u||_2^2`` via the Fourier multiplier ``|k|^2`` (Parseval)."""
    spec = u.spec
    uh = np.fft.fft2(u.values)
    power = uh.real ** 2 + uh.imag ** 2
    return float(spec.cell_area * np.sum(spec.k2 * power) / spec.n ** 2)


def laplacian(u: Field) -> np.ndarray:
    """Spectral Laplacian of ``u`` as a plain array."""
    return np.fft.ifft2(-u.spec.k2 * np.fft.fft2(u.values)).real


def lp_norm_pow(u: Field, s: float) -> float:
    """``h^2 * sum |u|^s`` for an exponent ``s >= 2``."""
    if not s >= 2.0:
        raise ValueError(f"exponent s must be >= 2, got {s!r}")
    return integrate(u.spec, np.abs(u.values) ** s)


def weighted_norm_sq(u: Field, lam: float) -> float:
    """Log-weighted norm ``h^2 * sum log(lam + |x_i|) u(x_i)^2``; requires ``lam > e^{1/4}``."""
    if not lam > LAMBDA_MIN:
        raise ValueError(f"lambda must exceed e^(1/4) = {LAMBDA_MIN:.6f}, got {lam!r}")
    return integrate(u.spec, np.log(lam + u.spec.radius) * u.values ** 2)


@dataclass(frozen=True)
class NormCache:
    """Cached single-field norms (all nonnegative)."""

    l2_sq: float
    grad_sq: float
    l2p: float
    weighted_sq: float

    @classmethod
    def of(cls, u: Field, p: float = 2.0, lam: float = 2.0) -> "NormCache":
        return cls(
            l2_sq=l2_norm_sq(u),
            grad_sq=grad_norm_sq(u),
            l2p=lp_norm_pow(u, 2.0 * p),
            weighted_sq=weighted_norm_sq(u, lam),
        )


# ---------------------------------------------------------------------------
# Rescale u -> t^2 u(t x)
# ---------------------------------------------------------------------------

def interpolation_matrix(spec: GridSpec, t: float) -> np.ndarray:
    """1-D linear interpolation weights for sampling ``u(t * x_i)``.

    Row ``i`` holds the weights of the source nodes; sample points outside the
    node range interpolate towards an implicit zero neighbour, i.e. the field
    is extended by zero beyond the grid.
    """
    n = spec.n
    pos = (t * spec.x + spec.L) / spec.h - 0.5  # fractional source index
    i0 = np.floor(pos).astype(np.int64)
    frac = pos - i0
    W = np.zeros((n, n))
    rows = np.arange(n)
    for offset, weight in ((0, 1.0 - frac), (1, frac)):
        idx = i0 + offset
        ok = (idx >= 0) & (idx < n)
        W[rows[ok], idx[ok]] += weight[ok]
    return W


def rescale(u: Field, t: float) -> Field:
    """Return ``w(x) = t^2 * u~(t x)`` with ``u~`` the bilinear, zero-extended interpolant.

    ``t = 1`` returns a field with values identical to ``u``.
    """
    t = float(t)
    if not (math.isfinite(t) and t > 0.0):
        raise ValueError(f"scale factor t must be positive, got {t!r}")
    if t == 1.0:
        return Field(u.spec, u.values)
    W = interpolation_matrix(u.spec, t)
    return Field(u.spec, (t * t) * (W @ u.values @ W.T))
