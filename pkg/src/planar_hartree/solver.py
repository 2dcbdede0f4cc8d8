"""Projected gradient descent for ground states on the Nehari-Pohozaev manifold.

The minimised quantity is the fiber maximum ``F(u, v) = max_t f(t) = f(t0)``,
which equals the energy of the projection of ``(u, v)`` onto the manifold.
Every iteration

1. projects the current iterate (records ``t0``) and materialises the
   dilated fields,
2. evaluates the gradient of ``F`` (by the envelope theorem this is the
   energy gradient at the dilated state, with an extra ``log(1/t0) M u``
   term that vanishes when ``t0 = 1``),
3. smooths it with the ``(1 - Laplacian)^{-1}`` preconditioner (H1 metric;
   ``"l2"`` uses the raw gradient),
4. backtracks until the Armijo condition holds for ``F`` of the trial
   iterate, truncating both components to their positive part.

Iteration stops when the relative size of the accepted update falls below
``tol_grad``; convergence is then certified by the residuals of the
manifold and Pohozaev functionals.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import NonFiniteEnergyError, StateCollapseError, ZeroStateError
from .fiber import FiberCoefficients, coefficients_from_components, fiber_value, solve_t0
from .functionals import (
    Components,
    EnergyReport,
    StatePair,
    components,
    energy_report,
    gradient_from_components,
    nonlinear_term,
)
from .grid import Field, GridSpec, laplacian, l2_norm_sq, rescale
from .kernel import KernelTable, build_kernel

INIT_KINDS = ("gaussian_pair", "gaussian_semitrivial", "symmetric", "from_file")
PRECONDITIONERS = ("h1", "l2")


class Classification(str, enum.Enum):
    SEMITRIVIAL = "Semitrivial"
    SYMMETRIC = "Symmetric"
    VECTORIAL = "Vectorial"

    def __str__(self) -> str:
        return self.value

    @property
    def both_nonzero(self) -> bool:
        """True for solutions with two nontrivial components."""
        return self is not Classification.SEMITRIVIAL


@dataclass(frozen=True)
class SolverOptions:
    """Descent parameters.  All tolerances are relative."""

    max_iters: int = 2000
    step0: float = 0.1
    backtrack_factor: float = 0.5
    armijo_c: float = 1e-4
    step_growth: float = 1.5
    max_backtracks: int = 40
    tol_grad: float = 1e-5
    tol_constraint: float = 1e-4
    seed: int = 0
    init_kind: str = "gaussian_pair"
    init_path: str = ""
    preconditioner: str = "h1"

    def __post_init__(self) -> None:
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters!r}")
        for name in ("step0", "tol_grad", "tol_constraint"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError(f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor!r}")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError(f"armijo_c must lie in (0, 1), got {self.armijo_c!r}")
        if not self.step_growth >= 1.0:
            raise ValueError(f"step_growth must be >= 1, got {self.step_growth!r}")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be >= 1")
        if self.init_kind not in INIT_KINDS:
            raise ValueError(f"init_kind must be one of {INIT_KINDS}, got {self.init_kind!r}")
        if self.init_kind == "from_file" and not self.init_path:
            raise ValueError("init_kind 'from_file' requires init_path")
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}, got {self.preconditioner!r}")

    def with_(self, **changes) -> "SolverOptions":
        return replace(self, **changes)

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


@dataclass
class Solution:
    state: StatePair
    report: EnergyReport
    t0_history: list[float]
    energy_history: list[float]
    iterations: int
    converged: bool
    classification: Classification
    stop_reason: str = ""
    final_t0: float = 1.0
    el_residual: float = field(default=math.nan)

    @property
    def c_beta_estimate(self) -> float:
        return self.report.I

    @property
    def l2_norms(self) -> tuple[float, float]:
        return self.state.l2_norms()


# ---------------------------------------------------------------------------
# Initial states
# ---------------------------------------------------------------------------

def _bump(spec: GridSpec, cx: float, cy: float, width: float = 1.0) -> np.ndarray:
    X, Y = spec.mesh
    return np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * width * width))


def initial_state(spec: GridSpec, opts: SolverOptions, perturbation: float = 1e-2) -> StatePair:
    """Starting point for the descent (nonzero and nonnegative by construction)."""
    rng = np.random.default_rng(opts.seed)
    noise = lambda: 1.0 + perturbation * rng.uniform(-1.0, 1.0, size=(spec.n, spec.n))  # noqa: E731
    kind = opts.init_kind
    if kind == "gaussian_pair":
        u = _bump(spec, 0.25, 0.0) * noise()
        v = _bump(spec, -0.25, 0.0) * noise()
    elif kind == "gaussian_semitrivial":
        u = _bump(spec, 0.0, 0.0) * noise()
        v = np.zeros((spec.n, spec.n))
    elif kind == "symmetric":
        u = _bump(spec, 0.0, 0.0) * noise() / math.sqrt(2.0)
        v = u.copy()
    else:
        from .storage import read_state

        state = read_state(opts.init_path, expected=spec)
        u, v = np.abs(state.u.values), np.abs(state.v.values)
    s = StatePair.from_arrays(spec, u, v)
    if s.is_zero():
        raise ZeroStateError(f"initial state of kind {kind!r} is identically zero")
    return s


# ---------------------------------------------------------------------------
# Descent
# ---------------------------------------------------------------------------

@dataclass
class _Eval:
    """Fiber data of one (unprojected) iterate."""

    state: StatePair
    comps: Components
    coeffs: FiberCoefficients
    t0: float
    F: float


def _evaluate(s: StatePair, beta: float, p: float, kernel: KernelTable) -> _Eval:
    c = components(s, beta, p, kernel)
    if not all(math.isfinite(x) for x in (c.kinetic, c.mass, c.V, c.psi)):
        raise NonFiniteEnergyError("non-finite functional during descent")
    coeffs = coefficients_from_components(c, beta, p)
    if not coeffs.D > 0.0:
        raise StateCollapseError("nonlinear term vanished: iterate collapsed to zero")
    t0 = solve_t0(coeffs)
    F = fiber_value(coeffs, t0)
    if not math.isfinite(F):
        raise NonFiniteEnergyError(f"non-finite fiber energy at t0 = {t0!r}")
    return _Eval(s, c, coeffs, t0, F)


def _materialize(e: _Eval, beta: float, p: float, kernel: KernelTable) -> _Eval:
    if e.t0 == 1.0:
        return e
    s = StatePair(rescale(e.state.u, e.t0), rescale(e.state.v, e.t0))
    return _evaluate(s, beta, p, kernel)


def envelope_gradient(e: _Eval, beta: float, p: float) -> tuple[np.ndarray, np.ndarray]:
    """L2 gradient of ``F = max_t f(t)`` at the iterate ``e``."""
    t = e.t0
    u, v = e.state.u.values, e.state.v.values
    phi, M = e.comps.phi, e.comps.mass
    lin = math.log(1.0 / t) * M
    a, b = t ** 4, t ** (4.0 * p - 2.0)
    gu = a * (-laplacian(e.state.u) + phi * u + lin * u) - b * nonlinear_term(u, v, beta, p)
    gv = a * (-laplacian(e.state.v) + phi * v + lin * v) - b * nonlinear_term(v, u, beta, p)
    return gu, gv


def _precondition(g: np.ndarray, spec: GridSpec, kind: str) -> np.ndarray:
    if kind == "l2":
        return g
    return np.fft.ifft2(np.fft.fft2(g) / (1.0 + spec.k2)).real


def el_residual(s: StatePair, report: EnergyReport, kernel: KernelTable) -> float:
    """Relative Euler-Lagrange residual ``(|g_u| + |g_v|) / ((|u| + |v|) * E)``.

    ``E = max(kinetic, psi) / mass`` is the characteristic energy per unit mass.
    """
    c = components(s, report.beta, report.p, kernel)
    gu, gv = gradient_from_components(s, c, report.beta, report.p)
    num = math.sqrt(l2_norm_sq(gu)) + math.sqrt(l2_norm_sq(gv))
    nu, nv = s.l2_norms()
    return num / ((nu + nv) * report.scale / report.mass_sq_sum)


def constraints_satisfied(report: EnergyReport, tol_constraint: float) -> bool:
    scale = report.scale
    return abs(report.J) <= tol_constraint * scale and abs(report.P) <= 10.0 * tol_constraint * scale


def minimize(
    spec: GridSpec,
    beta: float,
    p: float,
    opts: SolverOptions | None = None,
    kernel: KernelTable | None = None,
    start: StatePair | None = None,
    callback=None,
) -> Solution:
    """Minimise the energy over the manifold starting from ``initial_state``.

    ``callback(iteration, t0, F, update)`` is invoked after every accepted step.
    """
    opts = opts or SolverOptions()
    kernel = kernel or build_kernel(spec)
    h2 = spec.cell_area
    cur = _evaluate(start if start is not None else initial_state(spec, opts), beta, p, kernel)
    D_initial = cur.coeffs.D
    step = opts.step0
    t0_history: list[float] = []
    energy_history: list[float] = []
    ref = math.inf
    stop_reason = "max_iters"
    iterations = 0
    for it in range(opts.max_iters):
        iterations = it + 1
        t0_history.append(cur.t0)
        cur = _materialize(cur, beta, p, kernel)
        ref = min(ref, cur.F)
        gu, gv = envelope_gradient(cur, beta, p)
        du = _precondition(gu, spec, opts.preconditioner)
        dv = _precondition(gv, spec, opts.preconditioner)
        u, v = cur.state.u.values, cur.state.v.values
        accepted = None
        for _ in range(opts.max_backtracks):
            un = np.maximum(u - step * du, 0.0)
            vn = np.maximum(v - step * dv, 0.0)
            if np.any(un) or np.any(vn):
                trial = _evaluate(StatePair.from_arrays(spec, un, vn), beta, p, kernel)
                decrease = h2 * (np.sum(gu * (un - u)) + np.sum(gv * (vn - v)))
                if trial.F <= ref + opts.armijo_c * decrease:
                    accepted = trial
                    break
            step *= opts.backtrack_factor
        if accepted is None:
            stop_reason = "line_search_stall"
            break
        if accepted.coeffs.D < 1e-12 * D_initial:
            raise StateCollapseError(f"nonlinear term fell to {accepted.coeffs.D:.3e}")
        du_n = accepted.state.u.values - u
        dv_n = accepted.state.v.values - v
        update = math.sqrt(np.sum(du_n * du_n) + np.sum(dv_n * dv_n)) / math.sqrt(np.sum(u * u) + np.sum(v * v))
        cur = accepted
        ref = cur.F
        energy_history.append(cur.F)
        step *= opts.step_growth
        if callback is not None:
            callback(iterations, cur.t0, cur.F, update)
        if update < opts.tol_grad:
            stop_reason = "tol_grad"
            break

    final_t0 = cur.t0
    cur = _materialize(cur, beta, p, kernel)
    state = cur.state
    report = energy_report(state, beta, p, kernel)
    converged = stop_reason in ("tol_grad", "line_search_stall") and constraints_satisfied(report, opts.tol_constraint)
    return Solution(
        state=state,
        report=report,
        t0_history=t0_history,
        energy_history=energy_history,
        iterations=iterations,
        converged=converged,
        classification=classify_state(state),
        stop_reason=stop_reason,
        final_t0=final_t0,
        el_residual=el_residual(state, report, kernel),
    )


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def classify_state(s: StatePair, ratio_tol: float = 1e-3) -> Classification:
    nu, nv = s.l2_norms()
    big = max(nu, nv)
    if big == 0.0 or min(nu, nv) / big < ratio_tol:
        return Classification.SEMITRIVIAL
    diff = math.sqrt(l2_norm_sq(s.u - s.v))
    total = math.sqrt(l2_norm_sq(s.u + s.v))
    if diff / total < ratio_tol:
        return Classification.SYMMETRIC
    return Classification.VECTORIAL


def classify(sol: Solution, ratio_tol: float = 1e-3) -> Classification:
    """Semitrivial / Symmetric / Vectorial label of a converged solution."""
    if not sol.converged:
        raise ValueError("classification requires a converged solution")
    return classify_state(sol.state, ratio_tol)
