"""Property suites run by ``planar-hartree verify``.

Each suite takes a :class:`~planar_hartree.config.RunConfig` and returns a
:class:`SuiteResult`.  Suites use the configured grid where that is
meaningful; checks whose tolerances are only reachable on finer grids (the
dilation identities and the materialized projection) raise the resolution to
at least 256.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .config import RunConfig
from .experiments import (
    beta_star,
    gaussian_pair_state,
    h_beta,
    h_beta_scan,
    h_function,
    scaling_identity_suite,
    smooth_random_state,
    threshold_identity_check,
)
from .fiber import FiberCoefficients, fiber_coeffs, fiber_derivative, project, solve_t0
from .functionals import StatePair, energy_report, gradient, pairing
from .grid import GridSpec
from .kernel import V_form, build_kernel, potential_values


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name:<12} ({self.seconds:5.1f}s) {self.detail}"


def brute_force_V(u: np.ndarray, v: np.ndarray, spec: GridSpec, origin_value: float) -> float:
    """``O(n^4)`` direct double sum of ``log|x_i - x_j| rho_i rho_j h^4``."""
    rho = (u * u + v * v).reshape(-1)
    X, Y = spec.mesh
    x, y = X.reshape(-1), Y.reshape(-1)
    total = 0.0
    for i in range(rho.size):
        if rho[i] == 0.0:
            continue
        d = np.hypot(x - x[i], y - y[i])
        d[i] = 1.0
        k = np.log(d)
        k[i] = origin_value
        total += rho[i] * float(np.dot(k, rho))
    return total * spec.cell_area ** 2


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


def suite_kernel(cfg: RunConfig) -> tuple[bool, str]:
    spec = cfg.grid
    K = build_kernel(spec, cfg.kernel_origin)
    n2 = 2 * spec.n
    idx = np.arange(n2)
    sym = np.array_equal(K.samples, K.samples[np.ix_((-idx) % n2, (-idx) % n2)])
    e1 = abs(K.entry(1, 0) - math.log(spec.h))
    e2 = abs(K.entry(3, 4) - math.log(5 * spec.h))
    # point mass in one corner, potential read in the opposite corner
    rho = np.zeros((spec.n, spec.n))
    rho[0, 0] = 1.0
    phi = potential_values(rho, K)
    dist = math.hypot(*(spec.x[-1] - spec.x[0],) * 2)
    wrap = abs(phi[-1, -1] - math.log(dist) * spec.cell_area)
    ok = sym and e1 < 1e-14 and e2 < 1e-14 and wrap < 1e-12
    return ok, f"symmetric={sym} entry_err={max(e1, e2):.1e} corner_err={wrap:.1e}"


def suite_convolution(cfg: RunConfig) -> tuple[bool, str]:
    spec = GridSpec(cfg.L, 32)
    K = build_kernel(spec, cfg.kernel_origin)
    worst = 0.0
    for seed in range(3):
        s = smooth_random_state(spec, cfg.verify_seed + seed)
        worst = max(worst, _rel(V_form(s.u, s.v, K), brute_force_V(s.u.values, s.v.values, spec, K.origin_value)))
    return worst <= 1e-6, f"max rel err vs O(n^4) sum at n=32: {worst:.1e}"


def suite_algebraic(cfg: RunConfig) -> tuple[bool, str]:
    spec = cfg.grid
    K = build_kernel(spec, cfg.kernel_origin)
    worst = 0.0
    for i, (p, beta) in enumerate([(2.0, 0.0), (2.5, 1.0), (3.0, 3.0)]):
        s = smooth_random_state(spec, cfg.verify_seed + i)
        r = energy_report(s, beta, p, K)
        nehari = pairing(gradient(s, beta, p, K), (s.u, s.v))
        scale = max(abs(r.J), abs(nehari), abs(r.P), r.scale)
        worst = max(worst, abs(r.J - (2 * nehari - r.P)) / scale)
    return worst <= 1e-10, f"max |J - (2<I'(s), s> - P)| / scale = {worst:.1e}"


def suite_scaling(cfg: RunConfig) -> tuple[bool, str]:
    spec = GridSpec(cfg.L, max(cfg.n, 256))
    rep = scaling_identity_suite(spec, cfg.verify_seed, states=1)
    worst = max(c for (t, _), (c, _f) in rep.errors.items() if t != 1.0)
    return rep.passed, f"n={rep.n_coarse}/{rep.n_fine} worst err {worst:.2e}"


def suite_fiber(cfg: RunConfig) -> tuple[bool, str]:
    rng = np.random.default_rng(cfg.verify_seed)
    worst_res = 0.0
    mono = True
    order = True
    for _ in range(100):
        c = FiberCoefficients(A=rng.uniform(0.1, 10), B=rng.uniform(0.1, 10), C=rng.uniform(-5, 5),
                              D=rng.uniform(0.1, 10), p=rng.uniform(2, 4))
        t0 = solve_t0(c)
        worst_res = max(worst_res, abs(fiber_derivative(c, t0)) / (c.scale * max(1.0, t0 ** (4 * c.p - 3))))
        g = np.array([c.reduced_derivative(t) for t in np.linspace(t0 / 4, 4 * t0, 100)])
        mono &= bool(np.all(np.diff(g) < 0))
        if fiber_derivative(c, 1.0) <= 0:
            order &= t0 <= 1 + 1e-9
    ok = worst_res <= 1e-12 and mono and order
    return ok, f"max scaled |f'(t0)| = {worst_res:.1e}, g decreasing={mono}, t0<=1 when f'(1)<=0: {order}"


def suite_lemmas(cfg: RunConfig) -> tuple[bool, str]:
    t = np.logspace(-3, 3, 10_000)
    h = h_function(t)
    nonneg = bool(np.all(h >= 0)) and bool(np.all(h[np.abs(t - 1) > 1e-2] > 0))
    mx, _ = h_beta_scan(2.0, 0.5)
    ok_half = all(abs(float(h_beta(0.5, p, beta_star(p))) - 1.0) <= 1e-14 for p in (2.0, 2.5, 3.0, 4.0))
    ok = nonneg and mx < 1.0 and ok_half
    return ok, f"h>=0: {nonneg}; max h_beta(p=2, beta=0.5) = {mx:.6f}; h_beta*(1/2)=1: {ok_half}"


def suite_gradient(cfg: RunConfig) -> tuple[bool, str]:
    spec = cfg.grid
    K = build_kernel(spec, cfg.kernel_origin)
    rng = np.random.default_rng(cfg.verify_seed)
    worst = 0.0
    for i in range(4):
        s = smooth_random_state(spec, cfg.verify_seed + 100 + i)
        d = smooth_random_state(spec, cfg.verify_seed + 200 + i)
        beta, p = float(rng.choice([0.0, 0.5, 2.0])), float(rng.choice([2.0, 2.5, 3.0]))
        worst = max(worst, directional_derivative_error(s, d, beta, p, K))
    return worst <= 1e-5, f"max rel err of gradient pairing = {worst:.1e}"


def directional_derivative_error(s: StatePair, d: StatePair, beta: float, p: float, K, eps: float = 1e-5) -> float:
    """Relative mismatch between the gradient pairing and a central difference of ``I``."""
    plus = StatePair(s.u + d.u * eps, s.v + d.v * eps)
    minus = StatePair(s.u - d.u * eps, s.v - d.v * eps)
    fd = (energy_report(plus, beta, p, K).I - energy_report(minus, beta, p, K).I) / (2 * eps)
    an = pairing(gradient(s, beta, p, K), (d.u, d.v))
    return abs(fd - an) / abs(an)


def suite_projection(cfg: RunConfig) -> tuple[bool, str]:
    # the 5e-3 bound is an interpolation-error budget; it needs n >= 256 for unit-width fields
    spec = GridSpec(cfg.L, max(cfg.n, 256))
    K = build_kernel(spec, cfg.kernel_origin)
    worst = 0.0
    order = True
    for i in range(3):
        s = gaussian_pair_state(spec, cfg.verify_seed + 300 + i)
        c = fiber_coeffs(s, cfg.beta, cfg.p, K)
        t0, proj = project(s, cfg.beta, cfg.p, K)
        r = energy_report(proj, cfg.beta, cfg.p, K)
        worst = max(worst, abs(r.J) / r.scale)
        if c.derivative(1.0) <= 0:
            order &= t0 <= 1 + 1e-9
        # an exact manifold point has t0 = 1
        c_on = FiberCoefficients(c.A * t0 ** 4, c.B * t0 ** 4, c.C * t0 ** 4 - c.B * t0 ** 4 * math.log(t0),
                                 c.D * t0 ** (4 * c.p - 2), c.p)
        order &= abs(solve_t0(c_on) - 1.0) <= 1e-10
    return worst <= 5e-3 and order, f"n={spec.n} max |J|/scale after projection = {worst:.1e}; root checks ok: {order}"


def suite_threshold(cfg: RunConfig) -> tuple[bool, str]:
    rep = threshold_identity_check(2.0, cfg.grid, cfg.solver)
    return rep.passed, (f"relative residual {rep.relative_residual:.1e} (off-threshold "
                        f"{rep.off_threshold_relative_residual:.1e}); potential diff {rep.potential_rel_diff:.1e}")


SUITES: dict[str, Callable[[RunConfig], tuple[bool, str]]] = {
    "kernel": suite_kernel,
    "convolution": suite_convolution,
    "algebraic": suite_algebraic,
    "scaling": suite_scaling,
    "fiber": suite_fiber,
    "lemmas": suite_lemmas,
    "gradient": suite_gradient,
    "projection": suite_projection,
    "threshold": suite_threshold,
}


def selected_suites(names) -> list[str]:
    names = list(names)
    if not names or "all" in names:
        return list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s): {', '.join(unknown)}; available: {', '.join(SUITES)}")
    return names


def run_suites(cfg: RunConfig, names=None) -> list[SuiteResult]:
    out = []
    for name in selected_suites(cfg.suites if names is None else names):
        t = time.perf_counter()
        try:
            ok, detail = SUITES[name](cfg)
        except Exception as exc:  # a crashing suite is a failing suite
            ok, detail = False, f"error: {type(exc).__name__}: {exc}"
        out.append(SuiteResult(name, bool(ok), detail, time.perf_counter() - t))
    return out
