"""Scripted studies: coupling sweeps, threshold checks and scaling identities."""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .functionals import (
    StatePair,
    components,
    energy_report,
    gradient_from_components,
    nonlinear_term,
    psi_beta,
)
from .grid import Field, GridSpec, grad_norm_sq, l2_norm_sq, laplacian, rescale
from .kernel import V_form, build_kernel, potential_values
from .solver import Classification, Solution, SolverOptions, minimize

CSV_HEADER = ("beta", "p", "c_beta", "l2_u", "l2_v", "classification", "converged", "iterations", "L", "n")


# ---------------------------------------------------------------------------
# Closed-form threshold helpers
# ---------------------------------------------------------------------------

def beta_star(p: float) -> float:
    """Coupling threshold ``2^(p-1) - 1`` separating semitrivial and vector ground states."""
    if not p >= 2.0:
        raise ValueError(f"p must be >= 2, got {p!r}")
    return 2.0 ** (p - 1.0) - 1.0


def h_function(t):
    """``h(t) = 1 - t^4 + 4 t^4 log t`` (nonnegative, zero only at ``t = 1``)."""
    t = np.asarray(t, dtype=float)
    t4 = t ** 4
    return 1.0 - t4 + 4.0 * t4 * np.log(t)


def h_beta(s, p: float, beta: float):
    """``s^p + (1-s)^p + 2 beta s^(p/2) (1-s)^(p/2)`` on ``[0, 1]``."""
    s = np.asarray(s, dtype=float)
    return s ** p + (1.0 - s) ** p + 2.0 * beta * s ** (p / 2.0) * (1.0 - s) ** (p / 2.0)


def h_beta_scan(p: float, beta: float, samples: int = 10_000) -> tuple[float, float]:
    """Maximum of ``h_beta`` over ``samples`` equispaced interior points of ``(0, 1)``."""
    if not p >= 2.0:
        raise ValueError(f"p must be >= 2, got {p!r}")
    if not beta >= 0.0:
        raise ValueError(f"beta must be >= 0, got {beta!r}")
    if samples < 1000:
        raise ValueError(f"need at least 1000 samples, got {samples}")
    s = np.arange(1, samples + 1) / (samples + 1.0)
    vals = h_beta(s, p, beta)
    i = int(np.argmax(vals))
    return float(vals[i]), float(s[i])


# ---------------------------------------------------------------------------
# Coupling sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    beta: float
    p: float
    c_beta_estimate: float
    l2_u: float
    l2_v: float
    classification: str
    converged: bool
    iterations: int
    L: float
    n: int
    energy_semitrivial: float = math.nan
    energy_symmetric: float = math.nan
    message: str = ""

    @property
    def mass_sum(self) -> float:
        return self.l2_u + self.l2_v

    @property
    def both_nonzero(self) -> bool:
        return self.classification in (Classification.SYMMETRIC.value, Classification.VECTORIAL.value)

    def csv_row(self) -> list[str]:
        return [repr(float(self.beta)), repr(float(self.p)), repr(float(self.c_beta_estimate)),
                repr(float(self.l2_u)), repr(float(self.l2_v)), self.classification,
                "true" if self.converged else "false", str(self.iterations), repr(float(self.L)), str(self.n)]


def _run_one(args) -> SweepRecord:
    p, beta, L, n, opts, output_dir = args
    spec = GridSpec(L, n)
    kernel = build_kernel(spec)
    runs: dict[str, Solution] = {}
    errors = []
    for kind in ("gaussian_semitrivial", "symmetric"):
        try:
            runs[kind] = minimize(spec, beta, p, opts.with_(init_kind=kind), kernel)
        except Exception as exc:  # per-run failure is data, not fatal
            errors.append(f"{kind}: {type(exc).__name__}: {exc}")
    e_semi = runs["gaussian_semitrivial"].report.I if "gaussian_semitrivial" in runs else math.nan
    e_sym = runs["symmetric"].report.I if "symmetric" in runs else math.nan
    pool = [s for s in runs.values() if s.converged] or list(runs.values())
    if not pool:
        rec = SweepRecord(beta, p, math.nan, math.nan, math.nan, "Failed", False, 0, L, n,
                          e_semi, e_sym, "; ".join(errors))
        return rec
    best = min(pool, key=lambda s: s.report.I)
    nu, nv = best.l2_norms
    rec = SweepRecord(beta, p, best.c_beta_estimate, nu, nv, best.classification.value, best.converged,
                      best.iterations, L, n, e_semi, e_sym, "; ".join(errors))
    if output_dir is not None:
        _write_point(Path(output_dir), rec, best)
    return rec


def _write_point(directory: Path, rec: SweepRecord, sol: Solution) -> None:
    from .storage import write_json, write_state

    directory.mkdir(parents=True, exist_ok=True)
    write_state(directory, sol.state)
    payload = sol.report.as_record()
    payload.update(classification=rec.classification, converged=rec.converged, iterations=rec.iterations,
                   energy_semitrivial=rec.energy_semitrivial, energy_symmetric=rec.energy_symmetric)
    write_json(directory / "report.json", payload)


def point_dirname(beta: float) -> str:
    return f"beta_{beta:.6g}"


def beta_sweep(p: float, betas, spec: GridSpec, opts: SolverOptions | None = None,
               jobs: int = 1, output_dir: str | os.PathLike | None = None) -> list[SweepRecord]:
    """Solve at every coupling from two initialisations and keep the lower-energy result.

    Records are sorted by ``beta``.  With ``output_dir`` each point writes its
    state and report into ``output_dir/beta_<value>/``.
    """
    if not p >= 2.0:
        raise ValueError(f"p must be >= 2, got {p!r}")
    betas = sorted(float(b) for b in betas)
    if any(not b >= 0.0 for b in betas):
        raise ValueError("all couplings must be >= 0")
    opts = opts or SolverOptions()
    tasks = [(float(p), b, spec.L, spec.n, opts,
              None if output_dir is None else str(Path(output_dir) / point_dirname(b))) for b in betas]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_run_one, tasks))
    else:
        results = [_run_one(t) for t in tasks]
    return sorted(results, key=lambda r: r.beta)


def classification_crossings(records) -> list[tuple[float, float]]:
    """Intervals ``(beta_i, beta_{i+1})`` where the semitrivial / two-component type flips."""
    recs = sorted((r for r in records if r.converged), key=lambda r: r.beta)
    return [(a.beta, b.beta) for a, b in zip(recs, recs[1:]) if a.both_nonzero != b.both_nonzero]


def sweep_csv_text(records) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in sorted(records, key=lambda r: r.beta):
        writer.writerow(r.csv_row())
    return buf.getvalue()


def write_sweep_csv(path: str | os.PathLike, records) -> Path:
    path = Path(path)
    path.write_text(sweep_csv_text(records))
    return path


def read_sweep_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# Threshold identity
# ---------------------------------------------------------------------------

@dataclass
class ThresholdReport:
    p: float
    beta_star: float
    scalar_residual: float
    system_residual: float
    term_scale: float
    relative_residual: float
    potential_rel_diff: float
    off_threshold_beta: float
    off_threshold_relative_residual: float
    scalar_converged: bool
    tol: float = 1e-3

    @property
    def passed(self) -> bool:
        return (self.scalar_converged and self.relative_residual <= self.tol
                and self.potential_rel_diff <= 1e-12)


def _residual_and_scale(s: StatePair, beta: float, p: float, kernel) -> tuple[float, float]:
    c = components(s, beta, p, kernel)
    gu, gv = gradient_from_components(s, c, beta, p)
    res = math.sqrt(l2_norm_sq(gu)) + math.sqrt(l2_norm_sq(gv))
    scale = 0.0
    for a, b in ((s.u, s.v), (s.v, s.u)):
        for term in (laplacian(a), c.phi * a.values, nonlinear_term(a.values, b.values, beta, p)):
            scale += math.sqrt(s.spec.cell_area * float(np.sum(term * term)))
    return res, scale


def threshold_identity_check(p: float, spec: GridSpec, opts: SolverOptions | None = None,
                             tol: float = 1e-3) -> ThresholdReport:
    """Check that ``(u/sqrt2, u/sqrt2)`` solves the system at the threshold coupling.

    ``u`` is the scalar ground state (coupling 0, semitrivial start).  The
    system residual is compared with the sum of the norms of the individual
    equation terms; a contrast coupling ``beta* + 1/2`` shows the check is
    discriminating.
    """
    opts = (opts or SolverOptions()).with_(init_kind="gaussian_semitrivial")
    kernel = build_kernel(spec)
    scalar = minimize(spec, 0.0, p, opts, kernel)
    u = scalar.state.u
    zero = Field(spec, np.zeros((spec.n, spec.n)))
    b_star = beta_star(p)
    w = StatePair(u * (1.0 / math.sqrt(2.0)), u * (1.0 / math.sqrt(2.0)))
    r_scalar, _ = _residual_and_scale(StatePair(u, zero), 0.0, p, kernel)
    r_sys, scale = _residual_and_scale(w, b_star, p, kernel)
    b_off = b_star + 0.5
    r_off, scale_off = _residual_and_scale(w, b_off, p, kernel)
    phi_w = potential_values(w.u.values ** 2 + w.v.values ** 2, kernel)
    phi_u = potential_values(u.values ** 2, kernel)
    diff = float(np.max(np.abs(phi_w - phi_u)) / np.max(np.abs(phi_u)))
    return ThresholdReport(p=p, beta_star=b_star, scalar_residual=r_scalar, system_residual=r_sys,
                           term_scale=scale, relative_residual=r_sys / scale, potential_rel_diff=diff,
                           off_threshold_beta=b_off, off_threshold_relative_residual=r_off / scale_off,
                           scalar_converged=scalar.converged, tol=tol)


# ---------------------------------------------------------------------------
# Scaling identities under the dilation u -> t^2 u(t x)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BumpSpec:
    """Parameters of a sum of Gaussian bumps (grid independent)."""

    centres: tuple[tuple[float, float], ...]
    widths: tuple[float, ...]
    amps: tuple[float, ...]

    def sample(self, spec: GridSpec) -> Field:
        X, Y = spec.mesh
        out = np.zeros((spec.n, spec.n))
        for (cx, cy), w, a in zip(self.centres, self.widths, self.amps):
            out += a * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / (2.0 * w * w))
        return Field(spec, out)


def random_bumps(rng: np.random.Generator, count: int = 3, max_offset: float = 0.3,
                 widths=(0.7, 0.8), amps=(0.3, 1.2)) -> BumpSpec:
    """Concentrated smooth test function: ``count`` bumps near the origin."""
    r = rng.uniform(0.0, max_offset, count)
    ang = rng.uniform(0.0, 2.0 * math.pi, count)
    return BumpSpec(
        centres=tuple((float(a * math.cos(b)), float(a * math.sin(b))) for a, b in zip(r, ang)),
        widths=tuple(float(x) for x in rng.uniform(*widths, count)),
        amps=tuple(float(x) for x in rng.uniform(*amps, count)),
    )


def smooth_random_state(spec: GridSpec, seed: int) -> StatePair:
    """Seeded smooth, concentrated, nonnegative state for property checks."""
    rng = np.random.default_rng(seed)
    return StatePair(random_bumps(rng).sample(spec), random_bumps(rng).sample(spec))


def gaussian_pair_state(spec: GridSpec, seed: int, amps=(0.5, 2.0), max_offset: float = 0.5) -> StatePair:
    """Seeded pair of unit-width Gaussians with random amplitudes and nearby centres."""
    rng = np.random.default_rng(seed)
    X, Y = spec.mesh
    comps = []
    for _ in range(2):
        a = rng.uniform(*amps)
        cx, cy = rng.uniform(-max_offset, max_offset, 2)
        comps.append(Field(spec, a * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / 2.0)))
    return StatePair(*comps)


IDENTITIES = ("gradient", "l2", "l2p", "nonlocal")


def scaling_errors(s: StatePair, t: float, beta: float, p: float, kernel) -> dict[str, float]:
    """Relative defects of the four dilation identities for one state and ``t``."""
    w = StatePair(rescale(s.u, t), rescale(s.v, t))
    A = grad_norm_sq(s.u) + grad_norm_sq(s.v)
    M = l2_norm_sq(s.u) + l2_norm_sq(s.v)
    D = psi_beta(s, beta, p)
    V = V_form(s.u, s.v, kernel)
    Aw = grad_norm_sq(w.u) + grad_norm_sq(w.v)
    Mw = l2_norm_sq(w.u) + l2_norm_sq(w.v)
    Dw = psi_beta(w, beta, p)
    Vw = V_form(w.u, w.v, kernel)
    V_pred = t ** 4 * math.log(1.0 / t) * M * M + t ** 4 * V
    return {
        "gradient": abs(Aw - t ** 4 * A) / (t ** 4 * A),
        "l2": abs(Mw - t ** 2 * M) / (t ** 2 * M),
        "l2p": abs(Dw - t ** (4 * p - 2) * D) / (t ** (4 * p - 2) * D),
        "nonlocal": abs(Vw - V_pred) / abs(V),
    }


@dataclass
class ScalingReport:
    n_coarse: int
    n_fine: int
    errors: dict[tuple[float, str], tuple[float, float]] = field(default_factory=dict)
    tol: float = 5e-3
    exact_tol: float = 1e-12
    min_ratio: float = 2.0

    def ok(self, t: float, name: str) -> bool:
        coarse, fine = self.errors[(t, name)]
        if t == 1.0:
            return coarse <= self.exact_tol and fine <= self.exact_tol
        return coarse <= self.tol and fine * self.min_ratio <= coarse

    @property
    def passed(self) -> bool:
        return all(self.ok(t, name) for t, name in self.errors)

    def lines(self) -> list[str]:
        out = []
        for (t, name), (c, f) in sorted(self.errors.items()):
            tag = "PASS" if self.ok(t, name) else "FAIL"
            out.append(f"{tag} t={t:<5} {name:<9} err(n={self.n_coarse})={c:.3e} err(n={self.n_fine})={f:.3e}")
        return out


def scaling_identity_suite(spec: GridSpec, seed: int, ts=(0.5, 0.75, 1.0), beta: float = 1.0,
                           p: float = 2.0, states: int = 2) -> ScalingReport:
    """Dilation identities on seeded bump states at ``spec.n`` and ``2 spec.n``.

    The reported error per ``(t, identity)`` is the worst case over ``states``
    random states.
    """
    fine = GridSpec(spec.L, 2 * spec.n)
    rep = ScalingReport(spec.n, fine.n)
    rng = np.random.default_rng(seed)
    bumps = [(random_bumps(rng), random_bumps(rng)) for _ in range(states)]
    per_grid = []
    for g in (spec, fine):
        kernel = build_kernel(g)
        errs: dict[tuple[float, str], float] = {}
        for bu, bv in bumps:
            s = StatePair(bu.sample(g), bv.sample(g))
            for t in ts:
                for name, e in scaling_errors(s, float(t), beta, p, kernel).items():
                    errs[(float(t), name)] = max(errs.get((float(t), name), 0.0), e)
        per_grid.append(errs)
    for key in per_grid[0]:
        rep.errors[key] = (per_grid[0][key], per_grid[1][key])
    return rep


def energy_of(s: StatePair, beta: float, p: float, kernel):
    """Convenience wrapper returning the full report."""
    return energy_report(s, beta, p, kernel)
