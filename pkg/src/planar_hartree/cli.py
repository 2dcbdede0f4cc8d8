"""Command-line interface: ``solve``, ``sweep``, ``verify`` and ``project``.

Examples
--------
::

    planar-hartree solve  --config run.ini --output out/
    planar-hartree sweep  --config run.ini --jobs 4
    planar-hartree verify --suite fiber --suite lemmas
    planar-hartree project --state out/ --config run.ini
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load
from .errors import ConfigError, PlanarHartreeError
from .experiments import beta_sweep, classification_crossings, point_dirname, write_sweep_csv
from .fiber import fiber_coeffs, fiber_value, project, solve_t0
from .functionals import energy_report
from .kernel import build_kernel
from .solver import minimize
from .storage import file_inventory, read_state, write_json, write_state
from .suites import run_suites, selected_suites


class _Timer:
    def __init__(self) -> None:
        self.start = time.perf_counter()
        self.stages: dict[str, float] = {}
        self._last = self.start

    def mark(self, stage: str) -> None:
        now = time.perf_counter()
        self.stages[stage] = now - self._last
        self._last = now

    @property
    def total(self) -> float:
        return time.perf_counter() - self.start


def _prepare_output(directory: Path) -> Path:
    try:
        directory.mkdir(parents=True, exist_ok=True)
        probe = directory / ".write_probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise PlanarHartreeError(f"output directory {directory} is not writable: {exc}") from exc
    return directory


def write_manifest(directory: Path, cfg: RunConfig, command: str, timer: _Timer, written, extra=None) -> Path:
    manifest = {
        "command": command,
        "tool": "planar-hartree",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.as_dict(),
        "wall_clock_seconds": timer.total,
        "stage_seconds": timer.stages,
        "files": file_inventory(written, directory),
    }
    if extra:
        manifest.update(extra)
    return write_json(directory / "manifest.json", manifest)


def _report_payload(sol) -> dict:
    payload = sol.report.as_record()
    nu, nv = sol.l2_norms
    payload.update(
        converged=sol.converged,
        iterations=sol.iterations,
        stop_reason=sol.stop_reason,
        classification=sol.classification.value,
        c_beta_estimate=sol.c_beta_estimate,
        l2_u=nu,
        l2_v=nv,
        el_residual=sol.el_residual,
        t0_history=sol.t0_history,
        energy_history=sol.energy_history,
    )
    return payload


def cmd_solve(cfg: RunConfig, output: Path | None = None) -> int:
    out = _prepare_output(Path(output or cfg.output_dir))
    timer = _Timer()
    spec = cfg.grid
    kernel = build_kernel(spec, cfg.kernel_origin)
    timer.mark("setup")
    sol = minimize(spec, cfg.beta, cfg.p, cfg.solver, kernel)
    timer.mark("minimize")
    written = write_state(out, sol.state)
    written.append(write_json(out / "report.json", _report_payload(sol)))
    timer.mark("write")
    write_manifest(out, cfg, "solve", timer, written)
    r = sol.report
    print(f"beta={cfg.beta} p={cfg.p} I={r.I:.10g} J={r.J:.3e} P={r.P:.3e} iterations={sol.iterations} "
          f"converged={sol.converged} ({sol.stop_reason}) class={sol.classification.value}")
    if not sol.converged:
        print(f"error: solver did not converge ({sol.stop_reason}); |J|/scale={abs(r.J) / r.scale:.2e}, "
              f"|P|/scale={abs(r.P) / r.scale:.2e}", file=sys.stderr)
        return 1
    return 0


def cmd_sweep(cfg: RunConfig, output: Path | None = None, jobs: int = 1) -> int:
    if not cfg.betas:
        print("error: sweep.betas is empty", file=sys.stderr)
        return 2
    out = _prepare_output(Path(output or cfg.output_dir))
    timer = _Timer()
    records = beta_sweep(cfg.p, cfg.betas, cfg.grid, cfg.solver, jobs=jobs, output_dir=out)
    timer.mark("sweep")
    written = [write_sweep_csv(out / "sweep.csv", records)]
    for r in records:
        d = out / point_dirname(r.beta)
        written += [f for f in sorted(d.glob("*")) if f.is_file()] if d.is_dir() else []
    timer.mark("write")
    crossings = classification_crossings(records)
    write_manifest(out, cfg, "sweep", timer, written, {"crossings": crossings, "jobs": jobs})
    for r in records:
        print(f"beta={r.beta:<6g} {r.classification:<12} c_beta={r.c_beta_estimate:.8f} "
              f"l2=({r.l2_u:.5f}, {r.l2_v:.5f}) converged={r.converged}")
    print(f"classification crossings: {crossings}")
    failed = [r.beta for r in records if not r.converged]
    if failed:
        print(f"error: not converged at beta = {failed}", file=sys.stderr)
        return 1
    return 0


def cmd_verify(cfg: RunConfig, suites=None) -> int:
    names = selected_suites(suites or cfg.suites)
    results = run_suites(cfg, names)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def cmd_project(cfg: RunConfig, state_dir: Path, output: Path | None = None) -> int:
    state = read_state(state_dir)
    kernel = build_kernel(state.spec, cfg.kernel_origin)
    before = energy_report(state, cfg.beta, cfg.p, kernel)
    coeffs = fiber_coeffs(state, cfg.beta, cfg.p, kernel)
    t0 = solve_t0(coeffs)
    _, projected = project(state, cfg.beta, cfg.p, kernel)
    after = energy_report(projected, cfg.beta, cfg.p, kernel)
    payload = {"t0": t0, "fiber_max": fiber_value(coeffs, t0), "before": before.as_record(), "after": after.as_record()}
    print(json.dumps(payload, indent=2, sort_keys=True))
    if output is not None:
        out = _prepare_output(Path(output))
        write_state(out, projected)
        write_json(out / "report.json", payload)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="planar-hartree", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="configuration file (sectioned key = value)")
        p.add_argument("--seed", type=int, help="override the random seed")
        return p

    p = common(sub.add_parser("solve", help="compute one ground state"))
    p.add_argument("--output", type=Path, help="output directory (overrides output.output_dir)")
    p = common(sub.add_parser("sweep", help="coupling sweep with dual initialisation"))
    p.add_argument("--output", type=Path)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p = common(sub.add_parser("verify", help="run the property suites"))
    p.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    p = common(sub.add_parser("project", help="project a stored state onto the manifold"))
    p.add_argument("--state", type=Path, required=True, help="directory holding u.fld and v.fld")
    p.add_argument("--output", type=Path, help="write the projected state here")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config) if args.config else RunConfig()
        if args.seed is not None:
            cfg = cfg.with_seed(args.seed)
        if args.command == "solve":
            return cmd_solve(cfg, args.output)
        if args.command == "sweep":
            if args.jobs < 1:
                raise ConfigError("--jobs must be >= 1")
            return cmd_sweep(cfg, args.output, args.jobs)
        if args.command == "verify":
            return cmd_verify(cfg, args.suite)
        return cmd_project(cfg, args.state, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return 2
    except PlanarHartreeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
