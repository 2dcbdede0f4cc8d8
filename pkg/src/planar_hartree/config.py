"""Run configuration stored as a sectioned ``key = value`` text file.

Every key has a default; unknown sections or keys are rejected with a
message naming the offending entry.  Floats are written with ``repr`` so
``parse(serialize(cfg)) == cfg`` holds exactly.

Example::

    [problem]
    beta = 2.0
    p = 2.0
    L = 8.0
    n = 128

    [solver]
    max_iters = 2000
    init_kind = symmetric

    [sweep]
    betas = 0.0, 0.5, 1.0, 1.5, 2.0
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .grid import GridSpec
from .kernel import ORIGIN_RULES
from .solver import SolverOptions

DEFAULT_BETAS = tuple(0.25 * i for i in range(9))
SUITE_ALL = "all"


@dataclass(frozen=True)
class RunConfig:
    # [problem]
    beta: float = 1.0
    p: float = 2.0
    L: float = 8.0
    n: int = 128
    lam: float = 2.0
    kernel_origin: str = "lattice"
    # [solver]
    solver: SolverOptions = field(default_factory=SolverOptions)
    # [output]
    output_dir: str = "run"
    # [sweep]
    betas: tuple[float, ...] = DEFAULT_BETAS
    # [verify]
    verify_seed: int = 0
    suites: tuple[str, ...] = (SUITE_ALL,)

    def __post_init__(self) -> None:
        if not self.beta >= 0.0:
            raise ConfigError(f"problem.beta: must be >= 0, got {self.beta!r}")
        if not self.p >= 2.0:
            raise ConfigError(f"problem.p: must be >= 2, got {self.p!r}")
        if self.kernel_origin not in ORIGIN_RULES:
            raise ConfigError(f"problem.kernel_origin: must be one of {ORIGIN_RULES}")
        try:
            GridSpec(self.L, self.n)
        except ValueError as exc:
            raise ConfigError(f"problem.L/problem.n: {exc}") from exc
        if any(not b >= 0.0 for b in self.betas):
            raise ConfigError("sweep.betas: every coupling must be >= 0")

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.L, self.n)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def with_seed(self, seed: int) -> "RunConfig":
        return self.replace(solver=self.solver.with_(seed=int(seed)), verify_seed=int(seed))

    def as_dict(self) -> dict:
        return {sec: dict(keys) for sec, keys in _sections(self).items()}


# (section, key) -> attribute on RunConfig ("solver.<name>" targets SolverOptions)
_PROBLEM_KEYS = {"beta": "beta", "p": "p", "L": "L", "n": "n", "lambda": "lam", "kernel_origin": "kernel_origin"}
_OUTPUT_KEYS = {"output_dir": "output_dir"}
_SWEEP_KEYS = {"betas": "betas"}
_VERIFY_KEYS = {"seed": "verify_seed", "suites": "suites"}
_SOLVER_TYPES = {f.name: f.type for f in dataclasses.fields(SolverOptions)}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _sections(cfg: RunConfig) -> dict[str, list[tuple[str, str]]]:
    return {
        "problem": [(k, _fmt(getattr(cfg, a))) for k, a in _PROBLEM_KEYS.items()],
        "solver": [(k, _fmt(getattr(cfg.solver, k))) for k in _SOLVER_TYPES],
        "output": [(k, _fmt(getattr(cfg, a))) for k, a in _OUTPUT_KEYS.items()],
        "sweep": [(k, _fmt(getattr(cfg, a))) for k, a in _SWEEP_KEYS.items()],
        "verify": [(k, _fmt(getattr(cfg, a))) for k, a in _VERIFY_KEYS.items()],
    }


def serialize(cfg: RunConfig) -> str:
    buf = io.StringIO()
    for i, (section, items) in enumerate(_sections(cfg).items()):
        if i:
            buf.write("\n")
        buf.write(f"[{section}]\n")
        for k, v in items:
            buf.write(f"{k} = {v}\n")
    return buf.getvalue()


def _convert(key: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind in (float, "float"):
            return float(raw)
        if kind in (int, "int"):
            f = float(raw)
            if f != int(f):
                raise ValueError(f"{raw!r} is not an integer")
            return int(f)
        if kind == "floats":
            return tuple(float(x) for x in raw.split(",") if x.strip())
        if kind == "strs":
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"{key}: invalid value {raw!r} ({exc})") from None


_PROBLEM_TYPES = {"beta": float, "p": float, "L": float, "n": int, "lambda": float, "kernel_origin": str}
_OTHER_TYPES = {
    ("output", "output_dir"): str,
    ("sweep", "betas"): "floats",
    ("verify", "seed"): int,
    ("verify", "suites"): "strs",
}


def parse(text: str) -> RunConfig:
    """Parse configuration text; raises :class:`ConfigError` naming the bad key."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (L vs l)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed configuration: {exc}") from None
    top: dict = {}
    solver: dict = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            qual = f"{section}.{key}"
            if section == "problem":
                if key not in _PROBLEM_KEYS:
                    raise ConfigError(f"{qual}: unknown key")
                top[_PROBLEM_KEYS[key]] = _convert(qual, raw, _PROBLEM_TYPES[key])
            elif section == "solver":
                if key not in _SOLVER_TYPES:
                    raise ConfigError(f"{qual}: unknown key")
                solver[key] = _convert(qual, raw, _SOLVER_TYPES[key])
            elif section in ("output", "sweep", "verify"):
                kind = _OTHER_TYPES.get((section, key))
                if kind is None:
                    raise ConfigError(f"{qual}: unknown key")
                attr = {**_OUTPUT_KEYS, **_SWEEP_KEYS, **_VERIFY_KEYS}[key]
                top[attr] = _convert(qual, raw, kind)
            else:
                raise ConfigError(f"[{section}]: unknown section")
    try:
        opts = SolverOptions(**solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"solver: {exc}") from None
    return RunConfig(solver=opts, **top)


def load(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    return parse(text)


def save(cfg: RunConfig, path: str | os.PathLike) -> Path:
    path = Path(path)
    path.write_text(serialize(cfg))
    return path
