"""Exception hierarchy for the solver stack.

Each failure mode gets its own class so callers (the CLI in particular) can
report a distinct diagnostic instead of a generic ``ValueError``.
"""

from __future__ import annotations


class PlanarHartreeError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(PlanarHartreeError, ValueError):
    """Two fields (or a field and a kernel) live on different grids."""


class ZeroStateError(PlanarHartreeError, ValueError):
    """The state (u, v) vanishes identically, so it has no fiber."""


class DegenerateFiberError(PlanarHartreeError, ValueError):
    """The nonlinear coefficient D is zero: the fiber never meets the manifold."""


class ProjectionError(PlanarHartreeError, RuntimeError):
    """The fiber root could not be located (e.g. t0 below the safety floor)."""


class StateCollapseError(PlanarHartreeError, RuntimeError):
    """The iterate lost (almost) all of its nonlinear mass during descent."""


class NonFiniteEnergyError(PlanarHartreeError, FloatingPointError):
    """A functional evaluated to NaN or infinity."""


class FieldFormatError(PlanarHartreeError, ValueError):
    """A field file is missing, truncated, or carries the wrong header."""


class ConfigError(PlanarHartreeError, ValueError):
    """A configuration file contains an unknown key or an invalid value."""
