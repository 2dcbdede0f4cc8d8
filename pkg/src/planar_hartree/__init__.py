"""Ground states of the planar zero-mass Hartree-Fock system with log interaction."""

from __future__ import annotations

__version__ = "0.1.0"
