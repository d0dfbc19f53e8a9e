"""Two-phase inductionless MHD flow on a staggered grid with a phase-field
interface: decoupled energy-stable time stepping plus a diagnostics suite
for the conservation laws and thin-interface limits."""

from .grid import CellField, FaceField, GridSpec
from .physics import MobilityCase, PhysParams, PotentialKind
from .scheme import SolverOptions, State, StepDiagnostics, advance, initial_state

__all__ = [
    "CellField",
    "FaceField",
    "GridSpec",
    "MobilityCase",
    "PhysParams",
    "PotentialKind",
    "SolverOptions",
    "State",
    "StepDiagnostics",
    "advance",
    "initial_state",
]

__version__ = "0.1.0"
