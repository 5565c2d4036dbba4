"""Quantum lattice gas simulator for the Gross-Pitaevskii equation.

The package evolves a two-spinor field with interleaved collide/stream
unitaries, and provides energy, spectral, vortex and recurrence diagnostics
plus a small Arnold cat map toolkit.
"""

from qlg.lattice import GridSpec, SpinorField, project_phi, stream
from qlg.evolution import (
    SimParams,
    collide,
    evolve_step,
    interleaved_sweep,
    nonlinear_phase,
    run,
)

__all__ = [
    "GridSpec",
    "SpinorField",
    "SimParams",
    "collide",
    "evolve_step",
    "interleaved_sweep",
    "nonlinear_phase",
    "project_phi",
    "run",
    "stream",
]

__version__ = "0.1.0"
