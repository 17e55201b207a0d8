"""Time evolution: conditioned and estimator SSEs, master equation, mean field."""

from .gpe import gpe_energy, gpe_integrate, gpe_phase_portrait, gpe_step
from .lindblad import lindblad_solve
from .records import MeasurementRecord, Snapshot, StateSeries, TrajectoryLog
from .sse import (
    Stepper,
    propagate_conditioned,
    propagate_conditioned_batch,
    propagate_estimate,
    sse_step,
    unitary_propagate,
    unitary_propagator,
)

__all__ = [
    "MeasurementRecord",
    "Snapshot",
    "StateSeries",
    "Stepper",
    "TrajectoryLog",
    "gpe_energy",
    "gpe_integrate",
    "gpe_phase_portrait",
    "gpe_step",
    "lindblad_solve",
    "propagate_conditioned",
    "propagate_conditioned_batch",
    "propagate_estimate",
    "sse_step",
    "unitary_propagate",
    "unitary_propagator",
]
