"""State diagnostics: moments, purity, fidelity and the spin Wigner function."""

from .clebsch import clebsch_gordan, multipoles, tensor_operator, tensor_operator_table
from .moments import (
    BlochState,
    batch_moments,
    bloch_vector,
    expectation,
    fidelity,
    one_body_purity,
    purity_from_bloch,
    trace_distance,
    variance,
)
from .wigner import WignerGrid, dominant_lobe_fraction, wigner_at, wigner_function

__all__ = [
    "BlochState",
    "WignerGrid",
    "batch_moments",
    "bloch_vector",
    "clebsch_gordan",
    "dominant_lobe_fraction",
    "expectation",
    "fidelity",
    "multipoles",
    "one_body_purity",
    "purity_from_bloch",
    "tensor_operator",
    "tensor_operator_table",
    "trace_distance",
    "variance",
    "wigner_at",
    "wigner_function",
]
