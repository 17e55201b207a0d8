"""Preset experiments for the N = 100 double well under measurement.

Both start with all atoms in one well (|j>), track the state with an
initially maximally uncertain estimate over 60 Rabi periods, and keep one
Wigner snapshot.  ``fig2`` is the non-interacting case (u = 0), ``fig4``
the interacting one (u = 1).
"""

from __future__ import annotations

from ..spinspace import ModelParams
from .config import ExperimentConfig, InitialState

N_PARTICLES = 100
HORIZON = 60.0  # t_R
DT = 1e-3  # t_R

_SNAPSHOTS = {"fig2": (0.0, 25.0), "fig4": (1.0, 48.0)}
PRESETS = tuple(_SNAPSHOTS)


def preset(name: str, seed: int = 1, output_dir: str | None = None) -> ExperimentConfig:
    """Config for a named preset (``fig2`` or ``fig4``)."""
    try:
        u, snapshot = _SNAPSHOTS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}") from None
    return ExperimentConfig(
        params=ModelParams(N_PARTICLES, interaction_u=u, tunneling_k=1.0, gamma_bar=1.0),
        t_final=HORIZON,
        dt=DT,
        seed=seed,
        initial_state=InitialState("fock"),
        estimator=True,
        wigner_times=(snapshot,),
        output_dir=output_dir,
    )
