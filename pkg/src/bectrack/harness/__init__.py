"""Configuration, run orchestration, persistence and presets."""

from .analysis import convergence_order, convergence_time, longest_run_above, oscillation_amplitude, rms_difference
from .config import ExperimentConfig, InitialState
from .presets import PRESETS, preset
from .runner import (
    EnsembleSummary,
    IncompleteRunError,
    RunResult,
    emit_plot_data,
    read_manifest,
    replay_estimate,
    run_ensemble,
    run_experiment,
    simulate_ensemble,
)

__all__ = [
    "EnsembleSummary",
    "ExperimentConfig",
    "IncompleteRunError",
    "InitialState",
    "PRESETS",
    "RunResult",
    "convergence_order",
    "convergence_time",
    "emit_plot_data",
    "longest_run_above",
    "oscillation_amplitude",
    "preset",
    "read_manifest",
    "replay_estimate",
    "rms_difference",
    "run_ensemble",
    "run_experiment",
    "simulate_ensemble",
]
