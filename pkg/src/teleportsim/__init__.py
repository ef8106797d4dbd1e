"""Linear-optics simulator for post-selected single-mode teleportation of a dual-rail photonic qubit."""

from .elements import ImperfectionModel
from .fock import CutoffError, DetectionPattern, MixedState, ModeId, PureState
from .montecarlo import ExperimentConfig, fit_contrast, run_experiment
from .teleport import (
    TeleportCircuit,
    cz_success,
    fidelity_from_contrast,
    fringe_analytic,
    klm_success,
    predicted_contrast,
    run_analytic,
    swap_check,
)

__version__ = "0.1.0"

__all__ = [
    "CutoffError",
    "DetectionPattern",
    "ExperimentConfig",
    "ImperfectionModel",
    "MixedState",
    "ModeId",
    "PureState",
    "TeleportCircuit",
    "cz_success",
    "fidelity_from_contrast",
    "fit_contrast",
    "fringe_analytic",
    "klm_success",
    "predicted_contrast",
    "run_analytic",
    "run_experiment",
    "swap_check",
]
