"""Hybrid quantum-classical trajectory engine."""

from .ensemble import (
    ReducedSeries,
    TrajectoryRecord,
    bloch_to_projectors,
    propagate_trajectory,
    run_ensemble,
    series_from_bloch,
)
from .layout import CoordinateLayout, fmo_layout, sbm_layout
from .models import (
    FmoModel,
    SpinBosonModel,
    build_fmo_hamiltonian,
    fmo_initial_elements,
    sbm_initial_elements,
)

__all__ = [
    "CoordinateLayout",
    "FmoModel",
    "ReducedSeries",
    "SpinBosonModel",
    "TrajectoryRecord",
    "bloch_to_projectors",
    "build_fmo_hamiltonian",
    "fmo_initial_elements",
    "fmo_layout",
    "propagate_trajectory",
    "run_ensemble",
    "sbm_initial_elements",
    "sbm_layout",
    "series_from_bloch",
]
