"""Monte Carlo propagation, ensemble averaging and decay fitting."""
from .ensemble import (
    CoherenceSeries,
    EnsembleResult,
    SimulationSpec,
    evolve_trajectory,
    run_ensemble,
)
from .fitting import T2Fit, fit_gaussian_decay
from .propagate import propagate
from .sweep import SWEEP_PARAMS, SweepRow, sweep, sweep_table

__all__ = [
    "CoherenceSeries",
    "EnsembleResult",
    "SimulationSpec",
    "evolve_trajectory",
    "run_ensemble",
    "T2Fit",
    "fit_gaussian_decay",
    "propagate",
    "SWEEP_PARAMS",
    "SweepRow",
    "sweep",
    "sweep_table",
]
