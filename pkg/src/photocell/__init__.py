"""Lumped bio-electrochemical model of a micro photosynthetic power cell."""

__version__ = "0.1.0"

from .core import (
    DatasetRecord,
    ExperimentalDataset,
    FittedRateProfile,
    GrowthState,
    ModelParameters,
    NumericalError,
    PhysicalConstants,
    PolarizationPoint,
    RateEntry,
    ValidationError,
    load_dataset,
    load_parameters,
    load_profile,
    standard_cell_potential,
)
from .electrochem import (
    OperatingProblem,
    bv_residual,
    exchange_current_density,
    polarization_sweep,
    power_curve,
    solve_operating_point,
)
from .estimation import fit_dataset, fit_point_k, interpolate_k, segment_regimes, validate
from .growth import GrowthTrajectory, integrate_growth, monod_rate, ode_rhs
from .sensitivity import SweepSpec, rank_sensitivities, run_sweep
