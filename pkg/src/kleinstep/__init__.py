"""Exact 1-D Dirac scattering off a potential step, with an ODE oracle and wave packets."""

__version__ = "0.1.0"

from .core import (
    BranchPoint,
    EnergyZone,
    InputError,
    KleinError,
    Kinematics,
    NumericError,
    PhysParams,
    Spinor2,
    SubThresholdEnergy,
    WrongZone,
    classify_zone,
    kinematics,
)
from .scatter import (
    Family,
    ScatterSolution,
    current_density,
    evaluate_field,
    solve,
    solve_combined,
    solve_evanescent,
    solve_overbarrier,
    solve_traditional,
    solve_virtual,
    square_barrier,
    unitarity_report,
)
