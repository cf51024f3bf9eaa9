"""Radial finite-volume solver for attraction-repulsion chemotaxis with blow-up diagnostics."""

__version__ = "0.1.0"

from .analysis import (
    BlowupReport,
    FitFailure,
    Verdict,
    blowup_time_bound,
    classify,
    fit_c2,
    ode_lower_bound,
    reduction_equivalence,
    refinement_study,
    run_lockstep,
    theta_of,
)
from .dynamics import (
    FullState,
    Params,
    ReducedState,
    StepControl,
    Termination,
    Trajectory,
    integrate,
    step,
)
from .energy import (
    EnergyLedger,
    check_energy_inequality,
    dissipation_D,
    energy_F,
    energy_G,
)
from .grid import RadialGrid, build_grid, integrate_ball, norm_Lp, norm_W12
from .initial_data import (
    DriveFailure,
    MembershipReport,
    ResolutionExhausted,
    check_membership,
    drive_to_class,
    make_bump,
)
from .operators import chemo_div, implicit_helmholtz_solve, laplacian

__all__ = [name for name in dir() if not name.startswith("_")]
