"""Large-system SNR of the Wiener receiver and its Gaussian fluctuations."""

from .equilibrium import (
    ConvergenceError,
    FixedPointSolution,
    SeparableSolution,
    WellPosednessError,
    deterministic_snr,
    residual,
    solve_general,
    solve_separable,
)
from .fluctuations import CltQuantities, clt_matrices, fourth_moment, omega_squared, theta_squared
from .profiles import (
    PowerClassTable,
    ProfileError,
    VarianceProfile,
    build_general,
    build_separable,
    expand_power_classes,
    mccdma_uplink_profile,
    sample_rayleigh_taps,
)
from .simulator import (
    TrialSet,
    empirical_moments,
    ks_normality,
    run_trials,
    snr_quadratic_form,
    standardize,
)

__version__ = "0.1.0"
