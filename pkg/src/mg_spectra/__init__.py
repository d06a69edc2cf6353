"""Spectral laboratory for the magneto-geostrophic active scalar equation.

The package is organized around five layers: exact Fourier multiplier
symbols (symbols), the continued-fraction eigenvalue solver and its
truncation-matrix oracle (spectrum), Gevrey-norm and analyticity-radius
machinery on spectral fields (fields), slice and full pseudo-spectral
time integrators (evolution), and the named experiments with their CLI
(experiments, cli).
"""

from .params import ModeParams, PhysicalParams
from .symbols import (
    b_symbol,
    m_symbol,
    m_symbol_exact,
    symbol_asymptotics_report,
    t_symbol,
)
from .spectrum import (
    UnstableMode,
    alpha,
    analytic_bracket,
    f_continued_fraction,
    optimal_diffusive_mode,
    solve_growth_rate,
    solve_growth_rate_diffusive,
    sweep_growth_rates,
    truncated_matrix_eigenvalue,
)
from .fields import (
    GevreyTracker,
    SpectralField,
    breakdown_criterion,
    gevrey_norm,
    radius_estimate,
    radius_ode_linear,
    radius_ode_refined,
)
from .evolution import (
    NonlinearSettings,
    SliceState,
    evolve_full_slice,
    evolve_nonlinear,
    evolve_slice,
    lipschitz_blowup_experiment,
    measure_growth_rate,
)

__version__ = "0.1.0"

__all__ = [
    "ModeParams", "PhysicalParams",
    "b_symbol", "m_symbol", "m_symbol_exact", "symbol_asymptotics_report",
    "t_symbol",
    "UnstableMode", "alpha", "analytic_bracket", "f_continued_fraction",
    "optimal_diffusive_mode", "solve_growth_rate",
    "solve_growth_rate_diffusive", "sweep_growth_rates",
    "truncated_matrix_eigenvalue",
    "GevreyTracker", "SpectralField", "breakdown_criterion", "gevrey_norm",
    "radius_estimate", "radius_ode_linear", "radius_ode_refined",
    "NonlinearSettings", "SliceState", "evolve_full_slice",
    "evolve_nonlinear", "evolve_slice", "lipschitz_blowup_experiment",
    "measure_growth_rate",
    "__version__",
]
