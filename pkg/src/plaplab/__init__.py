"""plaplab: a Monte Carlo laboratory for the stochastic p-Laplace equation.

Simulates du - div(|grad u|^(p-2) grad u) dt = phi(u) dbeta on (0, X) with
homogeneous Dirichlet boundary and checks, by synchronous-coupling Monte
Carlo at desk scale, the L1 contraction principle, truncated-energy
estimates, the energy dissipation profile, the renormalized-equation
identity and the Ito product rule.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, FuncSpec, load_config, validate_config
from .estimators import (MCResult, cauchy_initial_check, contraction_check,
                         dissipation_profile, energy_bound_check,
                         heat_convergence, hz_coupling_diagnostic,
                         ito_product_residual, mc_expectation,
                         monotonicity_gap, renorm_residual, test_function)
from .initialdata import InitialSpec, make_initial, truncate_initial
from .mesh import Grid1D, GridFunction, gradient, integrate, p_flux, p_laplacian
from .noise import NoiseModel, make_noise, validate_noise
from .plap_step import SolverFailure, SolverOptions, implicit_step, step_residual
from .sde import BrownianPath, Trajectory, evolve, evolve_coupled, ito_integral, sample_brownian
from .truncations import PiecewiseC2, catalog

__all__ = [
    "__version__",
    "ExperimentConfig", "FuncSpec", "load_config", "validate_config",
    "MCResult", "mc_expectation", "contraction_check", "energy_bound_check",
    "dissipation_profile", "renorm_residual", "ito_product_residual",
    "cauchy_initial_check", "monotonicity_gap", "hz_coupling_diagnostic",
    "heat_convergence", "test_function",
    "InitialSpec", "make_initial", "truncate_initial",
    "Grid1D", "GridFunction", "gradient", "integrate", "p_flux", "p_laplacian",
    "NoiseModel", "make_noise", "validate_noise",
    "SolverFailure", "SolverOptions", "implicit_step", "step_residual",
    "BrownianPath", "Trajectory", "evolve", "evolve_coupled", "ito_integral",
    "sample_brownian",
    "PiecewiseC2", "catalog",
]
