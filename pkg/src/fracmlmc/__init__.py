"""Monotone finite-difference solvers and (multilevel) Monte Carlo estimators for
one-dimensional degenerate fractional convection-diffusion with random data."""

from .errors import (
    CflError,
    ConfigError,
    DomainError,
    FracMlmcError,
    GridMismatchError,
    NewtonConvergenceError,
    SampleFailure,
    SingularJacobianError,
    ToleranceTooSmallError,
    UnsupportedConfigurationError,
)
from .mesh import Grid1D, MeshHierarchy, SolutionField, field_to_csv, prolong, restrict, transfer
from .fractional import BoundaryMode, FractionalKernel, apply_nonlocal, build_weights, c_lambda, kernel_for
from .model import (
    BlParams,
    ModelSample,
    ParamDistribution,
    PiecewiseConstant,
    SampleSeed,
    bl_diffusion,
    bl_flux,
    bl_flux_derivative,
    bl_initial,
    draw_params,
    make_sample,
)
from .solver import (
    SchemeKind,
    SolverConfig,
    StepReport,
    cfl_timestep,
    numerical_flux_llf,
    project_initial,
    solve,
    solve_with_stats,
    step_explicit,
    step_explicit_implicit,
)
from .mc import EstimatorResult, McConfig, mc_estimate, mc_sample_count
from .mlmc import (
    MlmcPlan,
    RateExponents,
    default_tolerance,
    level_sample_counts,
    mlmc_estimate,
    rate_exponents,
    work_model,
)
from .analysis import ReferenceConfig, RmsReport, fit_rate, reference_solution, rms_error

__version__ = "0.1.0"
