"""Time integration: local Lax-Friedrichs convection plus explicit or implicit fractional diffusion.

One step of the explicit scheme reads

    U^{n+1}_i = U^n_i - dt/dx (F_{i+1/2} - F_{i-1/2}) + dt L[A(U^n)]_i,

and the explicit-implicit scheme evaluates the nonlocal term at U^{n+1}, which
is found by Newton's method with a dense LU factorisation.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import CflError, DomainError, NewtonConvergenceError, SingularJacobianError
from .fractional import BoundaryMode, FractionalKernel, apply_nonlocal, kernel_for
from .mesh import Grid1D, SolutionField
from .model import ModelSample

__all__ = [
    "SchemeKind",
    "SolverConfig",
    "StepReport",
    "SolveStats",
    "numerical_flux_llf",
    "cfl_timestep",
    "project_initial",
    "convective_difference",
    "step_explicit",
    "step_explicit_implicit",
    "implicit_residual",
    "solve",
    "solve_with_stats",
]

SPEED_MODES = ("interval", "endpoint")


class SchemeKind(enum.Enum):
    EXPLICIT = "explicit"
    EXPLICIT_IMPLICIT = "explicit-implicit"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"ex": "explicit", "ei": "explicit-implicit", "implicit": "explicit-implicit"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise DomainError(f"unknown scheme {value!r}; use 'explicit' or 'explicit-implicit'") from None


@dataclass(frozen=True)
class SolverConfig:
    scheme: SchemeKind = SchemeKind.EXPLICIT
    cfl: float = 0.2
    boundary: BoundaryMode = BoundaryMode.CONSTANT_EXTENSION
    newton_max_iters: int = 50
    T: float = 1.0
    flux_speed: str = "interval"

    def __post_init__(self):
        object.__setattr__(self, "scheme", SchemeKind.parse(self.scheme))
        object.__setattr__(self, "boundary", BoundaryMode.parse(self.boundary))
        if not (0.0 < self.cfl < 1.0):
            raise DomainError(f"cfl must lie in (0, 1), got {self.cfl}")
        if not (math.isfinite(self.T) and self.T >= 0.0):
            raise DomainError(f"final time T must be finite and nonnegative, got {self.T}")
        if int(self.newton_max_iters) != self.newton_max_iters or self.newton_max_iters < 1:
            raise DomainError(f"newton_max_iters must be a positive integer, got {self.newton_max_iters}")
        if self.flux_speed not in SPEED_MODES:
            raise DomainError(f"flux_speed must be one of {SPEED_MODES}, got {self.flux_speed!r}")


@dataclass(frozen=True)
class StepReport:
    dt: float
    newton_iterations: int = 0
    residual: float = 0.0


@dataclass
class SolveStats:
    steps: int = 0
    newton_iterations: int = 0
    max_residual: float = 0.0
    lu_factorisations: int = 0
    critical_lambda: bool = False
    reports: Optional[List[StepReport]] = None


def numerical_flux_llf(u_left, u_right, sample: ModelSample, speed: str = "interval"):
    """F = (f(a) + f(b))/2 - s (b - a)/2.

    With ``speed='interval'`` the viscosity s bounds |f'| on the whole interval
    between a and b (needed for monotonicity with non-convex fluxes); with
    ``speed='endpoint'`` it is max(|f'(a)|, |f'(b)|).
    """
    a = np.asarray(u_left, dtype=float)
    b = np.asarray(u_right, dtype=float)
    if speed == "interval" and sample.speed_bound is not None:
        s = sample.speed_bound(a, b)
    elif speed in SPEED_MODES:
        s = np.maximum(np.abs(sample.dflux(a)), np.abs(sample.dflux(b)))
    else:
        raise DomainError(f"unknown speed mode {speed!r}")
    out = 0.5 * (sample.flux(a) + sample.flux(b)) - 0.5 * s * (b - a)
    out = np.asarray(out, dtype=float)
    return out[()] if out.ndim == 0 else out


def cfl_timestep(grid: Grid1D, lam: float, cfl: float = 0.2) -> float:
    if not (0.0 < cfl < 1.0):
        raise DomainError(f"cfl must lie in (0, 1), got {cfl}")
    return cfl * grid.dx ** max(1.0, lam)


def project_initial(sample: ModelSample, grid: Grid1D) -> SolutionField:
    return SolutionField(grid, sample.initial.cell_averages(grid.edges), 0.0)


def convective_difference(u, dx, sample, boundary, speed="interval"):
    """(F_{i+1/2} - F_{i-1/2}) / dx with ghost cells set by the boundary mode."""
    if boundary is BoundaryMode.PERIODIC:
        ext = np.concatenate(([u[-1]], u, [u[0]]))
    else:
        ext = np.concatenate(([u[0]], u, [u[-1]]))
    flux = numerical_flux_llf(ext[:-1], ext[1:], sample, speed)
    return (flux[1:] - flux[:-1]) / dx


def _check_dt(dt, kernel):
    bound = kernel.grid.dx ** max(1.0, kernel.lam)
    if not (dt > 0.0):
        raise CflError(f"time step must be positive, got {dt}")
    if dt > bound * (1.0 + 1e-12):
        raise CflError(f"dt={dt:.6g} exceeds the stability bound dx^max(1,lambda)={bound:.6g}")


def step_explicit(
    state: SolutionField,
    sample: ModelSample,
    kernel: FractionalKernel,
    dt: float,
    boundary: BoundaryMode = BoundaryMode.CONSTANT_EXTENSION,
    speed: str = "interval",
) -> SolutionField:
    boundary = BoundaryMode.parse(boundary)
    _check_dt(dt, kernel)
    u = state.values
    conv = convective_difference(u, state.grid.dx, sample, boundary, speed)
    diff = apply_nonlocal(kernel, sample.diffusion(u), boundary)
    return SolutionField(state.grid, u - dt * conv + dt * diff, state.time + dt)


def implicit_residual(v, w, sample, kernel, dt, boundary):
    """V - W - dt L[A(V)], where W is the convective predictor."""
    return v - w - dt * apply_nonlocal(kernel, sample.diffusion(v), boundary)


class _LuCache:
    """Reuse the last factorisation while dt and the active set of A' are unchanged."""

    def __init__(self):
        self.key = None
        self.lu = None
        self.count = 0

    def get(self, matrix, slope, dt):
        key = (dt, slope.tobytes())
        if key != self.key:
            jac = -dt * matrix * slope[None, :]
            jac[np.diag_indices_from(jac)] += 1.0
            lu, piv = lu_factor(jac, check_finite=False)
            d = np.abs(np.diag(lu))
            if not np.all(np.isfinite(d)) or d.min() == 0.0:
                raise SingularJacobianError("Newton Jacobian is singular")
            self.key, self.lu = key, (lu, piv)
            self.count += 1
        return self.lu


def step_explicit_implicit(
    state: SolutionField,
    sample: ModelSample,
    kernel: FractionalKernel,
    dt: float,
    boundary: BoundaryMode = BoundaryMode.CONSTANT_EXTENSION,
    max_iters: int = 50,
    speed: str = "interval",
    cache: Optional[_LuCache] = None,
):
    """Implicit-in-diffusion step; returns (new state, StepReport).

    Newton starts from U^n and stops once the max-norm residual is at most dt*dx.
    Each iterate solves J V_new = W + dt M (A(V) - A'(V) V) directly, so a
    vanishing diffusion reproduces the explicit update bit for bit.
    """
    boundary = BoundaryMode.parse(boundary)
    _check_dt(dt, kernel)
    if cache is None:
        cache = _LuCache()
    grid = state.grid
    tol = dt * grid.dx
    u = state.values
    w = u - dt * convective_difference(u, grid.dx, sample, boundary, speed)
    matrix = None

    v = u.copy()
    res = np.max(np.abs(implicit_residual(v, w, sample, kernel, dt, boundary)))
    it = 0
    while res > tol:
        if it >= max_iters:
            raise NewtonConvergenceError(f"Newton did not converge in {max_iters} iterations", res)
        slope = np.asarray(sample.ddiffusion(v), dtype=float)
        if np.any(slope != 0.0):
            if matrix is None:
                matrix = kernel.matrix(boundary)
            rhs = w + dt * apply_nonlocal(kernel, sample.diffusion(v) - slope * v, boundary)
            v_new = lu_solve(cache.get(matrix, slope, dt), rhs, check_finite=False)
        else:
            v_new = w.copy()
        new_res = np.max(np.abs(implicit_residual(v_new, w, sample, kernel, dt, boundary)))
        theta = 1.0
        halvings = 0
        while not (new_res <= res) and halvings < 30:
            theta *= 0.5
            halvings += 1
            trial = v + theta * (v_new - v)
            trial_res = np.max(np.abs(implicit_residual(trial, w, sample, kernel, dt, boundary)))
            if trial_res <= res or halvings == 30:
                v_new, new_res = trial, trial_res
        if not np.isfinite(new_res):
            raise NewtonConvergenceError("Newton iterate became non-finite", new_res)
        v, res = v_new, new_res
        it += 1
    return SolutionField(grid, v, state.time + dt), StepReport(dt, it, float(res))


def solve_with_stats(
    sample: ModelSample,
    grid: Grid1D,
    lam: float,
    config: SolverConfig = SolverConfig(),
    record_steps: bool = False,
):
    """Integrate from t = 0 to exactly t = T; returns (field, SolveStats)."""
    kernel = kernel_for(grid, float(lam))
    stats = SolveStats(critical_lambda=(lam == 1.0), reports=[] if record_steps else None)
    state = project_initial(sample, grid)
    T = config.T
    if T == 0.0:
        return state, stats
    dt0 = cfl_timestep(grid, lam, config.cfl)
    n_full = int(math.floor(T / dt0))
    last = T - n_full * dt0
    if last <= 1e-12 * T:
        last = 0.0
    steps = [dt0] * n_full + ([last] if last > 0.0 else [])
    cache = _LuCache()
    implicit = config.scheme is SchemeKind.EXPLICIT_IMPLICIT
    for dt in steps:
        if implicit:
            state, rep = step_explicit_implicit(
                state, sample, kernel, dt, config.boundary, config.newton_max_iters,
                config.flux_speed, cache,
            )
            stats.newton_iterations += rep.newton_iterations
            stats.max_residual = max(stats.max_residual, rep.residual)
        else:
            state = step_explicit(state, sample, kernel, dt, config.boundary, config.flux_speed)
            rep = StepReport(dt)
        if record_steps:
            stats.reports.append(rep)
        stats.steps += 1
    stats.lu_factorisations = cache.count
    return SolutionField(grid, state.values, T), stats


def solve(sample: ModelSample, grid: Grid1D, lam: float, config: SolverConfig = SolverConfig()) -> SolutionField:
    return solve_with_stats(sample, grid, lam, config)[0]
