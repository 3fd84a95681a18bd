"""Single-level Monte Carlo estimation of the mean field, plus helpers shared with MLMC."""

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, FracMlmcError, SampleFailure
from .mesh import Grid1D, SolutionField
from .model import ParamDistribution, SampleSeed, draw_params, make_sample
from .solver import SchemeKind, SolverConfig, solve_with_stats

__all__ = [
    "McConfig",
    "EstimatorResult",
    "mc_sample_count",
    "mc_estimate",
    "exact_mean",
    "pointwise_variance",
]


def _sample_exponent(lam: float, scheme: SchemeKind) -> float:
    """2*Theta: the exponent in M ~ dx^(-2 Theta) balancing sampling and bias."""
    if not (0.0 < lam < 2.0) or lam == 1.0:
        raise DomainError(f"lambda must lie in (0, 1) or (1, 2), got {lam}")
    if scheme is SchemeKind.EXPLICIT:
        return 0.5 if lam <= 2.0 / 3.0 else (2.0 - lam) / (2.0 + lam)
    return 0.5 if lam < 1.0 else (2.0 - lam) / 2.0


def mc_sample_count(dx: float, lam: float, C_mc: float = 2.0, scheme=SchemeKind.EXPLICIT) -> int:
    """ceil(C dx^-1/2) for lambda <= 2/3, ceil(C dx^-(2-lambda)/(2+lambda)) above (explicit scheme)."""
    if not dx > 0:
        raise DomainError(f"dx must be positive, got {dx}")
    if not C_mc > 0:
        raise DomainError(f"C_mc must be positive, got {C_mc}")
    e = _sample_exponent(lam, SchemeKind.parse(scheme))
    return max(1, int(math.ceil(C_mc * dx ** (-e))))


@dataclass(frozen=True)
class McConfig:
    """Either a fixed sample count or the automatic rule with constant C_mc."""

    samples: Optional[int] = None
    C_mc: float = 2.0
    master_seed: int = 0
    level_designator: int = 0

    def __post_init__(self):
        if self.samples is not None and (int(self.samples) != self.samples or self.samples < 1):
            raise DomainError(f"samples must be a positive integer, got {self.samples}")
        if not self.C_mc > 0:
            raise DomainError(f"C_mc must be positive, got {self.C_mc}")

    def resolve(self, grid: Grid1D, lam: float, scheme=SchemeKind.EXPLICIT) -> int:
        if self.samples is not None:
            return int(self.samples)
        return mc_sample_count(grid.dx, lam, self.C_mc, scheme)


@dataclass
class EstimatorResult:
    mean: SolutionField
    variance: SolutionField
    samples_per_level: Tuple[int, ...]
    wall_time: float
    step_counts: Tuple[int, ...]
    newton_iterations: int = 0


def exact_mean(samples: np.ndarray) -> np.ndarray:
    """Columnwise mean, reference-shifted and summed with math.fsum.

    Independent of sample order up to the choice of the first row, and exact
    whenever all rows coincide.
    """
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[0]
    ref = samples[0]
    if m == 1:
        return ref.copy()
    diffs = samples - ref
    corr = np.array([math.fsum(col) for col in diffs.T]) / m
    return ref + corr


def pointwise_variance(samples: np.ndarray, mean: np.ndarray) -> np.ndarray:
    """(1/M) sum_k (u_k - mean)^2, nonnegative by construction."""
    dev = np.asarray(samples, dtype=float) - mean
    return np.einsum("ij,ij->j", dev, dev) / dev.shape[0]


def _run_task(task):
    """Draw one parameter set and solve it on each requested grid."""
    factory, dist, seed, grids, lam, config = task
    try:
        sample = factory(draw_params(dist, seed))
        out, steps, newton = [], 0, 0
        for grid in grids:
            field, stats = solve_with_stats(sample, grid, lam, config)
            out.append(field.values)
            steps += stats.steps
            newton += stats.newton_iterations
        return out, steps, newton
    except (FracMlmcError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        raise SampleFailure(seed.level, seed.index, exc) from exc


def run_tasks(tasks: Sequence, workers: int = 1):
    """Evaluate tasks, returning results in task order whatever the schedule."""
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=chunk))


def mc_estimate(
    grid: Grid1D,
    lam: float,
    dist: ParamDistribution,
    solver_config: SolverConfig = SolverConfig(),
    mc_config: McConfig = McConfig(),
    model_factory: Callable = make_sample,
    workers: int = 1,
) -> EstimatorResult:
    """Plain Monte Carlo mean and variance of the solution at time T on ``grid``."""
    m = mc_config.resolve(grid, lam, solver_config.scheme)
    t0 = time.perf_counter()
    tasks = [
        (model_factory, dist, SampleSeed(mc_config.master_seed, mc_config.level_designator, k),
         (grid,), lam, solver_config)
        for k in range(m)
    ]
    results = run_tasks(tasks, workers)
    samples = np.stack([r[0][0] for r in results])
    mean = exact_mean(samples)
    var = pointwise_variance(samples, mean)
    wall = time.perf_counter() - t0
    T = solver_config.T
    return EstimatorResult(
        mean=SolutionField(grid, mean, T),
        variance=SolutionField(grid, var, T),
        samples_per_level=(m,),
        wall_time=wall,
        step_counts=(sum(r[1] for r in results),),
        newton_iterations=sum(r[2] for r in results),
    )
