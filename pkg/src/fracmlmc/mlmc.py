"""Multilevel Monte Carlo: convergence/work exponents, optimal sample counts and the coupled estimator."""

import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, GridMismatchError, ToleranceTooSmallError
from .mc import EstimatorResult, exact_mean, pointwise_variance, run_tasks
from .mesh import MeshHierarchy, SolutionField
from .model import ParamDistribution, SampleSeed, make_sample
from .solver import SchemeKind, SolverConfig

__all__ = [
    "RateExponents",
    "MlmcPlan",
    "rate_exponents",
    "default_tolerance",
    "level_sample_counts",
    "mlmc_estimate",
    "work_model",
]

LOG3 = math.log(3.0)


@dataclass(frozen=True)
class RateExponents:
    theta: float
    r: float
    scheme: SchemeKind
    lam: float


def rate_exponents(lam: float, scheme=SchemeKind.EXPLICIT) -> RateExponents:
    """L2 convergence order theta and per-solve work exponent r of a scheme."""
    scheme = SchemeKind.parse(scheme)
    if not (0.0 < lam < 2.0):
        raise DomainError(f"lambda must lie in (0, 2), got {lam}")
    if lam == 1.0:
        raise DomainError("lambda = 1 is the critical case and has no rate theory; use lambda != 1")
    if scheme is SchemeKind.EXPLICIT:
        theta = 0.25 if lam <= 2.0 / 3.0 else (2.0 - lam) / (2.0 * (2.0 + lam))
        r = 3.0 if lam < 1.0 else lam + 2.0
    else:
        theta = 0.25 if lam < 1.0 else (2.0 - lam) / 4.0
        r = 4.0 if lam < 1.0 else 3.0 + lam
    return RateExponents(theta, r, scheme, float(lam))


def default_tolerance(hierarchy: MeshHierarchy, exponents: RateExponents) -> float:
    return 2.0 * hierarchy.finest.dx ** (2.0 * exponents.theta)


def _real_counts(hierarchy, exponents, epsilon):
    """Unrounded M_0..M_L of the optimal allocation."""
    theta, r = exponents.theta, exponents.r
    L = hierarchy.levels
    dx0 = hierarchy.dx(0)
    denom = epsilon - dx0 ** (2.0 * theta) * 3.0 ** (-2.0 * theta * L)
    if not denom > 0.0:
        raise ToleranceTooSmallError(
            f"tolerance {epsilon:.6g} does not exceed the finest-level bias {epsilon - denom:.6g}"
        )
    js = np.arange(1, L + 1)
    growth = 3.0 ** (js * (r / 2.0 - theta))
    decay = 3.0 ** (-js * (theta + r / 2.0))
    if exponents.scheme is SchemeKind.EXPLICIT:
        m0 = (1.0 + dx0**theta * growth.sum()) / denom
        rest = m0 * dx0**theta * decay
    else:
        lg = math.log(1.0 / dx0)
        levels_log = np.sqrt(js * LOG3 + lg)
        m0 = (math.sqrt(lg) + dx0**theta * (growth * levels_log).sum()) / (denom * math.sqrt(lg))
        rest = m0 * math.sqrt(lg) * dx0**theta * decay / levels_log
    return m0, rest


def level_sample_counts(
    hierarchy: MeshHierarchy,
    exponents: RateExponents,
    epsilon: Optional[float] = None,
    rounding: str = "real",
) -> np.ndarray:
    """Per-level sample counts M_0..M_L.

    ``rounding='real'`` takes the ceiling of every level from the unrounded
    M_0; ``rounding='integer'`` first rounds M_0 up and scales the integer.
    """
    if epsilon is None:
        epsilon = default_tolerance(hierarchy, exponents)
    m0, rest = _real_counts(hierarchy, exponents, epsilon)
    if rounding == "real":
        counts = [math.ceil(m0)] + [math.ceil(x) for x in rest]
    elif rounding == "integer":
        m0i = math.ceil(m0)
        counts = [m0i] + [math.ceil(x * m0i / m0) for x in rest]
    else:
        raise DomainError(f"rounding must be 'real' or 'integer', got {rounding!r}")
    return np.maximum(np.array(counts, dtype=int), 1)


@dataclass(frozen=True)
class MlmcPlan:
    hierarchy: MeshHierarchy
    M: tuple
    epsilon: float
    exponents: RateExponents

    def __post_init__(self):
        m = tuple(int(x) for x in self.M)
        if len(m) != self.hierarchy.levels + 1:
            raise GridMismatchError(
                f"plan has {len(m)} sample counts for {self.hierarchy.levels + 1} levels"
            )
        if min(m) < 1:
            raise DomainError("every level needs at least one sample")
        object.__setattr__(self, "M", m)

    @property
    def L(self) -> int:
        return self.hierarchy.levels

    @classmethod
    def build(cls, hierarchy, exponents, epsilon=None, rounding="real") -> "MlmcPlan":
        if epsilon is None:
            epsilon = default_tolerance(hierarchy, exponents)
        counts = level_sample_counts(hierarchy, exponents, epsilon, rounding)
        return cls(hierarchy, tuple(counts), epsilon, exponents)


def work_model(plan: MlmcPlan, scheme=None) -> float:
    """sum_l M_l dx_l^-r, times max(1, ln ln(1/dx_l)) for the explicit-implicit scheme."""
    scheme = plan.exponents.scheme if scheme is None else SchemeKind.parse(scheme)
    total = 0.0
    for l, m in enumerate(plan.M):
        dx = plan.hierarchy.dx(l)
        term = m * dx ** (-plan.exponents.r)
        if scheme is SchemeKind.EXPLICIT_IMPLICIT:
            inner = math.log(1.0 / dx)
            term *= max(1.0, math.log(inner)) if inner > 1.0 else 1.0
        total += term
    return total


def mlmc_estimate(
    plan: MlmcPlan,
    dist: ParamDistribution,
    lam: float,
    solver_config: SolverConfig = SolverConfig(),
    master_seed: int = 0,
    coupling: str = "level",
    model_factory: Callable = make_sample,
    workers: int = 1,
) -> EstimatorResult:
    """Sum over levels of sample means of u_l - u_{l-1}, evaluated on the finest grid.

    Sample k of level l >= 1 draws one parameter set and solves it on grids l
    and l-1; the coarse solution is prolonged to grid l before differencing.
    ``coupling='level'`` keys the draw by (seed, l, k); ``coupling='shared'``
    reuses the level-0 stream on every level.
    """
    if coupling not in ("level", "shared"):
        raise DomainError(f"coupling must be 'level' or 'shared', got {coupling!r}")
    hier = plan.hierarchy
    L = plan.L
    finest = hier.finest
    t0 = time.perf_counter()

    tasks, owners = [], []
    for l, m in enumerate(plan.M):
        grids = (hier[l],) if l == 0 else (hier[l], hier[l - 1])
        designator = l if coupling == "level" else 0
        for k in range(m):
            tasks.append((model_factory, dist, SampleSeed(master_seed, designator, k), grids, lam, solver_config))
            owners.append(l)
    results = run_tasks(tasks, workers)

    terms = []
    variance = np.zeros(finest.n_cells)
    steps = [0] * (L + 1)
    newton = 0
    pos = 0
    for l, m in enumerate(plan.M):
        chunk = results[pos : pos + m]
        pos += m
        up = 3 ** (L - l)
        fine = np.stack([r[0][0] for r in chunk])
        if l == 0:
            diff = fine
            terms.append(np.repeat(exact_mean(fine), up))
        else:
            coarse = np.repeat(np.stack([r[0][1] for r in chunk]), 3, axis=1)
            diff = fine - coarse
            terms.append(np.repeat(exact_mean(fine), up))
            terms.append(-np.repeat(exact_mean(coarse), up))
        d_mean = exact_mean(diff)
        variance += np.repeat(pointwise_variance(diff, d_mean), up)
        steps[l] = sum(r[1] for r in chunk)
        newton += sum(r[2] for r in chunk)

    stacked = np.stack(terms)
    mean = np.array([math.fsum(col) for col in stacked.T])
    wall = time.perf_counter() - t0
    T = solver_config.T
    return EstimatorResult(
        mean=SolutionField(finest, mean, T),
        variance=SolutionField(finest, variance, T),
        samples_per_level=plan.M,
        wall_time=wall,
        step_counts=tuple(steps),
        newton_iterations=newton,
    )
