"""Reference means by tensor trapezoidal quadrature, RMS errors and convergence-rate fits."""

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import DomainError, GridMismatchError, SampleFailure, UnsupportedConfigurationError
from .mesh import Grid1D, MeshHierarchy, SolutionField, transfer
from .mlmc import MlmcPlan, mlmc_estimate, rate_exponents, work_model
from .model import BlParams, ParamDistribution, make_sample
from .solver import SchemeKind, SolverConfig, solve

__all__ = [
    "ReferenceConfig",
    "RmsReport",
    "StudyRow",
    "trapezoid_rule",
    "reference_solution",
    "rms_error",
    "l2_norm",
    "fit_rate",
    "work_per_log",
    "repetition_seed",
    "table_study",
]


@dataclass(frozen=True)
class ReferenceConfig:
    q_c: int = 9
    q_mu: int = 9
    q_alpha: int = 9
    grid: Grid1D = Grid1D(5.0, 3321)
    solver_config: SolverConfig = SolverConfig()
    dist: ParamDistribution = ParamDistribution()

    def __post_init__(self):
        for name in ("q_c", "q_mu", "q_alpha"):
            q = getattr(self, name)
            if int(q) != q or q < 1:
                raise DomainError(f"{name} must be a positive integer, got {q}")

    @property
    def total_solves(self) -> int:
        return self.q_c * self.q_mu * self.q_alpha


def trapezoid_rule(lo: float, hi: float, q: int):
    """Nodes and probability weights of the composite trapezoid rule for U(lo, hi)."""
    if lo == hi:
        return np.array([lo]), np.array([1.0])
    if q < 2:
        raise UnsupportedConfigurationError(
            f"a nondegenerate range [{lo}, {hi}] needs at least 2 quadrature points, got {q}"
        )
    nodes = np.linspace(lo, hi, q)
    w = np.full(q, 1.0 / (q - 1))
    w[0] = w[-1] = 0.5 / (q - 1)
    return nodes, w


def _solve_params(task):
    factory, params, grid, lam, config = task
    try:
        return solve(factory(params), grid, lam, config).values
    except Exception as exc:
        raise SampleFailure(-1, repr(params), exc) from exc


def reference_solution(
    cfg: ReferenceConfig,
    lam: float,
    model_factory: Callable = make_sample,
    workers: int = 1,
) -> SolutionField:
    """Quadrature approximation of the mean over the parameter box.

    Every product w_c w_mu w_alpha u(c, mu, alpha) is summed per cell with
    math.fsum, so the result does not depend on the evaluation order.
    """
    if cfg.dist.kind != "uniform":
        raise UnsupportedConfigurationError(
            f"tensor trapezoidal reference needs uniform parameters, got {cfg.dist.kind!r}"
        )
    rules = [
        trapezoid_rule(*cfg.dist.c, cfg.q_c),
        trapezoid_rule(*cfg.dist.mu, cfg.q_mu),
        trapezoid_rule(*cfg.dist.alpha, cfg.q_alpha),
    ]
    tasks, weights = [], []
    for c, wc in zip(*rules[0]):
        for mu, wm in zip(*rules[1]):
            for a, wa in zip(*rules[2]):
                tasks.append((model_factory, BlParams(c, mu, a), cfg.grid, lam, cfg.solver_config))
                weights.append(wc * wm * wa)
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(_solve_params, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        values = [_solve_params(t) for t in tasks]
    terms = np.stack(values) * np.asarray(weights)[:, None]
    mean = np.array([math.fsum(col) for col in terms.T])
    return SolutionField(cfg.grid, mean, cfg.solver_config.T)


def l2_norm(values, dx: float) -> float:
    v = np.asarray(values, dtype=float)
    return math.sqrt(float(np.dot(v, v)) * dx)


@dataclass(frozen=True)
class RmsReport:
    errors: np.ndarray
    rms: float
    Q: int


def rms_error(estimates: Sequence[SolutionField], reference: SolutionField) -> RmsReport:
    """Root mean square over repetitions of the relative discrete L2 error."""
    if len(estimates) == 0:
        raise DomainError("need at least one estimate")
    ref = reference.values
    dx = reference.grid.dx
    ref_norm = l2_norm(ref, dx)
    if ref_norm == 0.0:
        raise DomainError("reference field has zero norm")
    errs = []
    for est in estimates:
        try:
            v = transfer(est, reference.grid).values
        except GridMismatchError as exc:
            raise GridMismatchError(f"estimate is not comparable to the reference grid: {exc}") from exc
        errs.append(l2_norm(ref - v, dx) / ref_norm)
    errs = np.array(errs)
    return RmsReport(errs, math.sqrt(float(np.mean(errs**2))), len(errs))


def fit_rate(xs, ys) -> float:
    """r such that ys ~ xs^(-r), by least squares in log-log coordinates."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise DomainError("fit_rate needs two equally long vectors with at least 2 entries")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DomainError("fit_rate needs strictly positive data")
    slope = np.polyfit(np.log(x), np.log(y), 1)[0]
    return float(-slope)


def work_per_log(work):
    """work / ln(work), the effective work variable of the explicit-implicit estimate."""
    w = np.asarray(work, dtype=float)
    return w / np.log(w)


def repetition_seed(seed: int, q: int) -> int:
    """Independent 64-bit master seed for repetition q of a study."""
    return int(np.random.SeedSequence([int(seed), int(q)]).generate_state(1, np.uint64)[0])


@dataclass
class StudyRow:
    L: int
    M: tuple
    N_L: int
    runtime_s: float
    work_model: float
    rms: Optional[float] = None
    estimates: List[SolutionField] = field(default_factory=list, repr=False)


def table_study(
    lam: float,
    scheme,
    levels: Sequence[int],
    n0: int = 41,
    K: float = 5.0,
    Q: int = 30,
    seed: int = 0,
    dist: ParamDistribution = ParamDistribution(),
    solver_config: Optional[SolverConfig] = None,
    reference: Optional[SolutionField] = None,
    run_estimates: bool = True,
    model_factory: Callable = make_sample,
    workers: int = 1,
    keep_estimates: bool = False,
) -> List[StudyRow]:
    """One row per L: sample counts, work model and (optionally) Q-repetition RMS and runtime."""
    scheme = SchemeKind.parse(scheme)
    if solver_config is None:
        solver_config = SolverConfig(scheme=scheme)
    exps = rate_exponents(lam, scheme)
    base = Grid1D(K, n0)
    rows = []
    for L in levels:
        plan = MlmcPlan.build(MeshHierarchy(base, L), exps)
        row = StudyRow(L, plan.M, plan.hierarchy.finest.n_cells, 0.0, work_model(plan))
        if run_estimates:
            ests = []
            for q in range(Q):
                res = mlmc_estimate(
                    plan, dist, lam, solver_config, repetition_seed(seed, q),
                    model_factory=model_factory, workers=workers,
                )
                row.runtime_s += res.wall_time
                ests.append(res.mean)
            if reference is not None:
                row.rms = rms_error(ests, reference).rms
            if keep_estimates:
                row.estimates = ests
        rows.append(row)
    return rows
