"""Model coefficients, the Buckley-Leverett instance and reproducible parameter draws."""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError

__all__ = [
    "PiecewiseConstant",
    "ModelSample",
    "BlParams",
    "ParamDistribution",
    "SampleSeed",
    "bl_flux",
    "bl_flux_derivative",
    "bl_diffusion",
    "bl_diffusion_derivative",
    "bl_initial",
    "bl_initial_pieces",
    "draw_params",
    "make_sample",
]

BL_HIGH = 0.85
BL_LOW = 0.1


class PiecewiseConstant:
    """Step function with finitely many jumps.

    ``values[k]`` holds on (breaks[k-1], breaks[k]); ``break_values`` (optional)
    gives the value exactly at each break, otherwise the function is
    right-continuous.
    """

    def __init__(self, breaks, values, break_values=None):
        self.breaks = np.asarray(breaks, dtype=float).reshape(-1)
        self.values = np.asarray(values, dtype=float).reshape(-1)
        if self.values.shape[0] != self.breaks.shape[0] + 1:
            raise ValueError("need exactly one more value than breaks")
        if np.any(np.diff(self.breaks) <= 0):
            raise ValueError("breaks must be strictly increasing")
        self.break_values = None if break_values is None else np.asarray(break_values, dtype=float)

    @classmethod
    def constant(cls, value):
        return cls([], [value])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.values[np.searchsorted(self.breaks, x, side="right")]
        if self.break_values is not None and self.breaks.size:
            for b, v in zip(self.breaks, self.break_values):
                out = np.where(x == b, v, out)
        return out[()] if out.ndim == 0 else out

    def cell_averages(self, edges) -> np.ndarray:
        """Exact averages over [edges[a], edges[a+1]] computed from the jump positions."""
        e = np.asarray(edges, dtype=float)
        left, right = e[:-1], e[1:]
        avg = self.values[np.searchsorted(self.breaks, left, side="right")]
        width = right - left
        for k, b in enumerate(self.breaks):
            jump = self.values[k + 1] - self.values[k]
            inside = (left < b) & (b < right)
            avg = np.where(inside, avg + jump * (right - b) / width, avg)
        return avg

    @property
    def bounds(self) -> Tuple[float, float]:
        vals = self.values if self.break_values is None else np.concatenate([self.values, self.break_values])
        return float(vals.min()), float(vals.max())


@dataclass(frozen=True)
class ModelSample:
    """One realisation of (initial datum, convective flux, diffusive flux).

    All callables act elementwise on numpy arrays.  ``speed_bound(lo, hi)``
    returns an upper bound of |f'| on [min(lo,hi), max(lo,hi)]; when absent the
    larger endpoint value is used.
    """

    flux: Callable
    dflux: Callable
    diffusion: Callable
    ddiffusion: Callable
    initial: PiecewiseConstant
    lipschitz_flux: float
    lipschitz_diffusion: float
    speed_bound: Optional[Callable] = None
    params: Optional["BlParams"] = None

    def u0(self, x):
        return self.initial(x)


@dataclass(frozen=True)
class BlParams:
    c: float
    mu: float
    alpha: float

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"viscosity ratio mu must be positive, got {self.mu}")
        if self.alpha < 0:
            raise DomainError(f"alpha must be nonnegative, got {self.alpha}")


def _check_range(name, rng, positive=False, nonneg=False):
    lo, hi = float(rng[0]), float(rng[1])
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise DomainError(f"{name} range must satisfy lower <= upper, got [{lo}, {hi}]")
    if positive and lo <= 0:
        raise DomainError(f"{name} range must be positive, got [{lo}, {hi}]")
    if nonneg and lo < 0:
        raise DomainError(f"{name} range must be nonnegative, got [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class ParamDistribution:
    """Independent uniform laws for (c, mu, alpha); defaults are the benchmark ranges."""

    c: Tuple[float, float] = (0.0, 0.1)
    mu: Tuple[float, float] = (0.3, 0.7)
    alpha: Tuple[float, float] = (0.0, 0.4)
    kind: str = "uniform"

    def __post_init__(self):
        object.__setattr__(self, "c", _check_range("c", self.c))
        object.__setattr__(self, "mu", _check_range("mu", self.mu, positive=True))
        object.__setattr__(self, "alpha", _check_range("alpha", self.alpha, nonneg=True))

    @classmethod
    def fixed(cls, params: BlParams) -> "ParamDistribution":
        return cls((params.c, params.c), (params.mu, params.mu), (params.alpha, params.alpha))

    @property
    def ranges(self):
        return (self.c, self.mu, self.alpha)

    @property
    def is_degenerate(self) -> bool:
        return all(lo == hi for lo, hi in self.ranges)


@dataclass(frozen=True)
class SampleSeed:
    """Key of one random draw; equal keys give equal draws, distinct keys independent ones."""

    master_seed: int
    level: int
    index: int

    def __post_init__(self):
        for name in ("master_seed", "level", "index"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise DomainError(f"{name} must be a nonnegative integer, got {v}")
        if self.master_seed >= 2**64:
            raise DomainError("master_seed must fit in 64 bits")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.level), int(self.index)))
        return np.random.Generator(np.random.Philox(ss))


def draw_params(dist: ParamDistribution, seed: SampleSeed) -> BlParams:
    u = seed.generator().random(3)
    vals = [lo + (hi - lo) * ui for (lo, hi), ui in zip(dist.ranges, u)]
    return BlParams(*vals)


def bl_flux(u, mu):
    u = np.asarray(u, dtype=float)
    u2 = u * u
    out = u2 / (u2 + mu * (1.0 - u) ** 2)
    return out[()] if out.ndim == 0 else out


def bl_flux_derivative(u, mu):
    u = np.asarray(u, dtype=float)
    den = u * u + mu * (1.0 - u) ** 2
    out = 2.0 * mu * u * (1.0 - u) / (den * den)
    return out[()] if out.ndim == 0 else out


def bl_diffusion(u, alpha):
    out = np.maximum(np.asarray(u, dtype=float) - alpha, 0.0)
    return out[()] if out.ndim == 0 else out


def bl_diffusion_derivative(u, alpha):
    # subderivative 0 at the kink u = alpha
    out = (np.asarray(u, dtype=float) > alpha).astype(float)
    return out[()] if out.ndim == 0 else out


def bl_initial(x, c):
    x = np.asarray(x, dtype=float)
    out = np.where((-0.5 + c < x) & (x < 0.0), BL_HIGH, BL_LOW)
    return out[()] if out.ndim == 0 else out


def bl_initial_pieces(c: float) -> PiecewiseConstant:
    if not (-0.5 + c < 0.0):
        return PiecewiseConstant.constant(BL_LOW)
    return PiecewiseConstant(
        [-0.5 + c, 0.0], [BL_LOW, BL_HIGH, BL_LOW], break_values=[BL_LOW, BL_LOW]
    )


def _bl_speed_peak(mu: float) -> Tuple[float, float]:
    """Location and value of the maximum of f' on [0, 1] (f' is unimodal there)."""
    res = minimize_scalar(
        lambda u: -bl_flux_derivative(u, mu), bounds=(0.0, 1.0), method="bounded",
        options={"xatol": 1e-12},
    )
    u_star = float(res.x)
    return u_star, float(bl_flux_derivative(u_star, mu))


def make_sample(params: BlParams) -> ModelSample:
    mu, alpha = params.mu, params.alpha
    u_star, peak = _bl_speed_peak(mu)

    def speed_bound(lo, hi):
        lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
        ends = np.maximum(np.abs(bl_flux_derivative(lo, mu)), np.abs(bl_flux_derivative(hi, mu)))
        return np.where((lo <= u_star) & (u_star <= hi), np.maximum(peak, ends), ends)

    grid = np.linspace(BL_LOW, BL_HIGH, 1025)
    lf = 1.1 * float(np.max(np.abs(bl_flux_derivative(grid, mu))))
    return ModelSample(
        flux=lambda u: bl_flux(u, mu),
        dflux=lambda u: bl_flux_derivative(u, mu),
        diffusion=lambda u: bl_diffusion(u, alpha),
        ddiffusion=lambda u: bl_diffusion_derivative(u, alpha),
        initial=bl_initial_pieces(params.c),
        lipschitz_flux=lf,
        lipschitz_diffusion=1.0,
        speed_bound=speed_bound,
        params=params,
    )
