"""Discrete fractional Laplacian on a uniform symmetric grid.

The operator acting on a piecewise-constant field A is

    L[A]_i = sum_{j != 0} G_j (A_{i+j} - A_i),
    G_j    = c_lambda * int_{x_{j-1/2}}^{x_{j+1/2}} |z|^{-1-lambda} dz,

with values outside [-K, K] extended by the nearest boundary cell (the
semi-infinite tails then collapse to closed-form coefficients), or with the
indices wrapped periodically.

Two evaluation paths are provided for the constant extension.  ``direct`` sums
the weighted differences row by row.  ``jumps`` uses summation by parts,

    L[A]_i = sum_{m >= i} dA_m H_{m-i+1} - sum_{m < i} dA_m H_{i-m},
    dA_m   = A_{m+1} - A_m,   H_j = sum_{k >= j} G_k = c/(lambda dx^lambda) (j - 1/2)^{-lambda},

which includes the boundary tails automatically, skips cells where A is
locally constant and vectorises with a fixed per-output accumulation order.
"""

import enum
import math
from functools import cached_property, lru_cache

import numba as nb
import numpy as np
from scipy.special import gamma

from .errors import DomainError, GridMismatchError
from .mesh import Grid1D

__all__ = [
    "BoundaryMode",
    "FractionalKernel",
    "c_lambda",
    "unit_weights",
    "build_weights",
    "apply_nonlocal",
    "kernel_for",
]

LAMBDA_MAX = 2.0 - 1e-8


class BoundaryMode(enum.Enum):
    CONSTANT_EXTENSION = "constant"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise DomainError(f"unknown boundary mode {value!r}; use 'constant' or 'periodic'") from None


def _check_lambda(lam):
    if not (0.0 < lam < 2.0):
        raise DomainError(f"lambda must lie in (0, 2), got {lam}")
    if lam > LAMBDA_MAX:
        raise DomainError(f"lambda={lam} is too close to 2: Gamma(1 - lambda/2) overflows")


def c_lambda(lam: float, d: int = 1) -> float:
    """Normalisation constant of the fractional Laplacian in d dimensions."""
    _check_lambda(lam)
    if d < 1 or int(d) != d:
        raise DomainError(f"dimension must be a positive integer, got {d}")
    value = (
        2.0 ** (lam - 1.0) * lam * gamma((d + lam) / 2.0)
        / (math.pi ** (d / 2.0) * gamma(1.0 - lam / 2.0))
    )
    if not (np.isfinite(value) and value > 0.0):
        raise DomainError(f"c_lambda overflowed for lambda={lam}")
    return float(value)


def unit_weights(lam: float, count: int, c: float | None = None) -> np.ndarray:
    """G_1..G_count for dx = 1.

    (j-1/2)^-lam - (j+1/2)^-lam is evaluated as -(j-1/2)^-lam * expm1(-lam*log1p(1/(j-1/2)))
    to avoid cancellation at large j.
    """
    if c is None:
        c = c_lambda(lam)
    a = np.arange(1, count + 1, dtype=float) - 0.5
    return (c / lam) * a ** (-lam) * -np.expm1(-lam * np.log1p(1.0 / a))


class FractionalKernel:
    """Precomputed weights for one (grid, lambda) pair.  Immutable after construction."""

    def __init__(self, grid: Grid1D, lam: float):
        self.grid = grid
        self.lam = float(lam)
        self.c_lambda = c_lambda(lam)
        n = grid.n_cells
        scale = grid.dx ** (-self.lam)
        self.weights = scale * unit_weights(self.lam, 2 * grid.P, self.c_lambda)
        j = np.arange(1, n + 1, dtype=float)
        # H_j: sum of G_k over k >= j (closed form)
        self.tail_sums = (self.c_lambda / self.lam) * scale * (j - 0.5) ** (-self.lam)
        for arr in (self.weights, self.tail_sums):
            arr.setflags(write=False)

    def __repr__(self):
        return f"FractionalKernel(lam={self.lam}, n={self.grid.n_cells}, dx={self.grid.dx:.6g})"

    def G(self, j: int) -> float:
        j = abs(int(j))
        if j == 0 or j > 2 * self.grid.P:
            raise IndexError(f"weight index {j} outside 1..{2 * self.grid.P}")
        return float(self.weights[j - 1])

    @property
    def left_tail(self) -> np.ndarray:
        """Coefficient of (A_{-P} - A_i) for each cell i."""
        return self.tail_sums

    @property
    def right_tail(self) -> np.ndarray:
        """Coefficient of (A_P - A_i) for each cell i."""
        return self.tail_sums[::-1]

    @cached_property
    def _jump_kernel(self) -> np.ndarray:
        n = self.grid.n_cells
        h = self.tail_sums
        k = np.empty(2 * n - 1)
        # k[n-1 + (i - m)] multiplies dA_m in output i
        k[:n] = h[::-1]
        k[n:] = -h[: n - 1]
        k.setflags(write=False)
        return k

    def total_weight(self) -> np.ndarray:
        """sum over all j != 0 of the coefficient multiplying -A_i (including tails)."""
        n = self.grid.n_cells
        s = np.empty(n)
        g = self.weights
        cum = np.concatenate([[0.0], np.cumsum(g)])
        for a in range(n):
            s[a] = cum[a] + cum[n - 1 - a]
        return s + self.left_tail + self.right_tail

    def matrix(self, mode: BoundaryMode = BoundaryMode.CONSTANT_EXTENSION) -> np.ndarray:
        """Dense matrix M with L[A] = M @ A (used for Newton Jacobians)."""
        mode = BoundaryMode.parse(mode)
        cache = self.__dict__.setdefault("_matrices", {})
        if mode in cache:
            return cache[mode]
        n = self.grid.n_cells
        idx = np.arange(n)
        if mode is BoundaryMode.CONSTANT_EXTENSION:
            dist = np.abs(idx[:, None] - idx[None, :])
            g = np.concatenate([[0.0], self.weights])
            m = g[dist]
            m[:, 0] += self.left_tail
            m[:, n - 1] += self.right_tail
        else:
            P = self.grid.P
            m = np.zeros((n, n))
            for j in range(1, P + 1):
                w = self.weights[j - 1]
                m[idx, (idx + j) % n] += w
                m[idx, (idx - j) % n] += w
        m[idx, idx] = 0.0
        m[idx, idx] = -m.sum(axis=1)
        m.setflags(write=False)
        cache[mode] = m
        return m


def build_weights(grid: Grid1D, lam: float) -> FractionalKernel:
    return FractionalKernel(grid, lam)


@nb.njit(cache=True)
def _apply_direct_constant(g, tail, a, out):
    n = a.shape[0]
    for i in range(n):
        ai = a[i]
        s = 0.0
        for k in range(n):
            if k != i:
                d = k - i if k > i else i - k
                s += g[d - 1] * (a[k] - ai)
        s += tail[i] * (a[0] - ai)
        s += tail[n - 1 - i] * (a[n - 1] - ai)
        out[i] = s


@nb.njit(cache=True)
def _apply_direct_periodic(g, a, out):
    n = a.shape[0]
    p = (n - 1) // 2
    for i in range(n):
        ai = a[i]
        s = 0.0
        for j in range(-p, p + 1):
            if j != 0:
                k = (i + j) % n
                s += g[abs(j) - 1] * (a[k] - ai)
        out[i] = s


@nb.njit(cache=True)
def _apply_jumps(kernel, a, out):
    n = a.shape[0]
    for i in range(n):
        out[i] = 0.0
    for m in range(n - 1):
        da = a[m + 1] - a[m]
        if da != 0.0:
            base = n - 1 - m
            for i in range(n):
                out[i] += da * kernel[base + i]


def apply_nonlocal(
    kernel: FractionalKernel,
    a_values,
    mode: BoundaryMode = BoundaryMode.CONSTANT_EXTENSION,
    method: str = "jumps",
) -> np.ndarray:
    """Evaluate sum_{j != 0} G_j (A_{i+j} - A_i) for every cell i.

    ``method`` selects the evaluation path for the constant extension
    ('jumps' or 'direct'); the periodic mode always sums directly.
    """
    mode = BoundaryMode.parse(mode)
    a = np.ascontiguousarray(a_values, dtype=float)
    n = kernel.grid.n_cells
    if a.ndim != 1 or a.shape[0] != n:
        raise GridMismatchError(f"expected {n} values, got shape {a.shape}")
    out = np.empty(n)
    if mode is BoundaryMode.PERIODIC:
        _apply_direct_periodic(kernel.weights, a, out)
    elif method == "jumps":
        _apply_jumps(kernel._jump_kernel, a, out)
    elif method == "direct":
        _apply_direct_constant(kernel.weights, kernel.tail_sums, a, out)
    else:
        raise ValueError(f"unknown method {method!r}")
    return out


@lru_cache(maxsize=16)
def kernel_for(grid: Grid1D, lam: float) -> FractionalKernel:
    """Shared kernel per (grid, lambda); kernels are immutable so reuse is safe."""
    return FractionalKernel(grid, lam)
