"""Uniform symmetric 1-D grids, nested 3-refinement hierarchies and cell-average fields.

A grid on [-K, K] has an odd number of cells N = 2P + 1 so that one cell is
centred at x = 0; cell i (i = -P..P) has centre i*dx.  Refining by 3 keeps the
cell at the origin and splits every coarse cell into exactly three children.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import DomainError, GridMismatchError

__all__ = [
    "Grid1D",
    "MeshHierarchy",
    "SolutionField",
    "restrict",
    "prolong",
    "transfer",
    "field_to_csv",
]


@dataclass(frozen=True)
class Grid1D:
    half_width: float
    n_cells: int
    dx: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if isinstance(self.n_cells, bool) or int(self.n_cells) != self.n_cells:
            raise DomainError(f"n_cells must be an integer, got {self.n_cells!r}")
        if self.n_cells < 1 or self.n_cells % 2 == 0:
            raise DomainError(
                f"n_cells must be a positive odd integer (a cell is centred at x=0), got {self.n_cells}"
            )
        if not (np.isfinite(self.half_width) and self.half_width > 0):
            raise DomainError(f"half_width must be positive and finite, got {self.half_width}")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "dx", 2.0 * self.half_width / self.n_cells)

    @property
    def P(self) -> int:
        return (self.n_cells - 1) // 2

    @property
    def indices(self) -> np.ndarray:
        return np.arange(-self.P, self.P + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.indices * self.dx

    @property
    def edges(self) -> np.ndarray:
        """Cell interfaces x_{i-1/2}, i = -P..P+1; the outer ones are exactly -K and K."""
        e = (np.arange(-self.P, self.P + 2) - 0.5) * self.dx
        e[0] = -self.half_width
        e[-1] = self.half_width
        return e

    def refine(self, times: int = 1) -> "Grid1D":
        return Grid1D(self.half_width, self.n_cells * 3**times)

    def is_refinement_of(self, coarse: "Grid1D") -> bool:
        return self.half_width == coarse.half_width and self.n_cells == 3 * coarse.n_cells


class MeshHierarchy:
    """Grids for levels 0..L with N_l = 3^l N_0."""

    def __init__(self, base: Grid1D, levels: int):
        if levels < 0:
            raise DomainError(f"levels must be nonnegative, got {levels}")
        self.base = base
        self.levels = int(levels)
        self.grids: List[Grid1D] = [base.refine(l) for l in range(self.levels + 1)]

    def __getitem__(self, level: int) -> Grid1D:
        return self.grids[level]

    def __len__(self):
        return len(self.grids)

    def __iter__(self):
        return iter(self.grids)

    @property
    def finest(self) -> Grid1D:
        return self.grids[-1]

    def dx(self, level: int) -> float:
        return self.grids[level].dx

    def __repr__(self):
        return f"MeshHierarchy(base={self.base!r}, levels={self.levels})"


class SolutionField:
    """Piecewise-constant cell averages on a grid at time ``time``.

    The value array is copied and frozen on construction.
    """

    __slots__ = ("grid", "values", "time")

    def __init__(self, grid: Grid1D, values, time: float = 0.0):
        v = np.array(values, dtype=float)
        if v.ndim != 1 or v.shape[0] != grid.n_cells:
            raise GridMismatchError(
                f"field has shape {v.shape}, grid expects ({grid.n_cells},)"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("field values must be finite")
        v.setflags(write=False)
        self.grid = grid
        self.values = v
        self.time = float(time)

    def __len__(self):
        return self.values.shape[0]

    def __repr__(self):
        return f"SolutionField(n={self.grid.n_cells}, t={self.time})"

    def mass(self) -> float:
        return float(np.sum(self.values) * self.grid.dx)

    def l1_norm(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.dx)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.dx))


def restrict(fine: SolutionField, coarse_grid: Grid1D) -> SolutionField:
    """Average each triple of fine cells onto its parent cell."""
    if not fine.grid.is_refinement_of(coarse_grid):
        raise GridMismatchError(
            f"cannot restrict {fine.grid.n_cells} cells to {coarse_grid.n_cells}: need a 3:1 refinement"
        )
    v = fine.values.reshape(coarse_grid.n_cells, 3)
    # shifted by the first child so constant triples restrict exactly
    coarse = v[:, 0] + ((v[:, 1] - v[:, 0]) + (v[:, 2] - v[:, 0])) / 3.0
    return SolutionField(coarse_grid, coarse, fine.time)


def prolong(coarse: SolutionField, fine_grid: Grid1D) -> SolutionField:
    """Inject each coarse value into its three children."""
    if not fine_grid.is_refinement_of(coarse.grid):
        raise GridMismatchError(
            f"cannot prolong {coarse.grid.n_cells} cells to {fine_grid.n_cells}: need a 1:3 refinement"
        )
    return SolutionField(fine_grid, np.repeat(coarse.values, 3), coarse.time)


def transfer(f: SolutionField, target: Grid1D) -> SolutionField:
    """Prolong or restrict through any number of 3-refinements."""
    src = f.grid
    if src.half_width != target.half_width:
        raise GridMismatchError("grids cover different domains")
    if src.n_cells == target.n_cells:
        return f
    big, small = max(src.n_cells, target.n_cells), min(src.n_cells, target.n_cells)
    ratio, rem = divmod(big, small)
    k = 0
    while ratio > 1 and ratio % 3 == 0:
        ratio //= 3
        k += 1
    if rem or ratio != 1:
        raise GridMismatchError(f"{src.n_cells} and {target.n_cells} cells are not 3^k-nested")
    if target.n_cells > src.n_cells:
        return SolutionField(target, np.repeat(f.values, 3**k), f.time)
    out = f
    for _ in range(k):
        out = restrict(out, Grid1D(src.half_width, out.grid.n_cells // 3))
    return out


def field_to_csv(f: SolutionField, header: str = "") -> str:
    lines = [header.rstrip("\n")] if header else []
    lines.append("x,value")
    for x, v in zip(f.grid.centers, f.values):
        lines.append(f"{x:.17g},{v:.17g}")
    return "\n".join(lines) + "\n"
