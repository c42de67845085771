"""Dispersal kernels: analytic families and their sampled matrices.

Kernels are normalized over the whole line (gaussian: 1/(sqrt(2 pi) sigma),
tophat: 1/(2 rho)); no re-normalization over the domain is applied.  The
mass lost outside the domain is deliberate: it is exactly what separates
the no-flux and lethal-boundary operator types.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import KernelError
from .grid import Grid, _readonly

FAMILIES = ("gaussian", "tophat", "table")


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its parameter (or an explicit sampled table).

    Table kernels accept sampled values whose continuity cannot be
    checked; only nonnegativity and a positive diagonal are enforced.
    """

    family: str
    param: float = 0.0
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        if self.family in ("gaussian", "tophat") and not self.param > 0:
            raise KernelError(f"{self.family} kernel needs a positive parameter")
        if self.family == "table":
            if self.table is None:
                raise KernelError("table kernel needs explicit values")
            object.__setattr__(self, "table", _readonly(self.table))

    @classmethod
    def gaussian(cls, sigma: float) -> "KernelSpec":
        return cls("gaussian", float(sigma))

    @classmethod
    def tophat(cls, rho: float) -> "KernelSpec":
        return cls("tophat", float(rho))

    @classmethod
    def from_table(cls, values: np.ndarray) -> "KernelSpec":
        return cls("table", table=np.asarray(values, dtype=np.float64))


@dataclass(frozen=True)
class KernelMatrix:
    """Kernel sampled at node pairs: entries[i, j] = k(x_i, x_j)."""

    grid: Grid
    entries: np.ndarray
    symmetric: bool

    def __post_init__(self):
        object.__setattr__(self, "entries", _readonly(self.entries))
        n = self.grid.n_nodes
        if self.entries.shape != (n, n):
            raise KernelError("kernel matrix shape does not match grid")
        if np.any(self.entries < 0):
            raise KernelError("kernel entries must be nonnegative")
        if np.any(np.diagonal(self.entries) <= 0):
            raise KernelError("kernel must be positive on the diagonal")

    @property
    def n(self) -> int:
        return self.grid.n_nodes


def build_kernel_matrix(spec: KernelSpec, grid: Grid) -> KernelMatrix:
    """Sample the kernel at all node pairs with its whole-line normalization."""
    x = grid.nodes
    if spec.family == "gaussian":
        sigma = spec.param
        diff = x[:, None] - x[None, :]
        entries = np.exp(-(diff * diff) / (2.0 * sigma * sigma))
        entries /= math.sqrt(2.0 * math.pi) * sigma
    elif spec.family == "tophat":
        rho = spec.param
        diff = np.abs(x[:, None] - x[None, :])
        entries = np.where(diff <= rho, 1.0 / (2.0 * rho), 0.0)
    else:
        entries = np.asarray(spec.table, dtype=np.float64)
        if entries.shape != (grid.n_nodes, grid.n_nodes):
            raise KernelError(
                f"table kernel is {entries.shape}, grid has {grid.n_nodes} nodes")
    symmetric = bool(np.array_equal(entries, entries.T))
    return KernelMatrix(grid=grid, entries=entries, symmetric=symmetric)
