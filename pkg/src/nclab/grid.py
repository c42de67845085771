"""Spatial domain: uniform 1-D grids, trapezoid quadrature, scalar fields.

Grids and fields are immutable after construction (arrays are marked
read-only), so they can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import FieldError, GridError

MIN_NODES = 8


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class Grid:
    """Uniform discretization of an interval with trapezoid weights."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", _readonly(self.nodes))
        object.__setattr__(self, "weights", _readonly(self.weights))
        if self.nodes.ndim != 1 or self.nodes.shape != self.weights.shape:
            raise GridError("nodes and weights must be 1-D arrays of equal length")
        if self.n_nodes < MIN_NODES:
            raise GridError(f"need at least {MIN_NODES} nodes, got {self.n_nodes}")
        if not np.all(np.diff(self.nodes) > 0):
            raise GridError("nodes must be strictly increasing")
        if not np.all(self.weights > 0):
            raise GridError("quadrature weights must be positive")
        length = self.x_hi - self.x_lo
        if abs(float(self.weights.sum()) - length) > 1e-12 * max(length, 1.0):
            raise GridError("quadrature weights do not sum to the interval length")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def x_lo(self) -> float:
        return float(self.nodes[0])

    @property
    def x_hi(self) -> float:
        return float(self.nodes[-1])

    @property
    def h(self) -> float:
        return float(self.nodes[1] - self.nodes[0])

    @property
    def length(self) -> float:
        return self.x_hi - self.x_lo

    def same_as(self, other: "Grid") -> bool:
        return self.nodes.shape == other.nodes.shape and np.array_equal(
            self.nodes, other.nodes)


def make_grid(x_lo: float, x_hi: float, n: int) -> Grid:
    """Uniform grid on [x_lo, x_hi] with composite-trapezoid weights."""
    if not x_lo < x_hi:
        raise GridError(f"degenerate interval [{x_lo}, {x_hi}]")
    if n < MIN_NODES:
        raise GridError(f"need at least {MIN_NODES} nodes, got {n}")
    nodes = np.linspace(x_lo, x_hi, n)
    h = (x_hi - x_lo) / (n - 1)
    weights = np.full(n, h)
    weights[0] = weights[-1] = 0.5 * h
    return Grid(nodes=nodes, weights=weights)


@dataclass(frozen=True)
class ScalarField:
    """Real-valued function sampled on a grid.

    ``kind="density"`` additionally enforces componentwise nonnegativity.
    """

    grid: Grid
    values: np.ndarray
    kind: str = "generic"

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values))
        if self.values.shape != (self.grid.n_nodes,):
            raise FieldError("field length does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise FieldError("field values must be finite")
        if self.kind == "density" and np.any(self.values < 0):
            raise FieldError("density field has negative entries")

    @classmethod
    def constant(cls, grid: Grid, value: float, kind: str = "generic") -> "ScalarField":
        return cls(grid, np.full(grid.n_nodes, float(value)), kind)

    @classmethod
    def from_callable(cls, grid: Grid, fn, kind: str = "generic") -> "ScalarField":
        return cls(grid, np.asarray(fn(grid.nodes), dtype=np.float64), kind)

    def with_values(self, values: np.ndarray, kind: str | None = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.kind if kind is None else kind)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def integrate(f: ScalarField) -> float:
    """Quadrature of the field over the domain: sum of weights * values."""
    return float(np.dot(f.grid.weights, f.values))
