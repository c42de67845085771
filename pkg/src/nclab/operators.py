"""Discrete dispersal operators.

Three kinds are assembled from a sampled kernel on a shared grid:

* ``N``      no-flux form: absorption a(x) is the quadrature of the
             kernel column mass over the domain, so constants are in the
             null space when the kernel is symmetric;
* ``D``      lethal-boundary form: absorption is identically 1, so mass
             leaks wherever the kernel range crosses the boundary;
* ``mixed``  convex combination of the N form (weight alpha) and a
             homogeneous-Neumann 3-point Laplacian (weight 1 - alpha).

The assembled dense matrix includes the dispersal rate.  With a symmetric
kernel every kind is self-adjoint under the quadrature-weighted inner
product; code working with "symmetric" operators is written against that
weighted product, never plain matrix symmetry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import OperatorError
from .grid import Grid, ScalarField, _readonly
from .kernels import KernelMatrix

KINDS = ("N", "D", "mixed")


def neumann_laplacian(grid: Grid) -> np.ndarray:
    """3-point Laplacian with mirrored ghost nodes (zero row sums)."""
    n = grid.n_nodes
    h2 = grid.h * grid.h
    T = np.zeros((n, n))
    idx = np.arange(n)
    T[idx, idx] = -2.0 / h2
    T[idx[:-1], idx[:-1] + 1] = 1.0 / h2
    T[idx[1:], idx[1:] - 1] = 1.0 / h2
    T[0, 1] = 2.0 / h2
    T[n - 1, n - 2] = 2.0 / h2
    return T


@dataclass(frozen=True)
class DispersalOperator:
    kind: str
    rate: float
    kernel: KernelMatrix
    grid: Grid
    alpha: float
    absorption: np.ndarray
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "absorption", _readonly(self.absorption))
        object.__setattr__(self, "matrix", _readonly(self.matrix))

    @property
    def is_weighted_symmetric(self) -> bool:
        return self.kernel.symmetric

    @property
    def nonlocal_weight(self) -> float:
        """Rate multiplying the kernel part (rate * alpha for mixed)."""
        return self.rate * self.alpha

    @property
    def local_weight(self) -> float:
        """Rate multiplying the Laplacian part (zero for pure nonlocal kinds)."""
        return self.rate * (1.0 - self.alpha)


def assemble_operator(kind: str, d: float, kernel: KernelMatrix, grid: Grid,
                      alpha: float | None = None) -> DispersalOperator:
    """Assemble the dense operator matrix for one species.

    ``d`` may be zero (the operator degenerates to the zero map, which the
    time integrator accepts); the steady-state machinery requires d > 0.
    """
    if kind not in KINDS:
        raise OperatorError(f"unknown operator kind {kind!r}")
    if not grid.same_as(kernel.grid):
        raise OperatorError("kernel was sampled on a different grid")
    if d < 0:
        raise OperatorError("dispersal rate must be nonnegative")
    if kind == "mixed":
        if alpha is None or not 0.0 <= alpha <= 1.0:
            raise OperatorError("mixed operator needs alpha in [0, 1]")
    else:
        if alpha is not None:
            raise OperatorError("alpha is only meaningful for the mixed kind")
        alpha = 1.0

    K = kernel.entries
    wq = grid.weights
    if kind == "D":
        a = np.ones(grid.n_nodes)
    else:
        # quadrature of the column mass: a_i = sum_j k(x_j, x_i) w_j
        a = K.T @ wq

    nonloc = K * wq[None, :] - np.diag(a)
    if kind == "mixed":
        A = d * (alpha * nonloc + (1.0 - alpha) * neumann_laplacian(grid))
    else:
        A = d * nonloc
    return DispersalOperator(kind=kind, rate=float(d), kernel=kernel,
                             grid=grid, alpha=float(alpha), absorption=a,
                             matrix=np.ascontiguousarray(A))


def apply(op: DispersalOperator, phi: ScalarField) -> ScalarField:
    if not op.grid.same_as(phi.grid):
        raise OperatorError("field lives on a different grid")
    return ScalarField(op.grid, op.matrix @ phi.values)


def quadratic_form(op: DispersalOperator, phi: ScalarField) -> float:
    """Weighted quadratic form <phi, op phi>; nonpositive for symmetric kernels.

    Rejected for nonsymmetric kernels, where the form is not sign-definite,
    and for the lethal-boundary kind, whose pairwise rewrite differs.
    """
    _check_form_inputs(op, phi)
    image = op.matrix @ phi.values
    return float(np.dot(op.grid.weights, phi.values * image))


def quadratic_form_pairwise(op: DispersalOperator, phi: ScalarField) -> float:
    """Independent evaluation of the same form as an explicit pair sum.

    Kernel part: -(rate*alpha/2) * sum_ij k_ij w_i w_j (phi_i - phi_j)^2.
    Laplacian part (mixed kind): -(rate*(1-alpha)/h) * sum of squared
    adjacent differences.  Both identities are exact finite-sum rewrites.
    """
    _check_form_inputs(op, phi)
    v = phi.values
    total = -0.5 * op.nonlocal_weight * backend.kernel_diff_form(
        op.kernel.entries, op.grid.weights, v)
    if op.kind == "mixed":
        diffs = np.diff(v)
        total += -op.local_weight / op.grid.h * backend.pairwise_sum(diffs * diffs)
    return total


def _check_form_inputs(op: DispersalOperator, phi: ScalarField):
    if op.kind == "D":
        raise OperatorError("quadratic form is defined for kinds N and mixed")
    if not op.kernel.symmetric:
        raise OperatorError("quadratic form requires a symmetric kernel")
    if not op.grid.same_as(phi.grid):
        raise OperatorError("field lives on a different grid")
