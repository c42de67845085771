"""Principal spectral bounds of dispersal-plus-potential operators.

The quantity computed here drives every stability decision in the
package: the largest real spectral value of ``op + diag(potential)``
together with its positive eigenfunction.  Two independent routes are
available and cross-validated in the tests:

* ``rayleigh_symmetric`` -- for weighted-symmetric operators (symmetric
  kernels), conjugate by sqrt(weights) and take the top eigenpair of the
  resulting symmetric matrix (entries k_ij sqrt(w_i w_j) on the kernel
  part);
* ``perron_power``       -- shift the matrix into the nonnegative cone
  and run power iteration for its Perron root.

A finite nonnegative irreducible matrix always has a Perron eigenpair,
even where the continuum operator it discretizes has no principal
eigenvalue; every result carries that caveat.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ConvergenceError, OperatorError, ReducibleOperatorError
from .grid import ScalarField
from .operators import DispersalOperator

DISCRETIZATION_CAVEAT = (
    "largest eigenvalue of the discretized operator; the continuum "
    "operator may have no principal eigenvalue")

RESIDUAL_RTOL = 1e-9
POWER_MAX_ITER = 50_000
NEUTRAL_BAND = 1e-8


@dataclass(frozen=True)
class SpectralResult:
    lam: float
    eigenfunction: ScalarField
    method: str
    iterations: int
    residual: float
    caveat: str = DISCRETIZATION_CAVEAT

    def to_dict(self) -> dict:
        return {"lambda": self.lam, "method": self.method,
                "iterations": self.iterations, "residual": self.residual,
                "caveat": self.caveat}


@dataclass(frozen=True)
class StabilityVerdict:
    sign: str  # "unstable" | "stable" | "neutral"
    lam: float
    tol: float


def classify_stability(lam: float, scale: float) -> StabilityVerdict:
    """Thresholded sign of a spectral bound at tolerance 1e-8 * scale."""
    if not scale > 0:
        raise ValueError("scale must be positive")
    tol = NEUTRAL_BAND * scale
    if lam > tol:
        sign = "unstable"
    elif lam < -tol:
        sign = "stable"
    else:
        sign = "neutral"
    return StabilityVerdict(sign=sign, lam=float(lam), tol=tol)


def _connected(op: DispersalOperator) -> bool:
    """Breadth-first scan of the nonzero coupling pattern."""
    adj = op.kernel.entries > 0
    if op.kind == "mixed" and op.alpha < 1.0:
        n = adj.shape[0]
        adj = adj.copy()
        idx = np.arange(n - 1)
        adj[idx, idx + 1] = True
        adj[idx + 1, idx] = True
    visited = np.zeros(adj.shape[0], dtype=bool)
    frontier = np.zeros_like(visited)
    frontier[0] = True
    while frontier.any():
        visited |= frontier
        frontier = adj[frontier].any(axis=0) & ~visited
    return bool(visited.all())


def _positivize(B: np.ndarray, sigma: float, phi: np.ndarray) -> np.ndarray:
    """Clip rounding-level negatives and refine with two shifted matvecs."""
    floor = -1e-12 * np.max(np.abs(phi))
    if np.min(phi) < floor:
        raise ConvergenceError("eigenfunction is not positive")
    if np.min(phi) <= 0:
        phi = np.maximum(phi, 0.0)
        M = B + sigma * np.eye(B.shape[0])
        for _ in range(2):
            phi = M @ phi
            phi = phi / np.max(np.abs(phi))
    return phi


def _shift(op: DispersalOperator, potential: np.ndarray) -> float:
    """Shift making op + diag(potential) + sigma*I entrywise nonnegative."""
    sigma = float(np.max(op.nonlocal_weight * op.absorption - potential)) + 1.0
    if op.kind == "mixed":
        sigma += 2.0 * op.local_weight / op.grid.h ** 2
    return max(sigma, 1.0)


def spectral_bound(op: DispersalOperator, potential: ScalarField,
                   method: str = "auto") -> SpectralResult:
    """Largest real spectral value of ``op + diag(potential)``.

    ``method="auto"`` picks the symmetric route for symmetric kernels and
    the Perron route otherwise; either can be forced by name.
    """
    if not op.grid.same_as(potential.grid):
        raise OperatorError("potential lives on a different grid")
    V = potential.values
    B = op.matrix + np.diag(V)
    if method == "auto":
        method = "rayleigh_symmetric" if op.is_weighted_symmetric else "perron_power"

    if method == "rayleigh_symmetric":
        if not op.is_weighted_symmetric:
            raise OperatorError("symmetric route needs a symmetric kernel")
        sq = np.sqrt(op.grid.weights)
        S = B * sq[:, None] / sq[None, :]
        S = 0.5 * (S + S.T)  # kill rounding-level asymmetry before eigh
        evals, evecs = np.linalg.eigh(S)
        lam = float(evals[-1])
        phi = evecs[:, -1] / sq
        if phi[int(np.argmax(np.abs(phi)))] < 0:
            phi = -phi
        phi = _positivize(B, _shift(op, V), phi)
        iterations = 0
    elif method == "perron_power":
        if not _connected(op):
            raise ReducibleOperatorError(
                "operator coupling pattern does not connect the grid "
                "(kernel range too small for the mesh)")
        sigma = _shift(op, V)
        M = B + sigma * np.eye(B.shape[0])
        theta, phi, iterations, resid, status = backend.power_iteration(
            M, np.ones(op.grid.n_nodes), RESIDUAL_RTOL, POWER_MAX_ITER,
            shift=sigma)
        if status != backend.STATUS_CONVERGED:
            raise ConvergenceError(
                f"power iteration did not converge in {iterations} iterations",
                residual=resid, iterations=iterations)
        lam = theta - sigma
    else:
        raise ValueError(f"unknown spectral method {method!r}")

    phi = phi / np.max(np.abs(phi))
    if np.min(phi) <= 0:
        raise ConvergenceError("eigenfunction is not strictly positive")
    residual = float(np.max(np.abs(B @ phi - lam * phi)))
    if residual > 1e-8 * max(1.0, abs(lam)):
        raise ConvergenceError("spectral residual above tolerance",
                               residual=residual, iterations=iterations)
    return SpectralResult(lam=lam, eigenfunction=ScalarField(op.grid, phi),
                          method=method, iterations=iterations,
                          residual=residual)


def _check_steady(op: DispersalOperator, growth: ScalarField,
                  selfreg: ScalarField, profile: ScalarField, label: str):
    u = profile.values
    rhs = op.matrix @ u + u * (growth.values - selfreg.values * u)
    tol = 1e-10 * max(1.0, float(np.max(np.abs(u))))
    resid = float(np.max(np.abs(rhs)))
    if resid > tol:
        raise ValueError(
            f"{label} is not a converged steady profile (residual {resid:.3e})")


def stability_indices(system, u_d: ScalarField, v_D: ScalarField):
    """Spectral indices of the two semi-trivial states.

    ``mu`` is the bound of the v-operator plus ``M - b u_d`` (growth of the
    absent species against the resident), ``nu`` the bound of the
    u-operator plus ``m - c v_D``.  Both profiles must already satisfy
    their steady equations to 1e-10.
    """
    _check_steady(system.op_u, system.m, system.b1, u_d, "u_d")
    _check_steady(system.op_v, system.M, system.c2, v_D, "v_D")
    mu = spectral_bound(system.op_v, ScalarField(
        system.grid, system.M.values - system.b.values * u_d.values))
    nu = spectral_bound(system.op_u, ScalarField(
        system.grid, system.m.values - system.c.values * v_D.values))
    return mu, nu
