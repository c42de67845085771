"""Single-species steady states by constructive monotone iteration.

Existence is decided by the sign of the principal spectral bound of the
linearization at zero; when it is positive the positive steady state is
bracketed by two time-marched orbits:

* a non-increasing orbit started at a constant upper solution (the
  smallest cap from a doubling scan of the dissipativity inequality);
* a non-decreasing orbit started at a small multiple of the positive
  eigenfunction, with the multiplier halved until the lower-solution
  inequality is verified componentwise.

Both orbits are advanced in lockstep chunks; per-step monotonicity inside
the chunks plus an ordering check at chunk boundaries certifies the
sandwich at every accepted step.  A Newton polish sharpens the residual
once the sandwich has closed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import backend
from .errors import (ConvergenceError, FieldError, MonotoneOrbitError,
                     OperatorError, SteadyStateNotFoundError)
from .grid import ScalarField
from .operators import DispersalOperator
from .spectral import SpectralResult, spectral_bound

EXISTS_TOL = 1e-8
SANDWICH_GAP_TOL = 1e-8
RESIDUAL_RTOL = 1e-10
MONO_TOL_REL = 1e-11
CHUNK_TIME = 4.0
MAX_ORBIT_STEPS = 400_000
LADDER_POINTS = 32


@dataclass(frozen=True)
class ReactionSpec:
    """Reaction term u -> f(x, u) with evaluable u-derivative.

    Defaults to the logistic family f = u (growth - selfreg * u); custom
    callables (vectorized over nodes) may replace it as long as they
    vanish at u = 0 and f(x, u)/u decreases strictly in u.
    """

    growth: ScalarField
    self_regulation: ScalarField
    f: Callable[[np.ndarray], np.ndarray] | None = None
    fu: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if not self.growth.grid.same_as(self.self_regulation.grid):
            raise FieldError("growth and self-regulation live on different grids")
        if (self.f is None) != (self.fu is None):
            raise FieldError("custom reactions must supply both f and fu")
        if self.f is None and np.any(self.self_regulation.values <= 0):
            raise FieldError("logistic self-regulation must be positive")

    @classmethod
    def logistic(cls, growth: ScalarField, self_regulation=1.0) -> "ReactionSpec":
        if np.isscalar(self_regulation):
            self_regulation = ScalarField.constant(growth.grid, self_regulation)
        return cls(growth=growth, self_regulation=self_regulation)

    @property
    def grid(self):
        return self.growth.grid

    def eval_f(self, u: np.ndarray) -> np.ndarray:
        if self.f is not None:
            return np.asarray(self.f(u), dtype=np.float64)
        return u * (self.growth.values - self.self_regulation.values * u)

    def eval_fu(self, u: np.ndarray) -> np.ndarray:
        if self.fu is not None:
            return np.asarray(self.fu(u), dtype=np.float64)
        return self.growth.values - 2.0 * self.self_regulation.values * u

    def growth_at_zero(self) -> ScalarField:
        """Linearization potential at u = 0."""
        return ScalarField(self.grid, self.eval_fu(np.zeros(self.grid.n_nodes)))

    def validate(self, u_cap: float):
        """Check f(x, 0) = 0 and strict decrease of f/u on a sampled ladder."""
        zero = np.zeros(self.grid.n_nodes)
        if np.any(self.eval_f(zero) != 0.0):
            raise FieldError("reaction does not vanish at u = 0")
        ladder = np.linspace(u_cap / LADDER_POINTS, u_cap, LADDER_POINTS)
        prev = None
        for u in ladder:
            ratio = self.eval_f(np.full(self.grid.n_nodes, u)) / u
            if prev is not None:
                slack = 1e-12 * max(1.0, float(np.max(np.abs(ratio))))
                if np.any(ratio > prev - slack):
                    raise FieldError(
                        "f(x, u)/u is not strictly decreasing on the sampled ladder")
            prev = ratio

    def lipschitz_bound(self, u_cap: float) -> float:
        """Bound on |df/du| over [0, u_cap], sampled on the ladder."""
        ladder = np.linspace(0.0, u_cap, LADDER_POINTS + 1)
        bound = 0.0
        for u in ladder:
            bound = max(bound, float(np.max(np.abs(
                self.eval_fu(np.full(self.grid.n_nodes, u))))))
        return bound


@dataclass(frozen=True)
class SteadyStateResult:
    exists: bool
    profile: ScalarField
    upper_limit: ScalarField
    lower_limit: ScalarField
    residual: float
    iterations: int
    lambda_star: SpectralResult
    cap: float

    def to_dict(self) -> dict:
        return {"exists": self.exists, "residual": self.residual,
                "iterations": self.iterations,
                "lambda_star": self.lambda_star.to_dict(), "cap": self.cap}


def compute_C1(op: DispersalOperator, reaction: ReactionSpec) -> float:
    """Smallest constant from a doubling scan that is an upper solution.

    Scans C = 2^k and returns the first value satisfying the componentwise
    dissipativity inequality (operator row mass plus f(x, C)/C at most
    zero); every constant above it is then also an upper solution.
    """
    if not op.grid.same_as(reaction.grid):
        raise OperatorError("reaction lives on a different grid")
    ones = np.ones(op.grid.n_nodes)
    disp_row = op.matrix @ ones  # constants annihilate the Laplacian part
    for k in range(-20, 101):
        c = 2.0 ** k
        ratio = reaction.eval_f(c * ones) / c
        slack = 1e-12 * max(1.0, c) * max(1.0, op.rate)
        if np.all(disp_row + ratio <= slack):
            return c
    raise ConvergenceError(
        "no dissipative cap below the overflow limit; reaction is not "
        "logistic-type (f(x, u)/u must go to -infinity)")


def _stable_dt(op: DispersalOperator, lipschitz: float) -> float:
    lam = op.nonlocal_weight * float(np.max(op.absorption)) + lipschitz
    dt = 0.5 / max(lam, 1e-12)
    if op.local_weight > 0:
        dt = min(dt, 0.4 * op.grid.h ** 2 / op.local_weight)
    return dt


def _make_stepper(op: DispersalOperator, reaction: ReactionSpec,
                  lipschitz: float):
    """Step size plus, for stiff local parts, the implicit resolvent.

    Operators with a Laplacian component would force explicit steps of
    order h^2; marching those with the semi-implicit map keeps the step
    at the reaction scale while preserving the monotone orbit structure
    (the resolvent of an M-matrix is entrywise nonnegative).
    """
    if op.local_weight > 0 and reaction.f is None:
        lam = op.nonlocal_weight * float(np.max(op.absorption)) + lipschitz
        dt = 0.5 / max(lam, 1e-12)
        minv = np.linalg.inv(np.eye(op.grid.n_nodes) - dt * op.matrix)
        return dt, minv
    return _stable_dt(op, lipschitz), None


def _residual(op: DispersalOperator, reaction: ReactionSpec,
              u: np.ndarray) -> float:
    return float(np.max(np.abs(op.matrix @ u + reaction.eval_f(u))))


def _newton_polish(op: DispersalOperator, reaction: ReactionSpec,
                   u: np.ndarray, max_iter: int = 12) -> tuple[np.ndarray, int]:
    for it in range(max_iter):
        F = op.matrix @ u + reaction.eval_f(u)
        if np.max(np.abs(F)) <= 1e-13 * max(1.0, float(np.max(np.abs(u)))):
            return u, it
        J = op.matrix + np.diag(reaction.eval_fu(u))
        try:
            step = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(J, -F, rcond=None)[0]
        u = u + step
    return u, max_iter


def _verified_lower_start(op: DispersalOperator, reaction: ReactionSpec,
                          phi: np.ndarray, cap: float) -> np.ndarray:
    delta = 0.5 * min(1.0, cap)
    for _ in range(200):
        cand = delta * phi
        if np.all(op.matrix @ cand + reaction.eval_f(cand) >= 0.0):
            return cand
        delta *= 0.5
    raise ConvergenceError("could not verify a lower solution by halving")


def solve_steady_monotone(op: DispersalOperator,
                          reaction: ReactionSpec) -> SteadyStateResult:
    """Steady state of u_t = op u + f(x, u) via the two monotone orbits.

    Returns a nonexistence result when the spectral bound of the
    linearization at zero is not above the existence threshold; otherwise
    both orbits are marched until the sandwich closes under 1e-8 and the
    profile residual is polished under 1e-10 (relative to its size).
    """
    if not op.grid.same_as(reaction.grid):
        raise OperatorError("reaction lives on a different grid")
    if op.rate <= 0:
        raise OperatorError("steady-state solver needs a positive dispersal rate")
    sr = spectral_bound(op, reaction.growth_at_zero())
    zero = ScalarField.constant(op.grid, 0.0)
    if sr.lam <= EXISTS_TOL:
        return SteadyStateResult(exists=False, profile=zero, upper_limit=zero,
                                 lower_limit=zero, residual=0.0, iterations=0,
                                 lambda_star=sr, cap=0.0)

    cap = compute_C1(op, reaction)
    reaction.validate(cap)
    upper = np.full(op.grid.n_nodes, cap)
    lower = _verified_lower_start(op, reaction, sr.eigenfunction.values, cap)

    dt, minv = _make_stepper(op, reaction, reaction.lipschitz_bound(cap))
    chunk = max(1, int(round(CHUNK_TIME / dt)))
    mono_tol = MONO_TOL_REL * max(1.0, cap)
    steps_total = 0
    up_done = low_done = False
    while steps_total < MAX_ORBIT_STEPS:
        if not up_done:
            tol = RESIDUAL_RTOL * max(1.0, float(np.max(upper)))
            upper, steps, viol, status = _march_chunk(
                op, reaction, upper, dt, chunk, tol, -1, mono_tol, minv)
            steps_total += steps
            _raise_on_orbit_failure(status, viol, "upper")
            up_done = status == backend.STATUS_CONVERGED
        if not low_done:
            tol = RESIDUAL_RTOL * max(1.0, float(np.max(lower)))
            lower, steps, viol, status = _march_chunk(
                op, reaction, lower, dt, chunk, tol, 1, mono_tol, minv)
            steps_total += steps
            _raise_on_orbit_failure(status, viol, "lower")
            low_done = status == backend.STATUS_CONVERGED
        if np.any(lower > upper + mono_tol):
            raise MonotoneOrbitError("orbits crossed: lower exceeded upper")
        gap = float(np.max(np.abs(upper - lower)))
        if up_done and low_done:
            if gap > SANDWICH_GAP_TOL:
                raise ConvergenceError(
                    f"sandwich gap stagnated at {gap:.3e} with both orbits "
                    "converged", residual=gap)
            break
    else:
        raise ConvergenceError("orbit step budget exhausted before the "
                               "sandwich closed", iterations=steps_total)

    profile = upper.copy()
    newton_its = 0
    if _residual(op, reaction, profile) > 1e-12:
        profile, newton_its = _newton_polish(op, reaction, profile)
    if np.any(profile <= 0):
        raise ConvergenceError("steady profile is not strictly positive")
    residual = _residual(op, reaction, profile)
    if residual > RESIDUAL_RTOL * max(1.0, float(np.max(profile))):
        raise ConvergenceError("steady residual above tolerance",
                               residual=residual)
    return SteadyStateResult(
        exists=True, profile=ScalarField(op.grid, profile, kind="density"),
        upper_limit=ScalarField(op.grid, upper),
        lower_limit=ScalarField(op.grid, lower),
        residual=residual, iterations=steps_total + newton_its,
        lambda_star=sr, cap=cap)


def _raise_on_orbit_failure(status: int, violation: float, which: str):
    if status == backend.STATUS_VIOLATION:
        raise MonotoneOrbitError(
            f"{which} orbit broke monotonicity by {violation:.3e}")
    if status == backend.STATUS_NONFINITE:
        raise ConvergenceError(f"{which} orbit produced non-finite values")


def _march_chunk(op, reaction, u, dt, max_steps, exit_tol, mono_dir, mono_tol,
                 minv=None):
    """One marching chunk; hot kernels for the logistic, python otherwise."""
    if reaction.f is not None:
        return _march_chunk_custom(op, reaction, u, dt, max_steps, exit_tol,
                                   mono_dir, mono_tol)
    if minv is not None:
        return backend.imex_single(
            minv, op.matrix, reaction.growth.values,
            reaction.self_regulation.values, u, dt, max_steps, exit_tol,
            mono_dir, mono_tol)
    return backend.rk4_single(
        op.matrix, reaction.growth.values, reaction.self_regulation.values,
        u, dt, max_steps, exit_tol, mono_dir, mono_tol)


def _march_chunk_custom(op, reaction, u, dt, max_steps, exit_tol,
                        mono_dir, mono_tol):
    """Python RK4 chunk for custom (non-logistic) reactions."""
    A = op.matrix
    steps = 0
    max_violation = 0.0
    status = backend.STATUS_BUDGET
    for _ in range(max_steps):
        k1 = A @ u + reaction.eval_f(u)
        if float(np.max(np.abs(k1))) <= exit_tol:
            status = backend.STATUS_CONVERGED
            break
        u2 = u + 0.5 * dt * k1
        k2 = A @ u2 + reaction.eval_f(u2)
        u3 = u + 0.5 * dt * k2
        k3 = A @ u3 + reaction.eval_f(u3)
        u4 = u + dt * k3
        k4 = A @ u4 + reaction.eval_f(u4)
        un = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(un)):
            status = backend.STATUS_NONFINITE
            break
        if mono_dir != 0:
            max_violation = max(max_violation,
                                float(np.max((un - u) * (-mono_dir))))
        u = un
        steps += 1
        if mono_dir != 0 and max_violation > mono_tol:
            status = backend.STATUS_VIOLATION
            break
    return u, steps, max_violation, status


def march_to_steady(op: DispersalOperator, reaction: ReactionSpec,
                    u0: ScalarField, residual_target: float | None = None,
                    polish: bool = True,
                    max_steps: int = MAX_ORBIT_STEPS):
    """Free time-march (no monotonicity contract) to a steady state.

    Returns ``(profile, residual, steps, converged)``.  Used for restart
    and decay probes where the initial data carries no ordering.
    """
    cap = compute_C1(op, reaction)
    dt, minv = _make_stepper(op, reaction, reaction.lipschitz_bound(
        max(cap, float(np.max(u0.values)), 1.0)))
    u = u0.values.copy()
    steps_total = 0
    chunk = max(1, int(round(CHUNK_TIME / dt)))
    converged = False
    while steps_total < max_steps:
        tol = (residual_target if residual_target is not None
               else RESIDUAL_RTOL * max(1.0, float(np.max(np.abs(u)))))
        u, steps, _, status = _march_chunk(op, reaction, u, dt, chunk, tol,
                                           0, np.inf, minv)
        steps_total += steps
        if status == backend.STATUS_NONFINITE:
            raise ConvergenceError("free march produced non-finite values")
        if status == backend.STATUS_CONVERGED:
            converged = True
            break
        resid = _residual(op, reaction, u)
        if polish and resid < 1e-6:
            polished, _ = _newton_polish(op, reaction, u)
            if np.max(np.abs(polished - u)) < 1e-2 and \
                    _residual(op, reaction, polished) < resid:
                u = polished
                converged = True
                break
    return ScalarField(op.grid, u), _residual(op, reaction, u), steps_total, converged


def w_eps_fixed_point(op: DispersalOperator, m: ScalarField,
                      eps: float) -> ScalarField:
    """Steady state of the eps-depressed logistic by a quadratic-root sweep.

    Each sweep freezes the nonnegative off-diagonal coupling and solves
    the pointwise quadratic for the new iterate, starting from the
    constant upper solution so the sweeps decrease monotonically.  Falls
    back to the monotone solver if a discriminant ever goes negative.
    """
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    depressed = ReactionSpec.logistic(
        ScalarField(m.grid, m.values - eps), 1.0)
    sr = spectral_bound(op, depressed.growth_at_zero())
    if sr.lam <= EXISTS_TOL:
        raise SteadyStateNotFoundError(
            f"depressed problem has spectral bound {sr.lam:.3e}; no positive "
            "steady state")
    cap = compute_C1(op, depressed)
    A = op.matrix
    diag = np.diagonal(A)
    A_pos = A - np.diag(diag)  # off-diagonal coupling; entrywise nonnegative
    qlin = depressed.growth.values + diag
    w = np.full(op.grid.n_nodes, cap)
    for _ in range(200_000):
        disc = qlin * qlin + 4.0 * (A_pos @ w)
        if np.any(disc < 0):
            return solve_steady_monotone(op, depressed).profile
        w_new = 0.5 * (qlin + np.sqrt(disc))
        drift = float(np.max(np.abs(w_new - w)))
        w = w_new
        if drift <= 1e-13 * max(1.0, float(np.max(w))):
            break
    else:
        raise ConvergenceError("quadratic-root sweeps did not converge")
    if np.any(w <= 0):
        raise ConvergenceError("depressed steady state is not strictly positive")
    return ScalarField(op.grid, w, kind="density")
