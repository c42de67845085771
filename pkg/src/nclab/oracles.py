"""Proof-level integral functionals as independent numeric checks.

Every functional here is a finite-sum rewrite of an integral identity or
inequality used to pin down the steady-state structure of the competition
system.  The symmetrization identity is exact under the chosen quadrature
(every manipulation is a reindexing of the same double sum), so it is
held to 1e-12 of its term mass; the mixed-dispersal form contains a
genuinely discretized gradient term and is only O(h^2) accurate.

All double sums use pairwise (tree) summation: n^2 terms with heavy
cancellation would otherwise eat the identity's accuracy budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import FieldError, KernelError, OperatorError
from .grid import ScalarField, integrate
from .kernels import KernelMatrix
from .operators import DispersalOperator

POSITIVITY_FLOOR = 1e-12
SIGN_TOL = 1e-10


@dataclass(frozen=True)
class OracleReport:
    name: str
    lhs: float
    rhs: float
    difference: float
    sign_claim: str        # "nonpositive" | "nonnegative" | "zero" | "none"
    sign_satisfied: bool
    scale: float

    def to_dict(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs,
                "difference": self.difference, "sign_claim": self.sign_claim,
                "sign_satisfied": self.sign_satisfied, "scale": self.scale}


def _require_positive(name: str, *fields: ScalarField):
    for f in fields:
        if np.any(f.values < POSITIVITY_FLOOR):
            raise FieldError(
                f"{name} needs strictly positive densities (floor 1e-12)")


def _order_claim(u: np.ndarray, us: np.ndarray) -> str:
    if np.array_equal(u, us):
        return "zero"
    if np.all(u >= us):
        return "nonpositive"
    if np.all(u <= us):
        return "nonnegative"
    return "none"


def _sign_ok(claim: str, value: float, scale: float) -> bool:
    tol = SIGN_TOL * max(scale, 1.0)
    if claim == "nonpositive":
        return value <= tol
    if claim == "nonnegative":
        return value >= -tol
    if claim == "zero":
        return abs(value) <= tol
    return True


def symmetrization_identity(kernel: KernelMatrix, d: float, u: ScalarField,
                            u_star: ScalarField) -> OracleReport:
    """Exact discrete identity between the operator form and the pair sum.

    Left side: quadrature of d (u* K[u] - u K[u*]) (u - u*)^2 / (u u*),
    evaluated through matrix application (the absorption term cancels in
    the combination, so the identity holds for any absorption choice).
    Right side: the explicit symmetrized double sum over node pairs.  For
    componentwise-ordered inputs the common value has a sign.
    """
    if not kernel.symmetric:
        raise KernelError("symmetrization identity needs a symmetric kernel")
    _require_positive("symmetrization_identity", u, u_star)
    if not u.grid.same_as(u_star.grid) or not u.grid.same_as(kernel.grid):
        raise FieldError("fields and kernel must share one grid")
    wq = kernel.grid.weights
    uv, sv = u.values, u_star.values

    Kw = kernel.entries * wq[None, :]
    a = kernel.entries.T @ wq
    img_u = Kw @ uv - a * uv
    img_s = Kw @ sv - a * sv
    ratio = (uv - sv) ** 2 / (uv * sv)
    lhs = d * backend.pairwise_sum(wq * (-uv * img_s + sv * img_u) * ratio)

    total, mass = backend.symmetrization_double_sum(kernel.entries, wq, uv, sv)
    rhs = 0.5 * d * total
    scale = max(0.5 * abs(d) * mass, abs(lhs), abs(rhs))

    claim = _order_claim(uv, sv)
    return OracleReport(name="symmetrization_identity", lhs=lhs, rhs=rhs,
                        difference=lhs - rhs, sign_claim=claim,
                        sign_satisfied=_sign_ok(claim, rhs, scale),
                        scale=scale)


def sign_functional_W(u: ScalarField, u_star: ScalarField, v: ScalarField,
                      v_star: ScalarField, b1, c, b, c2) -> tuple[float, float]:
    """The two sign functionals of the two-steady-state comparison.

    W_u integrates (b1 w + c z) w^2 and W_v integrates (b w + c2 z) z^2
    with w = u - u*, z = v - v*.  For two ordered positive steady states
    the first is nonpositive and the second nonnegative.
    """
    grid = u.grid
    coeff = lambda x: (ScalarField.constant(grid, x) if np.isscalar(x) else x)
    b1, c, b, c2 = map(coeff, (b1, c, b, c2))
    w = u.values - u_star.values
    z = v.values - v_star.values
    W_u = integrate(ScalarField(grid, (b1.values * w + c.values * z) * w * w))
    W_v = integrate(ScalarField(grid, (b.values * w + c2.values * z) * z * z))
    return W_u, W_v


def key_relation(w: ScalarField, z: ScalarField, b: float, c: float) -> float:
    """Quadrature of (w + c z)^2 (c z - w); the pivot scalar of the
    uniqueness argument (nonnegative once the two W signs hold and
    bc <= 1, which forces w + c z = 0 at equality)."""
    if b * c > 1.0 + 1e-15:
        raise ValueError("key relation is only meaningful for bc <= 1")
    s = w.values + c * z.values
    return integrate(ScalarField(w.grid, s * s * (c * z.values - w.values)))


def neutral_case_functionals(u_d: ScalarField, v_D: ScalarField, b: float,
                             c: float) -> tuple[float, float, float]:
    """Integral triple deciding the doubly-neutral case.

    I1 = integral of v_D^3 - b u_d v_D^2, I2 of u_d^3 - c v_D u_d^2, and
    Ikey of (b u_d - v_D)^2 (b u_d + v_D).  Both I1 and I2 are nonpositive
    at a doubly-stable pair, and b^3 I2 + I1 dominates Ikey when bc <= 1,
    forcing Ikey <= 0 and hence b u_d = v_D.
    """
    _require_positive("neutral_case_functionals", u_d, v_D)
    ud, vD = u_d.values, v_D.values
    grid = u_d.grid
    I1 = integrate(ScalarField(grid, vD ** 3 - b * ud * vD ** 2))
    I2 = integrate(ScalarField(grid, ud ** 3 - c * vD * ud ** 2))
    diff = b * ud - vD
    Ikey = integrate(ScalarField(grid, diff * diff * (b * ud + vD)))
    return I1, I2, Ikey


def mixed_quadratic_form(op: DispersalOperator, u: ScalarField,
                         u_hat: ScalarField) -> OracleReport:
    """Split evaluation of the mixed-dispersal cross form.

    Direct side: quadrature of (u_hat op[u] - u op[u_hat]) (u - u_hat)^2
    / (u u_hat) through matrix application.  Split side: the alpha-weighted
    kernel double sum plus the local gradient term
    (1-alpha) d sum w_i |u grad(u_hat) - u_hat grad(u)|_i^2 (1/u_i^2 -
    1/u_hat_i^2).  The kernel parts agree exactly; the gradient term is a
    discretization, so the two sides differ by O(h^2).
    """
    if op.kind != "mixed":
        raise OperatorError("mixed quadratic form needs a mixed-kind operator")
    _require_positive("mixed_quadratic_form", u, u_hat)
    if not u.grid.same_as(u_hat.grid) or not u.grid.same_as(op.grid):
        raise FieldError("fields and operator must share one grid")
    wq = op.grid.weights
    uv, hv = u.values, u_hat.values

    ratio = (uv - hv) ** 2 / (uv * hv)
    img_u = op.matrix @ uv
    img_h = op.matrix @ hv
    lhs = backend.pairwise_sum(wq * (-uv * img_h + hv * img_u) * ratio)

    total, mass = backend.symmetrization_double_sum(op.kernel.entries, wq, uv, hv)
    kernel_part = 0.5 * op.nonlocal_weight * total
    du = np.gradient(uv, op.grid.h, edge_order=1)
    dh = np.gradient(hv, op.grid.h, edge_order=1)
    flux = uv * dh - hv * du
    grad_terms = wq * flux * flux * (1.0 / uv ** 2 - 1.0 / hv ** 2)
    grad_part = op.local_weight * backend.pairwise_sum(grad_terms)
    rhs = kernel_part + grad_part
    scale = max(0.5 * op.nonlocal_weight * mass,
                op.local_weight * float(np.sum(np.abs(grad_terms))),
                abs(lhs), abs(rhs), 1e-300)

    claim = _order_claim(uv, hv)
    return OracleReport(name="mixed_quadratic_form", lhs=lhs, rhs=rhs,
                        difference=lhs - rhs, sign_claim=claim,
                        sign_satisfied=_sign_ok(claim, rhs, scale),
                        scale=scale)
