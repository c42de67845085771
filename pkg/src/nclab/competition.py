"""Two-species competition systems: assembly, dynamics, classification.

The full pipeline lives here: build a validated system from operators and
coefficient fields, integrate it with fixed-step RK4, locate semi-trivial
and positive steady states, and classify the global dynamics into one of
four cases from the signs of the two stability indices.  The predicted
attractor is then stress-tested by multi-start probing (randomized starts
plus the two extremal corners of the competitive order); any probe that
misses the prediction is reported as a falsification event with a full
state dump, never silently reclassified.

Classification is gated: the classic variant requires 0 < bc <= 1 and the
generalized variants require the coefficient inequality
max(b) max(c) <= min(b1) min(c2).  Outside the gate the dynamics still
run, but the report stays unclassified.  Case (iv) is certified
algebraically (a continuum of steady states); cases (i)-(iii) are probed
conclusions, and the report wording keeps that distinction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend, oracles
from .errors import ConvergenceError, FieldError, OperatorError
from .grid import Grid, ScalarField, integrate as quad
from .operators import DispersalOperator
from .single_species import (ReactionSpec, SteadyStateResult, compute_C1,
                             solve_steady_monotone)
from .spectral import (SpectralResult, StabilityVerdict, classify_stability,
                       stability_indices)

VARIANTS = ("classic", "location_dependent", "mixed")

CLIP_TOL = 1e-12
CHUNK_TIME = 4.0
MAX_SYSTEM_STEPS = 2_000_000
POSITIVE_FLOOR = 1e-3  # lower bound of the log-uniform start amplitudes


@dataclass(frozen=True)
class Tolerances:
    """Validation tolerances; defaults match the documented contracts."""

    probe_tol: float = 1e-6          # sup distance probe limit vs prediction
    steady_residual: float = 1e-9    # target residual for probe limits
    family_residual: float = 1e-10   # continuum family closure
    certificate_gap: float = 1e-10   # |bc - 1| (or |bc - b1 c2|)
    state_match: float = 1e-6        # relative gap of b u_d vs c2 v_D
    distinct_gap: float = 1e-6       # probes counted as distinct limits
    positive_floor: float = 1e-6     # min/max ratio declaring a component present

    def to_dict(self) -> dict:
        return {"probe_tol": self.probe_tol,
                "steady_residual": self.steady_residual,
                "family_residual": self.family_residual,
                "certificate_gap": self.certificate_gap,
                "state_match": self.state_match,
                "distinct_gap": self.distinct_gap,
                "positive_floor": self.positive_floor}


@dataclass(frozen=True)
class CompetitionSystem:
    grid: Grid
    op_u: DispersalOperator
    op_v: DispersalOperator
    m: ScalarField
    M: ScalarField
    b: ScalarField
    c: ScalarField
    b1: ScalarField
    c2: ScalarField
    variant: str

    def reaction_u(self) -> ReactionSpec:
        return ReactionSpec.logistic(self.m, self.b1)

    def reaction_v(self) -> ReactionSpec:
        return ReactionSpec.logistic(self.M, self.c2)

    def caps(self) -> tuple[float, float]:
        """Invariant-box corners from the single-species dissipativity scan."""
        return (compute_C1(self.op_u, self.reaction_u()),
                compute_C1(self.op_v, self.reaction_v()))

    def rhs(self, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        fu = self.op_u.matrix @ u + u * (
            self.m.values - self.b1.values * u - self.c.values * v)
        fv = self.op_v.matrix @ v + v * (
            self.M.values - self.b.values * u - self.c2.values * v)
        return fu, fv

    def residual(self, u: np.ndarray, v: np.ndarray) -> float:
        fu, fv = self.rhs(u, v)
        return float(max(np.max(np.abs(fu)), np.max(np.abs(fv))))


@dataclass(frozen=True)
class SystemState:
    u: ScalarField
    v: ScalarField
    t: float

    def __post_init__(self):
        if np.any(self.u.values < 0) or np.any(self.v.values < 0):
            raise FieldError("densities must be nonnegative")


def _is_constant(f: ScalarField) -> bool:
    return float(np.ptp(f.values)) <= 1e-12 * max(1.0, float(np.max(np.abs(f.values))))


def assemble_system(grid: Grid, op_u: DispersalOperator,
                    op_v: DispersalOperator, m: ScalarField, M: ScalarField,
                    b: ScalarField | float, c: ScalarField | float,
                    b1: ScalarField | float = 1.0,
                    c2: ScalarField | float = 1.0,
                    variant: str = "classic") -> CompetitionSystem:
    """Validate and freeze a two-species system.

    Scalars are promoted to constant fields.  The classic variant forces
    constant interspecific coefficients and unit self-regulation; the
    mixed variant requires both operators to be of the mixed kind.
    """
    if variant not in VARIANTS:
        raise FieldError(f"unknown variant {variant!r}")

    def as_field(x):
        if np.isscalar(x):
            return ScalarField.constant(grid, float(x))
        return x

    m, M, b, c, b1, c2 = map(as_field, (m, M, b, c, b1, c2))
    for name, f in (("m", m), ("M", M), ("b", b), ("c", c), ("b1", b1), ("c2", c2)):
        if not grid.same_as(f.grid):
            raise FieldError(f"coefficient {name} lives on a different grid")
    for op, name in ((op_u, "op_u"), (op_v, "op_v")):
        if not grid.same_as(op.grid):
            raise OperatorError(f"{name} was assembled on a different grid")

    if variant == "classic":
        for name, f in (("b", b), ("c", c)):
            if not _is_constant(f):
                raise FieldError(f"classic variant requires constant {name}")
        for name, f in (("b1", b1), ("c2", c2)):
            if not np.all(f.values == 1.0):
                raise FieldError(f"classic variant requires {name} == 1")
    if variant == "mixed":
        if op_u.kind != "mixed" or op_v.kind != "mixed":
            raise OperatorError("mixed variant requires mixed-kind operators")
    else:
        if op_u.kind == "mixed" or op_v.kind == "mixed":
            raise OperatorError(
                f"variant {variant!r} uses pure nonlocal operators")
    if np.any(b.values < 0) or np.any(c.values < 0):
        raise FieldError("competition coefficients must be nonnegative")
    if np.any(b1.values <= 0) or np.any(c2.values <= 0):
        raise FieldError("self-regulation must be positive")

    return CompetitionSystem(grid=grid, op_u=op_u, op_v=op_v, m=m, M=M, b=b,
                             c=c, b1=b1, c2=c2, variant=variant)


def check_condition_1_5(system: CompetitionSystem) -> tuple[bool, float]:
    """Coefficient gate for the generalized variants.

    Returns ``(ok, margin)`` with margin = min(b1) min(c2) - max(b) max(c).
    """
    lhs = float(np.max(system.b.values)) * float(np.max(system.c.values))
    rhs = float(np.min(system.b1.values)) * float(np.min(system.c2.values))
    return lhs <= rhs, rhs - lhs


def classification_gate(system: CompetitionSystem) -> dict:
    if system.variant == "classic":
        bc = float(system.b.values[0]) * float(system.c.values[0])
        return {"variant": system.variant, "bc": bc, "ok": 0.0 < bc <= 1.0}
    ok, margin = check_condition_1_5(system)
    return {"variant": system.variant, "ok": ok, "margin": margin}


def _lipschitz_dt(system: CompetitionSystem, caps: tuple[float, float],
                  u0_sup: float = 0.0, v0_sup: float = 0.0) -> float:
    """Half the inverse Lipschitz bound of reaction plus absorption over
    the invariant box."""
    bu = max(caps[0], u0_sup)
    bv = max(caps[1], v0_sup)
    mx = lambda f: float(np.max(np.abs(f.values)))
    lip_u = (system.op_u.nonlocal_weight * float(np.max(system.op_u.absorption))
             + mx(system.m) + 2.0 * mx(system.b1) * bu
             + mx(system.c) * (bu + bv))
    lip_v = (system.op_v.nonlocal_weight * float(np.max(system.op_v.absorption))
             + mx(system.M) + 2.0 * mx(system.c2) * bv
             + mx(system.b) * (bu + bv))
    return 0.5 / max(lip_u, lip_v, 1e-12)


def _system_dt(system: CompetitionSystem, caps: tuple[float, float],
               u0_sup: float = 0.0, v0_sup: float = 0.0) -> float:
    """Fixed RK4 step from the box Lipschitz bound and the local-part cap."""
    dt = _lipschitz_dt(system, caps, u0_sup, v0_sup)
    local = max(system.op_u.local_weight, system.op_v.local_weight)
    if local > 0:
        dt = min(dt, 0.4 * system.grid.h ** 2 / local)
    return dt


@dataclass(frozen=True)
class _SystemStepper:
    """Marching scheme for steady-state searches.

    Pure nonlocal systems use the spec'd explicit RK4 step; systems with
    a Laplacian component switch to the semi-implicit map whose step is
    set by the reaction alone (the stiff linear part sits inside the
    precomputed resolvents, which are nonnegative, so the competitive
    order is still preserved).
    """

    dt: float
    minv_u: np.ndarray | None
    minv_v: np.ndarray | None

    def run(self, system: CompetitionSystem, u, v, max_steps, exit_tol):
        if self.minv_u is None:
            return backend.rk4_competition(
                system.op_u.matrix, system.op_v.matrix, system.m.values,
                system.M.values, system.b.values, system.c.values,
                system.b1.values, system.c2.values, u, v, self.dt,
                max_steps, exit_tol, CLIP_TOL)
        return backend.imex_competition(
            self.minv_u, self.minv_v, system.op_u.matrix, system.op_v.matrix,
            system.m.values, system.M.values, system.b.values,
            system.c.values, system.b1.values, system.c2.values, u, v,
            self.dt, max_steps, exit_tol, CLIP_TOL)


def _make_system_stepper(system: CompetitionSystem,
                         caps: tuple[float, float]) -> _SystemStepper:
    if max(system.op_u.local_weight, system.op_v.local_weight) > 0:
        dt = _lipschitz_dt(system, caps)
        eye = np.eye(system.grid.n_nodes)
        return _SystemStepper(
            dt=dt,
            minv_u=np.linalg.inv(eye - dt * system.op_u.matrix),
            minv_v=np.linalg.inv(eye - dt * system.op_v.matrix))
    return _SystemStepper(dt=_system_dt(system, caps), minv_u=None, minv_v=None)


def integrate(system: CompetitionSystem, state0: SystemState, t_end: float,
              n_snapshots: int = 8) -> list[SystemState]:
    """Method-of-lines RK4 trajectory from ``state0`` to (nearest step to)
    ``t_end``, sampled at ``n_snapshots + 1`` roughly uniform times.

    Negative undershoots are clipped at zero; a clip above 1e-12 aborts as
    an instability signal.
    """
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    caps = system.caps()
    dt = _system_dt(system, caps, state0.u.max_abs(), state0.v.max_abs())
    total_steps = max(1, int(round(t_end / dt)))
    marks = np.unique(np.linspace(0, total_steps, n_snapshots + 1).astype(int))
    out = [SystemState(state0.u, state0.v, 0.0)]
    u, v = state0.u.values, state0.v.values
    done = 0
    for mark in marks[1:]:
        u, v, steps, max_clip, status = backend.rk4_competition(
            system.op_u.matrix, system.op_v.matrix, system.m.values,
            system.M.values, system.b.values, system.c.values,
            system.b1.values, system.c2.values, u, v, dt,
            int(mark - done), 0.0, CLIP_TOL)
        done += steps
        if status == backend.STATUS_VIOLATION:
            raise ConvergenceError(
                f"nonnegativity clip {max_clip:.3e} above tolerance "
                "(integration unstable)")
        if status == backend.STATUS_NONFINITE:
            raise ConvergenceError("trajectory produced non-finite values")
        out.append(SystemState(ScalarField(system.grid, u, kind="density"),
                               ScalarField(system.grid, v, kind="density"),
                               done * dt))
    return out


def dispersal_mass_rates(system: CompetitionSystem,
                         state: SystemState) -> tuple[float, float]:
    """Quadrature of each dispersal image; zero for no-flux operators."""
    return (quad(ScalarField(system.grid, system.op_u.matrix @ state.u.values)),
            quad(ScalarField(system.grid, system.op_v.matrix @ state.v.values)))


def semi_trivial_states(system: CompetitionSystem
                        ) -> tuple[SteadyStateResult, SteadyStateResult]:
    """Single-species steady states of the two decoupled equations."""
    return (solve_steady_monotone(system.op_u, system.reaction_u()),
            solve_steady_monotone(system.op_v, system.reaction_v()))


# ---------------------------------------------------------------------------
# steady-state probing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProbeOutcome:
    label: str
    u: np.ndarray
    v: np.ndarray
    residual: float
    steps: int
    converged: bool


@dataclass(frozen=True)
class ProbeSet:
    probes: list[ProbeOutcome]
    distinct: list[int]              # indices of pairwise-distinct limits
    representative: tuple[ScalarField, ScalarField] | None
    representative_residual: float | None


def _coupled_newton(system: CompetitionSystem, u: np.ndarray, v: np.ndarray,
                    max_iter: int = 12) -> tuple[np.ndarray, np.ndarray]:
    n = system.grid.n_nodes
    for _ in range(max_iter):
        fu, fv = system.rhs(u, v)
        resid = max(np.max(np.abs(fu)), np.max(np.abs(fv)))
        if resid <= 1e-13 * max(1.0, float(np.max(u)), float(np.max(v))):
            break
        J = np.zeros((2 * n, 2 * n))
        J[:n, :n] = system.op_u.matrix + np.diag(
            system.m.values - 2.0 * system.b1.values * u - system.c.values * v)
        J[:n, n:] = np.diag(-system.c.values * u)
        J[n:, :n] = np.diag(-system.b.values * v)
        J[n:, n:] = system.op_v.matrix + np.diag(
            system.M.values - system.b.values * u - 2.0 * system.c2.values * v)
        # least squares: the continuum case has a singular direction
        step = np.linalg.lstsq(J, -np.concatenate([fu, fv]), rcond=None)[0]
        u = u + step[:n]
        v = v + step[n:]
    return u, v


def march_system(system: CompetitionSystem, u0: np.ndarray, v0: np.ndarray,
                 residual_target: float = 1e-9,
                 max_steps: int = MAX_SYSTEM_STEPS,
                 caps: tuple[float, float] | None = None,
                 stepper: _SystemStepper | None = None) -> ProbeOutcome:
    """March one initial pair toward a steady state, polishing the tail.

    The marching orbit selects the attractor; once the residual is small,
    a Newton step (least squares, so the continuum's neutral direction is
    harmless) sharpens it without leaving the basin.
    """
    caps = caps or system.caps()
    if stepper is None:
        stepper = _make_system_stepper(system, caps)
    chunk = max(1, int(round(CHUNK_TIME / stepper.dt)))
    u, v = u0.copy(), v0.copy()
    steps_total = 0
    converged = False
    while steps_total < max_steps:
        scale = max(1.0, float(np.max(u)), float(np.max(v)))
        u, v, steps, max_clip, status = stepper.run(
            system, u, v, chunk, residual_target * scale)
        steps_total += steps
        if status == backend.STATUS_VIOLATION:
            raise ConvergenceError(
                f"nonnegativity clip {max_clip:.3e} above tolerance")
        if status == backend.STATUS_NONFINITE:
            raise ConvergenceError("probe produced non-finite values")
        resid = system.residual(u, v)
        if status == backend.STATUS_CONVERGED or resid < 1e-5:
            un, vn = _coupled_newton(system, u, v)
            moved = max(np.max(np.abs(un - u)), np.max(np.abs(vn - v)))
            if moved < 1e-2 and system.residual(un, vn) <= resid:
                u, v = np.maximum(un, 0.0), np.maximum(vn, 0.0)
            if system.residual(u, v) <= residual_target * scale:
                converged = True
                break
            if status == backend.STATUS_CONVERGED:
                converged = True
                break
    return ProbeOutcome(label="", u=u, v=v,
                        residual=system.residual(u, v), steps=steps_total,
                        converged=converged)


def _probe_starts(system: CompetitionSystem, starts: int, seed: int,
                  caps: tuple[float, float], corners: bool):
    rng = np.random.default_rng(seed)
    n = system.grid.n_nodes
    lo_u = min(POSITIVE_FLOOR, caps[0])
    lo_v = min(POSITIVE_FLOOR, caps[1])
    plan = []
    for k in range(starts):
        amp_u = float(np.exp(rng.uniform(np.log(lo_u), np.log(caps[0]))))
        amp_v = float(np.exp(rng.uniform(np.log(lo_v), np.log(caps[1]))))
        u0 = amp_u * (0.5 + 0.5 * rng.random(n))
        v0 = amp_v * (0.5 + 0.5 * rng.random(n))
        plan.append((f"random_{k}", u0, v0))
    if corners:
        plan.append(("corner_u", np.full(n, caps[0]), np.full(n, lo_v)))
        plan.append(("corner_v", np.full(n, lo_u), np.full(n, caps[1])))
    return plan


def find_positive_steady_state(system: CompetitionSystem, starts: int = 20,
                               seed: int = 0, corners: bool = False,
                               tol: Tolerances = Tolerances()) -> ProbeSet:
    """Multi-start search for coexistence states.

    Marches ``starts`` randomized positive pairs (log-uniform amplitudes)
    plus, optionally, the two competitive-order corner states.  Records
    all pairwise-distinct limits and returns a representative limit whose
    two components are both present, if any.
    """
    caps = system.caps()
    stepper = _make_system_stepper(system, caps)
    probes = []
    for label, u0, v0 in _probe_starts(system, starts, seed, caps, corners):
        out = march_system(system, u0, v0, residual_target=tol.steady_residual,
                           caps=caps, stepper=stepper)
        probes.append(ProbeOutcome(label=label, u=out.u, v=out.v,
                                   residual=out.residual, steps=out.steps,
                                   converged=out.converged))
    distinct: list[int] = []
    for i, p in enumerate(probes):
        is_new = True
        for j in distinct:
            q = probes[j]
            gap = max(np.max(np.abs(p.u - q.u)), np.max(np.abs(p.v - q.v)))
            if gap <= tol.distinct_gap:
                is_new = False
                break
        if is_new:
            distinct.append(i)
    representative = None
    rep_resid = None
    for p in probes:
        if not p.converged:
            continue
        su, sv = float(np.max(p.u)), float(np.max(p.v))
        if su > 0 and sv > 0 and float(np.min(p.u)) > tol.positive_floor * su \
                and float(np.min(p.v)) > tol.positive_floor * sv:
            representative = (ScalarField(system.grid, p.u, kind="density"),
                              ScalarField(system.grid, p.v, kind="density"))
            rep_resid = p.residual
            break
    return ProbeSet(probes=probes, distinct=distinct,
                    representative=representative,
                    representative_residual=rep_resid)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClassificationReport:
    case: str | None
    classified: bool
    conclusion_kind: str | None      # "verified certificate" | "probed conclusion"
    gate: dict
    u_d: SteadyStateResult | None
    v_D: SteadyStateResult | None
    mu: SpectralResult | None
    nu: SpectralResult | None
    mu_verdict: StabilityVerdict | None
    nu_verdict: StabilityVerdict | None
    positive_state: tuple[ScalarField, ScalarField] | None
    positive_residual: float | None
    continuum: dict
    probe_summary: list[dict]
    oracle_reports: list[dict]
    falsifications: list[dict]
    probe_starts: int
    seed: int
    tolerances: Tolerances
    notes: list[str]

    @property
    def continuum_detected(self) -> bool:
        return bool(self.continuum.get("detected", False))

    def to_dict(self) -> dict:
        def verdict(v):
            return None if v is None else {"sign": v.sign, "lambda": v.lam,
                                           "tol": v.tol}

        def steady(s):
            if s is None:
                return None
            out = s.to_dict()
            out["profile"] = s.profile.values.tolist()
            return out

        pos = None
        if self.positive_state is not None:
            pos = {"u": self.positive_state[0].values.tolist(),
                   "v": self.positive_state[1].values.tolist(),
                   "residual": self.positive_residual}
        return {
            "case": self.case,
            "classified": self.classified,
            "conclusion_kind": self.conclusion_kind,
            "gate": self.gate,
            "u_d": steady(self.u_d),
            "v_D": steady(self.v_D),
            "mu": None if self.mu is None else self.mu.to_dict(),
            "nu": None if self.nu is None else self.nu.to_dict(),
            "mu_verdict": verdict(self.mu_verdict),
            "nu_verdict": verdict(self.nu_verdict),
            "positive_state": pos,
            "continuum": self.continuum,
            "probe_summary": self.probe_summary,
            "oracles": self.oracle_reports,
            "falsifications": self.falsifications,
            "probe_starts": self.probe_starts,
            "seed": self.seed,
            "tolerances": self.tolerances.to_dict(),
            "notes": self.notes,
        }


def _sup_gap(u, v, u_ref, v_ref) -> float:
    return float(max(np.max(np.abs(u - u_ref)), np.max(np.abs(v - v_ref))))


def _segment_fit(u, v, ud, vD) -> tuple[float, float]:
    """Best point of the segment (s u_d, (1-s) v_D) for a probe limit."""
    s_u = float(np.dot(u, ud) / np.dot(ud, ud))
    s_v = 1.0 - float(np.dot(v, vD) / np.dot(vD, vD))
    best_s, best_gap = 0.0, np.inf
    for s in (s_u, s_v, 0.5 * (s_u + s_v)):
        s = min(max(s, 0.0), 1.0)
        gap = _sup_gap(u, v, s * ud, (1.0 - s) * vD)
        if gap < best_gap:
            best_s, best_gap = s, gap
    return best_s, best_gap


def _case_iv_certificates(system: CompetitionSystem, ud: np.ndarray,
                          vD: np.ndarray, tol: Tolerances) -> dict:
    constants_ok = all(_is_constant(f) for f in
                       (system.b, system.c, system.b1, system.c2))
    b0 = float(np.mean(system.b.values))
    c0 = float(np.mean(system.c.values))
    b10 = float(np.mean(system.b1.values))
    c20 = float(np.mean(system.c2.values))
    bc_gap = abs(b0 * c0 - b10 * c20)
    scaled = system.c2.values * vD
    match = float(np.max(np.abs(system.b.values * ud - scaled))
                  / np.max(np.abs(scaled)))
    family_s = (0.0, 0.25, 0.5, 0.75, 1.0)
    family = [system.residual(s * ud, (1.0 - s) * vD) for s in family_s]
    detected = (constants_ok and bc_gap <= tol.certificate_gap
                and match <= tol.state_match
                and all(r <= tol.family_residual for r in family))
    return {"detected": detected, "constants_ok": constants_ok,
            "bc_gap": bc_gap, "state_match": match,
            "family_s": list(family_s), "family_residuals": family}


def _attach_oracles(system: CompetitionSystem, ud_res, vD_res,
                    probes: list[ProbeOutcome], distinct: list[int],
                    predicted) -> list[dict]:
    reports: list[dict] = []
    b_const = _is_constant(system.b) and _is_constant(system.c)
    b0 = float(np.mean(system.b.values))
    c0 = float(np.mean(system.c.values))

    if system.op_u.kernel.symmetric and ud_res is not None and ud_res.exists:
        ud = ud_res.profile
        shifted = ScalarField(system.grid,
                              ud.values + 0.25 * float(np.max(ud.values)))
        rep = oracles.symmetrization_identity(
            system.op_u.kernel, system.op_u.nonlocal_weight, shifted, ud)
        reports.append(rep.to_dict())

    both = (ud_res is not None and ud_res.exists
            and vD_res is not None and vD_res.exists)
    if both and b_const:
        I1, I2, Ikey = oracles.neutral_case_functionals(
            ud_res.profile, vD_res.profile, b0, c0)
        scale = max(abs(I1), abs(I2), abs(Ikey), 1.0)
        chain_ok = b0 ** 3 * I2 + I1 >= Ikey - 1e-10 * scale
        reports.append({"name": "neutral_case_functionals", "I1": I1,
                        "I2": I2, "Ikey": Ikey, "chain_ok": bool(chain_ok)})

    converged = [p for p in (probes[i] for i in distinct) if p.converged]
    if b_const and b0 * c0 <= 1.0 and len(converged) >= 2:
        p, q = sorted(converged[:2], key=lambda r: -float(np.max(r.u)))
        grid = system.grid
        W_u, W_v = oracles.sign_functional_W(
            ScalarField(grid, p.u), ScalarField(grid, q.u),
            ScalarField(grid, p.v), ScalarField(grid, q.v),
            system.b1, system.c, system.b, system.c2)
        w = p.u - q.u
        z = p.v - q.v
        key = oracles.key_relation(ScalarField(grid, w), ScalarField(grid, z),
                                   b0, c0)
        ordered = bool(np.all(w >= 0) and np.all(z <= 0))
        scale = max(float(np.max(np.abs(w))), float(np.max(np.abs(z))), 1.0) ** 3
        reports.append({
            "name": "two_state_sign_functionals", "W_u": W_u, "W_v": W_v,
            "key_relation": key, "ordered": ordered,
            "signs_ok": bool(not ordered or
                             (W_u <= 1e-10 * scale and W_v >= -1e-10 * scale
                              and key >= -1e-10 * scale)),
            "collinearity_gap": float(np.max(np.abs(w + c0 * z)))})
    elif b_const and predicted is not None and probes:
        p = probes[0]
        grid = system.grid
        W_u, W_v = oracles.sign_functional_W(
            ScalarField(grid, p.u), ScalarField(grid, predicted[0]),
            ScalarField(grid, p.v), ScalarField(grid, predicted[1]),
            system.b1, system.c, system.b, system.c2)
        gap = _sup_gap(p.u, p.v, predicted[0], predicted[1])
        tol = 1e-10 * max(1.0, gap) ** 3 + 10.0 * gap ** 3
        reports.append({"name": "probe_attractor_W_audit", "W_u": W_u,
                        "W_v": W_v, "gap": gap,
                        "signs_ok": bool(abs(W_u) <= tol and abs(W_v) <= tol)})
    return reports


def classify_global_dynamics(system: CompetitionSystem, probe_starts: int = 20,
                             seed: int = 0,
                             tol: Tolerances = Tolerances()) -> ClassificationReport:
    """Classify the global dynamics and stress-test the prediction.

    Pipeline: compute semi-trivial states; with at most one present take
    the degenerate branch (the surviving species, if any, inherits the
    domain); otherwise classify the sign pair of the stability indices
    into cases (i)-(iv), certify case (iv) algebraically, and march the
    probe set to confirm the predicted attractor.  Probe mismatches are
    recorded as falsification events.
    """
    notes: list[str] = []
    falsifications: list[dict] = []
    gate = classification_gate(system)

    u_d = v_D = None
    mu = nu = mu_verdict = nu_verdict = None
    positive_state = None
    positive_residual = None
    continuum: dict = {"detected": False}
    probe_summary: list[dict] = []
    oracle_reports: list[dict] = []
    case = None
    conclusion = None

    if not gate["ok"]:
        notes.append("classification refused: theorem hypotheses fail "
                     f"({gate}); dynamics-only report")
        probe_set = find_positive_steady_state(system, probe_starts, seed,
                                               corners=True, tol=tol)
        for p in probe_set.probes:
            probe_summary.append({"label": p.label, "attractor": "unclassified",
                                  "residual": p.residual, "steps": p.steps,
                                  "converged": p.converged})
        return ClassificationReport(
            case=None, classified=False, conclusion_kind=None, gate=gate,
            u_d=None, v_D=None, mu=None, nu=None, mu_verdict=None,
            nu_verdict=None, positive_state=None, positive_residual=None,
            continuum=continuum, probe_summary=probe_summary,
            oracle_reports=oracle_reports, falsifications=falsifications,
            probe_starts=probe_starts, seed=seed, tolerances=tol, notes=notes)

    u_d, v_D = semi_trivial_states(system)

    predicted = None
    predicted_label = None
    if not (u_d.exists and v_D.exists):
        case = "degenerate_appendix_B"
        conclusion = "probed conclusion"
        if u_d.exists:
            predicted = (u_d.profile.values, np.zeros(system.grid.n_nodes))
            predicted_label = "u_only"
        elif v_D.exists:
            predicted = (np.zeros(system.grid.n_nodes), v_D.profile.values)
            predicted_label = "v_only"
        else:
            predicted = (np.zeros(system.grid.n_nodes),
                         np.zeros(system.grid.n_nodes))
            predicted_label = "extinction"
        notes.append(f"at most one semi-trivial state; predicted {predicted_label}")
    else:
        mu, nu = stability_indices(system, u_d.profile, v_D.profile)
        mu_scale = max(1.0, float(np.max(np.abs(
            system.M.values - system.b.values * u_d.profile.values))))
        nu_scale = max(1.0, float(np.max(np.abs(
            system.m.values - system.c.values * v_D.profile.values))))
        mu_verdict = classify_stability(mu.lam, mu_scale)
        nu_verdict = classify_stability(nu.lam, nu_scale)

        if mu_verdict.sign == "unstable" and nu_verdict.sign == "unstable":
            case = "i"
        elif mu_verdict.sign == "unstable":
            case = "ii"
        elif nu_verdict.sign == "unstable":
            case = "iii"
        else:
            continuum = _case_iv_certificates(system, u_d.profile.values,
                                              v_D.profile.values, tol)
            if continuum["detected"]:
                case = "iv"
            else:
                notes.append("near-degenerate, unclassified: both indices "
                             "stable-or-neutral but the continuum "
                             "certificates fail")

        if case in ("i", "ii", "iii"):
            conclusion = "probed conclusion"
        elif case == "iv":
            conclusion = "verified certificate"

        if case == "ii":
            predicted = (np.zeros(system.grid.n_nodes), v_D.profile.values)
            predicted_label = "v_only"
        elif case == "iii":
            predicted = (u_d.profile.values, np.zeros(system.grid.n_nodes))
            predicted_label = "u_only"

    probe_set = find_positive_steady_state(system, probe_starts, seed,
                                           corners=True, tol=tol)
    probes = probe_set.probes

    def fail(kind: str, probe: ProbeOutcome, dist: float | None, extra=None):
        entry = {"type": kind, "probe": probe.label, "distance": dist,
                 "residual": probe.residual, "converged": probe.converged,
                 "u": probe.u.tolist(), "v": probe.v.tolist()}
        if extra:
            entry.update(extra)
        falsifications.append(entry)

    if case == "i":
        if probe_set.representative is None:
            for p in probes:
                probe_summary.append({"label": p.label, "attractor": "unknown",
                                      "residual": p.residual, "steps": p.steps,
                                      "converged": p.converged})
                fail("no_coexistence_found", p, None)
            notes.append("both indices unstable but no coexistence limit found")
        else:
            positive_state = probe_set.representative
            positive_residual = probe_set.representative_residual
            ru = positive_state[0].values
            rv = positive_state[1].values
            for p in probes:
                dist = _sup_gap(p.u, p.v, ru, rv)
                probe_summary.append({"label": p.label, "attractor": "coexistence",
                                      "distance": dist, "residual": p.residual,
                                      "steps": p.steps, "converged": p.converged})
                if not p.converged:
                    fail("probe_unconverged", p, dist)
                elif dist > tol.probe_tol:
                    fail("probe_missed_prediction", p, dist,
                         {"predicted_u": ru.tolist(), "predicted_v": rv.tolist()})
    elif case == "iv":
        ud = u_d.profile.values
        vD = v_D.profile.values
        for p in probes:
            s, dist = _segment_fit(p.u, p.v, ud, vD)
            probe_summary.append({"label": p.label, "attractor": "segment",
                                  "s": s, "distance": dist,
                                  "residual": p.residual, "steps": p.steps,
                                  "converged": p.converged})
            if not p.converged:
                fail("probe_unconverged", p, dist)
            elif dist > tol.probe_tol:
                fail("probe_missed_prediction", p, dist, {"segment_s": s})
    elif predicted is not None:
        for p in probes:
            dist = _sup_gap(p.u, p.v, predicted[0], predicted[1])
            probe_summary.append({"label": p.label, "attractor": predicted_label,
                                  "distance": dist, "residual": p.residual,
                                  "steps": p.steps, "converged": p.converged})
            if not p.converged:
                fail("probe_unconverged", p, dist)
            elif dist > tol.probe_tol:
                fail("probe_missed_prediction", p, dist,
                     {"predicted_u": predicted[0].tolist(),
                      "predicted_v": predicted[1].tolist()})
    else:
        for p in probes:
            probe_summary.append({"label": p.label, "attractor": "unclassified",
                                  "residual": p.residual, "steps": p.steps,
                                  "converged": p.converged})

    oracle_reports = _attach_oracles(system, u_d, v_D, probes,
                                     probe_set.distinct, predicted)

    classified = case is not None
    return ClassificationReport(
        case=case, classified=classified, conclusion_kind=conclusion,
        gate=gate, u_d=u_d, v_D=v_D, mu=mu, nu=nu, mu_verdict=mu_verdict,
        nu_verdict=nu_verdict, positive_state=positive_state,
        positive_residual=positive_residual, continuum=continuum,
        probe_summary=probe_summary, oracle_reports=oracle_reports,
        falsifications=falsifications, probe_starts=probe_starts, seed=seed,
        tolerances=tol, notes=notes)
