"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Backend selection is driven by the ``NCL_BACKEND`` environment variable:

* unset or ``auto`` -- use numba when it is importable, else numpy;
* ``numba``         -- require numba (raises if it is missing);
* ``numpy``         -- force the pure-numpy implementations.

The two implementations of each kernel compute the same recurrences; they
may differ in the last bits because of instruction ordering, never in
semantics.  ``benchmarks/bench_backends.py`` compares their throughput.

Status codes returned by the time steppers:
    0  converged (RHS sup-norm under the exit tolerance)
    1  step budget exhausted
    2  structural violation (monotonicity break / clip above tolerance)
    3  non-finite state encountered
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


STATUS_CONVERGED = 0
STATUS_BUDGET = 1
STATUS_VIOLATION = 2
STATUS_NONFINITE = 3


def active_backend() -> str:
    """Resolve the backend name from the environment (checked per call)."""
    choice = os.environ.get("NCL_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if HAVE_NUMBA else "numpy"
    if choice == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("NCL_BACKEND=numba but numba is not importable")
        return "numba"
    if choice == "numpy":
        return "numpy"
    raise ValueError(f"unknown NCL_BACKEND value: {choice!r}")


# ---------------------------------------------------------------------------
# pairwise (tree) summation
# ---------------------------------------------------------------------------

def _pairwise_sum_py(a):
    buf = a.copy()
    m = buf.shape[0]
    if m == 0:
        return 0.0
    while m > 1:
        k = 0
        i = 0
        while i + 1 < m:
            buf[k] = buf[i] + buf[i + 1]
            k += 1
            i += 2
        if i < m:
            buf[k] = buf[i]
            k += 1
        m = k
    return buf[0]


_pairwise_sum_nb = njit(cache=True, nogil=True)(_pairwise_sum_py)


def pairwise_sum(a: np.ndarray, backend: str | None = None) -> float:
    """Tree-reduce a 1-D array; deterministic and cancellation-friendly."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    be = backend or active_backend()
    if be == "numba":
        return float(_pairwise_sum_nb(a))
    # np.sum is already a blocked pairwise reduction
    return float(np.sum(a))


# ---------------------------------------------------------------------------
# kernel double sums
# ---------------------------------------------------------------------------

def _diff_form_np(K, wq, phi):
    d = phi[:, None] - phi[None, :]
    return float(np.sum(K * (wq[:, None] * wq[None, :]) * d * d))


@njit(cache=True, nogil=True)
def _diff_form_nb(K, wq, phi):
    n = K.shape[0]
    rows = np.empty(n)
    scratch = np.empty(n)
    for i in range(n):
        for j in range(n):
            d = phi[i] - phi[j]
            scratch[j] = K[i, j] * wq[i] * wq[j] * d * d
        rows[i] = _pairwise_sum_nb(scratch)
    return _pairwise_sum_nb(rows)


def kernel_diff_form(K, wq, phi, backend: str | None = None) -> float:
    """Double sum of k_ij w_i w_j (phi_i - phi_j)^2 over all node pairs."""
    be = backend or active_backend()
    if be == "numba":
        return float(_diff_form_nb(K, wq, phi))
    return _diff_form_np(K, wq, phi)


def _symmetrization_np(K, wq, u, us):
    cross = np.outer(us, u) - np.outer(u, us)
    gap = 1.0 / np.outer(u, u) - 1.0 / np.outer(us, us)
    terms = K * (wq[:, None] * wq[None, :]) * cross * cross * gap
    return float(np.sum(terms)), float(np.sum(np.abs(terms)))


@njit(cache=True, nogil=True)
def _symmetrization_nb(K, wq, u, us):
    n = K.shape[0]
    rows = np.empty(n)
    rows_abs = np.empty(n)
    scratch = np.empty(n)
    scratch_abs = np.empty(n)
    for i in range(n):
        for j in range(n):
            cross = us[i] * u[j] - u[i] * us[j]
            gap = 1.0 / (u[i] * u[j]) - 1.0 / (us[i] * us[j])
            t = K[i, j] * wq[i] * wq[j] * cross * cross * gap
            scratch[j] = t
            scratch_abs[j] = abs(t)
        rows[i] = _pairwise_sum_nb(scratch)
        rows_abs[i] = _pairwise_sum_nb(scratch_abs)
    return _pairwise_sum_nb(rows), _pairwise_sum_nb(rows_abs)


def symmetrization_double_sum(K, wq, u, us, backend: str | None = None):
    """Pairwise form of the kernel cross terms for two positive fields.

    Returns ``(total, abs_mass)`` where ``total`` is the signed double sum
    of ``k_ij w_i w_j [us_i u_j - u_i us_j]^2 (1/(u_i u_j) - 1/(us_i us_j))``
    and ``abs_mass`` is the same sum over absolute values (the natural
    scale for cancellation-aware comparisons).
    """
    be = backend or active_backend()
    if be == "numba":
        total, mass = _symmetrization_nb(K, wq, u, us)
        return float(total), float(mass)
    return _symmetrization_np(K, wq, u, us)


# ---------------------------------------------------------------------------
# power iteration
# ---------------------------------------------------------------------------

def _power_iteration_impl(M, x0, rtol, max_iter, shift):
    n = M.shape[0]
    x = x0.copy()
    s = 0.0
    for i in range(n):
        a = abs(x[i])
        if a > s:
            s = a
    x = x / s
    lam = 0.0
    resid = np.inf
    it = 0
    status = STATUS_BUDGET
    for it in range(1, max_iter + 1):
        y = M @ x
        num = 0.0
        den = 0.0
        for i in range(n):
            num += x[i] * y[i]
            den += x[i] * x[i]
        lam = num / den
        resid = 0.0
        for i in range(n):
            a = abs(y[i] - lam * x[i])
            if a > resid:
                resid = a
        s = 0.0
        for i in range(n):
            a = abs(y[i])
            if a > s:
                s = a
        if s == 0.0 or not np.isfinite(s):
            status = STATUS_NONFINITE
            break
        x = y / s
        if resid <= rtol * max(1.0, abs(lam - shift)):
            status = STATUS_CONVERGED
            break
    return lam, x, it, resid, status


_power_iteration_nb = njit(cache=True, nogil=True)(_power_iteration_impl)


def power_iteration(M, x0, rtol, max_iter, shift=0.0,
                    backend: str | None = None):
    """Dominant eigenpair of a nonnegative matrix by plain power iteration.

    The iterate is sup-normalized; convergence is declared when the
    Rayleigh-quotient residual ``||Mx - lam x||_inf`` drops under
    ``rtol * max(1, |lam - shift|)``.  Callers that shifted the matrix
    into the nonnegative cone pass the shift so the test is relative to
    the eigenvalue of the original matrix, not the inflated one.
    """
    M = np.ascontiguousarray(M, dtype=np.float64)
    x0 = np.ascontiguousarray(x0, dtype=np.float64)
    be = backend or active_backend()
    impl = _power_iteration_nb if be == "numba" else _power_iteration_impl
    lam, x, it, resid, status = impl(M, x0, float(rtol), int(max_iter),
                                     float(shift))
    return float(lam), np.asarray(x), int(it), float(resid), int(status)


# ---------------------------------------------------------------------------
# RK4 time stepping
# ---------------------------------------------------------------------------

def _rk4_single_impl(A, g, s, u0, dt, max_steps, exit_tol, mono_dir, mono_tol):
    n = u0.shape[0]
    u = u0.copy()
    max_violation = 0.0
    status = STATUS_BUDGET
    steps = 0
    for _ in range(max_steps):
        k1 = A @ u + u * (g - s * u)
        r = 0.0
        for i in range(n):
            a = abs(k1[i])
            if a > r:
                r = a
        if r <= exit_tol:
            status = STATUS_CONVERGED
            break
        u2 = u + (0.5 * dt) * k1
        k2 = A @ u2 + u2 * (g - s * u2)
        u3 = u + (0.5 * dt) * k2
        k3 = A @ u3 + u3 * (g - s * u3)
        u4 = u + dt * k3
        k4 = A @ u4 + u4 * (g - s * u4)
        un = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        ok = True
        for i in range(n):
            if not np.isfinite(un[i]):
                ok = False
                break
        if not ok:
            status = STATUS_NONFINITE
            break
        if mono_dir != 0:
            for i in range(n):
                viol = (un[i] - u[i]) * (-mono_dir)
                if viol > max_violation:
                    max_violation = viol
        u = un
        steps += 1
        if mono_dir != 0 and max_violation > mono_tol:
            status = STATUS_VIOLATION
            break
    return u, steps, max_violation, status


_rk4_single_nb = njit(cache=True, nogil=True)(_rk4_single_impl)


def rk4_single(A, g, s, u0, dt, max_steps, exit_tol, mono_dir=0,
               mono_tol=np.inf, backend: str | None = None):
    """March ``u' = A u + u (g - s u)`` with fixed-step RK4.

    ``mono_dir``: -1 requires a non-increasing orbit, +1 non-decreasing,
    0 disables the check.  Returns ``(u, steps, max_violation, status)``.
    """
    be = backend or active_backend()
    impl = _rk4_single_nb if be == "numba" else _rk4_single_impl
    args = (np.ascontiguousarray(A), np.ascontiguousarray(g),
            np.ascontiguousarray(s), np.ascontiguousarray(u0),
            float(dt), int(max_steps), float(exit_tol), int(mono_dir),
            float(mono_tol))
    u, steps, max_violation, status = impl(*args)
    return np.asarray(u), int(steps), float(max_violation), int(status)


def _rk4_competition_impl(Au, Av, gm, gM, bb, cc, b1, c2, u0, v0, dt,
                          max_steps, exit_tol, clip_tol):
    n = u0.shape[0]
    u = u0.copy()
    v = v0.copy()
    max_clip = 0.0
    status = STATUS_BUDGET
    steps = 0
    for _ in range(max_steps):
        fu1 = Au @ u + u * (gm - b1 * u - cc * v)
        fv1 = Av @ v + v * (gM - bb * u - c2 * v)
        r = 0.0
        for i in range(n):
            a = abs(fu1[i])
            if a > r:
                r = a
            a = abs(fv1[i])
            if a > r:
                r = a
        if r <= exit_tol:
            status = STATUS_CONVERGED
            break
        u2 = u + (0.5 * dt) * fu1
        v2 = v + (0.5 * dt) * fv1
        fu2 = Au @ u2 + u2 * (gm - b1 * u2 - cc * v2)
        fv2 = Av @ v2 + v2 * (gM - bb * u2 - c2 * v2)
        u3 = u + (0.5 * dt) * fu2
        v3 = v + (0.5 * dt) * fv2
        fu3 = Au @ u3 + u3 * (gm - b1 * u3 - cc * v3)
        fv3 = Av @ v3 + v3 * (gM - bb * u3 - c2 * v3)
        u4 = u + dt * fu3
        v4 = v + dt * fv3
        fu4 = Au @ u4 + u4 * (gm - b1 * u4 - cc * v4)
        fv4 = Av @ v4 + v4 * (gM - bb * u4 - c2 * v4)
        un = u + (dt / 6.0) * (fu1 + 2.0 * fu2 + 2.0 * fu3 + fu4)
        vn = v + (dt / 6.0) * (fv1 + 2.0 * fv2 + 2.0 * fv3 + fv4)
        ok = True
        for i in range(n):
            if not (np.isfinite(un[i]) and np.isfinite(vn[i])):
                ok = False
                break
        if not ok:
            status = STATUS_NONFINITE
            break
        for i in range(n):
            if un[i] < 0.0:
                if -un[i] > max_clip:
                    max_clip = -un[i]
                un[i] = 0.0
            if vn[i] < 0.0:
                if -vn[i] > max_clip:
                    max_clip = -vn[i]
                vn[i] = 0.0
        u = un
        v = vn
        steps += 1
        if max_clip > clip_tol:
            status = STATUS_VIOLATION
            break
    return u, v, steps, max_clip, status


_rk4_competition_nb = njit(cache=True, nogil=True)(_rk4_competition_impl)


def rk4_competition(Au, Av, gm, gM, bb, cc, b1, c2, u0, v0, dt, max_steps,
                    exit_tol, clip_tol, backend: str | None = None):
    """March the two-species system with fixed-step RK4.

    Negative undershoots are clipped at zero; the largest clip magnitude is
    tracked and a clip above ``clip_tol`` aborts with a violation status.
    Returns ``(u, v, steps, max_clip, status)``.
    """
    be = backend or active_backend()
    impl = _rk4_competition_nb if be == "numba" else _rk4_competition_impl
    arrs = [np.ascontiguousarray(a) for a in
            (Au, Av, gm, gM, bb, cc, b1, c2, u0, v0)]
    u, v, steps, max_clip, status = impl(
        *arrs, float(dt), int(max_steps), float(exit_tol), float(clip_tol))
    return np.asarray(u), np.asarray(v), int(steps), float(max_clip), int(status)


def _imex_single_impl(Minv, A, g, s, u0, dt, max_steps, exit_tol, mono_dir,
                      mono_tol):
    n = u0.shape[0]
    u = u0.copy()
    max_violation = 0.0
    status = STATUS_BUDGET
    steps = 0
    for _ in range(max_steps):
        rhs = A @ u + u * (g - s * u)
        r = 0.0
        for i in range(n):
            a = abs(rhs[i])
            if a > r:
                r = a
        if r <= exit_tol:
            status = STATUS_CONVERGED
            break
        un = Minv @ (u + dt * (u * (g - s * u)))
        ok = True
        for i in range(n):
            if not np.isfinite(un[i]):
                ok = False
                break
        if not ok:
            status = STATUS_NONFINITE
            break
        if mono_dir != 0:
            for i in range(n):
                viol = (un[i] - u[i]) * (-mono_dir)
                if viol > max_violation:
                    max_violation = viol
        u = un
        steps += 1
        if mono_dir != 0 and max_violation > mono_tol:
            status = STATUS_VIOLATION
            break
    return u, steps, max_violation, status


_imex_single_nb = njit(cache=True, nogil=True)(_imex_single_impl)


def imex_single(Minv, A, g, s, u0, dt, max_steps, exit_tol, mono_dir=0,
                mono_tol=np.inf, backend: str | None = None):
    """Semi-implicit march of ``u' = A u + u (g - s u)``.

    The linear part is folded into the precomputed resolvent
    ``Minv = (I - dt A)^-1`` (nonnegative for our operators, so the step
    map is order-preserving); the reaction is explicit.  Used where the
    stiff local part makes explicit RK4 steps impractically small.
    """
    be = backend or active_backend()
    impl = _imex_single_nb if be == "numba" else _imex_single_impl
    u, steps, max_violation, status = impl(
        np.ascontiguousarray(Minv), np.ascontiguousarray(A),
        np.ascontiguousarray(g), np.ascontiguousarray(s),
        np.ascontiguousarray(u0), float(dt), int(max_steps), float(exit_tol),
        int(mono_dir), float(mono_tol))
    return np.asarray(u), int(steps), float(max_violation), int(status)


def _imex_competition_impl(MinvU, MinvV, Au, Av, gm, gM, bb, cc, b1, c2, u0,
                           v0, dt, max_steps, exit_tol, clip_tol):
    n = u0.shape[0]
    u = u0.copy()
    v = v0.copy()
    max_clip = 0.0
    status = STATUS_BUDGET
    steps = 0
    for _ in range(max_steps):
        ru = Au @ u + u * (gm - b1 * u - cc * v)
        rv = Av @ v + v * (gM - bb * u - c2 * v)
        r = 0.0
        for i in range(n):
            a = abs(ru[i])
            if a > r:
                r = a
            a = abs(rv[i])
            if a > r:
                r = a
        if r <= exit_tol:
            status = STATUS_CONVERGED
            break
        un = MinvU @ (u + dt * (u * (gm - b1 * u - cc * v)))
        vn = MinvV @ (v + dt * (v * (gM - bb * u - c2 * v)))
        ok = True
        for i in range(n):
            if not (np.isfinite(un[i]) and np.isfinite(vn[i])):
                ok = False
                break
        if not ok:
            status = STATUS_NONFINITE
            break
        for i in range(n):
            if un[i] < 0.0:
                if -un[i] > max_clip:
                    max_clip = -un[i]
                un[i] = 0.0
            if vn[i] < 0.0:
                if -vn[i] > max_clip:
                    max_clip = -vn[i]
                vn[i] = 0.0
        u = un
        v = vn
        steps += 1
        if max_clip > clip_tol:
            status = STATUS_VIOLATION
            break
    return u, v, steps, max_clip, status


_imex_competition_nb = njit(cache=True, nogil=True)(_imex_competition_impl)


def imex_competition(MinvU, MinvV, Au, Av, gm, gM, bb, cc, b1, c2, u0, v0,
                     dt, max_steps, exit_tol, clip_tol,
                     backend: str | None = None):
    """Semi-implicit march of the two-species system (see imex_single)."""
    be = backend or active_backend()
    impl = _imex_competition_nb if be == "numba" else _imex_competition_impl
    arrs = [np.ascontiguousarray(a) for a in
            (MinvU, MinvV, Au, Av, gm, gM, bb, cc, b1, c2, u0, v0)]
    u, v, steps, max_clip, status = impl(
        *arrs, float(dt), int(max_steps), float(exit_tol), float(clip_tol))
    return np.asarray(u), np.asarray(v), int(steps), float(max_clip), int(status)


# registry used by the benchmark and the backend-parity tests
BACKENDS = ("numpy", "numba") if HAVE_NUMBA else ("numpy",)
