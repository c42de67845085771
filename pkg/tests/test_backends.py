import numpy as np
import pytest

from nclab import backend as be

pytestmark = pytest.mark.skipif(not be.HAVE_NUMBA,
                                reason="numba backend not available")


@pytest.fixture(scope="module")
def problem():
    rng = np.random.default_rng(0)
    n = 90
    K = np.abs(rng.normal(size=(n, n)))
    K = 0.5 * (K + K.T)
    wq = np.full(n, 1.0 / n)
    A = K * wq[None, :] - np.diag(K.T @ wq)
    u = 1.0 + rng.random(n)
    us = u * (0.7 + 0.2 * rng.random(n))
    g = 1.0 + 0.3 * rng.random(n)
    return {"n": n, "K": K, "wq": wq, "A": A, "u": u, "us": us, "g": g}


def _flat(result):
    if not isinstance(result, tuple):
        result = (result,)
    out = []
    for item in result:
        out.extend(np.atleast_1d(item).ravel().tolist())
    return np.asarray(out)


def _assert_match(fn, *args, tol=1e-12):
    got_np = _flat(fn(*args, backend="numpy"))
    got_nb = _flat(fn(*args, backend="numba"))
    scale = max(1.0, np.max(np.abs(got_np)))
    assert np.max(np.abs(got_np - got_nb)) <= tol * scale


def test_pairwise_sum_parity(problem):
    rng = np.random.default_rng(1)
    _assert_match(be.pairwise_sum, rng.normal(size=1537), tol=1e-13)


def test_double_sum_parity(problem):
    p = problem
    _assert_match(be.kernel_diff_form, p["K"], p["wq"], p["u"], tol=1e-13)
    _assert_match(be.symmetrization_double_sum, p["K"], p["wq"], p["u"],
                  p["us"], tol=1e-13)


def test_power_iteration_parity(problem):
    p = problem
    M = np.abs(p["A"]) + 3.0 * np.eye(p["n"])
    _assert_match(be.power_iteration, M, np.ones(p["n"]), 1e-10, 20000)


def test_marching_parity(problem):
    p = problem
    ones = np.ones(p["n"])
    _assert_match(be.rk4_single, p["A"], p["g"], ones, p["u"], 0.02, 400,
                  0.0, 0, np.inf)
    _assert_match(be.rk4_competition, p["A"], p["A"], p["g"], p["g"],
                  0.5 * ones, 0.5 * ones, ones, ones, p["u"], p["us"], 0.02,
                  400, 0.0, 1e-6)
    minv = np.linalg.inv(np.eye(p["n"]) - 0.05 * p["A"])
    _assert_match(be.imex_single, minv, p["A"], p["g"], ones, p["u"], 0.05,
                  400, 0.0, 0, np.inf)
    _assert_match(be.imex_competition, minv, minv, p["A"], p["A"], p["g"],
                  p["g"], 0.5 * ones, 0.5 * ones, ones, ones, p["u"],
                  p["us"], 0.05, 400, 0.0, 1e-6)


def test_env_flag_selects_backend(monkeypatch):
    monkeypatch.setenv("NCL_BACKEND", "numpy")
    assert be.active_backend() == "numpy"
    monkeypatch.setenv("NCL_BACKEND", "numba")
    assert be.active_backend() == "numba"
    monkeypatch.setenv("NCL_BACKEND", "auto")
    assert be.active_backend() == "numba"
    monkeypatch.setenv("NCL_BACKEND", "fortran")
    with pytest.raises(ValueError):
        be.active_backend()


def test_monotone_violation_detected(problem):
    # forcing an increasing orbit to be flagged as non-increasing
    p = problem
    ones = np.ones(p["n"])
    u0 = np.full(p["n"], 0.01)
    for bk in ("numpy", "numba"):
        _, _, viol, status = be.rk4_single(
            0.0 * p["A"], p["g"], ones, u0, 0.05, 200, 0.0, -1, 1e-11,
            backend=bk)
        assert status == be.STATUS_VIOLATION
        assert viol > 1e-11
