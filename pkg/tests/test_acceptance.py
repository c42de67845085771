"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; the whole suite is desk-scale (1-D grids, n <= 400, minutes).
"""

import json
import time

import numpy as np
import pytest

import nclab
from nclab.competition import (classify_global_dynamics, dispersal_mass_rates,
                               find_positive_steady_state, integrate,
                               march_system, semi_trivial_states, SystemState)
from nclab.config import ScenarioConfig, SweepConfig
from nclab.oracles import mixed_quadratic_form, symmetrization_identity
from nclab.runner import run_scenario, run_sweep
from nclab.single_species import (ReactionSpec, march_to_steady,
                                  solve_steady_monotone, w_eps_fixed_point)
from nclab.spectral import spectral_bound

from conftest import cosine_field


def _ok(number, message):
    print(f"[criterion {number:2d}] PASS - {message}")


def scenario(n=200, b=1.0, c=1.0, kind="N", alpha=None, probes=8,
             seed=20250809, M=None, variant="classic", **extra):
    op = {"kind": kind, "rate": 1.0}
    if alpha is not None:
        op["alpha"] = alpha
    cos = {"type": "cosine", "mean": 1.0, "amplitude": 0.5}
    data = {
        "grid": {"x_lo": 0.0, "x_hi": 1.0, "n": n},
        "kernel_u": {"family": "gaussian", "sigma": 0.1},
        "kernel_v": {"family": "gaussian", "sigma": 0.1},
        "operator_u": dict(op), "operator_v": dict(op),
        "variant": variant,
        "coefficients": {"m": cos, "M": M if M is not None else cos,
                         "b": b, "c": c},
        "probes": probes, "seed": seed,
    }
    data.update(extra)
    return ScenarioConfig.from_dict(data)


@pytest.fixture(scope="module")
def crit4_cfg():
    return scenario(b=1.0, c=1.0)


@pytest.fixture(scope="module")
def crit4_run(crit4_cfg, tmp_path_factory):
    out = tmp_path_factory.mktemp("crit4")
    report, code = run_scenario(crit4_cfg, out)
    return report, code, out


def test_criterion_01_symmetrization_identity(grid100, gauss100):
    t0 = time.time()
    rng = np.random.default_rng(101)
    worst = 0.0
    for trial in range(100):
        base = 0.2 + rng.random(grid100.n_nodes)
        ordered = trial % 2 == 0
        if ordered:
            other = base + 0.05 + rng.random(grid100.n_nodes)
            u, us = nclab.ScalarField(grid100, other), nclab.ScalarField(grid100, base)
        else:
            u = nclab.ScalarField(grid100, base)
            us = nclab.ScalarField(grid100, 0.2 + rng.random(grid100.n_nodes))
        d = float(rng.uniform(0.2, 2.0))
        rep = symmetrization_identity(gauss100, d, u, us)
        assert abs(rep.difference) <= 1e-12 * rep.scale
        worst = max(worst, abs(rep.difference) / max(rep.scale, 1e-300))
        if ordered:
            assert rep.sign_claim == "nonpositive"
            assert rep.sign_satisfied
    elapsed = time.time() - t0
    assert elapsed < 10.0
    _ok(1, f"100 pairs, worst |lhs-rhs|/scale = {worst:.2e}, {elapsed:.1f}s")


def test_criterion_02_single_species_sandwich(op_n200, grid200, m_cos200,
                                              steady200):
    t0 = time.time()
    res = steady200
    gap = float(np.max(np.abs(res.upper_limit.values - res.lower_limit.values)))
    assert res.exists
    assert gap < 1e-8
    assert res.residual < 1e-10
    rng = np.random.default_rng(202)
    reaction = ReactionSpec.logistic(m_cos200)
    worst = 0.0
    for _ in range(5):
        u0 = nclab.ScalarField(grid200,
                               rng.uniform(0.01, 2.0, grid200.n_nodes))
        prof, _, _, conv = march_to_steady(op_n200, reaction, u0,
                                           residual_target=1e-11)
        assert conv
        worst = max(worst, float(np.max(np.abs(prof.values
                                               - res.profile.values))))
    assert worst < 1e-8
    elapsed = time.time() - t0
    assert elapsed < 30.0
    _ok(2, f"gap {gap:.2e}, residual {res.residual:.2e}, "
           f"restart spread {worst:.2e}, {elapsed:.1f}s")


def test_criterion_03_existence_iff_positive_bound(grid100):
    K = nclab.build_kernel_matrix(nclab.KernelSpec.tophat(2.0), grid100)
    m = cosine_field(grid100, mean=0.2, amplitude=1.0)  # sign-changing growth
    outcomes = []
    for d in (0.25, 0.5, 1.0, 2.0, 4.0, 8.0):
        op = nclab.assemble_operator("D", d, K, grid100)
        lam = spectral_bound(op, m, method="perron_power").lam
        res = solve_steady_monotone(op, ReactionSpec.logistic(m))
        assert res.exists == (lam > 1e-8), f"disagreement at d={d}"
        if res.exists:
            assert np.all(res.profile.values > 0)
        outcomes.append((d, lam, res.exists))
    assert any(e for _, _, e in outcomes) and not all(e for _, _, e in outcomes)
    # independent decay check on one extinct cell
    op = nclab.assemble_operator("D", 2.0, K, grid100)
    prof, _, _, _ = march_to_steady(op, ReactionSpec.logistic(m),
                                    nclab.ScalarField.constant(grid100, 1.2),
                                    residual_target=1e-12)
    assert float(np.max(prof.values)) < 1e-8
    _ok(3, "exists flag matches Perron sign on all "
           f"{len(outcomes)} cells; extinct cell decays below 1e-8")


def test_criterion_04_continuum_certificate(crit4_run):
    report, code, _ = crit4_run
    assert code == 0 and not report.falsifications
    assert report.case == "iv"
    assert abs(report.mu.lam) < 1e-6
    assert abs(report.nu.lam) < 1e-6
    assert report.continuum["state_match"] < 1e-6
    assert max(report.continuum["family_residuals"]) < 1e-10
    s_values = [p["s"] for p in report.probe_summary]
    assert all(p["distance"] <= 1e-6 for p in report.probe_summary)
    distinct = sum(1 for i, s in enumerate(s_values)
                   if all(abs(s - t) > 1e-4 for t in s_values[:i])) + 1
    assert distinct >= 3
    _ok(4, f"mu={report.mu.lam:.1e}, family max "
           f"{max(report.continuum['family_residuals']):.1e}, "
           f"{distinct} distinct segment points")


def test_criterion_05_unique_coexistence(grid200, op_n200, m_cos200,
                                         steady200):
    cfg = scenario(b=0.25, c=0.25, probes=20)
    report = classify_global_dynamics(cfg.build(), probe_starts=20,
                                      seed=cfg.seed)
    assert report.case == "i" and not report.falsifications
    assert len(report.probe_summary) == 22  # 20 random plus the two corners
    worst = max(p["distance"] for p in report.probe_summary)
    assert worst <= 1e-6

    symmetric = nclab.assemble_system(grid200, op_n200, op_n200, m_cos200,
                                      m_cos200, 0.5, 0.5, variant="classic")
    probe = find_positive_steady_state(symmetric, starts=3, seed=7)
    assert probe.representative is not None
    theta = (2.0 / 3.0) * steady200.profile.values
    gap = max(float(np.max(np.abs(probe.representative[0].values - theta))),
              float(np.max(np.abs(probe.representative[1].values - theta))))
    assert gap < 1e-8
    _ok(5, f"22 probes within {worst:.1e}; scaling identity gap {gap:.1e}")


def test_criterion_06_exclusion_case(grid200):
    cfg = scenario(b=0.6, c=1.5, probes=20)
    report = classify_global_dynamics(cfg.build(), probe_starts=20,
                                      seed=cfg.seed)
    assert report.mu.lam > 0 and report.nu.lam < 0
    assert report.case == "ii" and not report.falsifications
    assert all(p["attractor"] == "v_only" for p in report.probe_summary)
    assert max(p["distance"] for p in report.probe_summary) <= 1e-6
    audits = [o for o in report.oracle_reports
              if o["name"] == "probe_attractor_W_audit"]
    assert audits and audits[0]["signs_ok"]
    _ok(6, f"mu={report.mu.lam:.3f} > 0 > nu={report.nu.lam:.3f}; "
           "all 22 probes reached the v-only state; W audit passed")


def test_criterion_07_ode_limit(grid100, gauss100, m_cos100):
    op0 = nclab.assemble_operator("N", 0.0, gauss100, grid100)
    system = nclab.assemble_system(grid100, op0, op0, m_cos100, m_cos100,
                                   0.5, 0.5, variant="classic")
    start = SystemState(nclab.ScalarField.constant(grid100, 0.9, "density"),
                        nclab.ScalarField.constant(grid100, 0.1, "density"),
                        0.0)
    traj = integrate(system, start, t_end=150.0, n_snapshots=2)
    target = (2.0 / 3.0) * np.maximum(m_cos100.values, 0.0)
    err = max(float(np.max(np.abs(traj[-1].u.values - target))),
              float(np.max(np.abs(traj[-1].v.values - target))))
    assert err < 1e-6
    _ok(7, f"pointwise gap to the closed form {err:.1e}")


def test_criterion_08_conservation_and_order(grid100, op_n100, m_cos100):
    system = nclab.assemble_system(grid100, op_n100, op_n100, m_cos100,
                                   m_cos100, 0.4, 0.6, variant="classic")
    start = SystemState(nclab.ScalarField.constant(grid100, 1.1, "density"),
                        nclab.ScalarField.constant(grid100, 0.3, "density"),
                        0.0)
    worst_rate = 0.0
    for st in integrate(system, start, t_end=6.0, n_snapshots=8):
        ru, rv = dispersal_mass_rates(system, st)
        scale = max(1.0, st.u.max_abs(), st.v.max_abs())
        worst_rate = max(worst_rate, abs(ru) / scale, abs(rv) / scale)
    assert worst_rate <= 1e-8

    rng = np.random.default_rng(808)
    n = grid100.n_nodes
    for _ in range(10):
        u_lo = rng.uniform(0.05, 0.9, n)
        v_lo = rng.uniform(0.05, 0.9, n)
        hi = SystemState(nclab.ScalarField(grid100, u_lo + rng.uniform(0, 0.4, n)),
                         nclab.ScalarField(grid100, v_lo * rng.uniform(0, 1, n)),
                         0.0)
        lo = SystemState(nclab.ScalarField(grid100, u_lo),
                         nclab.ScalarField(grid100, v_lo), 0.0)
        for s1, s2 in zip(integrate(system, hi, 4.0, 4),
                          integrate(system, lo, 4.0, 4)):
            assert np.all(s1.u.values >= s2.u.values - 1e-11)
            assert np.all(s1.v.values <= s2.v.values + 1e-11)
    _ok(8, f"dispersal mass rate at most {worst_rate:.1e}; "
           "order preserved on 10 trajectory pairs")


def test_criterion_09_spectral_cross_validation():
    rng = np.random.default_rng(909)
    worst_pair = worst_shift = 0.0
    for trial in range(50):
        n = int(rng.integers(40, 81))
        grid = nclab.make_grid(0.0, 1.0, n)
        if rng.random() < 0.5:
            spec = nclab.KernelSpec.gaussian(float(rng.uniform(0.08, 0.25)))
        else:
            spec = nclab.KernelSpec.tophat(float(rng.uniform(0.8, 2.5)))
        K = nclab.build_kernel_matrix(spec, grid)
        kind = ("N", "D", "mixed")[trial % 3]
        alpha = float(rng.uniform(0.5, 1.0)) if kind == "mixed" else None
        d = float(rng.uniform(0.3, 1.2))
        op = nclab.assemble_operator(kind, d, K, grid, alpha=alpha)
        x = grid.nodes
        V = nclab.ScalarField(grid, rng.uniform(-1, 1)
                              + rng.uniform(0, 1) * np.cos(2 * np.pi * x)
                              + rng.uniform(-0.5, 0.5) * x)
        sym = spectral_bound(op, V, method="rayleigh_symmetric")
        pow_ = spectral_bound(op, V, method="perron_power")
        worst_pair = max(worst_pair, abs(sym.lam - pow_.lam))
        assert abs(sym.lam - pow_.lam) < 1e-8

        shift = float(rng.uniform(-1, 1))
        lam_shift = spectral_bound(
            op, nclab.ScalarField(grid, V.values + shift)).lam
        worst_shift = max(worst_shift, abs(lam_shift - sym.lam - shift))
        assert abs(lam_shift - sym.lam - shift) < 1e-10

        bigger = nclab.ScalarField(grid, V.values + rng.uniform(0, 0.5, n))
        assert spectral_bound(op, bigger).lam >= sym.lam - 1e-12
    _ok(9, f"50 instances: route gap {worst_pair:.1e}, "
           f"shift defect {worst_shift:.1e}, monotone in the potential")


def test_criterion_10_mixed_dispersal_smoke():
    rep_iv = classify_global_dynamics(
        scenario(b=1.0, c=1.0, kind="mixed", alpha=0.5, variant="mixed",
                 probes=6).build(), probe_starts=6, seed=20250809)
    assert rep_iv.case == "iv" and not rep_iv.falsifications
    rep_i = classify_global_dynamics(
        scenario(b=0.25, c=0.25, kind="mixed", alpha=0.5, variant="mixed",
                 probes=6).build(), probe_starts=6, seed=20250809)
    assert rep_i.case == "i" and not rep_i.falsifications

    diffs = []
    for n in (101, 201):
        grid = nclab.make_grid(0.0, 1.0, n)
        K = nclab.build_kernel_matrix(nclab.KernelSpec.gaussian(0.1), grid)
        op = nclab.assemble_operator("mixed", 1.0, K, grid, alpha=0.5)
        u_hat = nclab.ScalarField.from_callable(
            grid, lambda x: 1.0 + 0.3 * np.sin(2 * np.pi * x) + 0.2 * x)
        u = nclab.ScalarField(grid, u_hat.values * (1.0 + 0.1 * grid.nodes))
        rep = mixed_quadratic_form(op, u, u_hat)
        assert rep.sign_satisfied
        diffs.append(abs(rep.difference))
    ratio = diffs[0] / diffs[1]
    assert 3.0 <= ratio <= 5.0
    _ok(10, f"mixed reruns keep case labels iv and i; "
            f"split/direct error ratio {ratio:.2f} under h-halving")


def test_criterion_11_degenerate_dynamics(grid200, op_n200, m_cos200,
                                          steady200):
    cfg = scenario(b=0.5, c=0.5, M=-0.5, probes=8)
    report = classify_global_dynamics(cfg.build(), probe_starts=8,
                                      seed=cfg.seed)
    assert report.case == "degenerate_appendix_B"
    assert report.u_d.exists and not report.v_D.exists
    assert not report.falsifications
    assert all(p["attractor"] == "u_only" and p["distance"] <= 1e-6
               for p in report.probe_summary)

    gaps = []
    for eps in (0.1, 0.05, 0.025):
        w = w_eps_fixed_point(op_n200, m_cos200, eps)
        gaps.append(float(np.max(np.abs(w.values - steady200.profile.values))))
    assert gaps[0] > gaps[1] > gaps[2]
    _ok(11, f"all probes at the u-only state; depressed-state gaps "
            f"{gaps[0]:.2e} > {gaps[1]:.2e} > {gaps[2]:.2e}")


def test_criterion_12_reproducibility(crit4_cfg, crit4_run, tmp_path):
    _, _, first_out = crit4_run
    _, code = run_scenario(crit4_cfg, tmp_path / "again")
    assert code == 0
    b1 = (first_out / "report.json").read_bytes()
    b2 = (tmp_path / "again" / "report.json").read_bytes()
    assert b1 == b2

    sweep = SweepConfig.from_dict({
        "base": scenario(n=64, b=0.25, c=0.25, probes=2).data,
        "axes": [{"param": "d", "start": 0.6, "stop": 1.4, "steps": 5},
                 {"param": "D", "start": 0.6, "stop": 1.4, "steps": 5}]})
    p1, code1 = run_sweep(sweep, tmp_path / "t1", threads=1)
    p4, code4 = run_sweep(sweep, tmp_path / "t4", threads=4)
    assert code1 == code4 == 0
    assert p1.read_bytes() == p4.read_bytes()
    rows = p1.read_text().strip().splitlines()
    assert len(rows) == 26  # header + 25 cells
    _ok(12, "byte-identical report.json on rerun; "
            "5x5 sweep identical at 1 and 4 threads")
