"""Persistent, reproducible runs: scenarios, sweeps, spectral queries.

Every command writes its outputs plus a manifest naming the config hash,
the seed, and the tool version; no timestamps, so identical inputs give
byte-identical outputs.  Sweep cells are computed independently (with
per-cell seeds derived from the base seed and the cell index) and merged
in cell-index order, so the CSV is invariant under the thread count.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .competition import ClassificationReport, classify_global_dynamics
from .config import ScenarioConfig, SweepConfig
from .errors import ConfigError, NclabError
from .grid import ScalarField
from .oracles import neutral_case_functionals, symmetrization_identity
from .single_species import solve_steady_monotone
from .spectral import SpectralResult, spectral_bound

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FALSIFIED = 3
EXIT_NUMERIC = 4

SPECTRUM_TARGETS = ("lambda_d", "lambda_D", "mu", "nu")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, sort_keys=True, indent=2,
                               allow_nan=False) + "\n", encoding="utf-8")


def _write_field_csv(path: Path, field: ScalarField):
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write("node,value\n")
        for x, v in zip(field.grid.nodes, field.values):
            fh.write(f"{float(x)!r},{float(v)!r}\n")


def read_field_csv(path: Path, grid) -> ScalarField:
    nodes = []
    values = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            nodes.append(float(row["node"]))
            values.append(float(row["value"]))
    if len(values) != grid.n_nodes or not np.allclose(nodes, grid.nodes):
        raise ConfigError(f"profile {path} does not match the config grid")
    return ScalarField(grid, np.asarray(values))


def _write_manifest(out_dir: Path, command: str, config_hash: str, seed: int,
                    artifacts: list[str]):
    _write_json(out_dir / "manifest.json", {
        "command": command, "config_hash": config_hash, "seed": seed,
        "version": __version__, "artifacts": sorted(artifacts)})


def run_scenario(cfg: ScenarioConfig, out_dir: Path,
                 seed: int | None = None) -> tuple[ClassificationReport, int]:
    """Classify one scenario and persist report, profiles, and manifest.

    Returns the report and the exit code (0 ok, 3 when a falsification
    event was recorded; the report is written either way).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    system = cfg.build()
    use_seed = cfg.seed if seed is None else int(seed)
    report = classify_global_dynamics(system, probe_starts=cfg.probes,
                                      seed=use_seed, tol=cfg.tolerances())

    artifacts = ["report.json"]
    profiles = out_dir / "profiles"
    profiles.mkdir(exist_ok=True)
    if report.u_d is not None and report.u_d.exists:
        _write_field_csv(profiles / "u_d.csv", report.u_d.profile)
        artifacts.append("profiles/u_d.csv")
    if report.v_D is not None and report.v_D.exists:
        _write_field_csv(profiles / "v_D.csv", report.v_D.profile)
        artifacts.append("profiles/v_D.csv")
    if report.positive_state is not None:
        _write_field_csv(profiles / "coexistence_u.csv", report.positive_state[0])
        _write_field_csv(profiles / "coexistence_v.csv", report.positive_state[1])
        artifacts += ["profiles/coexistence_u.csv", "profiles/coexistence_v.csv"]

    payload = report.to_dict()
    payload["config_hash"] = cfg.config_hash()
    payload["version"] = __version__
    _write_json(out_dir / "report.json", payload)
    _write_manifest(out_dir, "run", cfg.config_hash(), use_seed, artifacts)
    code = EXIT_FALSIFIED if report.falsifications else EXIT_OK
    return report, code


_SWEEP_FIELDS = ("case", "classified", "mu", "nu", "continuum",
                 "probe_max_distance", "probe_all_converged", "u_d_exists",
                 "v_D_exists", "falsifications", "error")


def _sweep_cell_row(sweep: SweepConfig, idx: int) -> dict:
    params = sweep.cell_params(idx)
    row = {"cell": idx, **{k: repr(v) for k, v in params.items()}}
    row.update({k: "" for k in _SWEEP_FIELDS})
    try:
        cfg = sweep.cell_config(idx)
        system = cfg.build()
        report = classify_global_dynamics(system, probe_starts=cfg.probes,
                                          seed=cfg.seed, tol=cfg.tolerances())
        dists = [p.get("distance") for p in report.probe_summary
                 if p.get("distance") is not None]
        row.update({
            "case": report.case or "",
            "classified": report.classified,
            "mu": "" if report.mu is None else repr(report.mu.lam),
            "nu": "" if report.nu is None else repr(report.nu.lam),
            "continuum": report.continuum_detected,
            "probe_max_distance": repr(max(dists)) if dists else "",
            "probe_all_converged": all(p["converged"]
                                       for p in report.probe_summary),
            "u_d_exists": "" if report.u_d is None else report.u_d.exists,
            "v_D_exists": "" if report.v_D is None else report.v_D.exists,
            "falsifications": len(report.falsifications),
        })
    except NclabError as exc:  # per-cell failures never abort the sweep
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(sweep: SweepConfig, out_dir: Path,
              threads: int | None = None) -> tuple[Path, int]:
    """Run every cell (possibly concurrently) and write the phase-map CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    threads = resolve_threads(threads)
    n = sweep.n_cells()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda i: _sweep_cell_row(sweep, i), range(n)))
    else:
        rows = [_sweep_cell_row(sweep, i) for i in range(n)]
    rows.sort(key=lambda r: r["cell"])

    header = ["cell"] + [ax["param"] for ax in sweep.axes] + list(_SWEEP_FIELDS)
    csv_path = out_dir / "sweep.csv"
    with csv_path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    _write_manifest(out_dir, "sweep", sweep.config_hash(), sweep.base.seed,
                    ["sweep.csv"])
    code = EXIT_NUMERIC if any(r["error"] for r in rows) else EXIT_OK
    return csv_path, code


def spectrum_query(cfg: ScenarioConfig, target: str,
                   out_dir: Path | None = None) -> SpectralResult:
    """One of the four named spectral bounds, persisted with its metadata."""
    if target not in SPECTRUM_TARGETS:
        raise ConfigError(f"unknown spectrum target {target!r}; "
                          f"choose from {SPECTRUM_TARGETS}")
    system = cfg.build()
    if target == "lambda_d":
        result = spectral_bound(system.op_u, system.m)
    elif target == "lambda_D":
        result = spectral_bound(system.op_v, system.M)
    else:
        u_d = solve_steady_monotone(system.op_u, system.reaction_u())
        v_D = solve_steady_monotone(system.op_v, system.reaction_v())
        if target == "mu":
            if not u_d.exists:
                raise NclabError("mu is undefined: the u-side semi-trivial "
                                 "state does not exist")
            result = spectral_bound(system.op_v, ScalarField(
                system.grid,
                system.M.values - system.b.values * u_d.profile.values))
        else:
            if not v_D.exists:
                raise NclabError("nu is undefined: the v-side semi-trivial "
                                 "state does not exist")
            result = spectral_bound(system.op_u, ScalarField(
                system.grid,
                system.m.values - system.c.values * v_D.profile.values))
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        name = f"spectrum_{target}.json"
        _write_json(out_dir / name,
                    {"target": target, **result.to_dict(),
                     "config_hash": cfg.config_hash(), "version": __version__})
        _write_manifest(out_dir, "spectrum", cfg.config_hash(), cfg.seed, [name])
    return result


def oracle_suite(cfg: ScenarioConfig, profiles_dir: Path,
                 out_dir: Path) -> dict:
    """Run the integral oracles on stored semi-trivial profiles."""
    out_dir = Path(out_dir)
    profiles_dir = Path(profiles_dir)
    system = cfg.build()
    u_path = profiles_dir / "u_d.csv"
    v_path = profiles_dir / "v_D.csv"
    if not u_path.exists():
        raise ConfigError(f"no stored profile at {u_path}")
    u_d = read_field_csv(u_path, system.grid)
    results: dict = {"oracles": []}

    if system.op_u.kernel.symmetric:
        shifted = ScalarField(system.grid,
                              u_d.values + 0.25 * float(np.max(u_d.values)))
        rep = symmetrization_identity(system.op_u.kernel,
                                      system.op_u.nonlocal_weight, shifted, u_d)
        results["oracles"].append(rep.to_dict())
    if v_path.exists():
        v_D = read_field_csv(v_path, system.grid)
        b0 = float(np.mean(system.b.values))
        c0 = float(np.mean(system.c.values))
        I1, I2, Ikey = neutral_case_functionals(u_d, v_D, b0, c0)
        scale = max(abs(I1), abs(I2), abs(Ikey), 1.0)
        results["oracles"].append({
            "name": "neutral_case_functionals", "I1": I1, "I2": I2,
            "Ikey": Ikey,
            "chain_ok": bool(b0 ** 3 * I2 + I1 >= Ikey - 1e-10 * scale)})

    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "oracles.json",
                {**results, "config_hash": cfg.config_hash(),
                 "version": __version__})
    _write_manifest(out_dir, "oracle", cfg.config_hash(), cfg.seed,
                    ["oracles.json"])
    return results


def resolve_threads(flag_value: int | None) -> int:
    """Thread count: CLI flag wins, then NCL_THREADS, then 1."""
    if flag_value is not None:
        if flag_value < 1:
            raise ConfigError("thread count must be at least 1")
        return flag_value
    env = os.environ.get("NCL_THREADS", "").strip()
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"NCL_THREADS is not an integer: {env!r}") from exc
        if value < 1:
            raise ConfigError("NCL_THREADS must be at least 1")
        return value
    return 1
