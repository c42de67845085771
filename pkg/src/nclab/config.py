"""Scenario and sweep configuration: one JSON document per run.

Coefficient profiles come from a small fixed catalog (constant, cosine,
linear ramp, gaussian bump, explicit table); bare numbers mean constants.
Parsing normalizes a document into a canonical form whose serialization
round-trips exactly, and the sha256 of that canonical form identifies the
run in every manifest.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .competition import CompetitionSystem, Tolerances, assemble_system
from .errors import ConfigError, NclabError
from .grid import Grid, ScalarField, make_grid
from .kernels import KernelMatrix, KernelSpec, build_kernel_matrix
from .operators import DispersalOperator, assemble_operator

SWEEP_PARAMS = ("d", "D", "b", "c", "alpha", "beta")

_SCENARIO_DEFAULTS = {
    "variant": "classic",
    "probes": 20,
    "seed": 0,
    "tolerances": {},
}
_COEFF_DEFAULTS = {"b1": 1.0, "c2": 1.0}


def resolve_profile(spec, grid: Grid) -> ScalarField:
    """Evaluate a catalog profile (or a bare number) on the grid."""
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return ScalarField.constant(grid, float(spec))
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"profile must be a number or a typed object: {spec!r}")
    kind = spec["type"]
    x = grid.nodes
    try:
        if kind == "constant":
            return ScalarField.constant(grid, float(spec["value"]))
        if kind == "cosine":
            periods = float(spec.get("periods", 1.0))
            phase = 2.0 * np.pi * periods * (x - grid.x_lo) / grid.length
            values = spec["mean"] + spec["amplitude"] * np.cos(phase)
            return ScalarField(grid, values)
        if kind == "linear":
            t = (x - grid.x_lo) / grid.length
            return ScalarField(grid, spec["start"] * (1 - t) + spec["end"] * t)
        if kind == "bump":
            w = float(spec["width"])
            values = spec.get("baseline", 0.0) + spec["height"] * np.exp(
                -((x - spec["center"]) ** 2) / (2.0 * w * w))
            return ScalarField(grid, values)
        if kind == "table":
            values = np.asarray(spec["values"], dtype=np.float64)
            if values.shape != (grid.n_nodes,):
                raise ConfigError(
                    f"table profile has {values.shape[0]} values for "
                    f"{grid.n_nodes} nodes")
            return ScalarField(grid, values)
    except KeyError as exc:
        raise ConfigError(f"profile {kind!r} is missing field {exc}") from exc
    raise ConfigError(f"unknown profile type {kind!r}")


def build_kernel(spec: dict, grid: Grid) -> KernelMatrix:
    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError(f"kernel spec needs a family: {spec!r}")
    family = spec["family"]
    try:
        if family == "gaussian":
            ks = KernelSpec.gaussian(float(spec["sigma"]))
        elif family == "tophat":
            ks = KernelSpec.tophat(float(spec["rho"]))
        elif family == "table":
            ks = KernelSpec.from_table(np.asarray(spec["values"], dtype=float))
        else:
            raise ConfigError(f"unknown kernel family {family!r}")
    except KeyError as exc:
        raise ConfigError(f"kernel {family!r} is missing field {exc}") from exc
    try:
        return build_kernel_matrix(ks, grid)
    except NclabError as exc:
        raise ConfigError(str(exc)) from exc


def build_operator(spec: dict, kernel: KernelMatrix, grid: Grid) -> DispersalOperator:
    if not isinstance(spec, dict) or "kind" not in spec or "rate" not in spec:
        raise ConfigError(f"operator spec needs kind and rate: {spec!r}")
    alpha = spec.get("alpha")
    try:
        return assemble_operator(spec["kind"], float(spec["rate"]), kernel,
                                 grid, None if alpha is None else float(alpha))
    except NclabError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class ScenarioConfig:
    """Canonicalized single-scenario document."""

    data: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ScenarioConfig":
        if not isinstance(raw, dict):
            raise ConfigError("scenario config must be a JSON object")
        data = copy.deepcopy(raw)
        for key, default in _SCENARIO_DEFAULTS.items():
            data.setdefault(key, copy.deepcopy(default))
        for key in ("grid", "kernel_u", "kernel_v", "operator_u",
                    "operator_v", "coefficients"):
            if key not in data:
                raise ConfigError(f"scenario config is missing {key!r}")
        coeffs = data["coefficients"]
        for key, default in _COEFF_DEFAULTS.items():
            coeffs.setdefault(key, default)
        for key in ("m", "M", "b", "c"):
            if key not in coeffs:
                raise ConfigError(f"coefficients are missing {key!r}")
        cfg = cls(data=data)
        cfg.build()  # validate eagerly so bad configs fail at parse time
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2)

    def config_hash(self) -> str:
        compact = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(compact.encode("utf-8")).hexdigest()

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def probes(self) -> int:
        return int(self.data["probes"])

    def tolerances(self) -> Tolerances:
        overrides = self.data.get("tolerances", {})
        defaults = Tolerances()
        bad = set(overrides) - set(defaults.to_dict())
        if bad:
            raise ConfigError(f"unknown tolerance overrides: {sorted(bad)}")
        return Tolerances(**{**defaults.to_dict(), **overrides})

    def build_grid(self) -> Grid:
        g = self.data["grid"]
        try:
            return make_grid(float(g["x_lo"]), float(g["x_hi"]), int(g["n"]))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad grid spec {g!r}") from exc
        except NclabError as exc:
            raise ConfigError(str(exc)) from exc

    def build(self) -> CompetitionSystem:
        grid = self.build_grid()
        kern_u = build_kernel(self.data["kernel_u"], grid)
        kern_v = build_kernel(self.data["kernel_v"], grid)
        op_u = build_operator(self.data["operator_u"], kern_u, grid)
        op_v = build_operator(self.data["operator_v"], kern_v, grid)
        coeffs = self.data["coefficients"]
        fields = {k: resolve_profile(coeffs[k], grid)
                  for k in ("m", "M", "b", "c", "b1", "c2")}
        try:
            return assemble_system(grid, op_u, op_v, variant=self.data["variant"],
                                   **fields)
        except NclabError as exc:
            raise ConfigError(str(exc)) from exc


def _assign_param(data: dict, param: str, value: float):
    if param == "d":
        data["operator_u"]["rate"] = value
    elif param == "D":
        data["operator_v"]["rate"] = value
    elif param == "b":
        data["coefficients"]["b"] = value
    elif param == "c":
        data["coefficients"]["c"] = value
    elif param == "alpha":
        data["operator_u"]["alpha"] = value
    elif param == "beta":
        data["operator_v"]["alpha"] = value
    else:
        raise ConfigError(f"unknown sweep parameter {param!r}")


@dataclass(frozen=True)
class SweepConfig:
    """Base scenario plus up to two swept parameters."""

    base: ScenarioConfig
    axes: list[dict]

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        if not isinstance(raw, dict) or "base" not in raw or "axes" not in raw:
            raise ConfigError("sweep config needs 'base' and 'axes'")
        axes = raw["axes"]
        if not isinstance(axes, list) or not 1 <= len(axes) <= 2:
            raise ConfigError("sweep needs one or two axes")
        for ax in axes:
            for key in ("param", "start", "stop", "steps"):
                if key not in ax:
                    raise ConfigError(f"sweep axis is missing {key!r}: {ax!r}")
            if ax["param"] not in SWEEP_PARAMS:
                raise ConfigError(f"cannot sweep {ax['param']!r}; "
                                  f"choose from {SWEEP_PARAMS}")
            if int(ax["steps"]) < 1:
                raise ConfigError("sweep axis needs at least one step")
        base = ScenarioConfig.from_dict(raw["base"])
        cfg = cls(base=base, axes=[dict(ax) for ax in axes])
        for idx in range(cfg.n_cells()):
            cfg.cell_config(idx)  # every derived cell must be a valid scenario
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "SweepConfig":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc

    def axis_values(self, axis: dict) -> np.ndarray:
        steps = int(axis["steps"])
        if steps == 1:
            return np.array([float(axis["start"])])
        return np.linspace(float(axis["start"]), float(axis["stop"]), steps)

    def n_cells(self) -> int:
        out = 1
        for ax in self.axes:
            out *= int(ax["steps"])
        return out

    def cell_params(self, idx: int) -> dict:
        """Axis assignments of one cell, in row-major axis order."""
        shape = [int(ax["steps"]) for ax in self.axes]
        coords = np.unravel_index(idx, shape)
        return {ax["param"]: float(self.axis_values(ax)[coord])
                for ax, coord in zip(self.axes, coords)}

    def cell_config(self, idx: int) -> ScenarioConfig:
        data = copy.deepcopy(self.base.data)
        for param, value in self.cell_params(idx).items():
            _assign_param(data, param, value)
        data["seed"] = cell_seed(self.base.seed, idx)
        return ScenarioConfig.from_dict(data)

    def config_hash(self) -> str:
        compact = json.dumps({"base": self.base.data, "axes": self.axes},
                             sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(compact.encode("utf-8")).hexdigest()


def cell_seed(base_seed: int, cell_index: int) -> int:
    """Stable per-cell seed: hash of the base seed and the cell index."""
    digest = hashlib.sha256(f"{base_seed}:{cell_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2 ** 63)
