"""Experiment configuration: strict JSON parsing with defaults.

Unknown keys anywhere in the document are rejected, and every error names
the offending key with its dotted path.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigurationError
from .grid import METRIC_WEIGHTS, SCALAR_FUNCTIONS, MeshConfig


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NonlinearitySpec:
    kind: str = "power"
    p: float = 2.0
    r: float | None = 3.0
    coefficient: float = 1.0
    table: list | None = None


@dataclass(frozen=True)
class SpectrumSpec:
    m: int = 8
    tol: float = 1e-9
    cluster_tol: float = 1e-6


@dataclass(frozen=True)
class WindowSpec:
    fraction: float = 0.1
    count: int = 5
    # signed multiples of (λ_{k+h+1} - λ_k); overrides fraction/count
    offsets: list | None = None


@dataclass(frozen=True)
class SolverSpec:
    cg_tol: float = 1e-10
    cg_max_iter: int | None = None
    newton_tol: float = 1e-8
    newton_max_iter: int = 100
    dist_tol: float = 1e-3
    geometry_budget: int = 8
    nabla_budget: int = 200
    nabla_gamma: float = 0.25
    seed_count: int = 12


@dataclass(frozen=True)
class ExperimentConfig:
    mesh: MeshConfig
    potential: FunctionSpec
    alpha: FunctionSpec = field(default_factory=lambda: FunctionSpec("th3_weight"))
    nonlinearity: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    spectrum: SpectrumSpec = field(default_factory=SpectrumSpec)
    target: int | str = "auto"
    window: WindowSpec = field(default_factory=WindowSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    rng_seed: int = 42
    output_dir: str = "out"

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        data = self.to_dict()
        data.update({k: v for k, v in changes.items() if v is not None})
        return from_dict(data)


# ---------------------------------------------------------------------------


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _block(data, path, allowed):
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: expected an object, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigurationError(f"{path}: unknown key(s) {', '.join(path + '.' + k if path else k for k in unknown)}")
    return data


def _get(data, key, path, check, desc, default):
    if key not in data:
        return default
    value = data[key]
    if not check(value):
        where = f"{path}.{key}" if path else key
        raise ConfigurationError(f"{where}: expected {desc}, got {value!r}")
    return value


def _positive(v):
    return _is_number(v) and v > 0


def _positive_int(v):
    return _is_int(v) and v > 0


def _function(data, path, registry) -> FunctionSpec:
    data = _block(data, path, {"name", "params"})
    if "name" not in data:
        raise ConfigurationError(f"{path}.name: missing required key")
    name = data["name"]
    if name not in registry:
        raise ConfigurationError(f"{path}.name: unknown function {name!r}; known: {sorted(registry)}")
    params = _get(data, "params", path, lambda v: isinstance(v, dict) and all(_is_number(x) for x in v.values()), "an object of numbers", {})
    return FunctionSpec(name, dict(params))


def from_dict(raw: dict) -> ExperimentConfig:
    top = _block(raw, "", {f.name for f in fields(ExperimentConfig)})
    for key in ("mesh", "potential"):
        if key not in top:
            raise ConfigurationError(f"{key}: missing required key")

    m = _block(top["mesh"], "mesh", {"dimension", "half_width", "nodes_per_axis", "metric_weight", "metric_params"})
    mesh = MeshConfig(
        dimension=_get(m, "dimension", "mesh", lambda v: _is_int(v) and v in (1, 2, 3), "1, 2 or 3", 1),
        half_width=float(_get(m, "half_width", "mesh", _positive, "a positive number", 8.0)),
        nodes_per_axis=_get(m, "nodes_per_axis", "mesh", lambda v: _is_int(v) and v >= 3, "an integer >= 3", 201),
        metric_weight=_get(m, "metric_weight", "mesh", lambda v: v in METRIC_WEIGHTS, f"one of {sorted(METRIC_WEIGHTS)}", "constant"),
        metric_params=dict(_get(m, "metric_params", "mesh", lambda v: isinstance(v, dict), "an object", {})),
    )
    potential = _function(top["potential"], "potential", SCALAR_FUNCTIONS)
    alpha = _function(top["alpha"], "alpha", SCALAR_FUNCTIONS) if "alpha" in top else FunctionSpec("th3_weight")

    n = _block(top.get("nonlinearity", {}), "nonlinearity", {"kind", "p", "r", "coefficient", "table"})
    nl = NonlinearitySpec(
        kind=_get(n, "kind", "nonlinearity", lambda v: v in ("power", "table"), "'power' or 'table'", "power"),
        p=float(_get(n, "p", "nonlinearity", _positive, "a positive number", 2.0)),
        r=_get(n, "r", "nonlinearity", lambda v: v is None or _is_number(v), "a number or null", None),
        coefficient=float(_get(n, "coefficient", "nonlinearity", lambda v: _is_number(v) and v >= 0, "a nonnegative number", 1.0)),
        table=_get(n, "table", "nonlinearity", lambda v: v is None or (isinstance(v, list) and all(isinstance(r, list) and len(r) == 2 and all(map(_is_number, r)) for r in v)), "a list of [t, f] pairs", None),
    )
    if nl.r is None and nl.kind == "power":
        nl = NonlinearitySpec(nl.kind, nl.p, nl.p + 1.0, nl.coefficient, nl.table)

    s = _block(top.get("spectrum", {}), "spectrum", {"m", "tol", "cluster_tol"})
    spectrum = SpectrumSpec(
        m=_get(s, "m", "spectrum", _positive_int, "a positive integer", 8),
        tol=float(_get(s, "tol", "spectrum", _positive, "a positive number", 1e-9)),
        cluster_tol=float(_get(s, "cluster_tol", "spectrum", _positive, "a positive number", 1e-6)),
    )

    target = top.get("target", "auto")
    if not (target == "auto" or (_is_int(target) and target >= 1)):
        raise ConfigurationError(f"target: expected a positive integer or 'auto', got {target!r}")

    w = _block(top.get("window", {}), "window", {"fraction", "count", "offsets"})
    window = WindowSpec(
        fraction=float(_get(w, "fraction", "window", _positive, "a positive number", 0.1)),
        count=_get(w, "count", "window", _positive_int, "a positive integer", 5),
        offsets=_get(w, "offsets", "window", lambda v: v is None or (isinstance(v, list) and v and all(map(_is_number, v))), "a non-empty list of numbers", None),
    )

    sv = _block(top.get("solver", {}), "solver", {f.name for f in fields(SolverSpec)})
    solver = SolverSpec(
        cg_tol=float(_get(sv, "cg_tol", "solver", _positive, "a positive number", 1e-10)),
        cg_max_iter=_get(sv, "cg_max_iter", "solver", lambda v: v is None or _positive_int(v), "a positive integer", None),
        newton_tol=float(_get(sv, "newton_tol", "solver", _positive, "a positive number", 1e-8)),
        newton_max_iter=_get(sv, "newton_max_iter", "solver", _positive_int, "a positive integer", 100),
        dist_tol=float(_get(sv, "dist_tol", "solver", _positive, "a positive number", 1e-3)),
        geometry_budget=_get(sv, "geometry_budget", "solver", _positive_int, "a positive integer", 8),
        nabla_budget=_get(sv, "nabla_budget", "solver", _positive_int, "a positive integer", 200),
        nabla_gamma=float(_get(sv, "nabla_gamma", "solver", _positive, "a positive number", 0.25)),
        seed_count=_get(sv, "seed_count", "solver", _positive_int, "a positive integer", 12),
    )
    rng_seed = _get(top, "rng_seed", "", lambda v: _is_int(v) and v >= 0, "a nonnegative integer", 42)
    output_dir = _get(top, "output_dir", "", lambda v: isinstance(v, str) and v, "a non-empty string", "out")
    cfg = ExperimentConfig(mesh, potential, alpha, nl, spectrum, target, window, solver, rng_seed, output_dir)
    mesh.validate()
    return cfg


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        raw: Any = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from None
    return from_dict(raw)


def shipped_config(name: str = "default_th3.json") -> Path:
    return Path(__file__).with_name("configs") / name
