"""Scenario files: one JSON document describing a process, cutoff, w model and knobs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bump import BumpSpec
from .errors import ScenarioError, StochextError
from .expr import ProcessSpec
from .oscint import QuadPlan
from .prob import Box, Deterministic, Discrete, MonteCarlo

__all__ = ["Scenario", "load_scenario", "parse_scenario", "bundled_scenarios", "bundled_path"]

MODEL_TYPES = ("deterministic", "discrete", "box", "montecarlo")


@dataclass(frozen=True)
class Scenario:
    name: str
    process: ProcessSpec
    bump: BumpSpec
    model: object
    omega_point: tuple
    k: float
    k_max: float
    grid_size: int
    asym_k: tuple
    plan: QuadPlan
    tolerance: float
    seed: int
    sha256: str
    raw: dict = field(repr=False, compare=False)

    def k_grid(self):
        from .extremum import default_k_grid
        return default_k_grid(self.k_max, self.grid_size)


def _need(d, key, where):
    if key not in d:
        raise ScenarioError(f"{where}: missing field '{key}'")
    return d[key]


def _interval(v, where):
    try:
        a, b = (float(x) for x in v)
    except (TypeError, ValueError):
        raise ScenarioError(f"{where}: expected [lo, hi]") from None
    if not a < b:
        raise ScenarioError(f"{where}: need lo < hi, got [{a}, {b}]")
    return a, b


def _model(spec, n, seed):
    kind = str(_need(spec, "type", "omega")).lower()
    if kind not in MODEL_TYPES:
        raise ScenarioError(f"omega.type must be one of {MODEL_TYPES}, got {kind!r}")
    if kind == "deterministic":
        model = Deterministic()
    elif kind == "discrete":
        atoms = tuple((tuple(a["point"]), float(a["weight"])) for a in _need(spec, "atoms", "omega"))
        model = Discrete(atoms)
    else:
        bounds = tuple(_interval(b, "omega.bounds") for b in _need(spec, "bounds", "omega"))
        density = spec.get("density", "1")
        if kind == "box":
            model = Box(bounds, density, int(spec.get("nodes", 64)))
        else:
            model = MonteCarlo(bounds, density, int(spec.get("samples", 4096)),
                               int(spec.get("seed", seed)))
    if model.dim != n:
        raise ScenarioError(f"omega model has dimension {model.dim} but process.omega_dim is {n}")
    return model


def _default_point(model):
    if isinstance(model, Deterministic):
        return ()
    if isinstance(model, Discrete):
        return model.atoms[0][0]
    return tuple(0.5 * (lo + hi) for lo, hi in model.bounds)


def parse_scenario(doc: dict, sha256: str = "") -> Scenario:
    """Validate a decoded scenario document.  Any problem raises ScenarioError."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    try:
        return _parse(doc, sha256)
    except ScenarioError:
        raise
    except (StochextError, ValueError, TypeError, KeyError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc


def _parse(doc, sha256):
    seed = int(doc.get("seed", 0))
    proc = _need(doc, "process", "scenario")
    n = int(proc.get("omega_dim", 0))
    a, b = _interval(_need(proc, "interval", "process"), "process.interval")
    process = ProcessSpec.from_formula(str(_need(proc, "formula", "process")), (a, b), n)

    bump_d = doc.get("bump", {})
    eps = float(_need(bump_d, "epsilon", "bump"))
    if not eps > 0:
        raise ScenarioError(f"bump.epsilon must be > 0, got {eps}")
    bump = BumpSpec(a, b, eps, bool(bump_d.get("normalized", True)))

    model = _model(doc.get("omega", {"type": "deterministic"}), n, seed)
    point = doc.get("omega_point")
    point = _default_point(model) if point is None else tuple(float(v) for v in point)
    if len(point) != n:
        raise ScenarioError(f"omega_point has {len(point)} entries, expected {n}")

    kd = doc.get("k", {})
    k_max = float(kd.get("k_max", 800.0))
    if not k_max > 0:
        raise ScenarioError(f"k.k_max must be > 0, got {k_max}")
    grid_size = int(kd.get("grid_size", 24))
    if grid_size < 8:
        raise ScenarioError("k.grid_size must be >= 8")
    asym_k = tuple(float(v) for v in kd.get("asym_k", (200, 400, 800, 1600, 3200)))
    if not asym_k or any(v <= 0 for v in asym_k):
        raise ScenarioError("k.asym_k must be a non-empty list of positive values")

    q = doc.get("quadrature", {})
    plan = QuadPlan(order=int(q.get("order", 12)), tol=float(q.get("tol", 1e-10)),
                    max_panels=int(q.get("max_panels", 200_000)),
                    oscillations_per_panel=float(q.get("oscillations_per_panel", 2.0)))
    return Scenario(
        name=str(doc.get("name", "unnamed")), process=process, bump=bump, model=model,
        omega_point=point, k=float(kd.get("k", 400.0)), k_max=k_max, grid_size=grid_size,
        asym_k=asym_k, plan=plan, tolerance=float(doc.get("tolerance", 0.01)), seed=seed,
        sha256=sha256, raw=doc)


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file; a bare name picks a bundled scenario."""
    p = Path(path)
    if not p.exists() and p.suffix == "" and str(path) in bundled_scenarios():
        p = bundled_path(str(path))
    try:
        data = p.read_bytes()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return parse_scenario(doc, hashlib.sha256(data).hexdigest())


def _root():
    return resources.files("stochext") / "scenarios"


def bundled_scenarios():
    return sorted(p.name[:-5] for p in _root().iterdir() if p.name.endswith(".json"))


def bundled_path(name):
    path = _root() / f"{name}.json"
    if not path.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return Path(str(path))


def jsonable(obj):
    """Recursively convert numpy and complex values to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj
