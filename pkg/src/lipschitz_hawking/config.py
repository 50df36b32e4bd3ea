"""Run configuration: YAML loading, defaults and validation diagnostics."""

from __future__ import annotations

import copy
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .metric import CATALOG, catalog
from .mollify import DEFAULT_SCHEDULE, PROFILES, RESOLVABILITY_CELLS

EXPERIMENTS = ("constants", "friedrichs_sweep", "ricci_commutator", "mean_curvature", "tau_convergence",
               "segment", "hawking", "geodesic")
OUTPUT_ENV = "LH_OUTPUT_DIR"

DEFAULTS = {
    "seed": 0,
    "output": "out",
    "model": {"name": "grw_two_slope", "params": {"n": 4, "m1": 0.5, "m2": 1.0}},
    "grid": {"bounds": [[-1.0, 0.9]], "points": [1901], "axes": [0]},
    "mollifier": {"profile": "standard_bump", "schedule": list(DEFAULT_SCHEDULE)},
    "comparison": {"kappa": -1.0, "beta": None, "rho": 0.0, "eta": 1.0, "T": 1.0, "delta": 0.005},
    "sigma": {"t0": -0.5, "box": None},
    "options": {},
}

_SECTIONS = ("experiment", "seed", "output", "model", "grid", "mollifier", "comparison", "sigma", "options")


@dataclass(frozen=True)
class Diagnostic:
    key: str
    message: str

    def __str__(self) -> str:
        return f"{self.key}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


@dataclass
class RunConfig:
    experiment: str
    seed: int
    output: str
    model: dict
    grid: dict
    mollifier: dict
    comparison: dict
    sigma: dict
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in _SECTIONS}

    @property
    def output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _resolve(raw: dict) -> dict:
    """Defaults merged with ``raw``; a named model brings only its own params."""
    cfg = _merge(DEFAULTS, {k: v for k, v in raw.items() if k in _SECTIONS})
    model = raw.get("model")
    if isinstance(model, dict) and "name" in model:
        cfg["model"]["params"] = copy.deepcopy(model.get("params") or {})
    return cfg


def load_raw(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError([Diagnostic("<root>", "config must be a mapping")])
    return data


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def validate(raw: dict) -> list[Diagnostic]:
    """Schema and cross-field diagnostics; an empty list means the config is runnable."""
    diags: list[Diagnostic] = []
    add = lambda k, m: diags.append(Diagnostic(k, m))
    unknown = sorted(set(raw) - set(_SECTIONS))
    for k in unknown:
        add(k, "unknown section")
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        add("experiment", f"must be one of {', '.join(EXPERIMENTS)}")
    cfg = _resolve(raw)
    seed = cfg["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        add("seed", "must be a non-negative integer")
    if not isinstance(cfg["output"], str) or not cfg["output"]:
        add("output", "must be a non-empty path string")

    model = cfg["model"]
    if model.get("name") not in CATALOG:
        add("model.name", f"must be one of {', '.join(CATALOG)}")
    else:
        try:
            catalog(model["name"], model.get("params") or {})
        except (ValueError, TypeError) as exc:
            add("model.params", str(exc))

    grid = cfg["grid"]
    bounds, points, axes = grid.get("bounds"), grid.get("points"), grid.get("axes")
    spacing = []
    if not isinstance(bounds, list) or not bounds:
        add("grid.bounds", "must be a non-empty list of [lo, hi] pairs")
        bounds = []
    if not isinstance(points, list) or len(points) != len(bounds):
        add("grid.points", "must list one resolution per bound")
        points = []
    for i, b in enumerate(bounds):
        if not (isinstance(b, list) and len(b) == 2 and all(_is_num(v) for v in b) and b[0] < b[1]):
            add(f"grid.bounds[{i}]", "must be [lo, hi] with lo < hi")
            continue
        if i < len(points):
            p = points[i]
            if not isinstance(p, int) or isinstance(p, bool) or p < 3:
                add(f"grid.points[{i}]", f"resolution must be an integer >= 3, got {p!r}")
            else:
                spacing.append((b[1] - b[0]) / (p - 1))
    if axes is not None and (not isinstance(axes, list) or len(axes) != len(bounds)):
        add("grid.axes", "must list one chart axis per bound")

    moll = cfg["mollifier"]
    if moll.get("profile") not in PROFILES:
        add("mollifier.profile", f"must be one of {', '.join(PROFILES)}")
    sched = moll.get("schedule")
    if not isinstance(sched, list) or not sched or not all(_is_num(e) and e > 0 for e in sched):
        add("mollifier.schedule", "must be a non-empty list of positive numbers")
    else:
        if any(b >= a for a, b in zip(sched, sched[1:])):
            add("mollifier.schedule", "must be strictly decreasing")
        if spacing and min(sched) < RESOLVABILITY_CELLS * max(spacing) * (1 - 1e-12):
            add("mollifier.schedule",
                f"epsilon {min(sched):g} not resolvable: needs >= {RESOLVABILITY_CELLS} cells "
                f"(h = {max(spacing):g})")

    comp = cfg["comparison"]
    for key in ("kappa", "rho", "eta", "T", "delta"):
        if not _is_num(comp.get(key)):
            add(f"comparison.{key}", "must be a finite number")
    beta = comp.get("beta")
    if beta is not None and not (_is_num(beta) and beta < 0):
        add("comparison.beta", "must be negative (or null for the oracle value)")
    if _is_num(comp.get("kappa")) and comp["kappa"] >= 0:
        add("comparison.kappa", "must be negative")
    if _is_num(comp.get("eta")) and comp["eta"] <= 0:
        add("comparison.eta", "must be positive")
    if _is_num(comp.get("T")) and comp["T"] <= 0:
        add("comparison.T", "must be positive")
    n = int((model.get("params") or {}).get("n", 4)) if model.get("name") != "pp_impulsive_rosen" else 4
    rho = comp.get("rho")
    if _is_num(rho) and rho < 0 and _is_num(beta):
        need = (n - 1) * math.sqrt(-rho)
        if not abs(beta) > need:
            add("comparison.beta",
                f"rho < 0 requires |beta| > (n-1) sqrt|rho| (needs |beta| > {need:g}, got {abs(beta):g})")
    if _is_num(rho) and rho > 0 and _is_num(comp.get("T")) and math.sqrt(rho) * comp["T"] > math.pi / 2:
        add("comparison.T", "rho > 0 requires sqrt(rho) T <= pi/2")
    if not isinstance(cfg["options"], dict):
        add("options", "must be a mapping")
    if not isinstance(cfg["sigma"], dict) or not _is_num(cfg["sigma"].get("t0")):
        add("sigma.t0", "must be a number")
    return diags


def build(raw: dict) -> RunConfig:
    diags = validate(raw)
    if diags:
        raise ConfigError(diags)
    cfg = _resolve(raw)
    return RunConfig(**{k: cfg[k] for k in _SECTIONS})


def load(path: str | Path) -> RunConfig:
    return build(load_raw(path))
