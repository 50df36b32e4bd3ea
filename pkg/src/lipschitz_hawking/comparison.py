"""Comparison constants, the index-form identity, the segment inequality and the Hawking-bound experiment."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .causal import cut_function, geodesic, omega_volume, tau_sigma
from .curvature import (Hypersurface, constant_field, mean_bound_check, mean_curvature_convergence, ricci,
                        ricci_timelike_min, timelike_min_pointwise)
from .grid import make_grid
from .metric import MetricField, SpacetimeModel
from .mollify import DEFAULT_SCHEDULE, build_family


class ParameterError(ValueError):
    """Comparison parameters outside the domain of a closed-form branch."""


@dataclass(frozen=True)
class ComparisonParams:
    n: int = 4
    kappa: float = -1.0
    beta: float = -1.0
    rho: float = 0.0
    eta: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ParameterError("n must be >= 2")

    def check_area_hypothesis(self) -> bool:
        """``beta >= -(n-1) sqrt|kappa|`` as the area comparison needs."""
        return self.beta >= -(self.n - 1) * math.sqrt(abs(self.kappa))

    def check_hawking(self) -> bool:
        """For ``rho < 0`` the bound needs ``|beta| > (n-1) sqrt|rho|``."""
        return self.rho >= 0 or abs(self.beta) > (self.n - 1) * math.sqrt(-self.rho)

    def check_horizon(self) -> bool:
        return self.rho <= 0 or math.sqrt(self.rho) * self.T <= math.pi / 2


# --- closed forms --------------------------------------------------------------------

def const_CA_minus(n: int, kappa: float, eta: float, T: float) -> float:
    """Backwards area comparison constant ``(sinh(eta s) / sinh((T + eta) s))^(n-1)``, ``s = sqrt|kappa|``."""
    if not kappa < 0:
        raise ParameterError(f"kappa must be negative, got {kappa}")
    if not eta > 0:
        raise ParameterError(f"eta must be positive, got {eta}")
    if T < 0:
        raise ParameterError(f"T must be non-negative, got {T}")
    s = math.sqrt(-kappa)
    return (math.sinh(eta * s) / math.sinh((T + eta) * s)) ** (n - 1)


def const_K(beta: float, T: float, rho: float, n: int) -> float:
    """``|beta|`` minus the model-space mean curvature of a focal distance ``T``."""
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T}")
    if rho == 0:
        return abs(beta) - (n - 1) / T
    s = math.sqrt(abs(rho))
    if rho < 0:
        return abs(beta) - (n - 1) * s / math.tanh(s * T)
    if s * T > math.pi / 2 + 1e-15:
        raise ParameterError(f"sqrt(rho) T = {s * T:.6g} exceeds pi/2")
    return abs(beta) - (n - 1) * s / math.tan(s * T)


def const_alpha(beta: float, rho: float, n: int) -> float:
    """Hawking bound: the root ``T`` of ``const_K(beta, T, rho, n)``."""
    if not beta < 0:
        raise ParameterError(f"beta must be negative, got {beta}")
    if rho == 0:
        return (n - 1) / abs(beta)
    s = math.sqrt(abs(rho))
    x = abs(beta) / ((n - 1) * s)
    if rho < 0:
        if x <= 1:
            raise ParameterError(f"|beta| = {abs(beta):g} must exceed (n-1) sqrt|rho| = {(n - 1) * s:g}")
        return math.atanh(1.0 / x) / s
    alpha = (math.pi / 2 - math.atan(x)) / s  # arccot(x) for x >= 0
    assert alpha < math.pi / (2 * s)
    return alpha


# --- index form -------------------------------------------------------------------------

def canonical_h(choice: str, T: float, rho: float) -> tuple[Callable, Callable]:
    """Test function ``h`` with ``h(0) = 1, h(T) = 0`` and its derivative."""
    if choice == "affine":
        return (lambda t: 1.0 - t / T), (lambda t: -1.0 / T + 0.0 * t)
    s = math.sqrt(abs(rho))
    if choice == "sinh":
        d = math.sinh(s * T)
        return (lambda t: np.sinh(s * (T - t)) / d), (lambda t: -s * np.cosh(s * (T - t)) / d)
    if choice == "sin":
        d = math.sin(s * T)
        return (lambda t: np.sin(s * (T - t)) / d), (lambda t: -s * np.cos(s * (T - t)) / d)
    raise ParameterError(f"unknown h choice {choice!r}")


def default_h_choice(rho: float) -> str:
    return "affine" if rho == 0 else ("sinh" if rho < 0 else "sin")


def _simpson(fn: Callable, T: float, panels: int) -> float:
    if panels % 2:
        panels += 1
    t = np.linspace(0.0, T, panels + 1)
    w = np.ones(panels + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    return float(np.sum(w * fn(t)) * T / (3 * panels))


def index_form(params: ComparisonParams, h_choice: str | None = None, ricci_profile=None, h=None,
               panels: int = 10_000) -> float:
    """``|beta| + int_0^T (-(n-1) h'^2 + h^2 Ric) dt - K(beta, T, rho)``.

    ``ricci_profile`` is a constant or a function of ``t`` (default ``(n-1) rho``).
    With the canonical ``h`` and the default profile the value is zero.  A custom
    ``h`` is a pair ``(h, h')`` validated for ``h(0) = 1, h(T) = 0, |h| <= 1``.
    Constant profiles with the affine ``h`` are integrated in closed form.
    """
    n, T, rho = params.n, params.T, params.rho
    prof = (n - 1) * rho if ricci_profile is None else ricci_profile
    if h is not None:
        hf, hd = h
        ts = np.linspace(0.0, T, 1001)
        hv = np.asarray(hf(ts), dtype=float)
        if abs(hv[0] - 1) > 1e-12 or abs(hv[-1]) > 1e-12 or np.any(np.abs(hv) > 1 + 1e-12):
            raise ParameterError("custom h must satisfy h(0)=1, h(T)=0 and |h|<=1")
    else:
        choice = h_choice or default_h_choice(rho)
        hf, hd = canonical_h(choice, T, rho)
        if choice == "affine" and np.isscalar(prof):
            integral = -(n - 1) / T + float(prof) * T / 3.0
            return abs(params.beta) + integral - const_K(params.beta, T, rho, n)
    pf = (lambda t: float(prof) + 0.0 * t) if np.isscalar(prof) else prof
    integral = _simpson(lambda t: -(n - 1) * hd(t) ** 2 + hf(t) ** 2 * pf(t), T, panels)
    return abs(params.beta) + integral - const_K(params.beta, T, rho, n)


# --- segment inequality --------------------------------------------------------------------

@dataclass
class SegmentReport:
    lhs: float
    rhs: float
    slack: float
    passed: bool
    constant: float
    sigma_area: float
    volume: float
    cut_values: list
    near_cut: list  # base points whose cut value sits within the tolerance band
    violations: list  # base points failing the regularity audit
    argmin: list


def segment_check(metric: MetricField, sigma: Hypersurface, B, f: Callable | None, params: ComparisonParams,
                  per_axis: int = 3, nt: int = 200, tol: float = 0.02, cut_tol: float = 0.005,
                  audit: bool = True) -> SegmentReport:
    """Both sides of the segment inequality on the ``per_axis`` grid over ``B``.

    Left: minimum over ``B`` of line integrals of ``f`` along normal geodesics.
    Right: the ``f``-weighted volume of the normal evolution of ``B`` over
    ``C^{A-} sigma(B)``.  ``f = None`` means ``f = 1``.  With ``audit`` the
    regularity of ``B`` (cut value at least ``T + eta``) is checked first.
    """
    T, eta = params.T, params.eta
    C = const_CA_minus(params.n, params.kappa, eta, T)
    from .causal import _box_weights
    pts, _ = _box_weights(sigma, B, per_axis)
    cuts, near, viol = [], [], []
    if audit:
        band = 2 * cut_tol * (T + eta)
        for y in pts:
            c = cut_function(metric, sigma, y, T + eta + band, tol=cut_tol)
            cuts.append(float(c))
            if c.value < T + eta - 1e-9:
                viol.append(y.tolist())
            elif c.value < T + eta + band - 1e-9:
                near.append(y.tolist())
    if viol:
        return SegmentReport(math.nan, math.nan, math.nan, False, C, math.nan, math.nan, cuts, near, viol, [])
    ov = omega_volume(metric, sigma, B, T, per_axis=per_axis, nt=nt, f=f)
    lines = ov["line_integrals"]
    i = int(np.argmin(lines))
    lhs = float(lines[i])
    rhs = ov["volume"] / (C * ov["sigma_area"])
    return SegmentReport(lhs, rhs, rhs - lhs, bool(lhs <= rhs * (1 + tol) + 1e-15), C, ov["sigma_area"],
                         ov["volume"], cuts, near, viol, pts[i].tolist())


# --- Hawking experiment ----------------------------------------------------------------------

@dataclass
class ExperimentReport:
    config: dict
    beta: float
    delta: float
    rho: float
    alpha: float
    epsilons: list
    curvature_floors: list
    negative_parts: list
    mean_curvature: dict
    tau_sigma: list  # (point, value)
    sup_tau_sigma: float
    oracle_sup: float | None
    saturation_expected: bool
    checks: dict
    verdict: bool
    runtime: float
    seeds: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["tau_sigma"] = [{"point": [float(v) for v in p], "value": float(v)} for p, v in self.tau_sigma]
        return d


def smooth_sec_scan(model: SpacetimeModel, region, rho: float, samples: int = 201, seed: int = 0) -> float:
    """Min over sampled unit timelike ``X`` of ``Ric(X, X) - (n-1) rho`` for the a.e. part of Ricci."""
    n = model.dim
    t = np.linspace(region[0], region[1], samples)
    pts = np.zeros((samples, n))
    pts[:, 0] = t
    ric = model.ricci_regular(pts)
    gm = model.metric(pts)
    best, _ = timelike_min_pointwise(ric, gm, model.metric.future(pts), seed=seed)
    return float(np.min(best)) - (n - 1) * rho


def _negative_part(bundle, metric: MetricField, sigma: Hypersurface, region, rho: float) -> float:
    """``int (Ric(U,U) - (n-1) rho)_-`` over the t-region, ``U`` the unit normal congruence velocity.

    The congruence is integrated from the central base point of ``sigma`` and
    resampled to the lattice by nearest-sample lookup in the time coordinate.
    """
    n = bundle.dim
    y0 = np.array([0.5 * (lo + hi) for lo, hi in sigma.box])
    x0 = sigma.point(y0[None])[0]
    v0 = sigma.unit_normal(metric, y0[None])[0]
    res = geodesic(metric, x0, v0, 10.0, step=2e-3)
    pts = bundle.valid_points().reshape(-1, n)
    ric = bundle.ricci.values[bundle.valid].reshape(-1, n, n)
    t = pts[:, 0]
    mask = (t >= region[0] - 1e-12) & (t <= min(region[1], res.points[-1, 0]) + 1e-12)
    idx = np.clip(np.searchsorted(res.points[:, 0], t[mask]), 0, len(res.points) - 1)
    U = res.velocities[idx]
    val = np.einsum("mi,mij,mj->m", U, ric[mask], U) - (n - 1) * rho
    neg = np.minimum(val, 0.0)
    return float(np.trapezoid(np.abs(neg), t[mask])) if mask.sum() > 1 else 0.0


def hawking_experiment(model: SpacetimeModel, t0: float, *, beta: float | None = None, delta: float = 0.005,
                       rho: float = 0.0, family=None, grid_bounds=None, grid_points: int = 1901,
                       schedule=DEFAULT_SCHEDULE, probe_offsets=(0.1, 0.01, 0.001), probe_space=(0.0, 0.3),
                       floor_region=None, floor_tol: float = 0.05, halfwidths=(0.02, 0.01, 0.005),
                       seed: int = 0) -> ExperimentReport:
    """End-to-end check of the Hawking bound ``sup tau_sigma <= alpha(beta, rho)`` on a GRW catalog model.

    Sigma is the slice ``t = t0``.  ``beta`` defaults to the oracle mean curvature
    of the slice relaxed by ``delta`` (strict bound).  Probes approach the
    model's singular time from below at the given offsets.
    """
    start = time.perf_counter()
    n = model.dim
    notes = []
    sigma = Hypersurface.level(t0, n)
    H = model.known["slice_mean_curvature"](t0)
    if beta is None:
        beta = H * (1 - delta)
    else:
        delta = 1 - beta / H if H != 0 else math.nan
    params = ComparisonParams(n=n, beta=beta, rho=rho)
    checks = {}
    ts = model.known.get("singularity_time")
    if not params.check_hawking():
        checks["hawking_hypothesis"] = False
        notes.append("|beta| <= (n-1) sqrt|rho|")
        return ExperimentReport({"model": model.name, "t0": t0}, beta, delta, rho, math.nan, [], [], [], {}, [],
                                math.nan, None, False, checks, False, time.perf_counter() - start, {"seed": seed},
                                notes)
    alpha = const_alpha(beta, rho, n)
    t_hi = (ts - 0.1) if ts is not None else t0 + 1.5
    # (0) preconditions: distributional SEC and the slab bound
    checks["delta_layer_nonnegative"] = model.delta_min_on_cone(seed=seed) >= -1e-12
    checks["smooth_sec"] = smooth_sec_scan(model, (t0, t_hi), rho, seed=seed) >= -1e-10
    mb = mean_bound_check(model.metric, sigma, beta, [constant_field(np.eye(n)[0]),
                                                      _tilted_field(n)], halfwidths, model.kinks)
    checks["slab_mean_curvature"] = mb.passed
    # (1) family on the time axis
    if family is None:
        bounds = grid_bounds or [(t0 - 0.5, t_hi)]
        family = build_family(model.metric, make_grid(bounds, [grid_points]), schedule, axes=(0,), seed=seed)
    region = floor_region or (t0, t_hi - 0.3)
    floors, negs = [], []
    for mk in family.inner:
        b = ricci(mk)
        floors.append(ricci_timelike_min(b, mk, [region], seed=seed) - (n - 1) * rho)
        negs.append(_negative_part(b, mk, sigma, region, rho))
    checks["floors_final"] = floors[-1] >= -floor_tol
    checks["floors_trend"] = all(min(b, 0) >= min(a, 0) - 1e-9 for a, b in zip(floors, floors[1:]))
    checks["negative_part_trend"] = all(b <= a * (1 + 1e-6) + 1e-12 for a, b in zip(negs, negs[1:]))
    # (3) mean curvature transfer
    conv = mean_curvature_convergence(model.metric, family, sigma, halfwidth=halfwidths[0], b=beta,
                                      kinks=model.kinks)
    checks["mean_curvature_convergence"] = conv.passed
    # (4) probes towards the singular locus, raw metric
    probes = []
    for off in probe_offsets:
        tp = (ts - off) if ts is not None else t0 + off
        for xs in probe_space:
            p = np.zeros(n)
            p[0], p[1] = tp, xs
            est = tau_sigma(model.metric, sigma, p, breaks=tuple(k.offset for k in model.kinks),
                            base_guesses=[p[1:]], seed=seed)
            probes.append((p.tolist(), est.value))
    sup = max(v for _, v in probes)
    oracle = (ts - t0) if ts is not None else None
    sat = oracle is not None and abs(oracle - alpha) <= 0.05 * alpha
    checks["bound"] = sup <= alpha * 1.02
    if sat:
        checks["saturation"] = abs(sup - alpha) <= 0.05 * alpha
    verdict = all(checks.values())
    mc = {"esssup": mb.esssup, "halfwidths": list(mb.halfwidths), "discrepancy": mb.discrepancy,
          "convergence_sup_diff": conv.sup_diff, "sigma_mean_curvature": conv.sigma_mean_curvature,
          "oracle": H}
    cfg = {"model": model.name, "params": dict(model.params), "t0": t0, "schedule": list(family.schedule)}
    return ExperimentReport(cfg, beta, delta, rho, alpha, list(family.schedule), floors, negs, mc, probes, sup,
                            oracle, sat, checks, verdict, time.perf_counter() - start, {"seed": seed}, notes)


def _tilted_field(n: int):
    def X(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0
        out[..., 1] = 0.3
        return out
    return X
