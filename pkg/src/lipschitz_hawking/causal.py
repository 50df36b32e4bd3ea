"""Geodesics, normal exponential maps and variational time-separation estimates.

Time separations are approached from below: any future-directed causal path
certifies its length as a lower bound.  Paths are broken lines whose nodes sit
on fixed levels of the time coordinate ``x^0`` (a time function for every
catalog model), so only spatial node coordinates are optimised.  Segment
lengths use Gauss-Legendre quadrature of ``sqrt(-g(D, D))`` along the straight
segment with direction ``D``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .curvature import Hypersurface, _unit_normal
from .metric import NULL_BAND, DomainError, MetricField, SpacetimeModel, inverse_cofactor

_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)
GL_S = 0.5 * (_GL_X + 1.0)
GL_W = 0.5 * _GL_W
AUDIT_S = np.concatenate([[0.0, 0.5, 1.0], GL_S])

DEFAULT_NODES = 16
MAX_NODES = 128
REL_GAIN = 1e-4


# --- paths -------------------------------------------------------------------------

def segment_values(metric: MetricField, nodes: np.ndarray, s: np.ndarray = GL_S) -> tuple[np.ndarray, np.ndarray]:
    """``F = -g(D, D)`` at parameters ``s`` of every segment; returns ``(F, D)``."""
    D = nodes[1:] - nodes[:-1]
    X = nodes[:-1, None, :] + s[None, :, None] * D[:, None, :]
    G = metric(X)
    F = -np.sum((G @ D[:, None, :, None])[..., 0] * D[:, None, :], axis=-1)
    return F, D


def path_length(metric: MetricField, nodes: np.ndarray) -> float:
    F, _ = segment_values(metric, nodes)
    return float(np.sum(GL_W * np.sqrt(np.maximum(F, 0.0))))


@dataclass
class CausalPath:
    """Broken line with a per-segment causal audit (min of ``-g(D,D)/|D|^2``)."""

    nodes: np.ndarray
    audit: np.ndarray
    metric_name: str = ""

    @classmethod
    def audited(cls, metric: MetricField, nodes: np.ndarray) -> "CausalPath":
        nodes = np.asarray(nodes, dtype=float)
        F, D = segment_values(metric, nodes, AUDIT_S)
        nrm = np.sum(D * D, axis=-1)[:, None]
        audit = np.min(F / nrm, axis=1)
        # future directed: g(D, T) < 0 at segment midpoints
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        fut = np.sum((metric(mid) @ D[..., None])[..., 0] * metric.future(mid), axis=-1)
        audit = np.where(fut < 0, audit, -np.inf)
        return cls(nodes, audit, metric.name)

    @property
    def causal(self) -> bool:
        return bool(np.all(self.audit >= -NULL_BAND))

    def length(self, metric: MetricField) -> float:
        return path_length(metric, self.nodes)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node"] + [f"x{k}" for k in range(self.nodes.shape[1])])
        for i, p in enumerate(self.nodes):
            w.writerow([i] + [f"{v:.12e}" for v in p])
        return buf.getvalue()


@dataclass
class TauEstimate:
    """Certified lower bound of a time separation with its witness."""

    value: float
    witness: CausalPath | None
    refinement_log: list = field(default_factory=list)  # (nodes, value)
    upper_hint: float | None = None
    seed: int = 0
    stages: list = field(default_factory=list)  # witness node arrays per stage

    def log_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "nodes", "value"])
        for i, (m, v) in enumerate(self.refinement_log):
            w.writerow([i, m, f"{v:.12e}"])
        return buf.getvalue()


# --- optimiser core --------------------------------------------------------------------

@dataclass
class _Problem:
    metric: MetricField
    fracs: np.ndarray  # (m+1,) level fractions, 0 ... 1
    end: np.ndarray  # fixed end point
    start: np.ndarray | None  # fixed start point, or None for a free start on sigma
    sigma: Hypersurface | None
    mu: float = 1e4

    @property
    def k(self) -> int:
        return self.end.size - 1

    def nodes(self, z: np.ndarray) -> np.ndarray:
        k, m = self.k, self.fracs.size - 1
        if self.start is None:
            y0 = z[:k]
            p0 = self.sigma.point(y0[None])[0]
            inner = z[k:].reshape(m - 1, k)
        else:
            p0 = self.start
            inner = z.reshape(m - 1, k)
        t = p0[0] + self.fracs * (self.end[0] - p0[0])
        P = np.empty((m + 1, k + 1))
        P[:, 0] = t
        P[0, 1:] = p0[1:]
        P[-1, 1:] = self.end[1:]
        P[1:-1, 1:] = inner
        return P

    def pack(self, P: np.ndarray) -> np.ndarray:
        inner = P[1:-1, 1:].reshape(-1)
        if self.start is None:
            return np.concatenate([P[0, 1:], inner])
        return inner.copy()

    def objective(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        P = self.nodes(z)
        D = P[1:] - P[:-1]
        X = P[:-1, None, :] + GL_S[None, :, None] * D[:, None, :]
        G = self.metric(X)
        dG = self.metric.derivatives(X)  # (m, q, k, i, j)
        GD = (G @ D[:, None, :, None])[..., 0]
        F = -np.sum(GD * D[:, None, :], axis=-1)
        dgDD = np.einsum("mqkij,mi,mj->mqk", dG, D, D)
        pos = F > 0
        sq = np.sqrt(np.where(pos, F, 0.0))
        dt = max(float(self.end[0] - P[0, 0]), 1e-12)
        neg = np.minimum(F, 0.0)
        J = -np.sum(GL_W * sq) + self.mu * np.sum(GL_W * neg ** 2) / dt ** 3
        coef = np.where(pos, -GL_W / (2.0 * np.where(pos, sq, 1.0)), 0.0) + self.mu * GL_W * 2.0 * neg / dt ** 3
        # dF/dP_i = -(1-s) dg(D,D) + 2 g D ; dF/dP_{i+1} = -s dg(D,D) - 2 g D
        gi = np.sum(coef[..., None] * (-(1.0 - GL_S)[None, :, None] * dgDD + 2.0 * GD), axis=1)
        gj = np.sum(coef[..., None] * (-GL_S[None, :, None] * dgDD - 2.0 * GD), axis=1)
        gradP = np.zeros_like(P)
        gradP[:-1] += gi
        gradP[1:] += gj
        k = self.k
        ginner = gradP[1:-1, 1:].reshape(-1)
        if self.start is None:
            y0 = z[:k]
            dphi = self.sigma.dphi(y0[None])[0]
            gy = gradP[0, 1:] + np.sum(gradP[:, 0] * (1.0 - self.fracs)) * dphi
            return float(J), np.concatenate([gy, ginner])
        return float(J), ginner


def _fractions(m: int, t0: float, t1: float, breaks: Sequence[float]) -> np.ndarray:
    fr = list(np.linspace(0.0, 1.0, m + 1))
    for b in breaks:
        if t0 < b < t1:
            fr.append((b - t0) / (t1 - t0))
    fr = np.unique(np.round(np.array(fr), 15))
    keep = np.concatenate([[True], np.diff(fr) > 1e-9])
    return fr[keep]


def _refine(fr: np.ndarray, P: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mid = 0.5 * (fr[1:] + fr[:-1])
    nf = np.empty(2 * fr.size - 1)
    nf[0::2] = fr
    nf[1::2] = mid
    nP = np.empty((nf.size, P.shape[1]))
    nP[0::2] = P
    nP[1::2] = 0.5 * (P[1:] + P[:-1])
    return nf, nP


def _resample(P: np.ndarray, fr_old: np.ndarray, fr_new: np.ndarray) -> np.ndarray:
    out = np.empty((fr_new.size, P.shape[1]))
    for c in range(P.shape[1]):
        out[:, c] = np.interp(fr_new, fr_old, P[:, c])
    return out


def _run(prob: _Problem, P0: np.ndarray, maxiter: int = 400) -> np.ndarray:
    z0 = prob.pack(P0)
    if z0.size == 0:
        return P0
    res = minimize(prob.objective, z0, jac=True, method="L-BFGS-B",
                   options={"maxiter": maxiter, "gtol": 1e-11, "ftol": 1e-15, "maxcor": 20})
    return prob.nodes(res.x)


def _certify(metric: MetricField, P: np.ndarray) -> tuple[float, CausalPath] | None:
    try:
        path = CausalPath.audited(metric, P)
    except DomainError:
        return None
    if not path.causal:
        return None
    return path.length(metric), path


def _search(metric: MetricField, end: np.ndarray, start: np.ndarray | None, sigma: Hypersurface | None,
            seeds: list, breaks: Sequence[float], m0: int, max_nodes: int, rel_gain: float,
            seed: int) -> TauEstimate:
    """Optimise from every seed path; refine the best by node doubling."""
    best = None
    log, stages = [], []
    t_start = float(start[0]) if start is not None else float(seeds[0][0, 0])
    fr = _fractions(m0, t_start, float(end[0]), breaks if (start is not None or sigma.is_level()) else ())
    for S in seeds:
        S = np.asarray(S, dtype=float)
        sfr = np.linspace(0.0, 1.0, S.shape[0])
        P = _resample(S, sfr, fr)
        P[0], P[-1] = S[0], S[-1]
        cert0 = _certify(metric, P)
        if cert0 is not None and (best is None or cert0[0] > best[0]):
            best = (cert0[0], cert0[1], fr)
        stages.append(P.copy())
        log.append((P.shape[0] - 1, cert0[0] if cert0 else 0.0))
        for mu in (1e4, 1e6, 1e8):
            prob = _Problem(metric, fr, end, start, sigma, mu)
            try:
                Q = _run(prob, P)
            except DomainError:
                break
            cert = _certify(metric, Q)
            if cert is not None:
                if best is None or cert[0] > best[0]:
                    best = (cert[0], cert[1], fr)
                break
    if best is None:
        return TauEstimate(0.0, None, log, None, seed, stages)
    val, path, bfr = best
    stages.append(path.nodes.copy())
    log.append((path.nodes.shape[0] - 1, val))
    while path.nodes.shape[0] - 1 < max_nodes:
        nfr, nP = _refine(bfr, path.nodes)
        prob = _Problem(metric, nfr, end, start, sigma)
        try:
            Q = _run(prob, nP)
        except DomainError:
            break
        cert = _certify(metric, Q)
        if cert is None:
            break
        gain = (cert[0] - val) / max(val, 1e-300)
        if cert[0] >= val:
            val, path, bfr = cert[0], cert[1], nfr
        stages.append(path.nodes.copy())
        log.append((path.nodes.shape[0] - 1, val))
        if gain < rel_gain:
            break
    return TauEstimate(val, path, log, None, seed, stages)


def _straight(p: np.ndarray, q: np.ndarray, m: int) -> np.ndarray:
    s = np.linspace(0.0, 1.0, m + 1)[:, None]
    return p[None] + s * (q - p)[None]


def _bent(p: np.ndarray, q: np.ndarray, m: int, early: bool) -> np.ndarray:
    """Seed that moves spatially in the first (or last) half and is comoving in the other."""
    s = np.linspace(0.0, 1.0, m + 1)
    P = _straight(p, q, m)
    w = np.clip(2 * s, 0, 1) if early else np.clip(2 * s - 1, 0, 1)
    P[:, 1:] = p[1:] + w[:, None] * (q[1:] - p[1:])
    return P


def tau(metric: MetricField, p, q, *, nodes: int = DEFAULT_NODES, max_nodes: int = MAX_NODES,
        rel_gain: float = REL_GAIN, breaks: Sequence[float] = (), seed: int = 0, extra_seeds=()) -> TauEstimate:
    """Lower bound of ``tau(p, q)`` by broken-path optimisation.

    Seeds: the straight segment, two bent paths, and any ``extra_seeds`` (node
    arrays from ``p`` to ``q``).  ``breaks`` are time levels forced into the
    node set (kink hypersurfaces).  Returns value 0 and no witness when no
    causal path is found.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if q[0] <= p[0]:
        return TauEstimate(0.0, None, [], None, seed)
    seeds = [_straight(p, q, nodes), _bent(p, q, nodes, True), _bent(p, q, nodes, False), *extra_seeds]
    return _search(metric, q, p, None, seeds, breaks, nodes, max_nodes, rel_gain, seed)


def tau_sigma(metric: MetricField, sigma: Hypersurface, p, *, nodes: int = DEFAULT_NODES,
              max_nodes: int = MAX_NODES, rel_gain: float = REL_GAIN, breaks: Sequence[float] = (), seed: int = 0,
              base_guesses=None, seed_paths=None) -> TauEstimate:
    """Lower bound of ``sup_{x in sigma} tau(x, p)`` with a free base point on ``sigma``.

    The base point is seeded from a coarse grid on ``sigma`` (plus ``p``'s own
    spatial position and any ``base_guesses``) and refined jointly with the path.
    ``seed_paths`` (node arrays from a point of sigma to ``p``) replace the
    automatic seeds.
    """
    p = np.asarray(p, dtype=float)
    if seed_paths is not None:
        return _search(metric, p, None, sigma, [np.asarray(S, dtype=float) for S in seed_paths], breaks, nodes,
                       max_nodes, rel_gain, seed)
    k = p.size - 1
    guesses = [p[1:]]
    if base_guesses is not None:
        guesses += [np.asarray(b, dtype=float) for b in base_guesses]
    else:
        for y in sigma.grid_points(3):
            guesses.append(y)
    # keep bases below p and inside the sigma box; rank by straight-drop length
    cands = []
    for y in guesses:
        x0 = sigma.point(np.asarray(y)[None])[0]
        if x0[0] >= p[0]:
            continue
        S = _straight(x0, p, nodes)
        c = _certify(metric, S)
        cands.append((c[0] if c else -1.0, S))
    if not cands:
        return TauEstimate(0.0, None, [], None, seed)
    cands.sort(key=lambda c: -c[0])
    seeds = [S for _, S in cands[:3]]
    return _search(metric, p, None, sigma, seeds, breaks, nodes, max_nodes, rel_gain, seed)


# --- geodesics ------------------------------------------------------------------------------

@dataclass
class GeodesicResult:
    params: np.ndarray
    points: np.ndarray
    velocities: np.ndarray
    metric_tag: str
    status: str  # reached_T | left_domain | hit_singularity
    unit_speed: bool
    crossings: list = field(default_factory=list)

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def proper_time(self) -> float:
        return float(self.params[-1])

    def norm_drift(self, metric_for: Callable[[np.ndarray], MetricField]) -> float:
        vals = []
        for x, v in zip(self.points, self.velocities):
            vals.append(float(v @ metric_for(x)(x) @ v))
        vals = np.array(vals)
        return float(np.max(np.abs(vals - vals[0])))


def _accel(metric: MetricField, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    # solve with the lowered symbols directly: no determinant floor, so the
    # integration can follow a collapsing scale factor down to the halt threshold
    g = metric(x)
    dg = metric.derivatives(x)
    dgv = np.einsum("...kij,...k->...ij", dg, v)
    low = dgv @ v[..., None]  # d_k g_ij v^k v^j
    low = low[..., 0] - 0.5 * np.einsum("...kij,...i,...j->...k", dg, v, v)
    return -np.linalg.solve(g, low[..., None])[..., 0]


def _rk4_step(metric: MetricField, x, v, h):
    a1 = _accel(metric, x, v)
    x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
    a2 = _accel(metric, x2, v2)
    x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
    a3 = _accel(metric, x3, v3)
    x4, v4 = x + h * v3, v + h * a3
    a4 = _accel(metric, x4, v4)
    xn = x + h * (v + 2 * v2 + 2 * v3 + v4) / 6.0
    vn = v + h * (a1 + 2 * a2 + 2 * a3 + a4) / 6.0
    return xn, vn


def volume_scale(metric: MetricField, x: np.ndarray) -> float:
    """``|det g|^{1/(2(n-1))}``; equals the scale factor for GRW metrics."""
    n = metric.dim
    return float(abs(np.linalg.det(metric(x))) ** (1.0 / (2 * (n - 1))))


def geodesic(metric: MetricField | SpacetimeModel, x0, v0, T: float, *, step: float = 1e-3,
             scale_floor: float = 1e-4, min_step: float = 1e-12, bisect_tol: float = 1e-10,
             record_every: int = 1) -> GeodesicResult:
    """Integrate a geodesic for parameter length ``T`` with fixed-step RK4.

    A :class:`SpacetimeModel` with kinks is integrated piecewise on the smooth
    extensions; kink crossings are located by bisection on the step fraction
    (to ``bisect_tol`` in the signed distance) and the solution continues with
    position and velocity unchanged.  Near a curvature singularity the step is
    halved until it collapses; the run then stops with ``hit_singularity``.
    """
    if isinstance(metric, SpacetimeModel):
        model = metric
        g_full = model.metric
        layers = model.kinks if model.pieces else ()
    else:
        model, g_full, layers = None, metric, ()
    x = np.asarray(x0, dtype=float).copy()
    v = np.asarray(v0, dtype=float).copy()
    if not np.any(v):
        raise ValueError("zero initial velocity")

    def piece(xp):
        return model.piece_for(xp) if (model is not None and model.pieces) else g_full

    cur = piece(x)
    norm0 = float(v @ g_full(x) @ v)
    unit = abs(norm0 + 1.0) < 1e-9
    lam = 0.0
    params, pts, vels, crossings = [0.0], [x.copy()], [v.copy()], []
    status = "reached_T"
    h = step
    count = 0
    while lam < T - 1e-15:
        hh = min(h, T - lam)
        try:
            with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
                xn, vn = _rk4_step(cur, x, v, hh)
            ok = np.all(np.isfinite(xn)) and np.all(np.isfinite(vn)) and bool(g_full.contains(xn))
        except (DomainError, np.linalg.LinAlgError, FloatingPointError):
            ok = False
        if not ok:
            h = 0.5 * hh
            if h < min_step:
                status = "hit_singularity" if volume_scale(g_full, x) < 1e-2 else "left_domain"
                break
            continue
        crossed = None
        for layer in layers:
            d0 = float(layer.signed_distance(x))
            d1 = float(layer.signed_distance(xn))
            if abs(d0) > 10 * bisect_tol and d0 * d1 < 0:
                crossed = layer
                break
        if crossed is not None:
            lo_f, hi_f = 0.0, 1.0
            xb, vb = x, v
            for _ in range(200):
                mid = 0.5 * (lo_f + hi_f)
                xb, vb = _rk4_step(cur, x, v, mid * hh)
                dm = float(crossed.signed_distance(xb))
                if abs(dm) <= bisect_tol:
                    break
                if dm * float(crossed.signed_distance(x)) > 0:
                    lo_f = mid
                else:
                    hi_f = mid
            lam += mid * hh
            x, v = xb, vb
            crossings.append(lam)
            cur = piece(xn)
            params.append(lam)
            pts.append(x.copy())
            vels.append(v.copy())
            continue
        x, v = xn, vn
        lam += hh
        h = step if hh == h else h
        count += 1
        if count % record_every == 0 or lam >= T - 1e-15:
            params.append(lam)
            pts.append(x.copy())
            vels.append(v.copy())
        if volume_scale(g_full, x) < scale_floor:
            status = "hit_singularity"
            break
    if params[-1] != lam:
        params.append(lam)
        pts.append(x.copy())
        vels.append(v.copy())
    return GeodesicResult(np.array(params), np.array(pts), np.array(vels), g_full.name, status, unit, crossings)


@dataclass
class ProxyComparison:
    epsilons: list
    endpoints: np.ndarray  # (K, n) endpoints under the smooth proxies
    reference: np.ndarray  # event-detected endpoint on the raw metric
    gaps: list
    successive: list  # |x_k - x_{k+1}|, the Richardson-style self-comparison
    gap_constant: float  # max gap / eps

    @property
    def converging(self) -> bool:
        return all(b <= a * (1 + 1e-9) for a, b in zip(self.gaps, self.gaps[1:]))


def proxy_geodesic_comparison(model: SpacetimeModel, family, x0, v0, T: float, step: float = 1e-3,
                              which: str = "inner") -> ProxyComparison:
    """Integrate the smooth approximants from the same data and compare with the event-detected solution."""
    ref = geodesic(model, x0, v0, T, step=step)
    if ref.status != "reached_T":
        raise DomainError(f"reference geodesic {ref.status}")
    metrics = family.inner if which == "inner" else family.smoothed
    ends = []
    for mk in metrics:
        r = geodesic(mk, x0, v0, T, step=step)
        if r.status != "reached_T":
            raise DomainError(f"proxy geodesic {r.status} for {mk.name}")
        ends.append(r.end)
    ends = np.array(ends)
    gaps = [float(np.linalg.norm(e - ref.end)) for e in ends]
    succ = [float(np.linalg.norm(a - b)) for a, b in zip(ends, ends[1:])]
    eps = list(family.schedule)
    return ProxyComparison(eps, ends, ref.end, gaps, succ, max(g / e for g, e in zip(gaps, eps)))


def _metric_of(metric):
    return metric.metric if isinstance(metric, SpacetimeModel) else metric


def normal_geodesic(metric, sigma: Hypersurface, y, T: float, **kw) -> GeodesicResult:
    g = _metric_of(metric)
    y = np.asarray(y, dtype=float)
    x0 = sigma.point(y[None])[0]
    n0 = sigma.unit_normal(g, y[None])[0]
    return geodesic(metric, x0, n0, T, **kw)


def normal_exponential(metric, sigma: Hypersurface, y, t: float, **kw) -> np.ndarray:
    """``exp_sigma(y, t)``: the point at parameter ``t`` on the unit normal geodesic from ``sigma(y)``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    res = normal_geodesic(metric, sigma, y, t, **kw)
    if res.status != "reached_T":
        raise DomainError(f"normal geodesic {res.status} at parameter {res.proper_time:.6g} < {t}")
    return res.end


@dataclass
class CutResult:
    value: float
    exited: bool
    status: str
    evaluations: int

    def __float__(self) -> float:
        return self.value


def cut_function(metric, sigma: Hypersurface, y, Tmax: float, tol: float = 0.005, iterations: int = 12,
                 breaks: Sequence[float] = (), step: float = 1e-3) -> CutResult:
    """Largest ``t <= Tmax`` with ``tau_sigma(exp(y, t)) <= t (1 + tol)`` (bisection).

    If the normal geodesic stops before ``Tmax`` the search interval ends at the
    exit parameter and the result is flagged.
    """
    g = _metric_of(metric)
    res = normal_geodesic(metric, sigma, y, Tmax, step=step)
    Tend = res.proper_time
    exited = res.status != "reached_T"
    if exited:
        Tend = max(0.0, Tend - 1e-6)
    y = np.asarray(y, dtype=float)

    def point(t):
        r = normal_geodesic(metric, sigma, y, t, step=step)
        return r.end

    def ok(t):
        if t <= 0:
            return True
        val = tau_sigma(g, sigma, point(t), breaks=breaks, base_guesses=[y]).value
        return val <= t * (1 + tol)

    evals = 1
    if ok(Tend):
        return CutResult(Tend, exited, res.status, evals)
    lo, hi = 0.0, Tend
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        evals += 1
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return CutResult(lo, exited, res.status, evals)


# --- normal congruences and volumes ------------------------------------------------------

@dataclass
class Congruence:
    times: np.ndarray  # (T+1,)
    positions: np.ndarray  # (T+1, B, n)
    velocities: np.ndarray  # (T+1, B, n)
    area: np.ndarray  # (T+1, B): sqrt det G(t) / sqrt det G(0)
    sqrt_det0: np.ndarray  # (B,)
    base: np.ndarray  # (B, n-1)


def normal_congruence(metric: MetricField, sigma: Hypersurface, base: np.ndarray, T: float, nt: int = 200,
                      hy: float = 1e-4) -> Congruence:
    """Batched RK4 normal geodesics with pushed frames by central differences in the base point."""
    base = np.asarray(base, dtype=float).reshape(-1, sigma.dim - 1)
    B, k = base.shape
    offs = [np.zeros(k)]
    for i in range(k):
        e = np.zeros(k)
        e[i] = hy
        offs += [e, -e]
    offs = np.array(offs)
    Y = (base[:, None, :] + offs[None]).reshape(-1, k)
    x = sigma.point(Y)
    v = sigma.unit_normal(metric, Y)
    h = T / nt
    S = offs.shape[0]
    pos = [x.reshape(B, S, -1)]
    vel = [v.reshape(B, S, -1)]
    for _ in range(nt):
        x, v = _rk4_step(metric, x, v, h)
        pos.append(x.reshape(B, S, -1))
        vel.append(v.reshape(B, S, -1))
    pos = np.array(pos)  # (T+1, B, S, n)
    vel = np.array(vel)
    frame = np.stack([(pos[:, :, 1 + 2 * i] - pos[:, :, 2 + 2 * i]) / (2 * hy) for i in range(k)], axis=2)
    gm = metric(pos[:, :, 0])
    G = frame @ gm @ np.swapaxes(frame, -1, -2)
    sd = np.sqrt(np.linalg.det(G))
    return Congruence(np.linspace(0.0, T, nt + 1), pos[:, :, 0], vel[:, :, 0], sd / sd[0][None], sd[0], base)


def _box_weights(sigma: Hypersurface, B, per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in B]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(B))
    w = np.ones([per_axis] * len(B))
    for a, (lo, hi) in enumerate(B):
        wa = np.full(per_axis, (hi - lo) / (per_axis - 1))
        wa[0] = wa[-1] = 0.5 * (hi - lo) / (per_axis - 1)
        shape = [1] * len(B)
        shape[a] = -1
        w = w * wa.reshape(shape)
    return pts, w.reshape(-1)


def _truncated_time_integral(times: np.ndarray, vals: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Trapezoid ``int_0^{upper_b} vals[:, b] dt`` with linear interpolation at the upper limit."""
    out = np.empty(vals.shape[1])
    for b in range(vals.shape[1]):
        u = min(float(upper[b]), float(times[-1]))
        j = int(np.searchsorted(times, u, side="right"))
        tt = np.concatenate([times[:j], [u]]) if times[j - 1] < u else times[:j]
        vv = np.interp(tt, times, vals[:, b])
        out[b] = float(np.trapezoid(vv, tt)) if tt.size > 1 else 0.0
    return out


def omega_volume(metric: MetricField, sigma: Hypersurface, B, T: float, per_axis: int = 3, cut=None,
                 nt: int = 200, f: Callable | None = None) -> dict:
    """Volume (or ``f``-weighted integral) of ``Omega_T^+(B)`` in the normal chart.

    ``cut`` may be an array of cut values per base point of the ``per_axis`` grid
    on ``B`` (default: no cut before ``T``).  Returns a dict with the integral,
    ``sigma(B)``, per-base-point line integrals of ``f`` and the congruence.
    """
    pts, w = _box_weights(sigma, B, per_axis)
    cong = normal_congruence(metric, sigma, pts, T, nt)
    upper = np.full(pts.shape[0], T) if cut is None else np.minimum(np.asarray(cut, dtype=float), T)
    fv = np.ones(cong.area.shape) if f is None else f(cong.positions)
    inner = _truncated_time_integral(cong.times, fv * cong.area, upper)
    line = _truncated_time_integral(cong.times, fv, upper)
    sigma_B = float(np.sum(w * cong.sqrt_det0))
    vol = float(np.sum(w * cong.sqrt_det0 * inner))
    return {"volume": vol, "sigma_area": sigma_B, "line_integrals": line, "base": pts, "upper": upper,
            "congruence": cong}


# --- checks -----------------------------------------------------------------------------------

def initial_velocity(nodes: np.ndarray) -> np.ndarray:
    """Derivative at the first node of the quadratic through the first three nodes (time parameter)."""
    t = nodes[:3, 0]
    P = nodes[:3]
    t0, t1, t2 = t
    c0 = (2 * t0 - t1 - t2) / ((t0 - t1) * (t0 - t2))
    c1 = (t0 - t2) / ((t1 - t0) * (t1 - t2))
    c2 = (t0 - t1) / ((t2 - t0) * (t2 - t1))
    return c0 * P[0] + c1 * P[1] + c2 * P[2]


def orthogonality_defect(metric: MetricField, sigma: Hypersurface, nodes: np.ndarray) -> float:
    """Hyperbolic angle (degrees) between the path's initial velocity and the normal of sigma."""
    if nodes.shape[0] < 3:
        raise ValueError("witness too short to estimate its initial velocity")
    v = initial_velocity(nodes)
    x0 = nodes[0]
    gm = metric(x0)
    frame = sigma.tangent_frame(x0[1:][None])[0]
    vv = float(v @ gm @ v)
    if vv >= 0:
        raise ValueError("initial velocity is not timelike")
    ratios = [abs(float(v @ gm @ Xi)) / (math.sqrt(-vv) * math.sqrt(float(Xi @ gm @ Xi))) for Xi in frame]
    return math.degrees(math.asinh(max(ratios)))


def _defect_or_inf(metric: MetricField, sigma: Hypersurface, nodes: np.ndarray) -> float:
    try:
        return orthogonality_defect(metric, sigma, nodes)
    except ValueError:
        return math.inf


@dataclass
class OrthogonalityReport:
    defects: list
    max_defect: float
    passed: bool
    traces: list = field(default_factory=list)


def orthogonality_check(metric: MetricField, sigma: Hypersurface, targets, threshold_deg: float = 2.0,
                        breaks=(), base_guesses=None) -> OrthogonalityReport:
    """Initial-velocity defect of the ``tau_sigma`` witnesses for each target point."""
    defects, traces = [], []
    for p in np.asarray(targets, dtype=float):
        est = tau_sigma(metric, sigma, p, breaks=breaks, base_guesses=base_guesses)
        if est.witness is None:
            raise ValueError(f"no witness for target {p}")
        defects.append(orthogonality_defect(metric, sigma, est.witness.nodes))
        traces.append([_defect_or_inf(metric, sigma, S) for S in est.stages])
    mx = max(defects)
    return OrthogonalityReport(defects, mx, mx <= threshold_deg, traces)


@dataclass
class MonotonicityReport:
    pairs: np.ndarray
    values: np.ndarray  # (pairs, K + 1): inner approximants then g
    chain_ok: bool
    gaps: list  # per k: max relative gap (tau - tau_k) / tau
    gaps_decreasing: bool
    final_gap: float
    violations: list


def sample_pairs(metric: MetricField, count: int, t_range, dt_range=(0.1, 0.5), max_speed: float = 0.5,
                 seed: int = 0, min_margin: float = 0.3) -> np.ndarray:
    """Random causal pairs ``(p, q)`` with a spatial offset of at most ``max_speed`` of the light cone."""
    rng = np.random.default_rng(seed)
    n = metric.dim
    out = []
    while len(out) < count:
        p = np.zeros(n)
        p[0] = rng.uniform(*t_range)
        p[1:] = rng.uniform(-0.2, 0.2, n - 1)
        dt = rng.uniform(*dt_range)
        if p[0] + dt > t_range[1] + dt_range[1]:
            continue
        u = rng.standard_normal(n - 1)
        u /= np.linalg.norm(u)
        scale = math.sqrt(max(metric(p)[1, 1], 1e-12))
        q = p.copy()
        q[0] += dt
        q[1:] += rng.uniform(0, max_speed) * dt * u / scale
        try:
            F, D = segment_values(metric, np.stack([p, q]), AUDIT_S)
        except DomainError:
            continue
        if np.min(F) / dt ** 2 >= min_margin:
            out.append(np.stack([p, q]))
    return np.array(out)


def tau_monotonicity_check(model: SpacetimeModel | MetricField, family, pairs, breaks=(0.0,), rel_noise: float = 0.005,
                           abs_tol: float = 1e-6, final_gap_max: float = 0.02) -> MonotonicityReport:
    """``tau_k <= tau_{k+1} <= tau`` on sampled pairs along the inner approximants."""
    g = _metric_of(model)
    metrics = list(family.inner) + [g]
    pairs = np.asarray(pairs, dtype=float)
    vals = np.zeros((pairs.shape[0], len(metrics)))
    for i, (p, q) in enumerate(pairs):
        for k, mk in enumerate(metrics):
            vals[i, k] = tau(mk, p, q, breaks=breaks).value
    viol = []
    for i in range(pairs.shape[0]):
        for k in range(len(metrics) - 1):
            a, b = vals[i, k], vals[i, k + 1]
            if a > b * (1 + rel_noise) + abs_tol:
                viol.append((i, k, a, b))
    gaps = []
    for k in range(len(metrics) - 1):
        rel = (vals[:, -1] - vals[:, k]) / np.where(vals[:, -1] > 0, vals[:, -1], 1.0)
        gaps.append(float(np.max(rel)))
    dec = all(b <= a + rel_noise for a, b in zip(gaps, gaps[1:]))
    return MonotonicityReport(pairs, vals, not viol, gaps, dec, gaps[-1], viol)
