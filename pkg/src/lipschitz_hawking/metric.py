"""Lorentzian metric fields, cone comparison and the catalog of Lipschitz model spacetimes.

Conventions: signature ``(-,+,...,+)``; coordinate 0 is a time function and
``d/dx^0`` is future directed unless a model supplies another time orientation;
the background Riemannian metric is the coordinate Euclidean one.
Derivative arrays are laid out as ``dg[..., k, i, j] = d_k g_ij``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator, make_interp_spline

from .grid import Grid, SampledField, fd_partial

NULL_BAND = 1e-12
NESTING_THRESHOLD = 1e-9


class SignatureError(ValueError):
    """Raised when a metric loses Lorentzian signature at some point."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class DomainError(ValueError):
    """Evaluation requested outside the region where a metric is defined."""


@dataclass(frozen=True)
class MetricField:
    """A Lorentzian metric on a single chart.

    ``func`` maps points of shape ``(..., n)`` to matrices ``(..., n, n)``.
    ``dfunc`` (optional) returns first derivatives ``(..., n, n, n)``; without it
    derivatives are taken by central differences of ``func``.  ``domain`` is a
    per-coordinate interval list (``None`` entries are unbounded).
    """

    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    dfunc: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "metric"
    domain: tuple = ()
    time_orientation: Callable[[np.ndarray], np.ndarray] | None = None
    source: SampledField | None = None
    axes: tuple[int, ...] = ()
    lipschitz: float | None = None

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        return self.func(x)

    def _check_domain(self, x: np.ndarray) -> None:
        for k, iv in enumerate(self.domain):
            if iv is None:
                continue
            lo, hi = iv
            xk = x[..., k]
            if np.any(xk < lo - 1e-12) or np.any(xk > hi + 1e-12):
                raise DomainError(f"{self.name}: coordinate {k} outside [{lo}, {hi}]")

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.ones(x.shape[:-1], dtype=bool)
        for k, iv in enumerate(self.domain):
            if iv is not None:
                ok &= (x[..., k] >= iv[0] - 1e-12) & (x[..., k] <= iv[1] + 1e-12)
        return ok

    def derivatives(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self._check_domain(x)
        if self.dfunc is not None:
            return self.dfunc(x)
        n = self.dim
        out = np.empty(x.shape[:-1] + (n, n, n))
        for k in range(n):
            step = 1e-6 * max(1.0, float(np.max(np.abs(x[..., k]))) if x.size else 1.0)
            e = np.zeros(n)
            e[k] = step
            out[..., k, :, :] = (self.func(x + e) - self.func(x - e)) / (2 * step)
        return out

    def christoffel_at(self, x) -> np.ndarray:
        """``Gamma[..., i, j, k]`` = Gamma^i_{jk} at the given points."""
        g = self(x)
        dg = self.derivatives(x)
        return christoffel_from(g, dg)

    def inverse_at(self, x) -> np.ndarray:
        return inverse_cofactor(self(x))

    def future(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.time_orientation is not None:
            return self.time_orientation(x)
        t = np.zeros(x.shape[:-1] + (self.dim,))
        t[..., 0] = 1.0
        return t

    @classmethod
    def from_samples(cls, fld: SampledField, dim: int, axes: Sequence[int], name: str = "sampled",
                     lipschitz: float | None = None, time_orientation=None) -> "MetricField":
        """Wrap a sampled ``(n, n)`` field living on the chart coordinates ``axes``.

        One-dimensional grids use cubic splines (values and derivatives); higher
        dimensional grids use multilinear interpolation of the values and of their
        central-difference derivative fields.
        """
        grid = fld.grid
        axes = tuple(int(a) for a in axes)
        if len(axes) != grid.dim:
            raise ValueError("one chart axis per grid axis required")
        vals = fld.values
        domain = [None] * dim
        for a, ax in enumerate(axes):
            domain[ax] = grid.bounds[a]
        if grid.dim == 1:
            spline = make_interp_spline(grid.axis_coords(0), vals, k=3, axis=0)
            dspline = spline.derivative()
            ax0 = axes[0]

            def func(x):
                return spline(x[..., ax0])

            def dfunc(x):
                out = np.zeros(x.shape[:-1] + (dim, dim, dim))
                out[..., ax0, :, :] = dspline(x[..., ax0])
                return out
        else:
            pts = tuple(grid.axis_coords(a) for a in range(grid.dim))
            interp = RegularGridInterpolator(pts, vals, method="linear")
            dints = [RegularGridInterpolator(pts, fd_partial(fld, a).values, method="linear")
                     for a in range(grid.dim)]

            def func(x):
                return interp(x[..., list(axes)])

            def dfunc(x):
                out = np.zeros(x.shape[:-1] + (dim, dim, dim))
                xa = x[..., list(axes)]
                for a, ax in enumerate(axes):
                    out[..., ax, :, :] = dints[a](xa)
                return out

        return cls(dim=dim, func=func, dfunc=dfunc, name=name, domain=tuple(domain),
                   time_orientation=time_orientation, source=fld, axes=axes, lipschitz=lipschitz)


def christoffel_from(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    """Christoffel symbols of the second kind from metric and first derivatives."""
    ginv = inverse_cofactor(g)
    # lowered: Gamma_{l j k} = 1/2 (d_j g_lk + d_k g_jl - d_l g_jk)
    low = 0.5 * (np.einsum("...jlk->...ljk", dg) + np.einsum("...kjl->...ljk", dg) - dg)
    return np.einsum("...il,...ljk->...ijk", ginv, low)


def inverse_cofactor(g: np.ndarray, det_floor: float = 1e-12) -> np.ndarray:
    """Matrix inverse through the cofactor (adjugate) formula, batched over leading axes."""
    g = np.asarray(g, dtype=float)
    n = g.shape[-1]
    det = np.linalg.det(g)
    if np.any(np.abs(det) <= det_floor):
        raise np.linalg.LinAlgError(f"near-singular metric: min |det| = {np.min(np.abs(det)):.3e}")
    if n == 1:
        return 1.0 / g
    cof = np.empty_like(g)
    idx = np.arange(n)
    for i in range(n):
        rows = idx[idx != i]
        for j in range(n):
            cols = idx[idx != j]
            minor = g[..., rows[:, None], cols[None, :]]
            cof[..., i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return np.swapaxes(cof, -1, -2) / det[..., None, None]


def inverse_at(g: MetricField, x) -> np.ndarray:
    return g.inverse_at(x)


def lorentzian_ok(gmat: np.ndarray) -> np.ndarray:
    """Pointwise check: symmetric, exactly one negative eigenvalue, no zero eigenvalue."""
    ev = np.linalg.eigvalsh(0.5 * (gmat + np.swapaxes(gmat, -1, -2)))
    return (np.sum(ev < 0, axis=-1) == 1) & np.all(np.abs(ev) > 1e-14, axis=-1)


def causal_character(g: MetricField, x, v) -> tuple[str, float]:
    v = np.asarray(v, dtype=float)
    nv2 = float(v @ v)
    if nv2 == 0.0:
        raise ValueError("zero vector has no causal character")
    val = float(v @ g(x) @ v)
    if abs(val) <= NULL_BAND * nv2:
        return "null", val
    return ("timelike" if val < 0 else "spacelike"), val


# --- cone audits --------------------------------------------------------------

def orthonormal_frame(gmat: np.ndarray, future: np.ndarray) -> np.ndarray:
    """g-orthonormal frame ``E[..., a, :]`` with ``E_0`` future timelike (Gram-Schmidt)."""
    n = gmat.shape[-1]
    shape = gmat.shape[:-2]
    E = np.zeros(shape + (n, n))
    ip = lambda u, w: np.sum(np.squeeze(u[..., None, :] @ gmat, -2) * w, axis=-1)
    e0 = future / np.sqrt(-ip(future, future))[..., None]
    E[..., 0, :] = e0
    eye = np.eye(n)
    basis = [eye[k] for k in range(n) if k != 0] + [eye[0]]
    count = 1
    for b in basis:
        if count == n:
            break
        v = np.broadcast_to(b, shape + (n,)).copy()
        for a in range(count):
            sign = -1.0 if a == 0 else 1.0
            v = v - sign * ip(v, E[..., a, :])[..., None] * E[..., a, :]
        nrm2 = ip(v, v)
        if np.any(nrm2 <= 1e-14):
            continue
        E[..., count, :] = v / np.sqrt(nrm2)[..., None]
        count += 1
    return E


def _sphere_dirs(k: int, shape, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vectors in R^k, array of shape ``(*shape, k)``."""
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    if k == 1:
        return np.where(rng.random(shape) < 0.5, -1.0, 1.0)[..., None]
    u = rng.standard_normal(shape + (k,))
    return u / np.linalg.norm(u, axis=-1, keepdims=True)


def audit_vectors(gmat: np.ndarray, future: np.ndarray, rng: np.random.Generator,
                  n_timelike: int = 8, n_near_null: int = 8, n_spacelike: int = 16) -> np.ndarray:
    """Stratified Euclidean-unit audit vectors per point, relative to ``gmat``'s cone.

    Per point: ``n_timelike`` strictly inside the cone, ``n_near_null`` on the cone
    (first half exactly null, second half within 1e-3 inside), ``n_spacelike``
    outside (half of them within 1e-3 of the cone).  Returned shape ``(P, m, n)``.
    """
    gmat = gmat.reshape(-1, gmat.shape[-2], gmat.shape[-1])
    future = future.reshape(-1, gmat.shape[-1])
    P, n = gmat.shape[0], gmat.shape[-1]
    E = orthonormal_frame(gmat, future)
    half_null = n_near_null // 2
    half_sp = n_spacelike // 2
    r = np.concatenate([
        rng.uniform(0.0, 0.999, (P, n_timelike)),
        np.ones((P, half_null)),
        1.0 - 1e-3 * rng.random((P, n_near_null - half_null)),
        1.0 + 1e-3 * rng.random((P, half_sp)),
        rng.uniform(1.001, 3.0, (P, n_spacelike - half_sp)),
    ], axis=1)
    m = r.shape[1]
    w = _sphere_dirs(n - 1, (P, m), rng)
    sign = np.where(rng.random((P, m)) < 0.5, -1.0, 1.0)  # both time orientations
    X = sign[..., None] * E[:, None, 0, :] + r[..., None] * (w @ E[:, 1:, :])
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


@dataclass
class NestingReport:
    holds: bool
    min_margin: float
    witness: tuple | None
    length_margin: float
    n_points: int
    n_causal: int


def cones_narrower(g1: MetricField, g2: MetricField, points: np.ndarray, seed: int = 0,
                   strata: tuple[int, int, int] = (8, 8, 16), threshold: float = NESTING_THRESHOLD) -> NestingReport:
    """Audit ``g1 < g2``: every g1-causal vector must be g2-timelike.

    ``min_margin`` is the minimum of ``-g2(X,X)`` over g1-causal Euclidean-unit
    audit vectors; ``length_margin`` the minimum of ``g1(X,X) - g2(X,X)`` over the
    same set (positive means g1-lengths are strictly shorter).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, g1.dim)
    rng = np.random.default_rng(seed)
    G1 = g1(pts)
    G2 = g2(pts)
    X = audit_vectors(G1, g1.future(pts), rng, *strata)
    q1 = np.sum((X @ G1) * X, axis=-1)
    q2 = np.sum((X @ G2) * X, axis=-1)
    causal = q1 <= NULL_BAND
    if not causal.any():
        return NestingReport(True, math.inf, None, math.inf, pts.shape[0], 0)
    marg = np.where(causal, -q2, np.inf)
    flat = int(np.argmin(marg))
    p_i, m_i = np.unravel_index(flat, marg.shape)
    min_margin = float(marg[p_i, m_i])
    lm = float(np.min(np.where(causal, q1 - q2, np.inf)))
    return NestingReport(min_margin > threshold, min_margin, (pts[p_i].copy(), X[p_i, m_i].copy()),
                         lm, pts.shape[0], int(causal.sum()))


# --- model catalog --------------------------------------------------------------

@dataclass(frozen=True)
class DeltaLayer:
    """Single-layer (delta) part of a distributional Ricci tensor.

    The layer is the hyperplane ``normal . x = offset`` (``normal`` Euclidean unit);
    the distribution is ``coefficient(x) * delta(normal . x - offset)``.
    """

    normal: tuple[float, ...]
    offset: float
    coefficient: Callable[[np.ndarray], np.ndarray]
    provenance: str = ""

    def signed_distance(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., :len(self.normal)] @ np.asarray(self.normal) - self.offset


@dataclass(frozen=True)
class SpacetimeModel:
    name: str
    dim: int
    metric: MetricField
    params: dict
    known: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    pieces: tuple = ()
    kinks: tuple[DeltaLayer, ...] = ()

    def ricci_regular(self, x) -> np.ndarray:
        return self.known["ricci"](np.asarray(x, dtype=float))

    def piece_for(self, x, side: int | None = None) -> MetricField:
        """Smooth extension valid on the side of the kinks containing ``x``."""
        if not self.pieces:
            return self.metric
        if side is not None:
            return self.pieces[side][0]
        for pm, pred in self.pieces:
            if pred(np.asarray(x, dtype=float)):
                return pm
        return self.pieces[-1][0]

    def delta_min_on_cone(self, samples: int = 2000, seed: int = 0) -> float:
        """Minimum of the delta-layer coefficients evaluated on g-unit timelike vectors at layer points."""
        if not self.kinks:
            return 0.0
        rng = np.random.default_rng(seed)
        worst = math.inf
        for layer in self.kinks:
            x0 = np.asarray(layer.normal) * layer.offset
            x0 = np.pad(x0, (0, self.dim - x0.size))
            gm = self.metric(x0)
            E = orthonormal_frame(gm[None], self.metric.future(x0)[None])[0]
            C = layer.coefficient(x0)
            psi = rng.uniform(0.0, 3.0, samples)
            w = _sphere_dirs(self.dim - 1, samples, rng)
            X = np.cosh(psi)[:, None] * E[0] + np.sinh(psi)[:, None] * (w @ E[1:])
            X = np.vstack([E[0][None], X])
            worst = min(worst, float(np.min(np.einsum("mi,ij,mj->m", X, C, X))))
        return worst


def _diag_metric(n: int, a2, da2, t_index: int = 0):
    """Builder for ``-dt^2 + A(t) delta_ij`` with ``A = a^2`` given with its t-derivative."""

    def func(x):
        t = x[..., t_index]
        out = np.zeros(x.shape[:-1] + (n, n))
        out[..., 0, 0] = -1.0
        A = a2(t)
        for i in range(1, n):
            out[..., i, i] = A
        return out

    def dfunc(x):
        t = x[..., t_index]
        out = np.zeros(x.shape[:-1] + (n, n, n))
        dA = da2(t)
        for i in range(1, n):
            out[..., 0, i, i] = dA
        return out

    return func, dfunc


def grw_metric(n: int, a, adot, name: str = "grw", domain_t=None, lipschitz=None) -> MetricField:
    func, dfunc = _diag_metric(n, lambda t: a(t) ** 2, lambda t: 2.0 * a(t) * adot(t))
    domain = (domain_t,) + (None,) * (n - 1)
    return MetricField(n, func, dfunc, name=name, domain=domain, lipschitz=lipschitz)


def grw_ricci(n: int, a, adot, addot):
    """Coordinate Ricci of ``-dt^2 + a(t)^2 delta`` (flat slices)."""

    def ric(x):
        t = x[..., 0]
        A, Ad, Add = a(t), adot(t), addot(t)
        out = np.zeros(x.shape[:-1] + (n, n))
        out[..., 0, 0] = -(n - 1) * Add / A
        for i in range(1, n):
            out[..., i, i] = A * Add + (n - 2) * Ad ** 2
        return out

    return ric


def minkowski_metric(n: int) -> MetricField:
    eta = np.diag([-1.0] + [1.0] * (n - 1))

    def func(x):
        return np.broadcast_to(eta, np.asarray(x).shape[:-1] + (n, n)).copy()

    def dfunc(x):
        return np.zeros(np.asarray(x).shape[:-1] + (n, n, n))

    return MetricField(n, func, dfunc, name=f"minkowski{n}", domain=(None,) * n, lipschitz=0.0)


CATALOG = ("minkowski", "grw_smooth", "grw_eds_collapse", "grw_two_slope", "pp_impulsive_rosen")

_SYMBOLIC = "lipschitz_hawking.symbolic"


def _zero_ricci(n):
    return lambda x: np.zeros(np.asarray(x).shape[:-1] + (n, n))


def catalog(name: str, params: dict | None = None) -> SpacetimeModel:
    """Build a catalog model.

    Parameters (defaults in brackets):
      minkowski: n [4]
      grw_smooth: n [4], profile in {cosh, exp, linear} [cosh], m [0.5] (linear slope)
      grw_eds_collapse: n [4], t_s [1.0]
      grw_two_slope: n [4], m1 [0.5], m2 [1.0] with 0 < m1 <= m2; optional t0 < 0 (slice)
      pp_impulsive_rosen: k [0.5]; coordinates (t, z, x, y), u = (t - z)/sqrt 2
    """
    p = dict(params or {})
    if name == "minkowski":
        n = int(p.get("n", 4))
        if n < 2:
            raise ValueError("n must be >= 2")
        g = minkowski_metric(n)

        def tau(pp, qq):
            d = np.asarray(qq, float) - np.asarray(pp, float)
            v = -(d @ g(pp) @ d)
            return math.sqrt(v) if v > 0 and d[0] > 0 else 0.0

        return SpacetimeModel(
            name, n, g, {"n": n},
            known={"ricci": _zero_ricci(n), "tau": tau, "slice_mean_curvature": lambda t0: 0.0},
            provenance={"ricci": "flat: constant coefficients", "tau": "flat: straight segments maximize",
                        "slice_mean_curvature": "flat: t=const totally geodesic"},
        )

    if name == "grw_smooth":
        n = int(p.get("n", 4))
        prof = p.get("profile", "cosh")
        if prof == "cosh":
            a, ad, add = np.cosh, np.sinh, np.cosh
            dom = None
        elif prof == "exp":
            a, ad, add = np.exp, np.exp, np.exp
            dom = None
        elif prof == "linear":
            m = float(p.get("m", 0.5))
            if m <= 0:
                raise ValueError("linear profile needs m > 0")
            a = lambda t: 1.0 - m * t
            ad = lambda t: -m + 0.0 * t
            add = lambda t: 0.0 * t
            dom = (-math.inf, 1.0 / m - 1e-9)
        else:
            raise ValueError(f"unknown grw_smooth profile {prof!r}")
        g = grw_metric(n, a, ad, name=f"grw_smooth[{prof}]", domain_t=dom)
        return SpacetimeModel(
            name, n, g, {"n": n, "profile": prof, **({"m": p.get("m", 0.5)} if prof == "linear" else {})},
            known={
                "ricci": grw_ricci(n, a, ad, add),
                "scale_factor": (a, ad, add),
                "slice_mean_curvature": lambda t0: (n - 1) * float(ad(t0)) / float(a(t0)),
                "christoffel_t_xx": lambda t: a(t) * ad(t),
                "christoffel_x_tx": lambda t: ad(t) / a(t),
            },
            provenance={"ricci": f"{_SYMBOLIC}.warped_product_ricci",
                        "slice_mean_curvature": f"{_SYMBOLIC}.warped_product_slice_mean_curvature",
                        "christoffel_t_xx": f"{_SYMBOLIC}.warped_product_christoffel",
                        "christoffel_x_tx": f"{_SYMBOLIC}.warped_product_christoffel"},
        )

    if name == "grw_eds_collapse":
        n = int(p.get("n", 4))
        ts = float(p.get("t_s", 1.0))
        if ts <= 0:
            raise ValueError("t_s must be positive")
        a = lambda t: (ts - t) ** (2.0 / 3.0)
        ad = lambda t: -(2.0 / 3.0) * (ts - t) ** (-1.0 / 3.0)
        add = lambda t: -(2.0 / 9.0) * (ts - t) ** (-4.0 / 3.0)
        g = grw_metric(n, a, ad, name="grw_eds_collapse", domain_t=(-math.inf, ts))
        return SpacetimeModel(
            name, n, g, {"n": n, "t_s": ts},
            known={
                "ricci": grw_ricci(n, a, ad, add),
                "scale_factor": (a, ad, add),
                "ricci_tt": lambda t: (2.0 / 3.0) * (ts - t) ** -2 * (n - 1) / 3.0,
                "slice_mean_curvature": lambda t0: -(2.0 / 3.0) * (n - 1) / (ts - t0),
                "singularity_time": ts,
                "tau_sigma": lambda t0, p_: float(p_[0]) - t0,
            },
            provenance={"ricci": f"{_SYMBOLIC}.warped_product_ricci",
                        "ricci_tt": f"{_SYMBOLIC}.warped_product_ricci",
                        "slice_mean_curvature": f"{_SYMBOLIC}.warped_product_slice_mean_curvature",
                        "singularity_time": "a(t_s) = 0",
                        "tau_sigma": "comoving normals maximize (warped product)"},
        )

    if name == "grw_two_slope":
        n = int(p.get("n", 4))
        m1 = float(p.get("m1", 0.5))
        m2 = float(p.get("m2", 1.0))
        if not (0 < m1 <= m2):
            raise ValueError(f"grw_two_slope needs 0 < m1 <= m2, got m1={m1}, m2={m2}")
        if "t0" in p and float(p["t0"]) >= 0:
            raise ValueError("grw_two_slope slice t0 must be negative")
        ts = 1.0 / m2

        def a(t):
            t = np.asarray(t, dtype=float)
            return np.where(t <= 0, 1.0 - m1 * t, 1.0 - m2 * t)

        def ad(t):
            t = np.asarray(t, dtype=float)
            return np.where(t <= 0, -m1, -m2) + 0.0 * t

        add = lambda t: 0.0 * np.asarray(t, dtype=float)
        g = grw_metric(n, a, ad, name=f"grw_two_slope[{m1},{m2}]", domain_t=(-math.inf, ts),
                       lipschitz=2.0 * m2 * (1.0 + m1))
        left = grw_metric(n, lambda t: 1.0 - m1 * t, lambda t: -m1 + 0.0 * t, name="two_slope_left",
                          domain_t=(-math.inf, 1.0 / m1 - 1e-9))
        right = grw_metric(n, lambda t: 1.0 - m2 * t, lambda t: -m2 + 0.0 * t, name="two_slope_right",
                           domain_t=(-math.inf, ts))
        jump = m2 - m1

        def delta_coeff(x):
            C = np.zeros((n, n))
            C[0, 0] = (n - 1) * jump  # -(n-1)[adot]/a(0)
            for i in range(1, n):
                C[i, i] = -jump  # a(0)[adot]
            return C

        layer = DeltaLayer((1.0,) + (0.0,) * (n - 1), 0.0, delta_coeff, provenance=f"{_SYMBOLIC}.warped_product_jump")
        known = {
            "ricci": grw_ricci(n, a, ad, add),
            "scale_factor": (a, ad, add),
            "delta_tt": (n - 1) * jump,
            "singularity_time": ts,
            "slice_mean_curvature": lambda t0: float((n - 1) * ad(t0) / a(t0)),
            "tau_sigma": lambda t0, p_: float(p_[0]) - t0,
        }
        prov = {"ricci": f"{_SYMBOLIC}.warped_product_ricci",
                "delta_tt": f"{_SYMBOLIC}.warped_product_jump",
                "singularity_time": "a(1/m2) = 0",
                "slice_mean_curvature": f"{_SYMBOLIC}.warped_product_slice_mean_curvature",
                "tau_sigma": "comoving normals maximize (warped product)"}
        if "t0" in p:
            known["t0"] = float(p["t0"])
            prov["t0"] = "parameter"
        return SpacetimeModel(
            name, n, g, {"n": n, "m1": m1, "m2": m2, **({"t0": float(p["t0"])} if "t0" in p else {})},
            known=known, provenance=prov,
            pieces=((left, lambda x: np.asarray(x)[..., 0] <= 0), (right, lambda x: np.asarray(x)[..., 0] > 0)),
            kinks=(layer,),
        )

    if name == "pp_impulsive_rosen":
        k = float(p.get("k", 0.5))
        if k <= 0:
            raise ValueError("k must be positive")
        n = 4
        s2 = math.sqrt(2.0)

        def parts(x):
            u = (x[..., 0] - x[..., 1]) / s2
            up = np.maximum(u, 0.0)
            th = (u > 0).astype(float)
            return u, 1.0 + k * up, 1.0 - k * up, k * th, -k * th

        def func(x):
            _, F, G, _, _ = parts(x)
            out = np.zeros(x.shape[:-1] + (n, n))
            out[..., 0, 0] = -1.0
            out[..., 1, 1] = 1.0
            out[..., 2, 2] = F ** 2
            out[..., 3, 3] = G ** 2
            return out

        def dfunc(x):
            _, F, G, dF, dG = parts(x)
            out = np.zeros(x.shape[:-1] + (n, n, n))
            # d/dt = d/du / sqrt2, d/dz = -d/du / sqrt2
            for kk, sgn in ((0, 1.0), (1, -1.0)):
                out[..., kk, 2, 2] = sgn * 2 * F * dF / s2
                out[..., kk, 3, 3] = sgn * 2 * G * dG / s2
            return out

        g = MetricField(n, func, dfunc, name=f"pp_impulsive_rosen[{k}]", domain=(None,) * n, lipschitz=2 * k)
        layer = DeltaLayer((1 / s2, -1 / s2, 0.0, 0.0), 0.0, lambda x: np.zeros((n, n)),
                           provenance=f"{_SYMBOLIC}.rosen_wave_ricci")
        return SpacetimeModel(
            name, n, g, {"k": k},
            known={"ricci": _zero_ricci(n), "valid_u_max": 1.0 / k},
            provenance={"ricci": f"{_SYMBOLIC}.rosen_wave_ricci", "valid_u_max": "G = 1 - k u > 0"},
            kinks=(layer,),
        )

    raise ValueError(f"unknown model {name!r}; choose from {', '.join(CATALOG)}")
