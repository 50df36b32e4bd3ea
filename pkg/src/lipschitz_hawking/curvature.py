"""Finite-difference curvature, timelike Ricci scans and slab mean curvature.

Christoffel symbols and Ricci tensors are computed on lattices from sampled
metric components.  Reduced grids (``axes`` a strict subset of the chart
coordinates) are supported: derivatives along the missing coordinates vanish.

Slab mean curvature follows the flow-out construction: a spacelike graph
``Sigma = {t = phi(y)}`` is pushed along a smooth timelike field ``X`` and every
leaf carries the pushed-forward coordinate frame ``X_i = d Phi / d y^i``.  The
mean curvature of a leaf point is ``-G^{ij} g(nabla_{X_i} X_j, N)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import STENCIL_WIDTH, Grid, SampledField, fd_partial
from .metric import MetricField, christoffel_from, inverse_cofactor, orthonormal_frame, _sphere_dirs
from .mollify import chart_points, convolve


@dataclass(frozen=True)
class CurvatureBundle:
    """Lattice Christoffel symbols and Ricci tensor of a metric.

    ``gamma.values[..., i, j, k]`` is ``Gamma^i_{jk}``; ``valid`` indexes the part
    of the lattice at least two stencil widths from the boundary.
    """

    grid: Grid
    axes: tuple[int, ...]
    dim: int
    metric_values: np.ndarray
    gamma: SampledField
    ricci: SampledField | None
    valid: tuple[slice, ...]
    valid_grid: Grid
    scheme: str
    name: str = ""

    def valid_points(self) -> np.ndarray:
        return chart_points(self.valid_grid, self.dim, self.axes)


def _metric_samples(g: MetricField, grid: Grid | None, axes, base):
    if grid is None:
        if g.source is None:
            raise ValueError("analytic metric needs an explicit grid")
        return g.source.grid, tuple(g.axes), np.asarray(g.source.values, dtype=float)
    axes = tuple(range(grid.dim)) if axes is None else tuple(axes)
    vals = g(chart_points(grid, g.dim, axes, base))
    return grid, axes, 0.5 * (vals + np.swapaxes(vals, -1, -2))


def _lattice_gradient(fld: SampledField, dim: int, axes, scheme: str) -> np.ndarray:
    """``d[..., k, <components>]`` for every chart axis ``k``; zero off the grid axes."""
    v = fld.values
    gshape = fld.grid.resolution
    out = np.zeros(gshape + (dim,) + v.shape[len(gshape):])
    for a, ax in enumerate(axes):
        out[(Ellipsis, ax) + (slice(None),) * (v.ndim - len(gshape))] = fd_partial(fld, a, scheme).values
    return out


def christoffel(g: MetricField, grid: Grid | None = None, axes=None, scheme: str = "central2",
                base=None) -> CurvatureBundle:
    """Christoffel symbols on a lattice from finite differences of the sampled metric.

    Without ``grid`` a sampled metric is differentiated on its own lattice (exact
    sample values, no interpolation).
    """
    grid, axes, gv = _metric_samples(g, grid, axes, base)
    n = g.dim
    fld = SampledField(grid, gv, (0, 2), True)
    dg = _lattice_gradient(fld, n, axes, scheme)
    try:
        gam = christoffel_from(gv, dg)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"{g.name}: inverse failed while forming Christoffel symbols ({exc})")
    cells = 2 * STENCIL_WIDTH[scheme]
    vgrid, vsl = grid.shrink(cells)
    return CurvatureBundle(grid, axes, n, gv, SampledField(grid, gam, (1, 2), False), None, vsl, vgrid, scheme,
                           g.name)


def ricci_from_gamma(gam: SampledField, dim: int, axes, scheme: str = "central2") -> np.ndarray:
    """``Ric_jk = d_i G^i_jk - d_j G^i_ik + G^i_ip G^p_jk - G^i_jp G^p_ik`` on the lattice."""
    G = gam.values
    dG = _lattice_gradient(gam, dim, axes, scheme)  # dG[..., l, i, j, k] = d_l Gamma^i_jk
    term1 = np.einsum("...iijk->...jk", dG)
    trace = np.einsum("...iik->...k", G)  # Gamma^i_ik
    dtrace = np.einsum("...jiik->...jk", dG)  # d_j Gamma^i_ik
    term3 = np.einsum("...p,...pjk->...jk", trace, G)
    term4 = np.einsum("...ijp,...pik->...jk", G, G)
    return term1 - dtrace + term3 - term4


def ricci(g: MetricField, grid: Grid | None = None, axes=None, scheme: str = "central2", base=None) -> CurvatureBundle:
    """Christoffel symbols and Ricci tensor; the valid region loses two stencil widths."""
    b = christoffel(g, grid, axes, scheme, base)
    ric = ricci_from_gamma(b.gamma, b.dim, b.axes, scheme)
    return CurvatureBundle(b.grid, b.axes, b.dim, b.metric_values, b.gamma,
                           SampledField(b.grid, ric, (0, 2), False), b.valid, b.valid_grid, scheme, b.name)


def ricci_error(bundle: CurvatureBundle, exact: Callable[[np.ndarray], np.ndarray], region=None) -> float:
    """Sup-norm of ``Ric_FD - Ric_exact`` on the valid lattice (optionally a coordinate sub-box)."""
    pts = chart_points(bundle.grid, bundle.dim, bundle.axes)[bundle.valid]
    diff = bundle.ricci.values[bundle.valid] - exact(pts)
    if region is not None:
        mask = np.ones(pts.shape[:-1], dtype=bool)
        for a, ax in enumerate(bundle.axes):
            lo, hi = region[a]
            mask &= (pts[..., ax] >= lo) & (pts[..., ax] <= hi)
        diff = diff[mask]
    return float(np.max(np.abs(diff)))


# --- timelike Ricci scans --------------------------------------------------------

def timelike_min_pointwise(ric: np.ndarray, gmat: np.ndarray, future: np.ndarray, D: float = 5.0,
                           n_psi: int = 33, n_dirs: int = 24, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-point minimum of ``Ric(X,X)`` over g-unit future timelike ``X`` with ``|X|_eucl <= D``.

    Candidates: a rapidity grid times stratified spatial directions (principal
    axes of the spatial block, the mixed direction, random ones), plus the
    timelike generalised eigenvectors of ``(Ric, g)``.  Returns the minima and the
    minimising vectors.
    """
    ric = ric.reshape(-1, ric.shape[-2], ric.shape[-1])
    gmat = gmat.reshape(ric.shape)
    future = future.reshape(-1, ric.shape[-1])
    P, n = ric.shape[0], ric.shape[-1]
    rs = 0.5 * (ric + np.swapaxes(ric, -1, -2))
    E = orthonormal_frame(gmat, future)  # E[p, a, :]
    R = E @ rs @ np.swapaxes(E, -1, -2)  # frame components R_ab
    rng = np.random.default_rng(seed)
    k = n - 1
    dirs = [np.broadcast_to(np.eye(k), (P, k, k)), -np.broadcast_to(np.eye(k), (P, k, k))]
    if k > 1:
        _, vecs = np.linalg.eigh(R[:, 1:, 1:])
        dirs += [np.swapaxes(vecs, -1, -2), -np.swapaxes(vecs, -1, -2)]
    mixed = R[:, 0, 1:]
    nm = np.linalg.norm(mixed, axis=-1, keepdims=True)
    mixed = np.where(nm > 0, mixed / np.where(nm > 0, nm, 1.0), np.eye(k)[0])
    dirs += [mixed[:, None, :], -mixed[:, None, :]]
    dirs.append(_sphere_dirs(k, (P, n_dirs), rng))
    U = np.concatenate(dirs, axis=1)  # (P, m, k)
    psi = np.linspace(0.0, 4.0, n_psi)
    c, s = np.cosh(psi), np.sinh(psi)
    Y = np.concatenate([np.broadcast_to(c[None, :, None, None], (P, n_psi, U.shape[1], 1)),
                        s[None, :, None, None] * U[:, None, :, :]], axis=-1).reshape(P, -1, n)
    X = Y @ E  # coordinates
    # generalised eigenvectors Ric v = mu g v
    w, V = np.linalg.eig(np.linalg.solve(gmat, rs))
    V = np.real(np.swapaxes(V, -1, -2))
    q = np.sum((V @ gmat) * V, axis=-1)
    tl = q < -1e-12
    scale = np.where(tl, 1.0 / np.sqrt(np.where(tl, -q, 1.0)), 0.0)
    V = V * scale[..., None]
    orient = np.sign(np.sum((V @ gmat) * future[:, None, :], axis=-1))
    V = -orient[..., None] * V  # future: g(V, T) < 0
    X = np.concatenate([X, V], axis=1)
    valid = np.concatenate([np.ones(Y.shape[:2], dtype=bool), tl], axis=1)
    valid &= np.linalg.norm(X, axis=-1) <= D
    vals = np.sum((X @ rs) * X, axis=-1)
    vals = np.where(valid, vals, np.inf)
    j = np.argmin(vals, axis=1)
    best = vals[np.arange(P), j]
    return best, X[np.arange(P), j]


def ricci_timelike_min(bundle: CurvatureBundle, g: MetricField | None = None, region=None, D: float = 5.0,
                       seed: int = 0) -> float:
    """Minimum of ``Ric(X,X)`` over audited unit timelike ``X`` (``|X| <= D``) on a lattice region.

    ``region`` is a coordinate box over the bundle's grid axes; it is intersected
    with the valid lattice.  The metric samples stored in the bundle are used for
    the unit normalisation; ``g`` only supplies the time orientation.
    """
    if bundle.ricci is None:
        raise ValueError("bundle has no Ricci part")
    pts = chart_points(bundle.grid, bundle.dim, bundle.axes)[bundle.valid]
    mask = np.ones(pts.shape[:-1], dtype=bool)
    if region is not None:
        for a, ax in enumerate(bundle.axes):
            lo, hi = region[a]
            mask &= (pts[..., ax] >= lo - 1e-12) & (pts[..., ax] <= hi + 1e-12)
    if not mask.any():
        raise ValueError("empty region for timelike Ricci scan")
    ric = bundle.ricci.values[bundle.valid][mask]
    gm = bundle.metric_values[bundle.valid][mask]
    sel = pts[mask]
    if g is not None:
        fut = g.future(sel)
    else:
        fut = np.zeros(sel.shape)
        fut[..., 0] = 1.0
    best, _ = timelike_min_pointwise(ric, gm, fut, D=D, seed=seed)
    return float(np.min(best))


# --- hypersurfaces and slabs ------------------------------------------------------

@dataclass(frozen=True)
class Hypersurface:
    """Spacelike graph ``t = phi(y)`` over the spatial chart coordinates ``y``."""

    dim: int
    phi: Callable[[np.ndarray], np.ndarray]
    dphi: Callable[[np.ndarray], np.ndarray]
    box: tuple[tuple[float, float], ...]
    name: str = "sigma"

    @classmethod
    def level(cls, t0: float, dim: int, box=None) -> "Hypersurface":
        box = tuple(box) if box is not None else ((-1.0, 1.0),) * (dim - 1)
        return cls(dim, lambda y: np.full(np.shape(y)[:-1], float(t0)),
                   lambda y: np.zeros(np.shape(y)), tuple(tuple(map(float, b)) for b in box), f"t={t0:g}")

    def is_level(self, probe: int = 5) -> bool:
        y = np.stack(np.meshgrid(*[np.linspace(lo, hi, probe) for lo, hi in self.box], indexing="ij"),
                     axis=-1).reshape(-1, self.dim - 1)
        return bool(np.all(self.dphi(y) == 0.0))

    def point(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return np.concatenate([np.asarray(self.phi(y))[..., None], y], axis=-1)

    def grid_points(self, per_axis: int) -> np.ndarray:
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in self.box]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim - 1)

    def tangent_frame(self, y) -> np.ndarray:
        """Coordinate frame ``d/dy^i`` of the graph, shape ``(..., n-1, n)``."""
        y = np.asarray(y, dtype=float)
        dp = self.dphi(y)
        k = self.dim - 1
        F = np.zeros(y.shape[:-1] + (k, self.dim))
        F[..., :, 0] = dp
        F[..., :, 1:] = np.eye(k)
        return F

    def unit_normal(self, g: MetricField, y) -> np.ndarray:
        x = self.point(y)
        return _unit_normal(g(x), self.tangent_frame(y), g.future(x))


def _unit_normal(gm: np.ndarray, frame: np.ndarray, future: np.ndarray) -> np.ndarray:
    """Future unit normal to the span of ``frame`` (rows), batched."""
    _, _, vt = np.linalg.svd(frame)
    omega = vt[..., -1, :]  # annihilates every frame vector
    N = np.linalg.solve(gm, omega[..., None])[..., 0]
    q = np.sum((N[..., None, :] @ gm)[..., 0, :] * N, axis=-1)
    if np.any(q >= 0):
        raise ValueError("leaf is not spacelike: normal is not timelike")
    N = N / np.sqrt(-q)[..., None]
    s = np.sum((N[..., None, :] @ gm)[..., 0, :] * future, axis=-1)
    return np.where((s > 0)[..., None], -N, N)


def constant_field(v) -> Callable[[np.ndarray], np.ndarray]:
    v = np.asarray(v, dtype=float)
    return lambda x: np.broadcast_to(v, np.shape(x)).copy()


def _rk4_flow(X, x0: np.ndarray, s: np.ndarray, steps: int) -> np.ndarray:
    """Integrate ``dx/ds = X(x)`` from ``x0`` up to parameter ``s`` (per point) with fixed RK4 steps."""
    x = np.array(x0, dtype=float)
    h = (np.asarray(s, dtype=float) / steps)[..., None]
    for _ in range(steps):
        k1 = X(x)
        k2 = X(x + 0.5 * h * k1)
        k3 = X(x + 0.5 * h * k2)
        k4 = X(x + h * k3)
        x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
    return x


def flow_geometry(X, sigma: Hypersurface, s: np.ndarray, y: np.ndarray, steps_per_unit: int = 200,
                  hy: float = 1e-3) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Position, pushed frame and second derivatives of the flow-out ``Phi(s, y)``.

    ``s`` has shape ``(P,)`` and ``y`` shape ``(P, n-1)``.  Returns ``pos (P, n)``,
    ``frame (P, n-1, n)`` with ``frame[:, i] = d_i Phi`` and ``hess (P, n-1, n-1, n)``;
    derivatives are central differences in ``y`` of step ``hy``.
    """
    s = np.asarray(s, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(s.size, -1)
    P, k = y.shape
    offs = [np.zeros(k)]
    eye = np.eye(k)
    for i in range(k):
        offs += [eye[i], -eye[i]]
    for i in range(k):
        for j in range(i + 1, k):
            offs += [eye[i] + eye[j], eye[i] - eye[j], -eye[i] + eye[j], -eye[i] - eye[j]]
    offs = np.array(offs) * hy  # (S, k)
    S = offs.shape[0]
    yy = (y[:, None, :] + offs[None]).reshape(-1, k)
    ss = np.repeat(s, S)
    steps = max(8, int(math.ceil(float(np.max(np.abs(s))) * steps_per_unit))) if s.size else 8
    phi = sigma.point(yy)
    pos_all = _rk4_flow(X, phi, ss, steps).reshape(P, S, -1)
    n = pos_all.shape[-1]
    base = pos_all[:, 0]
    frame = np.empty((P, k, n))
    hess = np.empty((P, k, k, n))
    for i in range(k):
        fp, fm = pos_all[:, 1 + 2 * i], pos_all[:, 2 + 2 * i]
        frame[:, i] = (fp - fm) / (2 * hy)
        hess[:, i, i] = (fp - 2 * base + fm) / hy ** 2
    c = 1 + 2 * k
    for i in range(k):
        for j in range(i + 1, k):
            pp, pm, mp, mm = (pos_all[:, c + q] for q in range(4))
            hess[:, i, j] = hess[:, j, i] = (pp - pm - mp + mm) / (4 * hy ** 2)
            c += 4
    return base, frame, hess


def invert_flow(X, sigma: Hypersurface, points: np.ndarray, steps_per_unit: int = 200, tol: float = 1e-12,
                max_iter: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Newton inversion of ``Phi(s, y) = p``; returns ``(s, y)`` per point."""
    p = np.asarray(points, dtype=float).reshape(-1, sigma.dim)
    y = p[:, 1:].copy()
    s = p[:, 0] - sigma.phi(y)
    h = 1e-6
    for _ in range(max_iter):
        pos, frame, _ = flow_geometry(X, sigma, s, y, steps_per_unit, hy=h)
        r = pos - p
        if np.max(np.abs(r)) < tol:
            break
        ds = (_rk4_flow(X, pos, np.full(s.shape, h), 1) - pos) / h  # d Phi / ds = X(Phi)
        J = np.concatenate([ds[:, :, None], np.swapaxes(frame, -1, -2)], axis=-1)  # columns: d/ds, d/dy_i
        step = np.linalg.solve(J, -r[..., None])[..., 0]
        s = s + step[:, 0]
        y = y + step[:, 1:]
    return s, y


def mean_curvature_from(gm: np.ndarray, gam: np.ndarray, frame: np.ndarray, hess: np.ndarray,
                        N: np.ndarray) -> np.ndarray:
    """``-G^{ij} g(nabla_{X_i} X_j, N)`` from pointwise data."""
    G = frame @ gm @ np.swapaxes(frame, -1, -2)
    np.linalg.cholesky(G)  # admissibility: leaves Riemannian
    cov = hess + np.einsum("...ajk,...ij,...lk->...ila", gam, frame, frame)  # nabla_{X_i} X_l
    gN = np.einsum("...ab,...b->...a", gm, N)
    proj = np.einsum("...ila,...a->...il", cov, gN)
    return -np.einsum("...il,...il->...", np.linalg.inv(G), proj)


@dataclass
class SlabData:
    """Flow-out of ``sigma`` along ``X`` sampled on leaves ``s`` and base points ``y``."""

    sigma: Hypersurface
    flow_field: Callable
    halfwidth: float
    leaves: np.ndarray  # (L,)
    base_points: np.ndarray  # (B, n-1)
    positions: np.ndarray  # (L, B, n)
    frame: np.ndarray  # (L, B, n-1, n)
    hess: np.ndarray  # (L, B, n-1, n-1, n)
    normal: np.ndarray | None = None
    induced: np.ndarray | None = None
    metric_name: str = ""

    def scaled(self, c: float) -> "SlabData":
        """Same slab with the tangent frame multiplied by ``c``."""
        return SlabData(self.sigma, self.flow_field, self.halfwidth, self.leaves, self.base_points,
                        self.positions, c * self.frame, c * self.hess, self.normal,
                        None if self.induced is None else c * c * self.induced, self.metric_name)


def build_slab(g: MetricField, sigma: Hypersurface, X=None, halfwidth: float = 0.1, n_leaves: int = 9,
               per_axis: int = 3, steps_per_unit: int = 200, audit: bool = True) -> SlabData:
    """Flow ``sigma`` along ``X`` (default ``d/dt``) and audit the leaf invariants under ``g``."""
    n = sigma.dim
    if X is None:
        X = constant_field(np.eye(n)[0])
    leaves = np.linspace(-halfwidth, halfwidth, n_leaves)
    yb = sigma.grid_points(per_axis)
    L, B = leaves.size, yb.shape[0]
    pos, frame, hess = flow_geometry(X, sigma, np.repeat(leaves, B), np.tile(yb, (L, 1)), steps_per_unit)
    pos = pos.reshape(L, B, n)
    frame = frame.reshape(L, B, n - 1, n)
    hess = hess.reshape(L, B, n - 1, n - 1, n)
    slab = SlabData(sigma, X, halfwidth, leaves, yb, pos, frame, hess, metric_name=g.name)
    gm = g(pos)
    G = frame @ gm @ np.swapaxes(frame, -1, -2)
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise ValueError(f"inadmissible slab: induced metric not Riemannian under {g.name}")
    N = _unit_normal(gm, frame, g.future(pos))
    slab.normal, slab.induced = N, G
    if audit:
        nn = np.einsum("...a,...ab,...b->...", N, gm, N)
        nx = np.einsum("...a,...ab,...ib->...i", N, gm, frame)
        if np.max(np.abs(nn + 1)) > 1e-8 or np.max(np.abs(nx)) > 1e-8:
            raise ValueError("slab normal audit failed")
    return slab


def _kink_mask(points: np.ndarray, kinks, tol: float) -> np.ndarray:
    bad = np.zeros(points.shape[:-1], dtype=bool)
    for layer in kinks:
        bad |= np.abs(layer.signed_distance(points)) < tol
    return bad


def slab_mean_curvature(g: MetricField, slab: SlabData, kinks=(), kink_tol: float = 1e-6) -> np.ndarray:
    """Mean curvature at every slab point, shape ``(L, B)``; NaN where a point sits on a kink."""
    pos = slab.positions
    gm = g(pos)
    gam = g.christoffel_at(pos)
    N = _unit_normal(gm, slab.frame, g.future(pos))
    try:
        H = mean_curvature_from(gm, gam, slab.frame, slab.hess, N)
    except np.linalg.LinAlgError:
        raise ValueError("inadmissible slab: induced metric not Riemannian")
    if kinks:
        H = np.where(_kink_mask(pos, kinks, kink_tol), np.nan, H)
    return H


def mean_curvature_at_points(g: MetricField, sigma: Hypersurface, X, points: np.ndarray, kinks=(),
                             kink_tol: float = 1e-6, steps_per_unit: int = 200) -> np.ndarray:
    """``H^X[g]`` at spacetime points inside the flow-out (located by Newton inversion)."""
    pts = np.asarray(points, dtype=float).reshape(-1, sigma.dim)
    s, y = invert_flow(X, sigma, pts, steps_per_unit)
    pos, frame, hess = flow_geometry(X, sigma, s, y, steps_per_unit)
    gm = g(pos)
    N = _unit_normal(gm, frame, g.future(pos))
    H = mean_curvature_from(gm, g.christoffel_at(pos), frame, hess, N)
    if kinks:
        H = np.where(_kink_mask(pos, kinks, kink_tol), np.nan, H)
    return H


def esssup(H: np.ndarray) -> float:
    """Supremum ignoring the excluded (NaN) null set."""
    if np.all(np.isnan(H)):
        raise ValueError("no admissible points left after kink exclusion")
    return float(np.nanmax(H))


@dataclass
class MeanBoundReport:
    b: float
    passed: bool
    esssup: list  # per flow field, on the smallest slab
    halfwidths: tuple
    discrepancy: list  # sup |H^X - H^Y| per halfwidth (max over field pairs)
    table: list = field(default_factory=list)  # (field index, halfwidth, esssup)


def mean_bound_check(g: MetricField, sigma: Hypersurface, b: float, flow_fields: Sequence,
                     halfwidths: Sequence[float] = (0.2, 0.1, 0.05), kinks=(), n_leaves: int = 9,
                     per_axis: int = 3) -> MeanBoundReport:
    """Slab mean-curvature bound ``H^X < b`` for several flow fields, with cross-field discrepancies.

    The verdict uses the thinnest slab.  Discrepancies compare ``H^X`` and
    ``H^Y`` at the same spacetime points of the ``X``-slab.
    """
    if len(flow_fields) < 2:
        raise ValueError("mean_bound_check needs at least two flow fields")
    hws = tuple(sorted((float(h) for h in halfwidths), reverse=True))
    table, disc = [], []
    for hw in hws:
        Hs = []
        for i, X in enumerate(flow_fields):
            slab = build_slab(g, sigma, X, hw, n_leaves, per_axis)
            H = slab_mean_curvature(g, slab, kinks)
            table.append((i, hw, esssup(H)))
            Hs.append((slab, H))
        worst = 0.0
        slab0, H0 = Hs[0]
        pts = slab0.positions.reshape(-1, sigma.dim)
        for Y in flow_fields[1:]:
            HY = mean_curvature_at_points(g, sigma, Y, pts, kinks)
            d = np.abs(H0.reshape(-1) - HY)
            if np.any(~np.isnan(d)):
                worst = max(worst, float(np.nanmax(d)))
        disc.append(worst)
    last = [v for (i, hw, v) in table if hw == hws[-1]]
    return MeanBoundReport(float(b), all(v < b for v in last), last, hws, disc, table)


@dataclass
class ConvergenceReport:
    epsilons: list
    sup_diff: list
    sigma_mean_curvature: list  # H of the inner approximant on sigma, per entry
    decreasing: bool
    final_ratio: float
    passed: bool
    consequence: bool | None = None


def mean_curvature_convergence(g: MetricField, family, sigma: Hypersurface, X=None, halfwidth: float = 0.1,
                               b: float | None = None, kinks=(), base=None) -> ConvergenceReport:
    """Sup-norm of ``H^X[check g_k] - H^X[g] * rho_k`` on a sub-slab around ``sigma``, per schedule entry.

    ``H^X[g]`` is evaluated at lattice points of the family grid covering the
    slab plus one kernel radius and mollified with the family's discrete kernel.
    """
    n = sigma.dim
    if X is None:
        X = constant_field(np.eye(n)[0])
    grid: Grid = family.grid
    axes = family.axes
    y0 = np.zeros(n - 1) if base is None else np.asarray(base, dtype=float)[1:]
    t_mid = float(sigma.phi(y0[None])[0])
    basept = np.concatenate([[0.0], y0])
    eps_list, diffs, hsig = [], [], []
    for k, eps in enumerate(family.schedule):
        ker = family.kernels[k]
        box = []
        for a, ax in enumerate(axes):
            if ax == 0:
                box.append((t_mid - halfwidth - eps - 2 * ker.spacing[a], t_mid + halfwidth + eps + 2 * ker.spacing[a]))
            else:
                c = basept[ax]
                box.append((c - eps - 2 * ker.spacing[a], c + eps + 2 * ker.spacing[a]))
        sl = grid.box_slices(box)
        sub = grid.subgrid([s.start for s in sl], [s.stop for s in sl])
        pts = chart_points(sub, n, axes, basept)
        Hg = mean_curvature_at_points(g, sigma, X, pts.reshape(-1, n), kinks).reshape(sub.resolution)
        # points exactly on a kink are a null set; fill them from neighbours for the convolution
        if np.any(np.isnan(Hg)):
            flat = Hg.reshape(-1)
            good = np.flatnonzero(~np.isnan(flat))
            for q in np.flatnonzero(np.isnan(flat)):
                flat[q] = flat[good[np.argmin(np.abs(good - q))]]
            Hg = flat.reshape(sub.resolution)
        Hm = convolve(SampledField(sub, Hg), ker)
        mpts = chart_points(Hm.grid, n, axes, basept).reshape(-1, n)
        keep = np.abs(mpts[:, 0] - t_mid) <= halfwidth + 1e-12
        Hk = mean_curvature_at_points(family.inner[k], sigma, X, mpts[keep])
        diffs.append(float(np.max(np.abs(Hk - Hm.values.reshape(-1)[keep]))))
        hsig.append(float(mean_curvature_at_points(family.inner[k], sigma, X, sigma.point(y0[None]))[0]))
        eps_list.append(float(eps))
    dec = all(b2 <= b1 * (1 + 1e-6) for b1, b2 in zip(diffs, diffs[1:]))
    ratio = diffs[-1] / diffs[0] if diffs[0] > 0 else 0.0
    cons = None if b is None else all(h < b for h in hsig[-2:])
    noise = 1e-8
    passed = (dec and ratio <= 0.1) or max(diffs) <= noise
    return ConvergenceReport(eps_list, diffs, hsig, dec, ratio, passed and (cons is not False), cons)
