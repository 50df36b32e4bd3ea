"""Mollifier kernels, grid convolution and regularised metric families.

Kernels are radial profiles on the unit ball of the *ambient* chart dimension
``n``.  When a field lives on a reduced grid of dimension ``d < n`` (it does not
depend on the remaining ``n - d`` coordinates) convolution with the
``n``-dimensional kernel equals convolution with its marginal on ``R^d``; the
discretised stencil is built from that marginal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate as _quad
from scipy import ndimage

from .grid import Grid, SampledField
from .metric import (
    DomainError,
    MetricField,
    NestingReport,
    SignatureError,
    cones_narrower,
    lorentzian_ok,
)

PROFILES = ("standard_bump", "polynomial_bump")
DEFAULT_SCHEDULE = (0.2, 0.1, 0.05, 0.025, 0.0125)
RESOLVABILITY_CELLS = 4


def _profile(name: str):
    """Un-normalised radial profile ``rho(r)`` and ``d rho / dr`` on ``[0, 1)``."""
    if name == "standard_bump":
        def rho(r):
            r = np.asarray(r, dtype=float)
            out = np.zeros_like(r)
            inside = r < 1.0
            out[inside] = np.exp(1.0 / (r[inside] ** 2 - 1.0))
            return out

        def drho(r):
            r = np.asarray(r, dtype=float)
            out = np.zeros_like(r)
            inside = r < 1.0
            ri = r[inside]
            out[inside] = np.exp(1.0 / (ri ** 2 - 1.0)) * (-2.0 * ri / (ri ** 2 - 1.0) ** 2)
            return out
    elif name == "polynomial_bump":
        def rho(r):
            r = np.asarray(r, dtype=float)
            return np.where(r < 1.0, (1.0 - np.minimum(r, 1.0) ** 2) ** 3, 0.0)

        def drho(r):
            r = np.asarray(r, dtype=float)
            return np.where(r < 1.0, -6.0 * r * (1.0 - np.minimum(r, 1.0) ** 2) ** 2, 0.0)
    else:
        raise ValueError(f"unknown mollifier profile {name!r}; choose from {PROFILES}")
    return rho, drho


def _sphere_area(k: int) -> float:
    """Surface measure of the unit sphere S^{k-1} in R^k (k=1 gives 2)."""
    return 2.0 * math.pi ** (k / 2) / math.gamma(k / 2)


@lru_cache(maxsize=None)
def normalization(name: str, n: int) -> float:
    """Constant ``c`` with ``int_{R^n} c rho(|x|) dx = 1``."""
    rho, _ = _profile(name)
    val, _ = _quad.quad(lambda r: float(rho(np.array(r))) * r ** (n - 1), 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    return 1.0 / (_sphere_area(n) * val)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def marginal_profile(name: str, n: int, d: int):
    """Normalised density of the n-dimensional kernel marginalised onto R^d, as a function of ``|u|``."""
    if not 1 <= d <= n:
        raise ValueError("need 1 <= d <= n")
    rho, drho = _profile(name)
    c = normalization(name, n)
    if d == n:
        return (lambda r: c * rho(r)), (lambda r: c * drho(r))
    k = n - d
    area = _sphere_area(k)

    def dens(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r < 1.0
        ri = r[inside]
        L = np.sqrt(1.0 - ri ** 2)
        s = 0.5 * L[:, None] * (_GL_X[None, :] + 1.0)
        vals = rho(np.sqrt(ri[:, None] ** 2 + s ** 2)) * s ** (k - 1)
        out[inside] = c * area * 0.5 * L * (vals @ _GL_W)
        return out

    def ddens(r, step=1e-6):
        # radial profile is even in r, so the derivative vanishes at the origin
        r = np.asarray(r, dtype=float)
        return np.where(r > step, (dens(r + step) - dens(np.abs(r - step))) / (2 * step), 0.0)

    return dens, ddens


@dataclass(frozen=True)
class MollifierKernel:
    """Discretised ``rho_eps`` on a grid: stencil weights summing to one."""

    profile: str
    epsilon: float
    ambient_dim: int
    spacing: tuple[float, ...]
    halfwidth: tuple[int, ...]
    weights: np.ndarray
    offsets: np.ndarray  # coordinate offsets z, shape (*stencil, d)

    @property
    def dim(self) -> int:
        return len(self.spacing)

    def density(self, z: np.ndarray) -> np.ndarray:
        """Continuous ``rho_eps(z)`` (unit mass on R^d) for z of shape ``(..., d)``."""
        dens, _ = marginal_profile(self.profile, self.ambient_dim, self.dim)
        r = np.linalg.norm(np.atleast_1d(z).reshape(-1, self.dim), axis=-1) / self.epsilon
        return (dens(r) / self.epsilon ** self.dim).reshape(np.shape(z)[:-1])

    def density_grad(self, z: np.ndarray, axis: int) -> np.ndarray:
        """Continuous ``d rho_eps / d z^axis``."""
        _, ddens = marginal_profile(self.profile, self.ambient_dim, self.dim)
        z = np.atleast_1d(z).reshape(-1, self.dim)
        rn = np.linalg.norm(z, axis=-1)
        r = rn / self.epsilon
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(rn > 0, z[:, axis] / np.where(rn > 0, rn, 1.0), 0.0)
        return ddens(r) * unit / self.epsilon ** (self.dim + 1)

    def stencil_density(self) -> np.ndarray:
        """Discrete density ``w_z / cell volume`` on the stencil (the grid analogue of ``rho_eps``)."""
        return self.weights / float(np.prod(self.spacing))

    def second_moment(self, axis: int = 0) -> float:
        return float(np.sum(self.weights * self.offsets[..., axis] ** 2))

    def grad_l1(self) -> float:
        """``int |grad rho|`` of the unit-scale profile (scale invariant)."""
        dens, ddens = marginal_profile(self.profile, self.ambient_dim, self.dim)
        area = _sphere_area(self.dim)
        val, _ = _quad.quad(lambda r: abs(float(ddens(np.array(r)))) * r ** (self.dim - 1), 0.0, 1.0, limit=200)
        return area * val


def make_kernel(profile_name: str, epsilon: float, grid: Grid, ambient_dim: int | None = None) -> MollifierKernel:
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    hmax = max(grid.spacing)
    if epsilon < RESOLVABILITY_CELLS * hmax * (1 - 1e-12):
        raise ValueError(
            f"epsilon={epsilon} under-resolved: needs >= {RESOLVABILITY_CELLS} cells (h={hmax})"
        )
    n = ambient_dim or grid.dim
    dens, _ = marginal_profile(profile_name, n, grid.dim)
    half = tuple(int(math.floor(epsilon / h + 1e-9)) for h in grid.spacing)
    axes = [np.arange(-r, r + 1) * h for r, h in zip(half, grid.spacing)]
    offs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    r = np.linalg.norm(offs, axis=-1) / epsilon
    w = dens(r)
    w = w / np.sum(w)
    return MollifierKernel(profile_name, float(epsilon), n, grid.spacing, half, w, offs)


def convolve(field: SampledField, kernel: MollifierKernel) -> SampledField:
    """Component-wise ``f * rho_eps`` on the valid (shrunken) lattice.

    The result lives on the sub-grid whose points are at least one kernel
    half-width from the input boundary; asking it for values outside raises.
    """
    grid = field.grid
    if grid.spacing != kernel.spacing and not np.allclose(grid.spacing, kernel.spacing, rtol=1e-12):
        raise ValueError("kernel was discretised for a different grid spacing")
    sub, sl = grid.shrink(kernel.halfwidth)
    ncomp = field.values.ndim - grid.dim
    wk = kernel.weights.reshape(kernel.weights.shape + (1,) * ncomp)
    # symmetric kernel: convolution == correlation; mode is irrelevant on the kept region
    full = ndimage.correlate(np.asarray(field.values, dtype=float), wk, mode="nearest")
    out = np.ascontiguousarray(full[sl])
    meta = dict(field.meta)
    meta["valid_bounds"] = sub.bounds
    meta["epsilon"] = kernel.epsilon
    return SampledField(sub, out, field.rank, False, meta)


def chart_points(grid: Grid, dim: int, axes, base=None) -> np.ndarray:
    """Embed lattice points of a (possibly reduced) grid into ``dim``-dimensional chart coordinates."""
    pts = np.zeros(grid.resolution + (dim,))
    if base is not None:
        pts[...] = np.asarray(base, dtype=float)
    c = grid.coords()
    for a, ax in enumerate(axes):
        pts[..., ax] = c[..., a]
    return pts


def regularize_metric(g: MetricField, kernel: MollifierKernel, grid: Grid, axes=None) -> MetricField:
    """Sample ``g`` on ``grid`` (chart axes ``axes``), mollify, and verify Lorentzian signature."""
    axes = tuple(range(grid.dim)) if axes is None else tuple(axes)
    pts = chart_points(grid, g.dim, axes)
    vals = g(pts)
    sym = 0.5 * (vals + np.swapaxes(vals, -1, -2))
    smoothed = convolve(SampledField(grid, sym, (0, 2), True), kernel)
    ok = lorentzian_ok(smoothed.values)
    if not ok.all():
        bad = tuple(int(i) for i in np.argwhere(~ok)[0])
        raise SignatureError(f"mollified metric not Lorentzian at lattice index {bad}",
                             point=smoothed.grid.coord_of(bad))
    sampled = SampledField(smoothed.grid, 0.5 * (smoothed.values + np.swapaxes(smoothed.values, -1, -2)),
                           (0, 2), True, smoothed.meta)
    return MetricField.from_samples(sampled, g.dim, axes, name=f"{g.name}*rho[{kernel.epsilon:g}]",
                                    lipschitz=g.lipschitz, time_orientation=g.time_orientation)


def shifted_metric(g_eps: MetricField, lam: float, sign: float) -> MetricField:
    """``g_eps + sign * lam * dt (x) dt`` as a new sampled metric."""
    src = g_eps.source
    vals = src.values.copy()
    vals[..., 0, 0] += sign * lam
    fld = SampledField(src.grid, vals, (0, 2), True, dict(src.meta))
    tag = "inner" if sign > 0 else "outer"
    return MetricField.from_samples(fld, g_eps.dim, g_eps.axes, name=f"{g_eps.name}:{tag}[{lam:.3g}]",
                                    lipschitz=g_eps.lipschitz, time_orientation=g_eps.time_orientation)


def default_audit_points(g_eps: MetricField, n_random: int = 200, seed: int = 0,
                         max_lattice: int = 1500) -> np.ndarray:
    """Lattice points of the sampled metric (strided down to ``max_lattice``) plus random interior points."""
    src = g_eps.source
    lat = chart_points(src.grid, g_eps.dim, g_eps.axes).reshape(-1, g_eps.dim)
    if lat.shape[0] > max_lattice:
        lat = lat[:: int(math.ceil(lat.shape[0] / max_lattice))]
    rng = np.random.default_rng(seed)
    rnd = np.zeros((n_random, g_eps.dim))
    for a, ax in enumerate(g_eps.axes):
        lo, hi = src.grid.bounds[a]
        rnd[:, ax] = rng.uniform(lo, hi, n_random)
    return np.vstack([lat, rnd])


@dataclass
class ConeAdjustment:
    metric: MetricField
    lam: float
    lam_min: float
    report: NestingReport
    history: list = field(default_factory=list)


def _nesting_ok(narrow: MetricField, wide: MetricField, pts, seed) -> tuple[bool, NestingReport]:
    rep = cones_narrower(narrow, wide, pts, seed=seed)
    return rep.holds and rep.length_margin >= 0.0, rep


def adjust_cones(g_eps: MetricField, g: MetricField, mode: str = "inner", audit_points=None, *,
                 lam_floor: float = 1e-8, lam_cap: float = 1.0, growth: float = 2.0,
                 safety: float = 1.5, seed: int = 0) -> ConeAdjustment:
    """Shift ``g_eps`` by ``+-lam dt(x)dt`` until its cones nest strictly inside/outside ``g``.

    ``mode="inner"`` returns ``g_eps + lam dt dt`` (narrower cones, ``check g < g``);
    ``mode="outer"`` returns ``g_eps - lam dt dt`` (``g < hat g``).  Besides the strict
    nesting, the audit requires the Lorentzian lengths to be ordered on the
    narrower cone.  The minimal passing ``lam`` of a geometric search is multiplied
    by ``safety`` and re-audited.
    """
    if mode not in ("inner", "outer"):
        raise ValueError("mode must be 'inner' or 'outer'")
    if g_eps.source is None:
        raise ValueError("adjust_cones expects a sampled metric from regularize_metric")
    pts = default_audit_points(g_eps, seed=seed) if audit_points is None else np.asarray(audit_points)
    sign = 1.0 if mode == "inner" else -1.0
    history = []
    lam = lam_floor
    while lam <= lam_cap:
        cand = shifted_metric(g_eps, lam, sign)
        ok, rep = _nesting_ok(cand, g, pts, seed) if mode == "inner" else _nesting_ok(g, cand, pts, seed)
        history.append((lam, rep.min_margin, rep.length_margin))
        if ok:
            break
        lam *= growth
    else:
        raise ValueError(f"no cone adjustment below cap {lam_cap} nests {g_eps.name} against {g.name}")
    lam_min = lam
    lam = safety * lam_min
    out = shifted_metric(g_eps, lam, sign)
    ok, rep = _nesting_ok(out, g, pts, seed) if mode == "inner" else _nesting_ok(g, out, pts, seed)
    if not ok:
        raise ValueError("safety-scaled cone adjustment failed re-audit")
    return ConeAdjustment(out, lam, lam_min, rep, history)


@dataclass
class RegularizedFamily:
    base: MetricField
    schedule: tuple[float, ...]
    kernels: list
    smoothed: list
    inner: list
    outer: list
    cone_margins: list  # inner lambda per entry
    outer_margins: list
    grid: Grid
    axes: tuple[int, ...]
    reports: list = field(default_factory=list)

    def __len__(self):
        return len(self.schedule)


def build_family(g: MetricField, grid: Grid, schedule=DEFAULT_SCHEDULE, profile: str = "standard_bump",
                 axes=None, seed: int = 0, monotone: bool = True, audit_points=None) -> RegularizedFamily:
    """Mollify ``g`` along a strictly decreasing schedule and build the inner/outer approximants.

    With ``monotone=True`` the inner shifts are enlarged (coarsest last) until each
    ``check g_k`` nests inside ``check g_{k+1}`` with ordered lengths on the common
    audit set, which is the monotone subsequence used for time-separation
    convergence.
    """
    sched = tuple(float(e) for e in schedule)
    if any(b >= a for a, b in zip(sched, sched[1:])):
        raise ValueError("schedule must be strictly decreasing")
    axes = tuple(range(grid.dim)) if axes is None else tuple(axes)
    kernels, smoothed, inner, outer, lam_in, lam_out, reps = [], [], [], [], [], [], []
    for eps in sched:
        k = make_kernel(profile, eps, grid, ambient_dim=g.dim)
        ge = regularize_metric(g, k, grid, axes)
        kernels.append(k)
        smoothed.append(ge)
    # common audit set: the valid region of the coarsest entry is contained in all others
    common = default_audit_points(smoothed[0], seed=seed) if audit_points is None else np.asarray(audit_points)
    for ge in smoothed:
        ci = adjust_cones(ge, g, "inner", common, seed=seed)
        co = adjust_cones(ge, g, "outer", common, seed=seed)
        inner.append(ci.metric)
        outer.append(co.metric)
        lam_in.append(ci.lam)
        lam_out.append(co.lam)
        reps.append(ci.report)
    if monotone:
        for k in range(len(sched) - 2, -1, -1):
            tries = 0
            while True:
                ok, _ = _nesting_ok(inner[k], inner[k + 1], common, seed)
                if ok:
                    break
                tries += 1
                if tries > 60:
                    raise ValueError(f"could not make inner approximants monotone at entry {k}")
                lam_in[k] *= 1.25
                inner[k] = shifted_metric(smoothed[k], lam_in[k], 1.0)
    return RegularizedFamily(g, sched, kernels, smoothed, inner, outer, lam_in, lam_out, grid, axes, reps)


def friedrichs_weighted_convolve(a: SampledField, f: SampledField, kernel: MollifierKernel,
                                 a_eps: SampledField | None = None) -> tuple[SampledField, SampledField]:
    """Return ``(a_eps (f * rho), (a f) * rho)`` on the shrunken lattice.

    ``a_eps`` defaults to ``a`` itself; if given it must live on the input grid or
    on the shrunken lattice.
    """
    if a.grid != f.grid:
        raise ValueError("a and f must share a grid")
    fr = convolve(f, kernel)
    afr = convolve(SampledField(a.grid, a.values * f.values), kernel)
    if a_eps is None:
        ae = a.values[a.grid.shrink(kernel.halfwidth)[1]]
    elif a_eps.grid == a.grid:
        ae = a_eps.values[a.grid.shrink(kernel.halfwidth)[1]]
    elif a_eps.grid == fr.grid:
        ae = a_eps.values
    else:
        raise ValueError("a_eps grid mismatch")
    return SampledField(fr.grid, ae * fr.values, meta=fr.meta), afr
