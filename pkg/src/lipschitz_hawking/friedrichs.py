"""Friedrichs-type commutator diagnostics.

The zero-order commutator is ``a_eps (f * rho_eps) - (a f) * rho_eps`` with ``a``
Lipschitz and ``f`` bounded; its first derivatives tend to zero in ``L^p`` and
stay bounded in ``L^inf``.  On catalog models the same bookkeeping is carried out
for ``Ric[g_eps] - Ric[g] * rho_eps`` with the distributional Ricci tensor split
into a regular part and a delta layer on the kink.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .curvature import ricci
from .grid import Grid, SampledField, fd_partial, integrate, lp_norm, make_grid, sample
from .metric import SpacetimeModel
from .mollify import DEFAULT_SCHEDULE, MollifierKernel, chart_points, convolve, make_kernel

A_EPS_MODES = ("frozen", "mollified", "true_inverse")
DEFAULT_P = (1.0, 2.0, 4.0)


@dataclass(frozen=True)
class FriedrichsCase:
    """A scalar commutator problem on a grid.

    ``a`` and ``f`` are callables of the grid coordinates.  ``true_inverse``
    treats ``a`` as ``1 / b`` for a metric component ``b`` and uses
    ``a_eps = 1 / (b * rho_eps)``.
    """

    name: str
    grid: Grid
    a: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    K: tuple[tuple[float, float], ...]
    schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    p_list: tuple[float, ...] = DEFAULT_P
    a_eps_mode: str = "frozen"
    lipschitz: float | None = None
    profile: str = "standard_bump"
    ambient_dim: int | None = None
    a_grad: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        if self.a_eps_mode not in A_EPS_MODES:
            raise ValueError(f"a_eps_mode must be one of {A_EPS_MODES}")
        fv = self.f_field().values
        if not np.all(np.isfinite(fv)):
            raise ValueError("f must be bounded")

    def a_field(self) -> SampledField:
        return sample(self.a, self.grid)

    def f_field(self) -> SampledField:
        return sample(self.f, self.grid)

    def kernel(self, eps: float) -> MollifierKernel:
        return make_kernel(self.profile, eps, self.grid, self.ambient_dim)

    def lip(self) -> float:
        """Lipschitz constant of ``a`` on the grid (given, or from lattice slopes)."""
        if self.lipschitz is not None:
            return float(self.lipschitz)
        av = self.a_field().values
        best = 0.0
        for ax in range(self.grid.dim):
            d = np.abs(np.diff(av, axis=ax)) / self.grid.spacing[ax]
            best = max(best, float(np.max(d)))
        return best


def kink_case(grid: Grid | None = None, **kw) -> FriedrichsCase:
    """``a = |x|``, ``f = sign x`` on ``[-1, 1]``."""
    grid = grid or make_grid([(-1.0, 1.0)], [2001])
    K = kw.pop("K", ((-0.75, 0.75),))
    return FriedrichsCase("abs_sign", grid, lambda x: np.abs(x[..., 0]), lambda x: np.sign(x[..., 0]), K,
                          lipschitz=1.0, a_grad=lambda x: np.sign(x[..., 0])[..., None], **kw)


def two_slope_case(m1: float = 0.5, m2: float = 1.0, grid: Grid | None = None, **kw) -> FriedrichsCase:
    """``a = g^{xx} = 1/A(t)``, ``f = d_t g_xx = A'(t)`` for the two-slope scale factor ``A = a(t)^2``."""
    grid = grid or make_grid([(-0.8, 0.6)], [2801])
    K = kw.pop("K", ((-0.55, 0.35),))

    def sf(t):
        return np.where(t <= 0, 1.0 - m1 * t, 1.0 - m2 * t)

    def sfd(t):
        return np.where(t <= 0, -m1, -m2)

    A = lambda x: sf(x[..., 0]) ** 2
    dA = lambda x: 2.0 * sf(x[..., 0]) * sfd(x[..., 0])
    tmax = grid.bounds[0][1]
    lip = 2 * m2 / (1 - m2 * tmax) ** 3
    return FriedrichsCase("two_slope", grid, lambda x: 1.0 / A(x), dA, K, lipschitz=lip,
                          a_grad=lambda x: (-dA(x) / A(x) ** 2)[..., None], **kw)


def _a_eps(case: FriedrichsCase, kernel: MollifierKernel) -> SampledField:
    a = case.a_field()
    if case.a_eps_mode == "frozen":
        return SampledField(a.grid, a.values).restrict(convolve(a, kernel).grid.bounds)
    if case.a_eps_mode == "mollified":
        return convolve(a, kernel)
    b = SampledField(a.grid, 1.0 / a.values)
    return convolve(b, kernel).with_values(1.0 / convolve(b, kernel).values)


def commutator_field(case: FriedrichsCase, eps: float) -> SampledField:
    """``a_eps (f * rho_eps) - (a f) * rho_eps`` on the shrunken lattice."""
    k = case.kernel(eps)
    a, f = case.a_field(), case.f_field()
    fr = convolve(f, k)
    afr = convolve(SampledField(a.grid, a.values * f.values), k)
    ae = _a_eps(case, k)
    return SampledField(fr.grid, ae.values * fr.values - afr.values, meta=fr.meta)


@dataclass
class SupReport:
    epsilon: float
    field: SampledField
    sup: float
    bound: float
    within_bound: bool


def commutator0(case: FriedrichsCase, eps: float) -> SupReport:
    """Zero-order commutator and its sup over ``K`` against ``Lip(a) * eps * sup|f|``."""
    c = commutator_field(case, eps)
    sup = lp_norm(c, math.inf, case.K)
    fsup = float(np.max(np.abs(case.f_field().values)))
    bound = case.lip() * eps * fsup
    if case.a_eps_mode != "frozen":
        bound *= 2.0  # |a_eps - a| <= Lip(a) eps adds one more term
    return SupReport(eps, c, sup, bound, sup <= bound * (1 + 1e-9) + 1e-14)


def commutator1(case: FriedrichsCase, eps: float, j: int = 0) -> dict:
    """``L^p(K)`` norms of ``d_j`` of the commutator for every ``p`` in the case, plus ``L^inf``."""
    c = commutator_field(case, eps)
    d = fd_partial(c, j)
    out = {float(p): lp_norm(d, p, case.K) for p in case.p_list}
    out[math.inf] = lp_norm(d, math.inf, case.K)
    return out


def kernel_function(case: FriedrichsCase, kernel: MollifierKernel, x: np.ndarray, y: np.ndarray, j: int = 0):
    """``k_eps(x, y) = d_j a(x) rho_eps(x - y) + (a(x) - a(y)) d_j rho_eps(x - y)``."""
    if case.a_grad is None:
        raise ValueError("kernel_mass needs the a.e. gradient of a")
    z = x - y
    return (case.a_grad(x)[..., j] * kernel.density(z)
            + (case.a(x) - case.a(y)) * kernel.density_grad(z, j).reshape(z.shape[:-1]))


def kernel_mass(case: FriedrichsCase, eps: float, j: int = 0, n_y: int = 201) -> tuple[float, float, float]:
    """Schur masses of ``k_eps`` and the bound ``C = (1 + int|grad rho|) Lip(a)``.

    Returns ``(max_{y in K} int |k(x, y)| dx, max_{x in K} int |k(x, y)| dy, C)``.
    The ``x``-integral runs over the whole kernel support, which bounds the
    version restricted to ``x in K`` from above.  Sample points are a uniform
    grid on ``K`` plus a fine cluster of width ``2 eps`` around the origin, where
    the catalog kinks sit.  Integrals are Riemann sums over the support (1D cases).
    """
    if case.grid.dim != 1:
        raise ValueError("kernel_mass is implemented for one-dimensional cases")
    k = case.kernel(eps)
    lo, hi = case.K[0]
    dz = min(case.grid.spacing[0], eps / 64.0)
    z = np.arange(-math.floor(eps / dz), math.floor(eps / dz) + 1) * dz
    xs = np.linspace(lo, hi, n_y)
    if lo < 0.0 < hi:
        near = np.linspace(-2 * eps, 2 * eps, 161)
        xs = np.union1d(xs, near[(near >= lo) & (near <= hi)])
    P = xs[:, None, None]
    Z = z[None, :, None]
    kxy = kernel_function(case, k, P + 0 * Z, P - Z, j)  # x fixed, y = x - z
    mass_y = np.sum(np.abs(kxy), axis=1) * dz
    kyx = kernel_function(case, k, P + Z, P + 0 * Z, j)  # y fixed, x = y + z
    mass_x = np.sum(np.abs(kyx), axis=1) * dz
    C = (1.0 + k.grad_l1()) * case.lip()
    return float(np.max(mass_x)), float(np.max(mass_y)), float(C)


# --- reports -------------------------------------------------------------------------

@dataclass
class NormReport:
    """Norm table over (epsilon, p) with trend flags."""

    name: str
    epsilons: list
    p_list: list
    table: dict  # (eps, p) -> norm
    trend: dict = field(default_factory=dict)  # p -> ratio final/initial
    flags: dict = field(default_factory=dict)  # p -> bool
    linf_bound: float | None = None
    extra: dict = field(default_factory=dict)

    def norms(self, p: float) -> list:
        return [self.table[(e, p)] for e in self.epsilons]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "p", "norm", "trend_flag"])
        for p in self.p_list:
            for e in self.epsilons:
                w.writerow([f"{e:.6g}", "inf" if math.isinf(p) else f"{p:g}", f"{self.table[(e, p)]:.12e}",
                            int(bool(self.flags.get(p, False)))])
        return buf.getvalue()

    @property
    def passed(self) -> bool:
        return all(self.flags.values())


# thresholds on final/initial ratios for the L^p trend
RATIO_THRESHOLDS = {1.0: 0.25, 2.0: 0.35}
LINF_FACTOR = 3.0


def _finish(rep: NormReport) -> NormReport:
    for p in rep.p_list:
        vals = rep.norms(p)
        if math.isinf(p):
            med = float(np.median(vals))
            rep.linf_bound = LINF_FACTOR * med
            nonincreasing = all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))
            rep.flags[p] = max(vals) <= LINF_FACTOR * med or nonincreasing or max(vals) <= 1e-12
            rep.trend[p] = vals[-1] / vals[0] if vals[0] > 0 else 0.0
            continue
        ratio = vals[-1] / vals[0] if vals[0] > 0 else 0.0
        rep.trend[p] = ratio
        decreasing = all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))
        thr = RATIO_THRESHOLDS.get(p, 1.0)
        rep.flags[p] = (decreasing and ratio <= thr) or max(vals) <= 1e-12
    return rep


def commutator_sweep(case: FriedrichsCase, j: int = 0) -> NormReport:
    """``commutator1`` over the schedule; adds kernel masses and zero-order sups to ``extra``."""
    eps = [float(e) for e in case.schedule]
    p_list = [float(p) for p in case.p_list] + [math.inf]
    table = {}
    masses, sups = [], []
    for e in eps:
        norms = commutator1(case, e, j)
        for p in p_list:
            table[(e, p)] = norms[p]
        if case.a_grad is not None and case.grid.dim == 1:
            masses.append(kernel_mass(case, e, j))
        sups.append(commutator0(case, e).sup)
    rep = _finish(NormReport(case.name, eps, p_list, table))
    rep.extra["zero_order_sup"] = sups
    if masses:
        mx = [m[0] for m in masses]
        my = [m[1] for m in masses]
        rep.extra["kernel_mass_x"] = mx
        rep.extra["kernel_mass_y"] = my
        rep.extra["kernel_bound"] = masses[0][2]
        spread = max(max(mx) / min(mx), max(my) / min(my)) if min(mx) > 0 and min(my) > 0 else 1.0
        rep.extra["kernel_uniformity"] = spread
        rep.flags["kernel_mass"] = (spread <= 1.1 and max(mx + my) <= masses[0][2] * (1 + 1e-6))
    return rep


def mode_discrepancy(case: FriedrichsCase, eps: float, j: int = 0) -> dict:
    """Sup over ``K`` of the differences of ``d_j`` commutators between the ``a_eps`` modes."""
    fields = {}
    for mode in A_EPS_MODES:
        if mode == "true_inverse" and np.any(case.a_field().values == 0):
            continue
        c = FriedrichsCase(case.name, case.grid, case.a, case.f, case.K, case.schedule, case.p_list, mode,
                           case.lipschitz, case.profile, case.ambient_dim, case.a_grad)
        fields[mode] = fd_partial(commutator_field(c, eps), j)
    out = {}
    names = sorted(fields)
    for i, m1 in enumerate(names):
        for m2 in names[i + 1:]:
            d = fields[m1].with_values(fields[m1].values - fields[m2].values)
            out[f"{m1}-{m2}"] = lp_norm(d, math.inf, case.K)
    return out


# --- Ricci-level commutators ------------------------------------------------------

def _kink_layer_density(model: SpacetimeModel, kernel: MollifierKernel, grid: Grid, axes) -> np.ndarray:
    """Discrete single-layer mollification: stencil density at offset ``x - (kink point)``.

    Only coordinate-aligned kinks whose normal lies on a grid axis are supported.
    """
    out = np.zeros(grid.resolution)
    for layer in model.kinks:
        nrm = np.asarray(layer.normal)
        if np.count_nonzero(nrm) != 1:
            raise ValueError("only coordinate-aligned kinks are supported")
        ax = int(np.flatnonzero(nrm)[0])
        if ax not in axes:
            raise ValueError("kink normal must be a grid axis")
        a = axes.index(ax)
        c = grid.axis_coords(a)
        h = grid.spacing[a]
        idx = np.rint((c - layer.offset * nrm[ax]) / h).astype(int)
        dens = kernel.stencil_density().reshape(-1) if grid.dim == 1 else None
        if dens is None:
            raise ValueError("single-layer density implemented for one-dimensional reduced grids")
        hw = kernel.halfwidth[0]
        vals = np.where(np.abs(idx) <= hw, dens[np.clip(idx + hw, 0, 2 * hw)], 0.0)
        out = out + vals
    return out


def _reference_ricci(model: SpacetimeModel, kernel: MollifierKernel, grid: Grid, axes):
    """``Ric[g] * rho_eps`` on the shrunken lattice: regular part convolved plus the layer."""
    pts = chart_points(grid, model.dim, axes)
    reg = SampledField(grid, model.ricci_regular(pts))
    regc = convolve(reg, kernel)
    sub = regc.grid
    vals = regc.values.copy()
    if model.kinks:
        layer_d = _kink_layer_density(model, kernel, sub, axes)
        for layer in model.kinks:
            x0 = np.zeros(model.dim)
            vals = vals + layer_d[..., None, None] * layer.coefficient(x0)
    return SampledField(sub, vals, (0, 2), False)


def _check_certified(model: SpacetimeModel):
    if "ricci" not in model.known:
        raise ValueError(f"{model.name} carries no certified distributional Ricci decomposition")


def ricci_commutator(model: SpacetimeModel, family, p_list=DEFAULT_P, K=None,
                     components: Sequence[tuple[int, int]] | None = None) -> NormReport:
    """``||Ric[g_eps] - Ric[g] * rho_eps||`` over the schedule (max over components).

    ``Ric[g_eps]`` is the finite-difference Ricci tensor of the family's
    mollified metric on its own lattice.
    """
    _check_certified(model)
    axes = tuple(family.axes)
    grid = family.grid
    eps = [float(e) for e in family.schedule]
    p_all = [float(p) for p in p_list] + [math.inf]
    table = {}
    comps = components or [(i, j) for i in range(model.dim) for j in range(i, model.dim)]
    delta_checks = []
    for k, e in enumerate(eps):
        b = ricci(family.smoothed[k])
        ref = _reference_ricci(model, family.kernels[k], grid, axes)
        diff = _diff_on(b, ref)
        box = K or tuple(diff.grid.bounds)
        for p in p_all:
            table[(e, p)] = max(lp_norm(diff.component(i, j), p, box) for i, j in comps)
        if model.kinks:
            delta_checks.append(_delta_bookkeeping(b, model))
    rep = _finish(NormReport(f"ricci_commutator[{model.name}]", eps, p_all, table))
    if delta_checks:
        rep.extra["delta_slab_integral"] = delta_checks
        rep.extra["delta_coefficient"] = float(model.kinks[0].coefficient(np.zeros(model.dim))[0, 0])
    return rep


def _diff_on(bundle, ref: SampledField) -> SampledField:
    """``Ric_FD - ref`` on the intersection of the bundle's valid lattice and ``ref``'s lattice."""
    vb = bundle.valid_grid.bounds
    rb = ref.grid.bounds
    box = tuple((max(a[0], b[0]), min(a[1], b[1])) for a, b in zip(vb, rb))
    fr = SampledField(bundle.grid, bundle.ricci.values).restrict(box)
    rr = ref.restrict(box)
    if fr.values.shape != rr.values.shape:
        raise ValueError("lattice mismatch between curvature bundle and reference")
    return SampledField(fr.grid, fr.values - rr.values, (0, 2), False)


def _delta_bookkeeping(bundle, model: SpacetimeModel, halfwidth: float = 0.05) -> float:
    """``int Ric[g_eps](d_t, d_t) dvol`` over ``|t| <= halfwidth`` per unit spatial volume."""
    fld = SampledField(bundle.grid, bundle.ricci.values[..., 0, 0] * np.sqrt(np.abs(np.linalg.det(bundle.metric_values))))
    return float(integrate(fld, ((-halfwidth, halfwidth),)))


def ricci_commutator_fields(model: SpacetimeModel, family, X: Callable, Y: Callable, p_list=DEFAULT_P,
                            K=None) -> NormReport:
    """``(Ric[g] * rho)(X, Y) - (Ric[g](X, Y)) * rho`` over the schedule.

    The delta layer enters the first term as ``X(x) C Y(x) rho(x - kink)`` and the
    second as ``X(kink) C Y(kink) rho(x - kink)``.
    """
    _check_certified(model)
    axes = tuple(family.axes)
    grid = family.grid
    pts = chart_points(grid, model.dim, axes)
    Xv, Yv = X(pts), Y(pts)
    reg = model.ricci_regular(pts)
    eps = [float(e) for e in family.schedule]
    p_all = [float(p) for p in p_list] + [math.inf]
    table = {}
    for k, e in enumerate(eps):
        ker = family.kernels[k]
        ref = _reference_ricci(model, ker, grid, axes)  # Ric[g] * rho, tensor
        sub = ref.grid
        spts = chart_points(sub, model.dim, axes)
        first = np.einsum("...i,...ij,...j->...", X(spts), ref.values, Y(spts))
        contracted = SampledField(grid, np.einsum("...i,...ij,...j->...", Xv, reg, Yv))
        second = convolve(contracted, ker).values
        if model.kinks:
            layer_d = _kink_layer_density(model, ker, sub, axes)
            for layer in model.kinks:
                x0 = np.zeros(model.dim)
                second = second + layer_d * float(X(x0) @ layer.coefficient(x0) @ Y(x0))
        diff = SampledField(sub, first - second)
        box = K or tuple(sub.bounds)
        for p in p_all:
            table[(e, p)] = lp_norm(diff, p, box)
    return _finish(NormReport(f"ricci_commutator_fields[{model.name}]", eps, p_all, table))
