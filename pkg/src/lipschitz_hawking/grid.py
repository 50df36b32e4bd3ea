"""Rectangular coordinate lattices, sampled tensor fields, finite differences and quadrature.

A :class:`Grid` is a single box in chart coordinates.  Grids may be *reduced*: a
grid of dimension ``d`` can carry fields that live on an ``n``-dimensional chart
but depend only on ``d`` of its coordinates (see ``axes`` on the metric
classes).  Everything here is agnostic of that; a grid only knows its own axes.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

SCHEMES = ("central2", "central4", "one_sided2")

# Stencil half-widths used for trust-region bookkeeping.
STENCIL_WIDTH = {"central2": 1, "central4": 2, "one_sided2": 2}


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product lattice on ``prod_i [lo_i, hi_i]``."""

    bounds: tuple[tuple[float, float], ...]
    resolution: tuple[int, ...]

    def __post_init__(self):
        if len(self.bounds) != len(self.resolution) or not self.bounds:
            raise ValueError("bounds and resolution must be non-empty and of equal length")
        for axis, ((lo, hi), n) in enumerate(zip(self.bounds, self.resolution)):
            if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
                raise ValueError(f"axis {axis}: degenerate interval [{lo}, {hi}]")
            if n < 2:
                raise ValueError(f"axis {axis}: resolution {n} < 2")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / (n - 1) for (lo, hi), n in zip(self.bounds, self.resolution))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.resolution

    @property
    def size(self) -> int:
        return int(np.prod(self.resolution))

    def axis_coords(self, axis: int) -> np.ndarray:
        lo, hi = self.bounds[axis]
        n = self.resolution[axis]
        # lo + i*h rather than linspace so index -> coordinate is the same formula everywhere
        return lo + np.arange(n) * self.spacing[axis]

    def coords(self) -> np.ndarray:
        """All lattice points, shape ``(*resolution, dim)``."""
        mesh = np.meshgrid(*[self.axis_coords(a) for a in range(self.dim)], indexing="ij")
        return np.stack(mesh, axis=-1)

    def coord_of(self, index: Sequence[int]) -> np.ndarray:
        return np.array([self.bounds[a][0] + index[a] * self.spacing[a] for a in range(self.dim)])

    def index_of(self, x: Sequence[float]) -> tuple[int, ...]:
        """Nearest lattice index of a coordinate point (exact inverse of ``coord_of`` on lattice points)."""
        idx = []
        for a in range(self.dim):
            i = int(round((x[a] - self.bounds[a][0]) / self.spacing[a]))
            if not 0 <= i < self.resolution[a]:
                raise ValueError(f"coordinate {x[a]} outside grid on axis {a}")
            idx.append(i)
        return tuple(idx)

    def subgrid(self, start: Sequence[int], stop: Sequence[int]) -> "Grid":
        """Grid on the index box ``[start, stop)``."""
        bounds = []
        res = []
        for a in range(self.dim):
            lo = self.bounds[a][0] + start[a] * self.spacing[a]
            hi = self.bounds[a][0] + (stop[a] - 1) * self.spacing[a]
            bounds.append((lo, hi))
            res.append(stop[a] - start[a])
        return Grid(tuple(bounds), tuple(res))

    def shrink(self, cells: Sequence[int] | int) -> tuple["Grid", tuple[slice, ...]]:
        """Drop ``cells`` lattice points from both ends of every axis."""
        if isinstance(cells, int):
            cells = [cells] * self.dim
        start = list(cells)
        stop = [n - c for n, c in zip(self.resolution, cells)]
        if any(b - a < 2 for a, b in zip(start, stop)):
            raise ValueError("grid too small to shrink by requested margin")
        return self.subgrid(start, stop), tuple(slice(a, b) for a, b in zip(start, stop))

    def box_slices(self, box: Sequence[tuple[float, float]], tol: float = 1e-9) -> tuple[slice, ...]:
        """Index slices of the lattice points inside a coordinate sub-box."""
        sl = []
        for a, (lo, hi) in enumerate(box):
            c = self.axis_coords(a)
            h = self.spacing[a]
            inside = np.nonzero((c >= lo - tol * h) & (c <= hi + tol * h))[0]
            if inside.size == 0:
                raise ValueError(f"empty region on axis {a}: [{lo}, {hi}]")
            sl.append(slice(int(inside[0]), int(inside[-1]) + 1))
        return tuple(sl)


def make_grid(bounds: Sequence[Sequence[float]], resolution: Sequence[int]) -> Grid:
    return Grid(tuple((float(lo), float(hi)) for lo, hi in bounds), tuple(int(n) for n in resolution))


@dataclass(frozen=True)
class SampledField:
    """Tensor-valued samples on a grid.

    ``values`` has shape ``(*grid.resolution, *component_shape)``.  ``rank`` is the
    (contravariant, covariant) tensor type; for scalars it is ``(0, 0)``.
    """

    grid: Grid
    values: np.ndarray
    rank: tuple[int, int] = (0, 0)
    symmetric: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.values.shape[: self.grid.dim] != self.grid.resolution:
            raise ValueError(
                f"values shape {self.values.shape} does not start with grid resolution {self.grid.resolution}"
            )
        if self.symmetric:
            comp = self.values
            if comp.ndim < self.grid.dim + 2:
                raise ValueError("symmetric flag needs at least two component indices")
            if not np.allclose(comp, np.swapaxes(comp, -1, -2), rtol=0.0, atol=1e-12):
                raise ValueError("field flagged symmetric is not symmetric")

    @property
    def component_shape(self) -> tuple[int, ...]:
        return self.values.shape[self.grid.dim:]

    def at(self, x: Sequence[float]) -> np.ndarray:
        """Value at a lattice point given by coordinates; raises outside the grid."""
        return self.values[self.grid.index_of(x)]

    def component(self, *idx: int) -> "SampledField":
        sl = (Ellipsis,) + tuple(idx)
        return SampledField(self.grid, np.ascontiguousarray(self.values[sl]))

    def with_values(self, values: np.ndarray, **kw) -> "SampledField":
        return SampledField(self.grid, values, **{"rank": self.rank, "symmetric": False, **kw})

    def restrict(self, box: Sequence[tuple[float, float]]) -> "SampledField":
        sl = self.grid.box_slices(box)
        start = [s.start for s in sl]
        stop = [s.stop for s in sl]
        return SampledField(self.grid.subgrid(start, stop), self.values[sl], self.rank, self.symmetric)


def sample(fn: Callable[[np.ndarray], np.ndarray], grid: Grid, *, vectorized: bool = True,
           rank: tuple[int, int] = (0, 0), symmetric: bool = False) -> SampledField:
    """Evaluate ``fn`` at every lattice point.

    With ``vectorized=True`` the callable receives the full ``(*resolution, dim)``
    coordinate array and must return ``(*resolution, *components)``.
    """
    pts = grid.coords()
    if vectorized:
        vals = np.asarray(fn(pts), dtype=float)
        if vals.shape[: grid.dim] != grid.resolution:
            # constant callables may return one value for all points
            vals = np.broadcast_to(vals, grid.resolution + vals.shape).copy()
    else:
        flat = pts.reshape(-1, grid.dim)
        first = np.asarray(fn(flat[0]), dtype=float)
        vals = np.empty((flat.shape[0],) + first.shape)
        vals[0] = first
        for i in range(1, flat.shape[0]):
            vals[i] = fn(flat[i])
        vals = vals.reshape(grid.resolution + first.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        where = np.argwhere(bad)[0]
        raise ValueError(f"non-finite sample at lattice index {tuple(int(i) for i in where[: grid.dim])}")
    return SampledField(grid, vals, rank, symmetric)


# One-sided second-order first-derivative weights at offsets 0, 1, 2 (forward).
_FWD2 = np.array([-1.5, 2.0, -0.5])
# One-sided fourth-order weights at offsets 0..4 (forward) and the shifted variant at offsets -1..3.
_FWD4 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_SHIFT4 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0


def _take(v: np.ndarray, axis: int, sl: slice) -> np.ndarray:
    idx = [slice(None)] * v.ndim
    idx[axis] = sl
    return v[tuple(idx)]


def fd_partial(field: SampledField, axis: int, scheme: str = "central2") -> SampledField:
    """Partial derivative along a grid axis.

    Interior points use the named stencil; points too close to the boundary fall
    back to one-sided stencils of the same order.  ``one_sided2`` uses forward
    differences everywhere except the last two points (backward).
    """
    grid = field.grid
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for {grid.dim}-d grid")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    n = grid.resolution[axis]
    need = {"central2": 3, "central4": 5, "one_sided2": 3}[scheme]
    if n < need:
        raise ValueError(f"{n} points on axis {axis} too few for {scheme}")
    h = grid.spacing[axis]
    v = field.values
    out = np.empty_like(v, dtype=float)

    def put(sl, val):
        idx = [slice(None)] * v.ndim
        idx[axis] = sl
        out[tuple(idx)] = val

    def fwd2(i0, i1):
        # forward stencil for points i0..i1-1
        return sum(w * _take(v, axis, slice(i0 + k, i1 + k)) for k, w in enumerate(_FWD2)) / h

    def bwd2(i0, i1):
        return -sum(w * _take(v, axis, slice(i0 - k, i1 - k)) for k, w in enumerate(_FWD2)) / h

    if scheme == "central2":
        put(slice(1, n - 1), (_take(v, axis, slice(2, n)) - _take(v, axis, slice(0, n - 2))) / (2 * h))
        put(slice(0, 1), fwd2(0, 1))
        put(slice(n - 1, n), bwd2(n - 1, n))
    elif scheme == "one_sided2":
        put(slice(0, n - 2), fwd2(0, n - 2))
        put(slice(n - 2, n), bwd2(n - 2, n))
    else:
        inner = (
            -_take(v, axis, slice(4, n)) + 8 * _take(v, axis, slice(3, n - 1))
            - 8 * _take(v, axis, slice(1, n - 3)) + _take(v, axis, slice(0, n - 4))
        ) / (12 * h)
        put(slice(2, n - 2), inner)
        put(slice(0, 1), sum(w * _take(v, axis, slice(k, k + 1)) for k, w in enumerate(_FWD4)) / h)
        put(slice(1, 2), sum(w * _take(v, axis, slice(k, k + 1)) for k, w in enumerate(_SHIFT4)) / h)
        put(slice(n - 2, n - 1), -sum(w * _take(v, axis, slice(n - 1 - k, n - k)) for k, w in enumerate(_SHIFT4)) / h)
        put(slice(n - 1, n), -sum(w * _take(v, axis, slice(n - 1 - k, n - k)) for k, w in enumerate(_FWD4)) / h)
    return SampledField(grid, out, field.rank, False)


def trapezoid_weights(grid: Grid) -> np.ndarray:
    """Tensor-product composite trapezoid weights on the full grid."""
    w = np.ones(grid.resolution)
    for a in range(grid.dim):
        wa = np.full(grid.resolution[a], grid.spacing[a])
        wa[0] = wa[-1] = 0.5 * grid.spacing[a]
        shape = [1] * grid.dim
        shape[a] = -1
        w = w * wa.reshape(shape)
    return w


def integrate(field: SampledField, region: Sequence[tuple[float, float]] | np.ndarray | None = None) -> float | np.ndarray:
    """Composite trapezoid integral over a coordinate sub-box or a boolean mask.

    A sub-box integrates over the lattice points it contains (edges snapped to
    the lattice).  A mask multiplies the full-grid trapezoid weights.
    Component axes are integrated independently.
    """
    grid = field.grid
    vals = field.values
    if region is None:
        w = trapezoid_weights(grid)
    elif isinstance(region, np.ndarray) and region.dtype == bool:
        if region.shape != grid.resolution:
            raise ValueError("mask shape does not match grid")
        if not region.any():
            raise ValueError("empty region")
        w = trapezoid_weights(grid) * region
    else:
        sl = grid.box_slices(region)
        sub = grid.subgrid([s.start for s in sl], [s.stop for s in sl]) if all(s.stop - s.start >= 2 for s in sl) else None
        if sub is None:
            raise ValueError("region must contain at least two lattice points per axis")
        vals = vals[sl]
        w = trapezoid_weights(sub)
    w = w.reshape(w.shape + (1,) * (vals.ndim - grid.dim))
    # fixed-order reduction: flatten in C order then sum
    prod = (w * vals).reshape(-1, *vals.shape[grid.dim:])
    out = np.add.reduce(prod, axis=0)
    return float(out) if np.ndim(out) == 0 else out


def lp_norm(field: SampledField, p: float, region: Sequence[tuple[float, float]] | None = None) -> float:
    """Discrete L^p norm (trapezoid quadrature of ``|f|^p``); ``p=inf`` is the max over lattice points."""
    vals = field.values if region is None else field.values[field.grid.box_slices(region)]
    if np.isinf(p):
        return float(np.max(np.abs(vals)))
    mag = SampledField(field.grid, np.abs(field.values) ** p)
    return float(integrate(mag, region)) ** (1.0 / p)


# --- serialization -----------------------------------------------------------

_MAGIC = b"LHSF1\n"


def save_field(field: SampledField, path: str | Path) -> None:
    """Write a self-describing binary file: magic, JSON header line, row-major float64 payload."""
    header = {
        "dim": field.grid.dim,
        "bounds": [list(b) for b in field.grid.bounds],
        "resolution": list(field.grid.resolution),
        "rank": list(field.rank),
        "symmetric": field.symmetric,
        "component_shape": list(field.component_shape),
        "dtype": "<f8",
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes(order="C"))


def load_field(path: str | Path) -> SampledField:
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise ValueError(f"{path}: not a sampled-field file")
        header = json.loads(fh.readline())
        payload = fh.read()
    grid = make_grid(header["bounds"], header["resolution"])
    shape = tuple(header["resolution"]) + tuple(header["component_shape"])
    values = np.frombuffer(payload, dtype="<f8").reshape(shape).copy()
    return SampledField(grid, values, tuple(header["rank"]), header["symmetric"])


def field_to_csv(field: SampledField, path: str | Path | None = None) -> str:
    """CSV export for 1D/2D grids: one row per lattice point, coordinates then flattened components."""
    grid = field.grid
    if grid.dim > 2:
        raise ValueError("CSV export supports 1D and 2D slices only")
    ncomp = int(np.prod(field.component_shape)) if field.component_shape else 1
    coords = grid.coords().reshape(-1, grid.dim)
    vals = field.values.reshape(coords.shape[0], ncomp)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    comp_names = (
        ["value"] if not field.component_shape
        else ["c" + "_".join(map(str, idx)) for idx in np.ndindex(*field.component_shape)]
    )
    w.writerow([f"x{a}" for a in range(grid.dim)] + comp_names)
    for c, v in zip(coords, vals):
        w.writerow([repr(float(x)) for x in c] + [repr(float(x)) for x in v])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text
