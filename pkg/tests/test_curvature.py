import numpy as np
import pytest

from lipschitz_hawking.curvature import (Hypersurface, build_slab, christoffel, constant_field, mean_bound_check,
                                         mean_curvature_convergence, ricci, ricci_error, ricci_timelike_min,
                                         slab_mean_curvature)
from lipschitz_hawking.grid import make_grid
from lipschitz_hawking.metric import catalog
from lipschitz_hawking.mollify import build_family, make_kernel, regularize_metric

T_GRID = make_grid([(-1.0, 1.0)], (201,))


def test_minkowski_christoffel_and_ricci_vanish():
    mk = catalog("minkowski").metric
    b = ricci(mk, make_grid([(-1, 1), (-1, 1)], (21, 21)), axes=(0, 1))
    assert np.max(np.abs(b.gamma.values)) == 0.0
    assert np.max(np.abs(b.ricci.values[b.valid])) <= 1e-8
    assert ricci_timelike_min(b, mk) == pytest.approx(0.0, abs=1e-12)


def test_mollified_minkowski_ricci_vanishes():
    mk = catalog("minkowski").metric
    ge = regularize_metric(mk, make_kernel("standard_bump", 0.1, T_GRID, 4), T_GRID, (0,))
    b = ricci(ge)
    assert np.max(np.abs(b.ricci.values[b.valid])) <= 1e-8


def test_christoffel_exp_profile():
    # a = e^t: Gamma^t_xx = a adot = e^{2t}, Gamma^x_tx = adot / a = 1
    m = catalog("grw_smooth", {"profile": "exp"})
    b = christoffel(m.metric, make_grid([(-1, 1)], (401,)), axes=(0,))
    t = b.valid_grid.axis_coords(0)
    G = b.gamma.values[b.valid]
    h = 2 / 400
    np.testing.assert_allclose(G[:, 0, 1, 1], np.exp(2 * t), rtol=2 * h * h)
    np.testing.assert_allclose(G[:, 1, 0, 1], 1.0, atol=2 * h * h)
    np.testing.assert_array_equal(G, np.swapaxes(G, -1, -2))


def test_christoffel_analytic_matches_catalog():
    m = catalog("grw_smooth")
    x = np.array([[0.3, 0, 0, 0], [-0.8, 0.5, 0.1, 0]])
    G = m.metric.christoffel_at(x)
    np.testing.assert_allclose(G[:, 0, 2, 2], m.known["christoffel_t_xx"](x[:, 0]), rtol=1e-13)
    np.testing.assert_allclose(G[:, 3, 0, 3], m.known["christoffel_x_tx"](x[:, 0]), rtol=1e-13)


def test_ricci_cosh_and_symmetry():
    m = catalog("grw_smooth")
    b = ricci(m.metric, make_grid([(-1, 1)], (321,)), axes=(0,))
    assert ricci_error(b, m.ricci_regular) <= 5e-4
    R = b.ricci.values[b.valid]
    assert np.max(np.abs(R - np.swapaxes(R, -1, -2))) <= 1e-10


def test_fd_order_of_ricci():
    m = catalog("grw_smooth")
    errs = [ricci_error(ricci(m.metric, make_grid([(-1, 1)], (n,)), axes=(0,)), m.ricci_regular)
            for n in (41, 81, 161, 321)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 3) & (ratios <= 5)), ratios


def test_fd_order_central4_is_higher():
    m = catalog("grw_smooth")
    e = [ricci_error(ricci(m.metric, make_grid([(-1, 1)], (n,)), axes=(0,), scheme="central4"), m.ricci_regular)
         for n in (41, 81)]
    assert e[0] / e[1] > 10


def test_eds_timelike_floor():
    m = catalog("grw_eds_collapse")
    b = ricci(m.metric, make_grid([(-0.2, 0.7)], (901,)), axes=(0,))
    assert ricci_timelike_min(b, m.metric, region=[(0.0, 0.5)]) == pytest.approx(2 / 3, rel=1e-3)


def test_inner_floors_trend(two_slope_family):
    floors = [ricci_timelike_min(ricci(gi), gi, region=[(-0.5, 0.6)]) for gi in two_slope_family.inner]
    assert floors[-1] >= -0.05
    assert all(b >= a for a, b in zip(floors, floors[1:]))


@pytest.mark.parametrize("name,params,t0,expected", [
    ("minkowski", {}, 0.0, 0.0),
    ("grw_two_slope", {"m1": 0.5, "m2": 1.0}, -0.5, -1.2),
    ("grw_eds_collapse", {"t_s": 1.0}, 0.0, -2.0),
    ("grw_smooth", {}, 0.4, 3 * np.tanh(0.4)),
])
def test_slab_mean_curvature_closed_forms(name, params, t0, expected):
    m = catalog(name, params)
    sigma = Hypersurface.level(t0, 4)
    slab = build_slab(m.metric, sigma, halfwidth=0.05)
    H = slab_mean_curvature(m.metric, slab, m.kinks)
    mid = len(slab.leaves) // 2
    np.testing.assert_allclose(H[mid], expected, atol=1e-6)
    if name == "grw_smooth":
        # off the slice the leaves are the level sets t0 + s
        s = slab.leaves[:, None]
        np.testing.assert_allclose(H, 3 * np.tanh(t0 + s) + 0 * H, atol=1e-6)


def test_slab_frame_scaling_exact(two_slope):
    sigma = Hypersurface.level(-0.5, 4)
    slab = build_slab(two_slope.metric, sigma, halfwidth=0.05)
    H1 = slab_mean_curvature(two_slope.metric, slab)
    H2 = slab_mean_curvature(two_slope.metric, slab.scaled(2.0))
    assert np.max(np.abs(H1 - H2)) <= 1e-12


def test_mean_bound_two_slope(two_slope):
    sigma = Hypersurface.level(-0.5, 4)
    fields = [constant_field([1.0, 0, 0, 0]), constant_field([1.0, 0.3, 0, 0])]
    rep = mean_bound_check(two_slope.metric, sigma, -1.1, fields, kinks=two_slope.kinks)
    assert rep.passed
    assert max(rep.esssup) < -1.1
    # constant fields on a warped product give identical leaves
    assert max(rep.discrepancy) <= 1e-6


def test_mean_bound_discrepancy_shrinks(two_slope):
    sigma = Hypersurface.level(-0.5, 4)

    def tilting(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0 + 0.2 * np.sin(x[..., 1])
        return out

    rep = mean_bound_check(two_slope.metric, sigma, -1.1, [constant_field([1.0, 0, 0, 0]), tilting],
                           kinks=two_slope.kinks)
    assert rep.passed
    d = rep.discrepancy
    assert d[0] > d[1] > d[2] > 0


def test_mean_bound_minkowski_fails_and_eds_passes():
    fields = [constant_field([1.0, 0, 0, 0]), constant_field([1.0, 0.3, 0, 0])]
    mk = catalog("minkowski")
    assert not mean_bound_check(mk.metric, Hypersurface.level(0.0, 4), -0.1, fields).passed
    eds = catalog("grw_eds_collapse")
    assert mean_bound_check(eds.metric, Hypersurface.level(0.0, 4), -1.9, fields).passed


def test_mean_bound_needs_two_fields(two_slope):
    with pytest.raises(ValueError):
        mean_bound_check(two_slope.metric, Hypersurface.level(-0.5, 4), -1.1, [constant_field([1.0, 0, 0, 0])])


def test_mean_curvature_convergence_smooth_model():
    m = catalog("grw_smooth")
    fam = build_family(m.metric, make_grid([(-1, 1)], (801,)), (0.2, 0.1, 0.05), axes=(0,))
    rep = mean_curvature_convergence(m.metric, fam, Hypersurface.level(0.0, 4))
    assert rep.passed


def test_mean_curvature_convergence_two_slope(two_slope, two_slope_family):
    rep = mean_curvature_convergence(two_slope.metric, two_slope_family, Hypersurface.level(-0.5, 4), b=-1.1,
                                     kinks=two_slope.kinks)
    assert rep.decreasing and rep.final_ratio <= 0.1
    assert rep.consequence
    assert rep.passed
