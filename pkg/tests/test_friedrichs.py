import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lipschitz_hawking.friedrichs import (FriedrichsCase, commutator0, commutator1, commutator_field,
                                          commutator_sweep, kernel_mass, kink_case, mode_discrepancy,
                                          ricci_commutator, ricci_commutator_fields, two_slope_case)
from lipschitz_hawking.grid import make_grid
from lipschitz_hawking.metric import catalog
from lipschitz_hawking.mollify import build_family

GRID = make_grid([(-1.0, 1.0)], (2001,))


def _case(a, f, **kw):
    return FriedrichsCase("custom", GRID, a, f, ((-0.75, 0.75),), **kw)


@pytest.fixture(scope="module")
def ricci_family(two_slope):
    return build_family(two_slope.metric, make_grid([(-1.0, 0.9)], (3801,)), axes=(0,), seed=0)


def test_constant_a_gives_zero():
    case = _case(lambda x: 2.0 + 0 * x[..., 0], lambda x: np.sign(x[..., 0]), a_grad=lambda x: 0 * x)
    for eps in (0.2, 0.05):
        assert commutator0(case, eps).sup <= 1e-14
        assert all(v <= 1e-10 for v in commutator1(case, eps).values())
    mx, my, _ = kernel_mass(case, 0.1)
    assert mx == 0.0 and my == 0.0


def test_kink_zero_order_linear_in_eps():
    case = kink_case()
    sups = [commutator0(case, e) for e in case.schedule]
    assert all(s.within_bound for s in sups)
    for a, b in zip(sups, sups[1:]):
        assert b.sup / a.sup == pytest.approx(0.5, rel=0.2)


def test_kink_sweep():
    rep = commutator_sweep(kink_case())
    l1 = rep.norms(1.0)
    assert all(b < a for a, b in zip(l1, l1[1:]))
    assert rep.trend[1.0] <= 0.2
    assert rep.trend[2.0] <= 0.35
    linf = rep.norms(math.inf)
    assert max(linf) <= 3 * np.median(linf)
    assert rep.extra["kernel_uniformity"] <= 1.1
    assert max(rep.extra["kernel_mass_x"] + rep.extra["kernel_mass_y"]) <= rep.extra["kernel_bound"]
    assert rep.passed


def test_two_slope_sweep():
    rep = commutator_sweep(two_slope_case())
    assert rep.trend[1.0] <= 0.25 and rep.trend[2.0] <= 0.35
    assert rep.extra["kernel_uniformity"] <= 1.1
    assert rep.passed


def test_smooth_a_step_f_rates():
    # a'(0) != 0 so the commutator is O(1) on an O(eps) neighbourhood of the jump
    case = _case(lambda x: 1 + 0.5 * np.sin(x[..., 0]), lambda x: np.sign(x[..., 0]), p_list=(1.0, 2.0))
    l1 = [commutator1(case, e)[1.0] for e in case.schedule]
    l2 = [commutator1(case, e)[2.0] for e in case.schedule]
    # O(1) integrand on an O(eps) set: L^p ~ eps^(1/p)
    for a, b in zip(l1[1:], l1[2:]):
        assert b / a == pytest.approx(0.5, abs=0.08)
    for a, b in zip(l2[1:], l2[2:]):
        assert b / a == pytest.approx(2 ** -0.5, abs=0.08)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(0.1, 2.0))
def test_adding_constant_to_a(c, eps_scale):
    eps = 0.05 * eps_scale
    base = kink_case()
    shifted = _case(lambda x: np.abs(x[..., 0]) + c, lambda x: np.sign(x[..., 0]))
    d = commutator_field(base, eps).values - commutator_field(shifted, eps).values
    assert np.max(np.abs(d)) <= 1e-12 * (1 + abs(c))


@settings(max_examples=15, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_bilinear_in_f(s, t):
    a = lambda x: np.abs(x[..., 0] - 0.1)
    f1 = lambda x: np.sign(x[..., 0])
    f2 = lambda x: np.cos(3 * x[..., 0])
    c1 = commutator_field(_case(a, f1), 0.05).values
    c2 = commutator_field(_case(a, f2), 0.05).values
    c = commutator_field(_case(a, lambda x: s * f1(x) + t * f2(x)), 0.05).values
    assert np.max(np.abs(c - s * c1 - t * c2)) <= 1e-12


def test_locality_of_kink_commutator():
    case = kink_case()
    for eps in (0.1, 0.05):
        c = commutator_field(case, eps)
        x = c.grid.axis_coords(0)
        far = np.abs(x) > 2 * eps
        assert np.max(np.abs(c.values[far])) <= 1e-13


def test_mode_discrepancy_order_eps():
    case = two_slope_case()
    d1 = mode_discrepancy(case, 0.1)
    d2 = mode_discrepancy(case, 0.05)
    assert set(d1) == {"frozen-mollified", "frozen-true_inverse", "mollified-true_inverse"}
    assert all(np.isfinite(v) for v in d1.values())
    assert d2["mollified-true_inverse"] < d1["mollified-true_inverse"]


def test_ricci_commutator_smooth_noise_floor():
    m = catalog("grw_smooth")
    fam = build_family(m.metric, make_grid([(-1, 1)], (1601,)), (0.2, 0.1, 0.05), axes=(0,))
    rep = ricci_commutator(m, fam, K=((-0.5, 0.5),))
    # both sides tend to the same smooth tensor; what remains is O(h^2) + O(eps^2)
    assert max(rep.norms(math.inf)) <= 0.05
    assert rep.passed


def test_ricci_commutator_two_slope(two_slope, ricci_family):
    rep = ricci_commutator(two_slope, ricci_family, K=((-0.5, 0.5),))
    assert rep.trend[1.0] <= 0.25 and rep.trend[2.0] <= 0.35
    assert rep.passed
    # the layer integral tends to the certified coefficient (n-1)(m2-m1)
    assert rep.extra["delta_coefficient"] == pytest.approx(1.5)
    assert rep.extra["delta_slab_integral"][-1] == pytest.approx(1.5, rel=0.01)


def test_ricci_commutator_fields(two_slope, ricci_family):
    dt = lambda x: np.broadcast_to(np.array([1.0, 0, 0, 0]), np.shape(x)).copy()
    rep = ricci_commutator_fields(two_slope, ricci_family, dt, dt, K=((-0.5, 0.5),))
    # constant coefficients commute with the convolution, layer included
    assert max(rep.norms(math.inf)) <= 1e-10
    dx = lambda x: np.broadcast_to(np.array([0, 1.0, 0, 0]), np.shape(x)).copy()
    spatial = ricci_commutator_fields(two_slope, ricci_family, dx, dx, K=((-0.5, 0.5),))
    assert max(spatial.norms(math.inf)) <= 1e-8
    tilt = lambda x: np.stack([np.ones(np.shape(x)[:-1]), 0.2 * x[..., 0], 0 * x[..., 0], 0 * x[..., 0]], -1)
    moving = ricci_commutator_fields(two_slope, ricci_family, tilt, tilt, K=((-0.5, 0.5),))
    l1 = moving.norms(1.0)
    assert l1[-1] < l1[0]


def test_ricci_commutator_requires_certified_model(two_slope_family):
    m = catalog("grw_two_slope")
    bare = type(m)(m.name, m.dim, m.metric, m.params)
    with pytest.raises(ValueError):
        ricci_commutator(bare, two_slope_family)
