import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from lipschitz_hawking import symbolic
from lipschitz_hawking.metric import (CATALOG, MetricField, SignatureError, catalog, causal_character,
                                      cones_narrower, inverse_cofactor, lorentzian_ok, minkowski_metric)


def _riemann_ricci(g, coords):
    """Independent oracle: Ricci as the contraction R^r_{s r v} of the Riemann tensor."""
    n = len(coords)
    ginv = g.inv()
    Gam = [[[sum(ginv[r, l] * (sp.diff(g[l, s], coords[m]) + sp.diff(g[l, m], coords[s])
                               - sp.diff(g[s, m], coords[l])) for l in range(n)) / 2
             for m in range(n)] for s in range(n)] for r in range(n)]

    def riem(r, s, m, v):
        e = sp.diff(Gam[r][v][s], coords[m]) - sp.diff(Gam[r][m][s], coords[v])
        e += sum(Gam[r][m][l] * Gam[l][v][s] - Gam[r][v][l] * Gam[l][m][s] for l in range(n))
        return e

    return sp.Matrix(n, n, lambda s, v: sp.simplify(sum(riem(r, s, r, v) for r in range(n))))


def _grw_oracle(a_expr, t, n):
    xs = sp.symbols(f"y1:{n}", real=True)
    g = sp.diag(-1, *([a_expr ** 2] * (n - 1)))
    return sp.lambdify(t, _riemann_ricci(g, (t, *xs)), "numpy")


def test_minkowski_inverse_and_characters():
    g = minkowski_metric(4)
    x = np.zeros(4)
    np.testing.assert_array_equal(g.inverse_at(x), np.diag([-1.0, 1, 1, 1]))
    assert causal_character(g, x, [1, 0, 0, 0]) == ("timelike", -1.0)
    assert causal_character(g, x, [1, 1, 0, 0])[0] == "null"
    assert causal_character(g, x, [1, 2, 0, 0]) == ("spacelike", 3.0)


def test_grw_inverse_diagonal(two_slope):
    x = np.array([-0.4, 0.1, 0.2, 0.3])
    a = 1 + 0.5 * 0.4
    np.testing.assert_allclose(two_slope.metric.inverse_at(x), np.diag([-1, a ** -2, a ** -2, a ** -2]), rtol=1e-14)


def _random_lorentzian(r, n):
    # congruent to eta, so exactly one negative eigenvalue; moderately conditioned
    A = np.eye(n) + 0.3 * r.normal(size=(n, n))
    eta = np.diag([-1.0] + [1.0] * (n - 1))
    return A.T @ eta @ A


def test_inverse_residual_random_points(rng):
    mats = np.array([_random_lorentzian(rng, 4) for _ in range(1000)])
    assert lorentzian_ok(mats).all()
    res = inverse_cofactor(mats) @ mats - np.eye(4)
    assert np.max(np.abs(res)) <= 1e-10


@pytest.mark.parametrize("name", ["minkowski", "grw_smooth", "grw_eds_collapse", "grw_two_slope", "pp_impulsive_rosen"])
def test_catalog_inverse_residual(name, rng):
    m = catalog(name)
    pts = rng.uniform(-0.5, 0.5, size=(1000, m.dim))
    G = m.metric(pts)
    assert np.max(np.abs(m.metric.inverse_at(pts) @ G - np.eye(m.dim))) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(1e-3, 1e3))
def test_causal_character_scale_invariant(v, c):
    v = np.array(v)
    if np.linalg.norm(v) < 1e-3:
        return
    g = catalog("grw_smooth").metric
    x = np.array([0.3, 0, 0, 0])
    assert causal_character(g, x, v)[0] == causal_character(g, x, c * v)[0]


def _narrowed(c, n=4):
    # light speed c < 1: -dt^2 + dx^2 / c^2
    mat = np.diag([-1.0] + [1.0 / c ** 2] * (n - 1))
    return MetricField(n, lambda x: np.broadcast_to(mat, np.asarray(x).shape[:-1] + (n, n)).copy(), name=f"c{c}")


def test_cones_narrower_examples(rng):
    pts = rng.uniform(-1, 1, size=(50, 4))
    rep = cones_narrower(_narrowed(0.9), minkowski_metric(4), pts)
    assert rep.holds and rep.min_margin > 0
    assert not cones_narrower(minkowski_metric(4), minkowski_metric(4), pts).holds


@settings(max_examples=20, deadline=None)
@given(st.floats(0.3, 0.95), st.floats(0.3, 0.95), st.floats(0.3, 0.95))
def test_cones_narrower_transitive(c1, c2, c3):
    c1, c2, c3 = sorted([c1, c2, c3])
    if c2 - c1 < 1e-3 or c3 - c2 < 1e-3:
        return
    pts = np.zeros((3, 4))
    g1, g2, g3 = _narrowed(c1), _narrowed(c2), _narrowed(c3)
    r12, r23 = cones_narrower(g1, g2, pts), cones_narrower(g2, g3, pts)
    assert r12.holds and r23.holds
    assert cones_narrower(g1, g3, pts).holds


def test_signature_error_type():
    assert issubclass(SignatureError, ValueError)
    assert not lorentzian_ok(np.diag([1.0, 1.0, 1.0]))
    assert not lorentzian_ok(np.diag([-1.0, -1.0, 1.0]))


@pytest.mark.parametrize("profile,a_fn", [("cosh", sp.cosh), ("exp", sp.exp)])
def test_grw_smooth_ricci_against_riemann_oracle(profile, a_fn):
    t = sp.Symbol("t", real=True)
    oracle = _grw_oracle(a_fn(t), t, 4)
    m = catalog("grw_smooth", {"profile": profile})
    for tv in (-0.7, 0.0, 0.4, 1.1):
        x = np.array([tv, 0.2, -0.1, 0.5])
        np.testing.assert_allclose(m.ricci_regular(x), np.array(oracle(tv), dtype=float), atol=1e-12)


def test_eds_ricci_against_riemann_oracle():
    t = sp.Symbol("t", real=True)
    oracle = _grw_oracle((1 - t) ** sp.Rational(2, 3), t, 4)
    m = catalog("grw_eds_collapse")
    for tv in (-0.5, 0.0, 0.5):
        x = np.array([tv, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(m.ricci_regular(x), np.array(oracle(tv), dtype=float), rtol=1e-12, atol=1e-12)
        assert m.known["ricci_tt"](tv) == pytest.approx(float(oracle(tv)[0, 0]), rel=1e-12)


def test_symbolic_module_matches_oracle():
    R, a, t = symbolic.warped_product_ricci(3)
    direct = _riemann_ricci(sp.diag(-1, a ** 2, a ** 2), (t, *sp.symbols("u v", real=True)))
    assert sp.simplify(R - direct) == sp.zeros(3, 3)


def test_two_slope_jump_coefficient():
    C, a, t = symbolic.warped_product_jump(4)
    for m1, m2 in [(0.5, 1.0), (1.0, 1.0), (0.2, 0.7)]:
        model = catalog("grw_two_slope", {"m1": m1, "m2": m2})
        # a(0) = 1, jump in adot = -(m2 - m1)
        coef = float(C[0, 0].subs(a, 1)) * (-(m2 - m1))
        assert model.known["delta_tt"] == pytest.approx(coef, abs=1e-14)
        assert model.known["delta_tt"] >= 0
        layer = model.kinks[0].coefficient(np.zeros(4))
        assert layer[0, 0] == pytest.approx(coef)
        assert layer[1, 1] == pytest.approx(float(C[1, 1].subs(a, 1)) * (-(m2 - m1)))


def test_two_slope_distributional_sec(two_slope, rng):
    # smooth pieces: Ric(X,X) >= 0 on unit timelike X, delta coefficient >= 0 on the cone
    for tv in rng.uniform(-0.9, 0.9, 40):
        x = np.array([tv, 0, 0, 0])
        R = two_slope.ricci_regular(x)
        a = 1 - (0.5 if tv <= 0 else 1.0) * tv
        psi = rng.uniform(0, 3)
        w = rng.normal(size=3)
        w /= np.linalg.norm(w)
        X = np.concatenate([[np.cosh(psi)], np.sinh(psi) * w / a])
        assert X @ two_slope.metric(x) @ X == pytest.approx(-1.0)
        assert X @ R @ X >= -1e-10
    assert two_slope.delta_min_on_cone() >= 0


def test_two_slope_equal_slopes_has_no_kink():
    m = catalog("grw_two_slope", {"m1": 1.0, "m2": 1.0})
    assert m.known["delta_tt"] == 0.0
    smooth = catalog("grw_smooth", {"profile": "linear", "m": 1.0})
    x = np.array([[-0.5, 0, 0, 0], [0.5, 0.1, 0, 0]])
    np.testing.assert_allclose(m.metric(x), smooth.metric(x))


def test_two_slope_slice_facts(two_slope):
    assert two_slope.known["slice_mean_curvature"](-0.5) == pytest.approx(-1.2)
    assert two_slope.known["singularity_time"] == 1.0
    assert two_slope.known["tau_sigma"](-0.5, [1.0, 0, 0, 0]) == pytest.approx(1.5)
    H, a, ts = symbolic.warped_product_slice_mean_curvature(4)
    val = H.subs(sp.Derivative(a, ts), -0.5).subs(a, 1.25)
    assert float(val) == pytest.approx(-1.2)


def test_catalog_rejects_bad_params():
    with pytest.raises(ValueError):
        catalog("grw_two_slope", {"m1": 2.0, "m2": 1.0})
    with pytest.raises(ValueError):
        catalog("nope")
    assert set(CATALOG) == {"minkowski", "grw_smooth", "grw_eds_collapse", "grw_two_slope", "pp_impulsive_rosen"}


def test_rosen_wave_vacuum():
    R, F, G, u = symbolic.rosen_wave_ricci()
    s = sp.Symbol("s")
    k = sp.Rational(1, 2)
    sub = R.replace(F.func, sp.Lambda(s, 1 + k * s)).replace(G.func, sp.Lambda(s, 1 - k * s)).doit()
    assert sp.simplify(sub) == sp.zeros(4, 4)
    # a curved profile is not vacuum, so the check has teeth
    bent = R.replace(F.func, sp.Lambda(s, 1 + k * s ** 2)).replace(G.func, sp.Lambda(s, 1 - k * s)).doit()
    assert sp.simplify(bent) != sp.zeros(4, 4)
