"""Symbolic derivations backing the closed forms stored in the model catalog.

These are slow (sympy) and are meant to be run by the test-suite and by anyone
regenerating catalog facts, not inside numerical loops.
"""

from __future__ import annotations

import sympy as sp


def christoffel(g: sp.Matrix, coords) -> list:
    n = len(coords)
    ginv = g.inv()
    return [[[sp.simplify(sum(ginv[i, l] * (sp.diff(g[l, k], coords[j]) + sp.diff(g[j, l], coords[k])
                                            - sp.diff(g[j, k], coords[l])) for l in range(n)) / 2)
              for k in range(n)] for j in range(n)] for i in range(n)]


def ricci(g: sp.Matrix, coords) -> sp.Matrix:
    """Ric_jk = d_i G^i_jk - d_j G^i_ik + G^i_ip G^p_jk - G^i_jp G^p_ik."""
    n = len(coords)
    G = christoffel(g, coords)
    R = sp.zeros(n, n)
    for j in range(n):
        for k in range(n):
            expr = 0
            for i in range(n):
                expr += sp.diff(G[i][j][k], coords[i]) - sp.diff(G[i][i][k], coords[j])
                for p in range(n):
                    expr += G[i][i][p] * G[p][j][k] - G[i][j][p] * G[p][i][k]
            R[j, k] = sp.simplify(expr)
    return R


def _grw(n: int):
    t = sp.Symbol("t", real=True)
    xs = sp.symbols(f"x1:{n}", real=True)
    a = sp.Function("a")(t)
    g = sp.diag(-1, *([a ** 2] * (n - 1)))
    return t, (t, *xs), a, g


def warped_product_ricci(n: int = 4):
    """Ricci of ``-dt^2 + a(t)^2 delta`` as a sympy matrix, with the scale-factor symbol."""
    t, coords, a, g = _grw(n)
    return ricci(g, coords), a, t


def warped_product_christoffel(n: int = 4):
    t, coords, a, g = _grw(n)
    G = christoffel(g, coords)
    return {"t_xx": G[0][1][1], "x_tx": G[1][0][1]}, a, t


def warped_product_slice_mean_curvature(n: int = 4):
    """``-G^ij g(nabla_{d_i} d_j, N)`` for the slices t = const with ``N = d_t``."""
    t, coords, a, g = _grw(n)
    G = christoffel(g, coords)
    Ginv = sp.diag(*([1 / a ** 2] * (n - 1)))
    H = 0
    for i in range(1, n):
        for j in range(1, n):
            # g(nabla_i d_j, N) = g_{0 m} Gamma^m_{ij} N^0 with N = d_t
            H += -Ginv[i - 1, j - 1] * (g[0, 0] * G[0][i][j])
    return sp.simplify(H), a, t


def warped_product_jump(n: int = 4):
    """Delta-layer coefficients of Ricci when ``a`` is continuous with a jump in ``a'``.

    Ricci is affine in ``a''``; replacing ``a''`` by ``[a'] delta`` gives the layer
    coefficient ``d Ric / d a''`` times the jump.  Returns (coefficient matrix, a, t).
    """
    R, a, t = warped_product_ricci(n)
    add = sp.diff(a, t, 2)
    w = sp.Symbol("w")
    C = R.subs(add, w).applyfunc(lambda e: sp.simplify(sp.diff(e, w)))
    return C, a, t


def rosen_wave_ricci():
    """Ricci of ``-dt^2 + dz^2 + F(u)^2 dx^2 + G(u)^2 dy^2`` with ``u = (t - z)/sqrt 2``.

    Returns (Ricci matrix, F, G, u-symbol expression).
    """
    t, z, x, y = sp.symbols("t z x y", real=True)
    u = (t - z) / sp.sqrt(2)
    F = sp.Function("F")(u)
    Gf = sp.Function("G")(u)
    g = sp.diag(-1, 1, F ** 2, Gf ** 2)
    return ricci(g, (t, z, x, y)), F, Gf, u
