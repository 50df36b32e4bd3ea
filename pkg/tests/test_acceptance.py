"""Acceptance criteria at their stated tolerances; each test prints one verdict line."""

import math
import time
from pathlib import Path

import mpmath as mp
import numpy as np
import pytest
import yaml

from lipschitz_hawking import config as cfgmod
from lipschitz_hawking.causal import geodesic, orthogonality_check, sample_pairs, tau, tau_monotonicity_check
from lipschitz_hawking.cli import main
from lipschitz_hawking.comparison import (ComparisonParams, const_alpha, const_CA_minus, const_K, hawking_experiment,
                                          index_form, segment_check)
from lipschitz_hawking.curvature import Hypersurface, ricci, ricci_error
from lipschitz_hawking.friedrichs import commutator_sweep, kink_case, two_slope_case
from lipschitz_hawking.grid import make_grid
from lipschitz_hawking.metric import catalog
from lipschitz_hawking.mollify import build_family

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


# --- 1. constants ---------------------------------------------------------------------------

def _sweep(count=200, seed=2024):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(2, 7))
        rho = float(rng.choice([-2.0, -1.0, -0.3, 0.0, 0.4, 1.0]))
        beta = -float(rng.uniform(0.1, 12.0))
        kappa = -float(10 ** rng.uniform(-3, 1))
        eta = float(rng.uniform(0.05, 2.0))
        T = float(rng.uniform(0.05, 3.0))
        if rho > 0:
            T = min(T, 0.99 * math.pi / (2 * math.sqrt(rho)))
        out.append((n, rho, beta, kappa, eta, T))
    return out


def _oracles(n, rho, beta, kappa, eta, T):
    s = mp.sqrt(-mp.mpf(kappa))
    ca = (mp.sinh(eta * s) / mp.sinh((T + eta) * s)) ** (n - 1)
    b = abs(mp.mpf(beta))
    if rho == 0:
        K = b - mp.mpf(n - 1) / T
        alpha = mp.mpf(n - 1) / b
    else:
        r = mp.sqrt(abs(mp.mpf(rho)))
        x = b / ((n - 1) * r)
        if rho < 0:
            K = b - (n - 1) * r * mp.coth(r * T)
            alpha = mp.acoth(x) / r if x > 1 else None
        else:
            K = b - (n - 1) * r * mp.cot(r * T)
            alpha = mp.acot(x) / r
    return float(ca), float(K), (None if alpha is None else float(alpha))


def test_criterion_01_constants(acceptance_record):
    mp.mp.dps = 30
    sweep = _sweep()
    oracle = [_oracles(*pt) for pt in sweep]
    start = time.perf_counter()
    worst, root, admissible = 0.0, 0.0, 0
    for (n, rho, beta, kappa, eta, T), (ca, K, alpha) in zip(sweep, oracle):
        worst = max(worst, abs(const_CA_minus(n, kappa, eta, T) - ca) / abs(ca),
                    abs(const_K(beta, T, rho, n) - K) / max(1.0, abs(K)))
        if alpha is not None:
            admissible += 1
            a = const_alpha(beta, rho, n)
            worst = max(worst, abs(a - alpha) / alpha)
            root = max(root, abs(const_K(beta, a, rho, n)))
    seconds = time.perf_counter() - start
    ok = worst <= 1e-10 and root <= 1e-10 and seconds < 1.0
    acceptance_record(1, "constants", ok, seconds,
                      f"max rel err {worst:.1e}, max |K(alpha)| {root:.1e} on {admissible} admissible points")
    assert ok


# --- 2. index form --------------------------------------------------------------------------

def test_criterion_02_index_form(acceptance_record):
    start = time.perf_counter()
    flat, curved = 0.0, 0.0
    for n in (3, 4, 5):
        for beta in (-1.0, -4.0, -9.0):
            for T in (0.3, 1.0, 1.4):
                flat = max(flat, abs(index_form(ComparisonParams(n=n, beta=beta, rho=0.0, T=T))))
                for rho in (-1.0, 1.0):
                    p = ComparisonParams(n=n, beta=beta, rho=rho, T=T)
                    curved = max(curved, abs(index_form(p, panels=10_000)))
    seconds = time.perf_counter() - start
    ok = flat <= 1e-9 and curved <= 1e-6 and seconds < 1.0
    acceptance_record(2, "index form", ok, seconds, f"rho=0 max {flat:.1e}, rho=+-1 max {curved:.1e}")
    assert ok


# --- 3. flat space --------------------------------------------------------------------------

def test_criterion_03_flat_space(acceptance_record):
    start = time.perf_counter()
    zero = lambda x: np.zeros(np.asarray(x).shape[:-1] + (np.asarray(x).shape[-1],) * 2)
    m3 = catalog("minkowski", {"n": 3})
    ric = 0.0
    fam = build_family(m3.metric, make_grid([(-1, 1), (-1, 1)], (61, 61)), (0.3, 0.2, 0.14), axes=(0, 1))
    for g in (*fam.smoothed, *fam.inner, *fam.outer):
        ric = max(ric, ricci_error(ricci(g), zero))
    m4 = catalog("minkowski")
    fam1 = build_family(m4.metric, make_grid([(-1, 1)], (1601,)), axes=(0,))
    for g in (*fam1.smoothed, *fam1.inner):
        ric = max(ric, ricci_error(ricci(g), zero))

    rng = np.random.default_rng(7)
    tau_err = 0.0
    for _ in range(100):
        p = rng.uniform(-1, 1, 4)
        d = rng.normal(size=3)
        d *= rng.uniform(0.0, 0.95) / np.linalg.norm(d)
        dt = rng.uniform(0.1, 2.0)
        q = p + dt * np.concatenate([[1.0], d])
        exact = dt * math.sqrt(1 - d @ d)
        tau_err = max(tau_err, abs(tau(m4.metric, p, q).value - exact) / exact)

    geo = 0.0
    for _ in range(10):
        x0 = rng.uniform(-1, 1, 4)
        v = np.concatenate([[1.0], rng.uniform(-0.7, 0.7, 3)])
        res = geodesic(m4.metric, x0, v, 1.5)
        geo = max(geo, float(np.max(np.abs(res.points - (x0 + res.params[:, None] * v)))))
    seconds = time.perf_counter() - start
    ok = ric <= 1e-8 and tau_err <= 5e-3 and geo <= 1e-8 and seconds < 60
    acceptance_record(3, "flat space", ok, seconds,
                      f"|Ric| {ric:.1e}, tau rel err {tau_err:.1e} (100 pairs), geodesic dev {geo:.1e}")
    assert ok


# --- 4. FD order ----------------------------------------------------------------------------

def test_criterion_04_fd_order(acceptance_record):
    start = time.perf_counter()
    m = catalog("grw_smooth")
    errs = [ricci_error(ricci(m.metric, make_grid([(-1, 1)], (n,)), axes=(0,)), m.ricci_regular)
            for n in (41, 81, 161, 321)]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    seconds = time.perf_counter() - start
    ok = all(3 <= r <= 5 for r in ratios) and seconds < 120
    acceptance_record(4, "FD order", ok, seconds, "ratios " + ", ".join(f"{r:.2f}" for r in ratios))
    assert ok


# --- 5. Friedrichs --------------------------------------------------------------------------

def test_criterion_05_friedrichs(acceptance_record):
    start = time.perf_counter()
    details, ok = [], True
    for case in (kink_case(), two_slope_case()):
        rep = commutator_sweep(case)
        l1, l2, linf = rep.norms(1.0), rep.norms(2.0), rep.norms(math.inf)
        r1, r2 = l1[-1] / l1[0], l2[-1] / l2[0]
        bounded = max(linf) <= 3 * float(np.median(linf)) or all(b <= a for a, b in zip(linf, linf[1:]))
        spread = rep.extra["kernel_uniformity"]
        decreasing = all(b < a for a, b in zip(l1, l1[1:]))
        ok &= decreasing and r1 <= 0.25 and r2 <= 0.35 and bounded and spread <= 1.10
        details.append(f"{case.name}: L1 {r1:.3f}, L2 {r2:.3f}, Linf ok={bounded}, mass spread {spread:.3f}")
    seconds = time.perf_counter() - start
    ok &= seconds < 300
    acceptance_record(5, "Friedrichs", ok, seconds, "; ".join(details))
    assert ok


# --- 6. Hawking saturation ------------------------------------------------------------------

def test_criterion_06_hawking(acceptance_record):
    start = time.perf_counter()
    sharp = hawking_experiment(catalog("grw_two_slope", {"n": 4, "m1": 1.0, "m2": 1.0}), -0.5)
    strict = hawking_experiment(catalog("grw_two_slope", {"n": 4, "m1": 0.5, "m2": 1.0}), -0.5)
    seconds = time.perf_counter() - start
    ok_sharp = abs(sharp.sup_tau_sigma - 1.5) <= 0.05 * 1.5 and abs(sharp.alpha - 1.5) <= 0.05 * 1.5
    ok_strict = (abs(strict.sup_tau_sigma - 1.5) <= 0.02 * 1.5 and strict.sup_tau_sigma <= strict.alpha
                 and strict.alpha == pytest.approx(3 / abs(strict.beta), rel=1e-12)
                 and abs(strict.alpha - 2.5) <= 0.01 * 2.5)
    floors_ok = all(r.checks["floors_final"] and r.checks["floors_trend"] and r.checks["delta_layer_nonnegative"]
                    for r in (sharp, strict))
    ok = ok_sharp and ok_strict and floors_ok and sharp.verdict and strict.verdict and seconds < 600
    acceptance_record(6, "Hawking", ok, seconds,
                      f"sharp sup {sharp.sup_tau_sigma:.4f} vs alpha {sharp.alpha:.4f}; strict sup "
                      f"{strict.sup_tau_sigma:.4f} <= alpha {strict.alpha:.4f}; final floors "
                      f"{sharp.curvature_floors[-1]:.3f}, {strict.curvature_floors[-1]:.3f}")
    assert ok


# --- 7. tau monotone convergence --------------------------------------------------------------

def test_criterion_07_tau_monotone(acceptance_record):
    rc = cfgmod.load(CONFIGS / "tau_convergence.yaml")
    start = time.perf_counter()
    model = catalog(rc.model["name"], rc.model["params"])
    fam = build_family(model.metric, make_grid([tuple(b) for b in rc.grid["bounds"]], rc.grid["points"]),
                       tuple(rc.mollifier["schedule"]), axes=(0,), seed=rc.seed)
    pairs = sample_pairs(model.metric, 50, tuple(rc.options["t_range"]), seed=rc.seed)
    rep = tau_monotonicity_check(model, fam, pairs, breaks=(0.0,))
    seconds = time.perf_counter() - start
    ok = rep.chain_ok and rep.final_gap <= 0.02 and seconds < 300
    acceptance_record(7, "tau monotone", ok, seconds,
                      f"{len(pairs)} pairs, violations {len(rep.violations)}, gaps "
                      + ", ".join(f"{g:.4f}" for g in rep.gaps))
    assert ok


# --- 8. orthogonality -------------------------------------------------------------------------

def test_criterion_08_orthogonality(acceptance_record):
    rng = np.random.default_rng(11)
    start = time.perf_counter()
    mink = catalog("minkowski")
    t1 = np.column_stack([rng.uniform(0.3, 1.2, 10), rng.uniform(-0.5, 0.5, (10, 3))])
    r1 = orthogonality_check(mink.metric, Hypersurface.level(0.0, 4), t1)
    ts = catalog("grw_two_slope", {"n": 4, "m1": 0.5, "m2": 1.0})
    t2 = np.column_stack([rng.uniform(-0.3, 0.8, 10), rng.uniform(-0.5, 0.5, (10, 3))])
    r2 = orthogonality_check(ts.metric, Hypersurface.level(-0.5, 4), t2, breaks=(0.0,))
    seconds = time.perf_counter() - start
    ok = r1.max_defect <= 2.0 and r2.max_defect <= 2.0 and len(r1.defects) == len(r2.defects) == 10
    ok &= seconds < 180
    acceptance_record(8, "orthogonality", ok, seconds,
                      f"max defect {r1.max_defect:.2e} deg (Minkowski), {r2.max_defect:.2e} deg (two-slope)")
    assert ok


# --- 9. segment inequality -------------------------------------------------------------------

def _segment(config):
    rc = cfgmod.load(CONFIGS / config)
    model = catalog(rc.model["name"], rc.model["params"])
    c = rc.comparison
    p = ComparisonParams(n=model.dim, kappa=c["kappa"], eta=c["eta"], T=c["T"])
    rep = segment_check(model.metric, Hypersurface.level(rc.sigma["t0"], model.dim), rc.options["B"], None, p)
    return rep, rc.options["expected_volume"]


def test_criterion_09_segment(acceptance_record):
    start = time.perf_counter()
    details, ok = [], True
    for config in ("segment_minkowski.yaml", "segment_eds.yaml"):
        rep, expected = _segment(config)
        vol_err = abs(rep.volume - expected) / expected
        ok &= rep.passed and rep.slack >= 0 and vol_err <= 0.01
        details.append(f"{config[:-5]}: slack {rep.slack:.3g}, volume {rep.volume:.5f} (rel err {vol_err:.1e})")
    seconds = time.perf_counter() - start
    ok &= seconds < 180
    acceptance_record(9, "segment", ok, seconds, "; ".join(details))
    assert ok


# --- 10. determinism -------------------------------------------------------------------------

@pytest.mark.parametrize("config", ["constants.yaml", "friedrichs_kink.yaml", "geodesic.yaml"])
def test_criterion_10_determinism(config, tmp_path, monkeypatch, acceptance_record):
    start = time.perf_counter()
    dirs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        monkeypatch.setenv(cfgmod.OUTPUT_ENV, str(d))
        assert main(["run", str(CONFIGS / config)]) == 0
        dirs.append(d)
    csvs = sorted(p.name for p in dirs[0].glob("*.csv"))
    same = bool(csvs) and all((dirs[0] / n).read_bytes() == (dirs[1] / n).read_bytes() for n in csvs)
    summary = [yaml.safe_load((d / "report.yaml").read_text())["summary"] for d in dirs]
    ok = same and summary[0] == summary[1]
    acceptance_record(10, f"determinism[{config[:-5]}]", ok, time.perf_counter() - start,
                      f"{len(csvs)} CSV files byte-identical across two runs")
    assert ok
