"""Batch experiment runner.

Subcommands: ``run <config>``, ``validate <config>``, ``catalog list`` and
``report summarize <dir>``.  Exit codes: 0 success, 1 experiment FAIL, 2 invalid
configuration or usage.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np
import yaml

from . import config as cfgmod
from .metric import CATALOG, catalog

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


@dataclass
class Outcome:
    verdict: bool
    summary: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    plots: dict = field(default_factory=dict)  # name -> (x, y)


# --- deterministic output ------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12e}"
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def dat_text(x, y) -> str:
    return "".join(f"{fmt(a)} {fmt(b)}\n" for a, b in zip(x, y))


def _plain(obj):
    """Convert numpy scalars/arrays and tuples for YAML output."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_outputs(rc: cfgmod.RunConfig, out: Outcome, runtime: float) -> Path:
    d = rc.output_dir
    d.mkdir(parents=True, exist_ok=True)
    files = []
    for name in sorted(out.tables):
        header, rows = out.tables[name]
        (d / f"{name}.csv").write_text(csv_text(header, rows), encoding="utf-8")
        files.append(f"{name}.csv")
    for name in sorted(out.plots):
        x, y = out.plots[name]
        (d / f"{name}.dat").write_text(dat_text(x, y), encoding="utf-8")
        files.append(f"{name}.dat")
    report = {
        "version": version(),
        "experiment": rc.experiment,
        "verdict": "PASS" if out.verdict else "FAIL",
        "seed": rc.seed,
        "runtime_seconds": round(runtime, 3),
        "config": rc.to_dict(),
        "summary": _plain(out.summary),
        "files": files,
    }
    (d / "report.yaml").write_text(yaml.safe_dump(report, sort_keys=True), encoding="utf-8")
    return d


# --- experiments ------------------------------------------------------------------------

def _model(rc):
    return catalog(rc.model["name"], rc.model.get("params") or {})


def _family(rc, model):
    from .grid import make_grid
    from .mollify import build_family
    g = rc.grid
    grid = make_grid([tuple(b) for b in g["bounds"]], g["points"])
    return build_family(model.metric, grid, tuple(rc.mollifier["schedule"]), rc.mollifier["profile"],
                        axes=tuple(g.get("axes") or range(len(g["bounds"]))), seed=rc.seed)


def exp_constants(rc) -> Outcome:
    from .comparison import ParameterError, const_alpha, const_K
    o = rc.options
    betas = o.get("betas") or list(np.linspace(-8.0, -1.0, 15))
    rhos = o.get("rhos") or [-2.0, -1.0, 0.0, 0.5, 1.0]
    ns = o.get("dims") or [3, 4]
    rows, worst = [], 0.0
    for n in ns:
        for rho in rhos:
            for b in betas:
                try:
                    a = const_alpha(float(b), float(rho), int(n))
                except ParameterError:
                    continue
                k = const_K(float(b), a, float(rho), int(n))
                worst = max(worst, abs(k))
                rows.append((float(b), float(rho), int(n), a, k))
    return Outcome(worst <= 1e-10, {"rows": len(rows), "max_abs_K_at_alpha": worst},
                   {"constants": (["beta", "rho", "n", "alpha", "K_at_alpha"], rows)})


def exp_friedrichs(rc) -> Outcome:
    from .friedrichs import commutator_sweep, kink_case, two_slope_case
    from .grid import make_grid
    o = rc.options
    case_name = o.get("case", "kink")
    kw = {"schedule": tuple(rc.mollifier["schedule"]), "profile": rc.mollifier["profile"],
          "a_eps_mode": o.get("a_eps_mode", "frozen")}
    if "grid" in o:
        kw["grid"] = make_grid([tuple(b) for b in o["grid"]["bounds"]], o["grid"]["points"])
    if case_name == "kink":
        case = kink_case(**kw)
    elif case_name == "two_slope":
        p = rc.model.get("params") or {}
        case = two_slope_case(float(p.get("m1", 0.5)), float(p.get("m2", 1.0)), **kw)
    else:
        raise cfgmod.ConfigError([cfgmod.Diagnostic("options.case", "must be kink or two_slope")])
    rep = commutator_sweep(case)
    rows = [(e, "inf" if math.isinf(p) else p, rep.table[(e, p)], rep.flags[p]) for p in rep.p_list
            for e in rep.epsilons]
    plots = {f"norm_p{'inf' if math.isinf(p) else int(p)}": (rep.epsilons, rep.norms(p)) for p in rep.p_list}
    extra = {k: v for k, v in rep.extra.items()
             if k in ("kernel_uniformity", "kernel_bound", "kernel_mass_x", "kernel_mass_y")}
    summary = {"case": case.name, "trend": {str(k): v for k, v in rep.trend.items()},
               "flags": {str(k): v for k, v in rep.flags.items()}, **extra}
    return Outcome(rep.passed, summary,
                   {"friedrichs": (["epsilon", "p", "norm", "trend_flag"], rows)}, plots)


def exp_ricci_commutator(rc) -> Outcome:
    from .friedrichs import ricci_commutator
    model = _model(rc)
    fam = _family(rc, model)
    K = rc.options.get("K")
    rep = ricci_commutator(model, fam, K=tuple(tuple(b) for b in K) if K else None)
    rows = [(e, "inf" if math.isinf(p) else p, rep.table[(e, p)], rep.flags[p]) for p in rep.p_list
            for e in rep.epsilons]
    plots = {f"ricci_norm_p{'inf' if math.isinf(p) else int(p)}": (rep.epsilons, rep.norms(p)) for p in rep.p_list}
    return Outcome(rep.passed, {"trend": {str(k): v for k, v in rep.trend.items()}, **rep.extra},
                   {"ricci_commutator": (["epsilon", "p", "norm", "trend_flag"], rows)}, plots)


def _sigma(rc, n):
    from .curvature import Hypersurface
    box = rc.sigma.get("box")
    return Hypersurface.level(float(rc.sigma["t0"]), n, box)


def exp_mean_curvature(rc) -> Outcome:
    from .curvature import constant_field, mean_bound_check, mean_curvature_convergence
    model = _model(rc)
    n = model.dim
    sigma = _sigma(rc, n)
    b = rc.options.get("b", -1.1)
    tilt = float(rc.options.get("tilt", 0.2))

    def tilted(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 0] = 1.0 + tilt * np.sin(x[..., 1])
        return out

    mb = mean_bound_check(model.metric, sigma, b, [constant_field(np.eye(n)[0]), tilted], kinks=model.kinks)
    fam = _family(rc, model)
    conv = mean_curvature_convergence(model.metric, fam, sigma, b=b, kinks=model.kinks)
    rows = [(e, d, h) for e, d, h in zip(conv.epsilons, conv.sup_diff, conv.sigma_mean_curvature)]
    return Outcome(mb.passed and conv.passed,
                   {"bound": b, "esssup": mb.esssup, "discrepancy": mb.discrepancy,
                    "ratio": conv.final_ratio, "consequence": conv.consequence},
                   {"mean_curvature": (["epsilon", "sup_diff", "sigma_mean_curvature"], rows),
                    "slab_discrepancy": (["halfwidth", "discrepancy"], list(zip(mb.halfwidths, mb.discrepancy)))},
                   {"mean_curvature_diff": (conv.epsilons, conv.sup_diff)})


def exp_tau_convergence(rc) -> Outcome:
    from .causal import sample_pairs, tau_monotonicity_check
    model = _model(rc)
    fam = _family(rc, model)
    o = rc.options
    pairs = sample_pairs(model.metric, int(o.get("pairs", 50)), tuple(o.get("t_range", (-0.5, 0.3))), seed=rc.seed)
    rep = tau_monotonicity_check(model, fam, pairs, breaks=tuple(k.offset for k in model.kinks))
    header = ["pair"] + [f"tau_eps{i}" for i in range(len(fam.schedule))] + ["tau"]
    rows = [(i, *vals) for i, vals in enumerate(rep.values)]
    ok = rep.chain_ok and rep.gaps_decreasing and rep.final_gap <= 0.02
    return Outcome(ok, {"chain_ok": rep.chain_ok, "gaps": rep.gaps, "final_gap": rep.final_gap,
                        "violations": len(rep.violations)},
                   {"tau_chain": (header, rows),
                    "tau_gaps": (["epsilon", "max_rel_gap"], list(zip(fam.schedule, rep.gaps)))},
                   {"tau_gap": (list(fam.schedule), rep.gaps)})


def exp_segment(rc) -> Outcome:
    from .comparison import ComparisonParams, segment_check
    from .causal import omega_volume
    model = _model(rc)
    n = model.dim
    c = rc.comparison
    params = ComparisonParams(n=n, kappa=c["kappa"], beta=c["beta"] or -1.0, rho=c["rho"], eta=c["eta"], T=c["T"])
    B = [tuple(b) for b in (rc.options.get("B") or [[0.0, 1.0]] * (n - 1))]
    sigma = _sigma(rc, n)
    rep = segment_check(model.metric, sigma, B, None, params, per_axis=int(rc.options.get("per_axis", 3)),
                        audit=bool(rc.options.get("audit", True)))
    ov = omega_volume(model.metric, sigma, B, params.T)
    cong = ov["congruence"]
    rows = [(rep.lhs, rep.rhs, rep.slack, rep.constant, rep.sigma_area, rep.volume, rep.passed)]
    ok = rep.passed
    summary = {"lhs": rep.lhs, "rhs": rep.rhs, "slack": rep.slack, "C_A_minus": rep.constant,
               "volume": ov["volume"], "near_cut": rep.near_cut, "violations": rep.violations}
    expected = rc.options.get("expected_volume")
    if expected is not None:
        rel = abs(ov["volume"] - expected) / abs(expected)
        summary["volume_rel_error"] = rel
        ok = ok and rel <= 0.01
    return Outcome(ok, summary,
                   {"segment": (["lhs", "rhs", "slack", "C_A_minus", "sigma_area", "volume", "pass"], rows)},
                   {"area_element": (cong.times, cong.area[:, 0])})


def exp_hawking(rc) -> Outcome:
    from .comparison import hawking_experiment
    model = _model(rc)
    c = rc.comparison
    g = rc.grid
    rep = hawking_experiment(model, float(rc.sigma["t0"]), beta=c.get("beta"), delta=float(c["delta"]),
                             rho=float(c["rho"]), grid_bounds=[tuple(b) for b in g["bounds"]],
                             grid_points=int(g["points"][0]), schedule=tuple(rc.mollifier["schedule"]),
                             seed=rc.seed)
    floors = list(zip(rep.epsilons, rep.curvature_floors, rep.negative_parts))
    probes = [(*p, v) for p, v in rep.tau_sigma]
    summary = {"alpha": rep.alpha, "beta": rep.beta, "delta": rep.delta, "sup_tau_sigma": rep.sup_tau_sigma,
               "oracle_sup": rep.oracle_sup, "saturation_expected": rep.saturation_expected, "checks": rep.checks,
               "mean_curvature": rep.mean_curvature, "notes": rep.notes}
    return Outcome(rep.verdict, summary,
                   {"curvature_floors": (["epsilon", "floor", "negative_part"], floors),
                    "tau_sigma_probes": ([f"x{i}" for i in range(model.dim)] + ["tau_sigma"], probes)},
                   {"floors": (rep.epsilons, rep.curvature_floors)})


def exp_geodesic(rc) -> Outcome:
    from .causal import geodesic
    model = _model(rc)
    o = rc.options
    n = model.dim
    x0 = np.asarray(o.get("x0", [float(rc.sigma["t0"])] + [0.0] * (n - 1)), dtype=float)
    v0 = np.asarray(o.get("v0", [1.0] + [0.0] * (n - 1)), dtype=float)
    res = geodesic(model, x0, v0, float(o.get("T", 1.0)), step=float(o.get("step", 1e-3)),
                   record_every=int(o.get("record_every", 10)))
    rows = [(lam, *x, *v) for lam, x, v in zip(res.params, res.points, res.velocities)]
    header = ["param"] + [f"x{i}" for i in range(n)] + [f"v{i}" for i in range(n)]
    return Outcome(res.status in o.get("accept_status", ["reached_T", "hit_singularity"]),
                   {"status": res.status, "proper_time": res.proper_time, "crossings": res.crossings,
                    "end": res.end},
                   {"geodesic": (header, rows)}, {"geodesic_t": (res.params, res.points[:, 0])})


EXPERIMENT_FUNCS = {
    "constants": exp_constants,
    "friedrichs_sweep": exp_friedrichs,
    "ricci_commutator": exp_ricci_commutator,
    "mean_curvature": exp_mean_curvature,
    "tau_convergence": exp_tau_convergence,
    "segment": exp_segment,
    "hawking": exp_hawking,
    "geodesic": exp_geodesic,
}


# --- commands -----------------------------------------------------------------------------

def run_config(rc: cfgmod.RunConfig) -> tuple[Outcome, Path]:
    np.random.seed(rc.seed)
    start = time.perf_counter()
    out = EXPERIMENT_FUNCS[rc.experiment](rc)
    path = write_outputs(rc, out, time.perf_counter() - start)
    return out, path


def cmd_run(args) -> int:
    try:
        rc = cfgmod.load(args.config)
    except cfgmod.ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        out, path = run_config(rc)
    except cfgmod.ConfigError as exc:
        for d in exc.diagnostics:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{rc.experiment}: {'PASS' if out.verdict else 'FAIL'} -> {path}")
    return EXIT_OK if out.verdict else EXIT_FAIL


def cmd_validate(args) -> int:
    try:
        raw = cfgmod.load_raw(args.config)
    except cfgmod.ConfigError as exc:
        diags = exc.diagnostics
    except (OSError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    else:
        diags = cfgmod.validate(raw)
    for d in diags:
        print(d)
    if not diags:
        print("ok")
    return EXIT_OK if not diags else EXIT_CONFIG


def cmd_catalog(args) -> int:
    for name in CATALOG:
        m = catalog(name)
        params = ", ".join(f"{k}={v}" for k, v in sorted(m.params.items()))
        print(f"{name}: dim={m.dim} {params}")
    return EXIT_OK


def cmd_summarize(args) -> int:
    root = Path(args.dir)
    reports = sorted(root.rglob("report.yaml"))
    if not reports:
        print(f"no reports under {root}", file=sys.stderr)
        return EXIT_CONFIG
    ok = True
    for p in reports:
        rep = yaml.safe_load(p.read_text(encoding="utf-8"))
        ok &= rep.get("verdict") == "PASS"
        print(f"{rep.get('verdict', '?'):4s}  {rep.get('experiment', '?'):18s}  {p.parent}")
    return EXIT_OK if ok else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lipschitz-hawking", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {version()}")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run the experiment described by a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("validate", help="print configuration diagnostics")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("catalog", help="model catalog")
    csub = p.add_subparsers(dest="action", required=True)
    c = csub.add_parser("list", help="list catalog models with default parameters")
    c.set_defaults(func=cmd_catalog)
    p = sub.add_parser("report", help="report utilities")
    rsub = p.add_subparsers(dest="action", required=True)
    r = rsub.add_parser("summarize", help="tabulate verdicts of all reports under a directory")
    r.add_argument("dir")
    r.set_defaults(func=cmd_summarize)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
