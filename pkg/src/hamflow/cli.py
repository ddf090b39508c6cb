"""Command-line front door: JSON config in, CSV/JSON artifacts out.

Exit codes: 0 all verdicts pass, 1 usage or config error, 2 verdict
failures.  Diagnostics go to stderr; machine-readable results go to files
under the output directory only.  Repeated runs with the same config
produce bit-identical outputs (deterministic sampling, no RNG anywhere).
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import counterexample as cx
from . import weakcheck
from .catalog import (make_betas, make_field, make_initial, make_potential,
                      make_psi, make_u_tilde)
from .chart import build_chart, cov_integral, reduce_fiber
from .config import RunConfig, load_config, prepare_out_dir
from .energy1d import (NonIntegrableIntervalError, PhasePoint, check_confinement,
                       energy_slice, free_zone_check, orbit_flow,
                       solve_classical_transport, time_param)
from .fields import check_px, classify_point
from .numerics import halton_box
from .transport import TransportSolution


def _write_json(out: Path, name: str, payload: dict, seed_free: bool) -> None:
    payload = dict(payload)
    payload["seed_free"] = seed_free
    with open(out / name, "w") as fh:
        json.dump(payload, fh, indent=2, default=float)


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# scenarios

def run_px_check(cfg: RunConfig, out: Path, seed_free: bool) -> bool:
    _, b = make_field(cfg.field)
    px = cfg.px
    eps = float(px.get("epsilon", 0.25))
    n_dirs = int(px.get("n_dirs", 64))
    n_samples = int(px.get("n_samples", 256))
    vanish = float(px.get("vanish_tol", 0.0))
    points = px.get("points", [[1.0, 1.0], [0.0, 0.0], [0.0, -2.0]])
    rows = []
    for pt in points:
        cls = classify_point(b, pt, eps, n_dirs=n_dirs, n_samples=n_samples,
                             vanish_tol=vanish)
        wit = check_px(b, pt, eps, n_dirs=n_dirs, n_samples=n_samples)
        rows.append((pt[0], pt[1], cls.name,
                     wit.xi[0] if wit else np.nan,
                     wit.xi[1] if wit else np.nan,
                     wit.alpha if wit else np.nan))
    with open(out / "px_points.csv", "w") as fh:
        fh.write("x1,x2,class,xi1,xi2,alpha\n")
        for r in rows:
            fh.write(f"{r[0]:.12g},{r[1]:.12g},{r[2]},{r[3]:.12g},{r[4]:.12g},"
                     f"{r[5]:.12g}\n")
    _write_json(out, "px_report.json",
                {"epsilon": eps, "n_dirs": n_dirs, "n_samples": n_samples,
                 "classes": [r[2] for r in rows], "passed": True}, seed_free)
    return True


def run_chart(cfg: RunConfig, out: Path, seed_free: bool) -> bool:
    H, b = make_field(cfg.field)
    ch = cfg.chart
    center = ch.get("center", [0.0, -2.0])
    eps = float(ch.get("epsilon", 0.4))
    eta = float(ch.get("eta", eps / np.sqrt(2.0) * 0.99))
    wit = check_px(b, center, eps,
                   n_dirs=int(ch.get("n_dirs", 64)),
                   n_samples=int(ch.get("n_samples", 256)))
    if wit is None:
        _log(f"no direction witness at {center}; chart not built")
        _write_json(out, "chart_report.json", {"passed": False,
                                               "reason": "no witness"}, seed_free)
        return False
    chart = build_chart(H, center, wit, eta, b=b)
    chart.dump_csv(out / "chart_profiles.csv")

    n_round = int(ch.get("roundtrip_samples", 10_000))
    pts = halton_box(n_round, [-eta, -eta], [eta, eta])
    x1, x2 = chart.frame_to_xy(pts[:, 0], pts[:, 1])
    y1, y2 = chart.forward(x1, x2)
    r1, r2 = chart.invert(y1, y2)
    roundtrip = float(np.max(np.hypot(r1 - x1, r2 - x2)))

    resolutions = cfg.grid.get("resolutions", [16, 32, 64, 128])
    diffs = [cov_integral(chart, lambda a, c: np.exp(a) * (1.0 + c * c), n=n).difference
             for n in resolutions]
    order = weakcheck.observed_order(diffs)

    for k, level in enumerate(cfg.levels):
        try:
            red = reduce_fiber(chart, float(level), segment=0)
            red.dump_csv(out / f"fiber_{k}.csv")
        except ValueError as exc:
            _log(f"fiber at level {level}: {exc}")
    tol = cfg.tol("chart_roundtrip", 1e-10)
    passed = roundtrip <= tol and order >= cfg.tol("cov_order", 1.0)
    _write_json(out, "chart_report.json",
                {"roundtrip_max": roundtrip, "cov_differences": diffs,
                 "cov_order": order, "alpha": wit.alpha,
                 "xi": list(map(float, wit.xi)), "passed": passed}, seed_free)
    return passed


def run_classical(cfg: RunConfig, out: Path, seed_free: bool) -> bool:
    V = make_potential(cfg.potential)
    report: dict = {"potential": V.name, "confined": check_confinement(V),
                    "energies": []}
    passed = True
    e_tol = cfg.tol("energy_conservation", 1e-9)
    p_tol = cfg.tol("periodicity", 1e-6)
    for E in cfg.energies:
        slc = energy_slice(V, float(E))
        free_zone_check(V, slc)
        slc.dump_csv(out / f"slice_E{E:g}.csv")
        entry = {"E": float(E), "intervals": [], "periods": []}
        for i, iv in enumerate(slc.intervals):
            rec = {"a": iv.a, "b": iv.b, "a_open": iv.a_open, "b_open": iv.b_open,
                   "a_regular": iv.a_regular, "b_regular": iv.b_regular}
            try:
                tp = time_param(V, slc, i)
                rec["l"] = tp.l
                if not (iv.a_open or iv.b_open):
                    entry["periods"].append(2 * tp.l)
                    mid = 0.5 * (iv.a + iv.b)
                    y0 = float(np.sqrt(max(2 * (slc.E - V(mid)), 0.0)))
                    p0 = PhasePoint(x=mid, y=y0)
                    q = orbit_flow(slc, p0, 2 * tp.l)
                    rec["period_defect"] = float(np.hypot(q.x - p0.x, q.y - p0.y))
                    rec["energy_defect"] = abs(q.energy(V) - p0.energy(V))
                    if rec["period_defect"] > p_tol or rec["energy_defect"] > e_tol:
                        passed = False
            except NonIntegrableIntervalError as exc:
                rec["non_integrable"] = str(exc)
            entry["intervals"].append(rec)
        report["energies"].append(entry)
    u0 = make_initial(cfg.u0 if cfg.u0.get("name") != "x1_upper" else {"name": "x1"})
    gr = cfg.grid
    n = int(gr.get("n", 33))
    box = gr.get("phase_window", [[-1.5, 1.5], [-1.5, 1.5]])
    xs = np.linspace(box[0][0], box[0][1], n)
    ys = np.linspace(box[1][0], box[1][1], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    for t in cfg.times:
        vals = solve_classical_transport(V, u0, float(t), X.ravel(), Y.ravel(),
                                         window=V.window)
        data = np.column_stack([X.ravel(), Y.ravel(), vals])
        np.savetxt(out / f"classical_t{t:g}.csv", data, delimiter=",",
                   comments="", header="x,y,u")
    report["passed"] = passed
    _write_json(out, "classical_report.json", report, seed_free)
    return passed


def run_cx_flow(cfg: RunConfig, out: Path, seed_free: bool) -> bool:
    psi = make_psi(cfg.psi)
    n = int(cfg.grid.get("n", 16))
    box = cfg.grid.get("window", [[0.05, 1.0], [0.05, 1.0]])
    pts = halton_box(n * n, [box[0][0], box[1][0]], [box[0][1], box[1][1]])
    rows = []
    for t in cfg.times:
        y1, y2 = cx.flow_x(float(t), pts[:, 0], pts[:, 1])
        z1, z2 = cx.flow_x_psi(psi, float(t), pts[:, 0], pts[:, 1])
        for i in range(pts.shape[0]):
            rows.append((t, pts[i, 0], pts[i, 1], y1[i], y2[i], z1[i], z2[i]))
    np.savetxt(out / "flow_samples.csv", np.array(rows), delimiter=",",
               comments="", header="t,x1,x2,X1,X2,Xpsi1,Xpsi2")
    _write_json(out, "flow_report.json",
                {"n_points": n * n, "times": list(cfg.times), "passed": True},
                seed_free)
    return True


def _family_solution(cfg: RunConfig) -> tuple[TransportSolution, object, object]:
    u0 = make_initial(cfg.u0)
    ut = make_u_tilde(cfg.u_tilde, u0)
    return cx.solution_family(u0, ut), u0, ut


def run_cx_family(cfg: RunConfig, out: Path, seed_free: bool) -> bool:
    sol, _, _ = _family_solution(cfg)
    n = int(cfg.grid.get("n", 64))
    box = cfg.grid.get("window", [[-1.0, 1.0], [-1.5, 1.5]])
    xs = np.linspace(box[0][0], box[0][1], n)
    ys = np.linspace(box[1][0], box[1][1], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    for t in cfg.times:
        vals = sol.at(float(t), X, Y)
        np.savetxt(out / f"family_t{t:g}.csv",
                   np.column_stack([X.ravel(), Y.ravel(), vals.ravel()]),
                   delimiter=",", comments="", header="x,y,u")
    _write_json(out, "family_report.json",
                {"times": list(cfg.times), "passed": True}, seed_free)
    return True


def run_cx_verify(cfg: RunConfig, out: Path, seed_free: bool,
                  threads: int = 1) -> bool:
    psi = make_psi(cfg.psi)
    u0 = make_initial(cfg.u0)
    ut = make_u_tilde(cfg.u_tilde, u0)
    ut_eff = u0 if ut is None else ut
    betas = make_betas(cfg.betas)
    levels = [float(s) for s in cfg.levels]

    mass = cx.check_masscons(ut_eff, u0, levels)
    mass2 = cx.check_masscons2(ut_eff, u0, list(betas), levels)
    moments = cx.hamiltonian_moment_residual(ut_eff, u0, levels,
                                             degree=int(cfg.moment_degree))
    mtol = cfg.tol("masscons", 1e-10)
    m2tol = cfg.tol("masscons2", 1e-8)
    mom_tol = cfg.tol("moments", 1e-8)

    meas = cfg.measure
    reports = []
    times = meas.get("times", cfg.times)
    n_points = int(meas.get("n_points", 200_000))

    def _one(t):
        return cx.measure_preservation_report(float(t), n_points=n_points,
                                              bins=int(meas.get("bins", 20)),
                                              psi=psi)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(_one, times))
    else:
        reports = [_one(t) for t in times]
    meas_tol = cfg.tol("measure_mean_dev", 3e-3)

    # semigroup and ODE-residual spot checks on deterministic samples
    pts = halton_box(2048, [0.06, 0.06], [1.0, 1.0])
    s_arr = 0.05 + 0.3 * halton_box(2048, [0.0], [1.0])[:, 0]
    t_arr = 0.05 + 0.3 * halton_box(2048, [0.31], [0.77])[:, 0]
    m1, m2_ = cx.flow_x_psi(psi, s_arr, pts[:, 0], pts[:, 1])
    c1, c2 = cx.flow_x_psi(psi, t_arr, m1, m2_)
    d1, d2 = cx.flow_x_psi(psi, s_arr + t_arr, pts[:, 0], pts[:, 1])
    semigroup = float(np.max(np.hypot(c1 - d1, c2 - d2)))

    tau = 1e-5
    tmid = 0.18
    ode_pts = halton_box(4096, [0.1, 0.1], [1.0, 1.0])
    fwd1, fwd2 = cx.flow_x(tmid + tau, ode_pts[:, 0], ode_pts[:, 1])
    bwd1, bwd2 = cx.flow_x(tmid - tau, ode_pts[:, 0], ode_pts[:, 1])
    at1, at2 = cx.flow_x(tmid, ode_pts[:, 0], ode_pts[:, 1])
    bv1, bv2 = cx.b_example(at1, at2)
    safe = (np.abs(np.abs(at1) - np.abs(at2)) > 0.05) & (np.abs(at2) > 0.05) \
        & np.isfinite(bv1)
    dd1 = (fwd1 - bwd1) / (2 * tau)
    dd2 = (fwd2 - bwd2) / (2 * tau)
    speed = np.hypot(bv1[safe], bv2[safe])
    ode_rel = float(np.max(np.hypot(dd1[safe] - bv1[safe], dd2[safe] - bv2[safe])
                           / speed))

    verdicts = {
        "masscons": bool(np.all(mass <= mtol)),
        "masscons2": bool(np.all(mass2 <= m2tol)),
        "moments": bool(np.all(moments <= mom_tol)),
        "measure_preservation": all(r["mean_abs_deviation"] <= meas_tol
                                    for r in reports),
        "semigroup": semigroup <= cfg.tol("semigroup", 1e-9),
        "ode_residual": ode_rel <= cfg.tol("ode_residual", 1e-6),
    }
    payload = {
        "levels": levels,
        "masscons_residuals": mass.tolist(),
        "masscons2_residuals": mass2.tolist(),
        "moment_residuals": moments.tolist(),
        "moments_selecting": bool(np.all(moments <= mom_tol)),
        "measure_reports": reports,
        "semigroup_defect": semigroup,
        "ode_residual_rel": ode_rel,
        "verdicts": verdicts,
        "passed": all(verdicts.values()),
    }
    _write_json(out, "verify_report.json", payload, seed_free)
    with open(out / "verify_residuals.csv", "w") as fh:
        fh.write("level,masscons," + ",".join(f"masscons2_{b.name}" for b in betas)
                 + "," + ",".join(f"moment_deg{k}"
                                  for k in range(int(cfg.moment_degree) + 1)) + "\n")
        for i, s in enumerate(levels):
            fh.write(f"{s:g},{mass[i]:.6e},"
                     + ",".join(f"{v:.6e}" for v in mass2[i])
                     + "," + ",".join(f"{v:.6e}" for v in moments[i]) + "\n")
    return payload["passed"]


def run_weak_verify(cfg: RunConfig, out: Path, seed_free: bool,
                    threads: int = 1) -> bool:
    _, b = make_field(cfg.field)
    sol, u0, ut = _family_solution(cfg)
    betas = make_betas(cfg.betas)
    ph = cfg.phi
    centers = ph.get("centers", [[0.3, -0.7], [-0.3, -0.7], [0.0, 0.75]])
    radii = ph.get("radii", [0.15, 0.2])
    ks = ph.get("ks", [0.5, 1.0, 2.0])
    fam = weakcheck.test_family(centers, radii, ks,
                                t_center=float(ph.get("t_center", 0.5)),
                                t_radius=float(ph.get("t_radius", 0.2)),
                                band_rho=float(ph.get("band_rho", 0.05)))
    resolutions = cfg.grid.get("resolutions", [16, 32, 64, 128])
    report = weakcheck.check_R(sol, b, u0, list(betas), fam,
                               resolutions=resolutions,
                               order_threshold=cfg.tol("weak_order", 1.0))
    report.to_json(out / "weak_report.json")
    report.to_csv(out / "weak_report.csv")
    ut_eff = u0 if ut is None else ut
    mass2 = cx.check_masscons2(ut_eff, u0, list(betas), [1.0])
    _write_json(out, "weak_verify_report.json",
                {"passed": report.passed,
                 "masscons2_level1": mass2.tolist(),
                 "n_test_functions": len(fam)}, seed_free)
    _log(report.summary())
    return report.passed


def run_report(cfg: RunConfig, out: Path, seed_free: bool) -> bool:
    merged = {}
    ok = True
    for p in sorted(out.glob("*_report.json")):
        if p.name == "report.json":
            continue
        with open(p) as fh:
            payload = json.load(fh)
        merged[p.stem] = payload
        ok = ok and bool(payload.get("passed", True))
    merged["passed"] = ok
    _write_json(out, "report.json", merged, seed_free)
    return ok


# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hamflow",
        description="Energy-coordinate flows and transport checks")
    parser.add_argument("--config", type=str, default=None,
                        help="JSON config path")
    parser.add_argument("--out", type=str, default=None,
                        help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed-free", action="store_true",
                        help="assert that no randomness is used (always true)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("px-check", "chart", "classical", "weak-verify", "report"):
        sub.add_parser(name)
    pcx = sub.add_parser("counterexample")
    pcx.add_argument("action", choices=["flow", "family", "verify"])

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        if args.out:
            cfg.out_dir = args.out
        if args.threads:
            cfg.threads = args.threads
        out = prepare_out_dir(cfg.out_dir)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        _log(f"config error: {exc}")
        return 1

    seed_free = bool(args.seed_free)
    try:
        if args.command == "px-check":
            ok = run_px_check(cfg, out, seed_free)
        elif args.command == "chart":
            ok = run_chart(cfg, out, seed_free)
        elif args.command == "classical":
            ok = run_classical(cfg, out, seed_free)
        elif args.command == "counterexample":
            if args.action == "flow":
                ok = run_cx_flow(cfg, out, seed_free)
            elif args.action == "family":
                ok = run_cx_family(cfg, out, seed_free)
            else:
                ok = run_cx_verify(cfg, out, seed_free, threads=cfg.threads)
        elif args.command == "weak-verify":
            ok = run_weak_verify(cfg, out, seed_free, threads=cfg.threads)
        else:
            ok = run_report(cfg, out, seed_free)
    except (ValueError, OSError) as exc:
        _log(f"error: {exc}")
        return 1
    return 0 if ok else 2


if __name__ == "__main__":
    sys.exit(main())
