"""Command-line front end.

Subcommands
-----------
run          optimise one deployment and write report.json plus CSV tables
sweep-omega  constrained vs unconstrained objective over access/backhaul RB splits
sweep-n      objective over the number of RRHs per cell, fixed M or fixed N*M

Exit codes: 0 success, 1 configuration error, 2 infeasible, 3 not converged.
"""

import argparse
import csv
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .access import AccessModel
from .backhaul import outage_at
from .config import build_params, build_settings, build_traffic, load_config, traffic_seed
from .mc_oracle import mc_access_rate, mc_backhaul_outage
from .model import ConfigError, Layout, traffic_pdf
from .optimizer import optimize, optimize_restarts
from .report import LN2

log = logging.getLogger("rrhplace")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NOT_CONVERGED = 0, 1, 2, 3


# --- CSV helpers ----------------------------------------------------------------

def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _num(v):
    v = float(v)
    return "nan" if math.isnan(v) else repr(v)


# --- single run -------------------------------------------------------------------

def _run_one(cfg, changes, seed, no_constraint, restarts=1, record_trajectory=False,
             traffic_seed=None):
    """Build the objects for one point and optimise it.

    ``seed`` draws the initial layout and, unless ``traffic_seed`` is given,
    the hotspots too.
    """
    params = build_params(cfg, **changes)
    traffic = build_traffic(cfg, params, seed=seed if traffic_seed is None else traffic_seed)
    settings = build_settings(cfg, no_constraint=no_constraint,
                              record_trajectory=record_trajectory)
    access = AccessModel(params, traffic)
    if restarts > 1:
        rep = optimize_restarts(traffic, params, settings, seed=seed, restarts=restarts,
                                access=access)
    else:
        rep = optimize(traffic, params, settings, seed=seed, access=access)
    return rep, params, traffic, access


def mc_validate(rep, params, traffic, access, mc_cfg, seed, workers=1):
    """Monte-Carlo audits of the final layout: access bound and every RRH's outage."""
    layout = Layout(rep.rrh_array(), np.asarray(rep.cu_xy))
    acc = mc_access_rate(layout, traffic, params, n_trials=mc_cfg["n_trials"],
                         n_fading=mc_cfg["n_fading"], seed=seed, workers=workers, model=access)
    rates = np.asarray(rep.expected_rate_bits) * LN2
    dist = np.asarray(rep.cu_dist)
    closed = outage_at(dist, rates[:, None], params)
    mc = mc_backhaul_outage(dist, rates[:, None], params, n_trials=mc_cfg["outage_trials"],
                            seed=seed)
    diff = np.abs(mc.prob - closed)
    # binomial SE under the closed form too: the empirical one is 0 when all draws agree
    se = np.sqrt(np.maximum(closed * (1.0 - closed), mc.prob * (1.0 - mc.prob)) / mc.n_trials)
    z = np.where(se > 0, diff / np.maximum(se, 1e-300), np.where(diff > 0, np.inf, 0.0))
    return {
        "access": {
            "mc_mean_bits": acc.mean / LN2,
            "mc_se_bits": acc.se / LN2,
            "bound_mean_bits": acc.lb_mean / LN2,
            "paired_gap_se_bits": acc.gap_se / LN2,
            "n_trials": acc.n_trials,
            "bound_holds": bool(acc.mean >= acc.lb_mean - 3.0 * acc.gap_se),
        },
        "outage": {
            "max_abs_diff": float(diff.max()),
            "max_z": float(z.max()),
            "n_trials": mc.n_trials,
            "agrees": bool(np.all((diff <= 3.0 * se) & (diff <= 5e-3))),
        },
    }


def write_run_outputs(out_dir, rep, params, traffic, access, cfg):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = rep.to_dict()
    data["config"] = cfg
    with open(out / "report.json", "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, allow_nan=True)
        fh.write("\n")
    rows = []
    for q in range(params.Q):
        for n in range(params.N):
            x, y = rep.rrh_xy[q][n]
            rows.append([q, n, _num(x), _num(y), _num(rep.cu_dist[q][n]), _num(rep.outage[q][n])])
    write_csv(out / "rrh_locations.csv", ["cell", "rrh", "x_m", "y_m", "cu_dist_m", "outage"], rows)
    grid = []
    for q in range(params.Q):
        pts = access.nodes[q]
        pdf = traffic_pdf(pts[:, 0], pts[:, 1], q, traffic, params, check=False)
        grid.extend([q, _num(x), _num(y), _num(f)] for (x, y), f in zip(pts, pdf))
    write_csv(out / "traffic_grid.csv", ["cell", "x_m", "y_m", "pdf_per_m2"], grid)
    if rep.trajectory:
        write_csv(out / "trajectory.csv", ["iteration", "cell", "rrh", "x_m", "y_m"],
                  [[int(i), int(q), int(n), _num(x), _num(y)] for i, q, n, x, y in rep.trajectory])


def exit_code(rep):
    if rep.status == "infeasible":
        return EXIT_INFEASIBLE
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def cmd_run(args, cfg):
    seed = cfg["seed"]
    rep, params, traffic, access = _run_one(
        cfg, {}, seed, no_constraint=cfg["optimizer"]["no_constraint"],
        restarts=cfg["optimizer"]["restarts"],
        record_trajectory=cfg["optimizer"]["record_trajectory"], traffic_seed=traffic_seed(cfg))
    if args.mc_validate and rep.status != "infeasible":
        rep.mc_audit = mc_validate(rep, params, traffic, access, cfg["mc"], seed, args.workers)
    write_run_outputs(args.out_dir, rep, params, traffic, access, cfg)
    print(f"status={rep.status} converged={rep.converged} iterations={rep.iterations} "
          f"mean={rep.network_mean_bits:.4f} bits/s/Hz max_outage={rep.max_outage:.4f}")
    if rep.mc_audit:
        a, o = rep.mc_audit["access"], rep.mc_audit["outage"]
        print(f"mc: access {a['mc_mean_bits']:.4f} +- {a['mc_se_bits']:.4f} vs bound "
              f"{a['bound_mean_bits']:.4f}; outage max |diff| {o['max_abs_diff']:.2e}")
    return exit_code(rep)


# --- sweeps --------------------------------------------------------------------------

def _brief(rep):
    return {"status": rep.status, "converged": rep.converged, "mean_bits": rep.network_mean_bits,
            "cu_dist": float(np.mean(rep.cu_dist))}


def _point(job):
    cfg, changes, seed, no_constraint = job
    return _brief(_run_one(cfg, changes, seed, no_constraint)[0])


def _bandwidth_point(job):
    """Constrained run, then the unconstrained problem from a random start and from the
    constrained layout; the better unconstrained local optimum is kept."""
    cfg, changes, seed = job
    con, params, traffic, access = _run_one(cfg, changes, seed, no_constraint=False)
    unc = _run_one(cfg, changes, seed, no_constraint=True)[0]
    if con.status != "infeasible":
        warm = optimize(traffic, params, build_settings(cfg, no_constraint=True), seed=seed,
                        layout=Layout(con.rrh_array(), np.asarray(con.cu_xy)), access=access)
        if warm.network_mean_bits > unc.network_mean_bits:
            unc = warm
    return _brief(con), _brief(unc)


def _map(jobs, workers, fn=_point):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def _summary(results):
    ok = [r for r in results if r["status"] != "infeasible"]
    mean = float(np.mean([r["mean_bits"] for r in ok])) if ok else math.nan
    dist = float(np.mean([r["cu_dist"] for r in ok])) if ok else math.nan
    conv = sum(r["converged"] for r in results) / len(results)
    return mean, dist, len(ok) / len(results), conv


def sweep_bandwidth(cfg, omegas, seeds, workers=1):
    """Rows of (omega, omega_c, load ratio, constrained / unconstrained objective and CU distance)."""
    total = cfg["network"]["total_rbs"]
    points = []
    for om in omegas:
        changes = {"omega": int(om), "omega_c": int(total - om)}
        points.append((om, changes, build_params(cfg, **changes)))
    jobs = [(cfg, changes, s) for _, changes, _ in points for s in seeds]
    res = _map(jobs, workers, _bandwidth_point)
    rows = []
    for i, (om, _, params) in enumerate(points):
        chunk = res[i * len(seeds):(i + 1) * len(seeds)]
        con = _summary([c for c, _ in chunk])
        unc = _summary([u for _, u in chunk])
        rows.append({"omega": om, "omega_c": total - om, "load_ratio": params.load_ratio,
                     "constrained_bits": con[0], "unconstrained_bits": unc[0],
                     "constrained_cu_dist_m": con[1], "unconstrained_cu_dist_m": unc[1],
                     "feasible_fraction": con[2], "converged_fraction": con[3],
                     "n_seeds": len(seeds)})
    return rows


def sweep_rrh_count(cfg, n_values, seeds, nm_total=None, workers=1,
                    variants=("fixed_M", "fixed_NM")):
    """Rows per (N, variant, backhaul mode); variants keep M fixed or N*M fixed."""
    m_fixed = cfg["network"]["M"]
    nm_total = nm_total or cfg["network"]["N"] * m_fixed
    specs = []
    for n in n_values:
        points = [("fixed_M", m_fixed)] if "fixed_M" in variants else []
        if "fixed_NM" in variants:
            if nm_total % n == 0:
                points.append(("fixed_NM", nm_total // n))
            else:
                log.warning("N=%d does not divide N*M=%d; fixed_NM point skipped", n, nm_total)
        for name, m in points:
            for mode in ("shared", "divided"):
                changes = {"N": int(n), "M": int(m), "backhaul_mode": mode}
                build_params(cfg, **changes)
                specs.append((n, m, name, mode, changes))
    jobs = [(cfg, ch, s, False) for *_, ch in specs for s in seeds]
    res = _map(jobs, workers)
    rows = []
    for i, (n, m, name, mode, _) in enumerate(specs):
        mean, dist, feas, conv = _summary(res[i * len(seeds):(i + 1) * len(seeds)])
        rows.append({"N": n, "M": m, "variant": name, "backhaul_mode": mode,
                     "spectral_eff_bits": mean, "mean_cu_dist_m": dist,
                     "feasible_fraction": feas, "converged_fraction": conv,
                     "n_seeds": len(seeds)})
    return rows


def _write_table(path, rows):
    header = list(rows[0])
    write_csv(path, header, [[_num(r[h]) if isinstance(r[h], float) else r[h] for h in header]
                             for r in rows])


def cmd_sweep_omega(args, cfg):
    omegas = args.omegas or cfg["sweep"]["omegas"]
    rows = sweep_bandwidth(cfg, omegas, cfg["sweep"]["seeds"], args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "sweep_omega.csv", rows)
    for r in rows:
        print(f"omega={r['omega']:>2} c={r['load_ratio']:.3f} constrained={r['constrained_bits']:.4f} "
              f"unconstrained={r['unconstrained_bits']:.4f} feasible={r['feasible_fraction']:.2f}")
    return EXIT_OK


def cmd_sweep_n(args, cfg):
    n_values = args.n_values or cfg["sweep"]["n_values"]
    rows = sweep_rrh_count(cfg, n_values, cfg["sweep"]["seeds"],
                           args.nm_total or cfg["sweep"]["nm_total"], args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "sweep_n.csv", rows)
    for r in rows:
        print(f"N={r['N']:>2} M={r['M']:>2} {r['variant']:<8} {r['backhaul_mode']:<7} "
              f"se={r['spectral_eff_bits']:.4f} feasible={r['feasible_fraction']:.2f}")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--mode", choices=("direct", "distance"), help="placement update rule")
    common.add_argument("--out-dir", type=Path, default=Path("out"))
    common.add_argument("--workers", type=int, default=1, help="worker processes")
    common.add_argument("--quadrature-order", type=int, help="Gauss-Legendre points per axis")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="rrhplace", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="optimise one deployment")
    run.add_argument("--no-constraint", action="store_true", help="ignore the backhaul outage budget")
    run.add_argument("--restarts", type=int, help="independent random starts, best one kept")
    run.add_argument("--mc-validate", action="store_true",
                     help="audit the final layout with the Monte-Carlo oracle")
    run.add_argument("--trajectory", action="store_true", help="write trajectory.csv")
    run.set_defaults(func=cmd_run)

    so = sub.add_parser("sweep-omega", parents=[common], help="sweep the access RB count")
    so.add_argument("--omegas", type=int, nargs="+")
    so.add_argument("--seeds", type=int, nargs="+")
    so.set_defaults(func=cmd_sweep_omega)

    sn = sub.add_parser("sweep-n", parents=[common], help="sweep the number of RRHs per cell")
    sn.add_argument("--n-values", type=int, nargs="+")
    sn.add_argument("--nm-total", type=int)
    sn.add_argument("--seeds", type=int, nargs="+")
    sn.set_defaults(func=cmd_sweep_n)
    return parser


def _overrides(args):
    ov = {}
    if args.seed is not None:
        ov["seed"] = args.seed
    opt = {}
    if args.mode:
        opt["mode"] = args.mode
    if getattr(args, "no_constraint", False):
        opt["no_constraint"] = True
    if getattr(args, "restarts", None):
        opt["restarts"] = args.restarts
    if getattr(args, "trajectory", False):
        opt["record_trajectory"] = True
    if opt:
        ov["optimizer"] = opt
    if args.quadrature_order:
        ov["traffic"] = {"quad_order": args.quadrature_order}
    if getattr(args, "seeds", None):
        ov["sweep"] = {"seeds": args.seeds}
    return ov


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    t0 = time.perf_counter()
    try:
        cfg = load_config(args.config, _overrides(args))
        code = args.func(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("finished in %.1f s", time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
