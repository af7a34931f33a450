"""End-to-end acceptance checks, one test per numbered criterion.

Each test is marked ``criterion(n)``; the session summary prints one
PASS/FAIL line per criterion with the key measurements (see conftest.py).
Runtimes are measured on a single core.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from rrhplace.access import AccessModel
from rrhplace.backhaul import outage_at
from rrhplace.cli import main, read_csv, sweep_bandwidth, sweep_rrh_count
from rrhplace.config import load_config
from rrhplace.mc_oracle import mc_access_rate, mc_backhaul_outage
from rrhplace.model import Layout, NetworkParams, cell_bounds, cell_center, generate_traffic
from rrhplace.numerics import marcum_q1, rician_power_pdf
from rrhplace.optimizer import Optimizer, OptimizerSettings, optimize

ORDER = 16


def interior(xy, bounds, margin):
    x0, x1, y0, y1 = bounds
    gap = np.minimum.reduce([xy[:, 0] - x0, x1 - xy[:, 0], xy[:, 1] - y0, y1 - xy[:, 1]])
    return gap > margin


# --- special functions and the backhaul outage ---------------------------------------

@pytest.mark.criterion(1)
def test_marcum_against_rician_quadrature(note):
    t0 = time.perf_counter()
    eta2 = math.sqrt(2.0)
    worst = 0.0
    for a in np.linspace(0.0, 12.0, 20):
        for b in np.linspace(0.0, 16.0, 20):
            # with eta2 = sqrt(2), |g|^2 exceeds b^2 with probability Q1(eta1, b)
            pdf = lambda t, a=a: rician_power_pdf(t, a, eta2)  # noqa: E731
            peak = [a * a] if 0.0 < a * a < b * b else None
            if b * b <= a * a + 2.0:
                ref = 1.0 - integrate.quad(pdf, 0.0, b * b, points=peak, limit=400,
                                           epsabs=1e-14, epsrel=1e-13)[0]
            else:
                ref = integrate.quad(pdf, b * b, np.inf, limit=400, epsabs=1e-14,
                                     epsrel=1e-13)[0]
            worst = max(worst, abs(marcum_q1(a, b) - ref))
    wall = time.perf_counter() - t0
    note(f"max |dQ1| {worst:.2e} over 20x20 (a<=12, b<=16), {wall:.1f} s")
    assert worst <= 1e-8
    assert wall < 10.0


@pytest.mark.criterion(2)
def test_outage_matches_monte_carlo(note):
    p = NetworkParams()
    t0 = time.perf_counter()
    # the grid straddles the outage transition (values from ~1e-3 to ~1)
    d = np.geomspace(270.0, 370.0, 5)
    r = np.linspace(4.85, 5.15, 5)
    dd, rr = np.meshgrid(d, r, indexing="ij")
    exact = outage_at(dd, rr, p)
    mc = mc_backhaul_outage(dd, rr, p, n_trials=1_000_000, seed=2)
    wall = time.perf_counter() - t0
    # binomial SE under the closed form; the empirical one is 0 where every draw agrees
    se = np.sqrt(np.maximum(exact * (1.0 - exact), mc.prob * (1.0 - mc.prob)) / mc.n_trials)
    z = (mc.prob - exact) / se
    gap = np.abs(mc.prob - exact)
    note(f"max |z| {np.abs(z).max():.2f}, max |dP| {gap.max():.1e}, "
         f"P in [{exact.min():.3f}, {exact.max():.3f}], {wall:.0f} s")
    assert np.all(np.abs(z) <= 3.0)
    assert np.all(gap <= 5e-3)
    assert wall < 120.0


# --- access-rate bound --------------------------------------------------------------

@pytest.mark.criterion(3)
def test_lower_bound_against_monte_carlo(note):
    p = NetworkParams(Q=4, N=2, M=4, K=3)
    t0 = time.perf_counter()
    z_mean, z_paired = [], []
    for i in range(20):
        traffic = generate_traffic(100 + i, p, quad_order=ORDER)
        layout = Layout.random(p, np.random.default_rng(i))
        model = AccessModel(p, traffic, order=ORDER)
        bound = float(model.expected_rates(layout).mean())
        mc = mc_access_rate(layout, traffic, p, n_trials=10_000, seed=i, model=model)
        z_mean.append((mc.mean - bound) / mc.se)
        # same comparison, but against the bound at the simulated user positions
        z_paired.append((mc.mean - mc.lb_mean) / mc.gap_se)
    wall = time.perf_counter() - t0
    z_mean, z_paired = np.array(z_mean), np.array(z_paired)
    print("instance z (MC - bound) / SE:", np.round(z_mean, 2))
    print("instance paired z:", np.round(z_paired, 2))
    note(f"{np.sum(z_mean >= -3.0)}/20 within 3 SE, z in [{z_mean.min():.2f}, "
         f"{z_mean.max():.2f}]; paired z in [{z_paired.min():.2f}, {z_paired.max():.2f}] "
         f"({np.sum(z_paired < -3.0)} below -3); {wall:.0f} s")
    assert np.all(z_mean >= -3.0)
    assert wall < 600.0


# --- optimiser on the desk deployment -------------------------------------------------

def desk_instance(seed):
    p = NetworkParams(N=4, M=2, K=3)
    traffic = generate_traffic(seed, p, quad_order=ORDER)
    return p, traffic, AccessModel(p, traffic, order=ORDER)


def desk_run(seed, mode):
    p, traffic, access = desk_instance(seed)
    rep = optimize(traffic, p, OptimizerSettings(mode=mode, d_cvg=1.0), seed=seed,
                   access=access)
    return rep, p, traffic, access


@pytest.fixture(scope="module")
def desk_runs():
    return {mode: desk_run(0, mode) for mode in ("direct", "distance")}


@pytest.mark.criterion(4)
def test_desk_convergence_and_feasibility(desk_runs, note):
    wall = 0.0
    for mode, (rep, p, *_) in desk_runs.items():
        wall += rep.wall_time
        gap = float(np.max(np.asarray(rep.cu_dist) - np.asarray(rep.d_out)[:, None]))
        note(f"{mode}: {rep.status} in {rep.iterations} it, max P {rep.max_outage:.4f}, "
             f"max(d - d_out) {gap:.1f} m, {rep.wall_time:.0f} s")
        assert rep.converged and rep.iterations <= 500
        assert rep.max_outage <= 0.201
        if mode == "distance":
            assert gap <= 1e-2
    note(f"load ratio {p.load_ratio:.2f}")
    assert wall < 900.0


@pytest.mark.criterion(5)
def test_direct_mode_stationarity(desk_runs, note):
    rep, p, traffic, access = desk_runs["direct"]
    layout = Layout(rep.rrh_array(), np.asarray(rep.cu_xy))
    opt = Optimizer(p, traffic, OptimizerSettings(mode="direct"), layout=layout, access=access)
    opt.state.lambdas[:] = np.asarray(rep.lambdas)
    worst, count = 0.0, 0
    for q in range(p.Q):
        keep = interior(layout.rrh_xy[q], cell_bounds(q, p), margin=5.0)
        grad = opt.lagrangian_gradient_fd(q, step=0.5)
        if np.any(keep):
            worst = max(worst, float(np.abs(grad[keep]).max()))
            count += int(keep.sum())
    note(f"max |dL/dx| {worst:.1e} per m over {count} interior RRHs")
    assert count > 0
    assert worst <= 1e-3


@pytest.mark.criterion(6)
def test_direct_and_distance_modes_agree(desk_runs, note):
    rel = []
    for seed in range(5):
        if seed == 0:
            direct, dist = desk_runs["direct"][0], desk_runs["distance"][0]
        else:
            direct, dist = desk_run(seed, "direct")[0], desk_run(seed, "distance")[0]
        assert direct.feasible and dist.feasible
        rel.append(abs(direct.network_mean_bits - dist.network_mean_bits)
                   / dist.network_mean_bits)
        print(f"seed {seed}: direct {direct.network_mean_bits:.4f} ({direct.status}), "
              f"distance {dist.network_mean_bits:.4f} ({dist.status})")
    note("relative gaps " + ", ".join(f"{r:.2%}" for r in rel))
    assert max(rel) <= 0.02


# --- qualitative reproductions -------------------------------------------------------

@pytest.mark.criterion(7)
def test_bandwidth_split(note):
    cfg = load_config(None, {"network": {"N": 4, "M": 8, "K": 10},
                             "traffic": {"quad_order": ORDER}})
    rows = sweep_bandwidth(cfg, [2, 3, 6, 8], seeds=[0])
    # the load threshold K omega / omega_c = 1.36 is stated to two decimals
    free = [r for r in rows if round(r["load_ratio"], 2) <= 1.36]
    tight = [r for r in rows if r["omega"] >= 6]
    for r in rows:
        print(f"omega={r['omega']} c={r['load_ratio']:.3f} con={r['constrained_bits']:.4f} "
              f"unc={r['unconstrained_bits']:.4f} dist {r['constrained_cu_dist_m']:.0f} / "
              f"{r['unconstrained_cu_dist_m']:.0f} m")
    note("constrained/unconstrained: " + ", ".join(
        f"w={r['omega']} (c={r['load_ratio']:.3f}) {r['constrained_bits']:.3f}/"
        f"{r['unconstrained_bits']:.3f} bits, {r['constrained_cu_dist_m']:.0f}/"
        f"{r['unconstrained_cu_dist_m']:.0f} m" for r in rows))
    assert [r["omega"] for r in free] == [2, 3]
    for r in free:
        assert abs(r["constrained_bits"] - r["unconstrained_bits"]) <= 0.01 * r["unconstrained_bits"]
    for r in tight:
        assert r["constrained_bits"] < r["unconstrained_bits"]
        assert r["constrained_cu_dist_m"] < r["unconstrained_cu_dist_m"]


@pytest.mark.criterion(8)
def test_rrh_count(note):
    cfg = load_config(None, {"network": {"N": 2, "M": 8, "K": 10},
                             "traffic": {"quad_order": ORDER}})
    rows = sweep_rrh_count(cfg, [2, 4, 8], seeds=[0], nm_total=16, variants=("fixed_NM",))
    shared = [r for r in rows if r["backhaul_mode"] == "shared"]
    divided = {r["N"]: r["feasible_fraction"] for r in rows if r["backhaul_mode"] == "divided"}
    se = [r["spectral_eff_bits"] for r in shared]
    # full-size deployment: N=10 links of a cell split the backhaul band
    p = NetworkParams(backhaul_mode="divided")
    rep = optimize(generate_traffic(0, p, quad_order=ORDER), p, seed=0)
    note("fixed NM=16, shared: " + ", ".join(f"N={r['N']} {r['spectral_eff_bits']:.3f} bits"
                                           for r in shared)
         + f"; divided feasible fraction by N {divided}; divided at N={p.N}, M={p.M}, "
         f"K={p.K} (load {p.load_ratio:g}): {rep.status}")
    assert [r["N"] for r in shared] == [2, 4, 8]
    assert all(b >= a for a, b in zip(se, se[1:]))
    assert rep.status == "infeasible"


# --- fixed point symmetry and determinism --------------------------------------------

@pytest.mark.criterion(9)
def test_single_cell_symmetry(note):
    p = NetworkParams(Q=1, N=1, M=4, K=3)
    traffic = generate_traffic(0, p, P0=1.0, quad_order=32)
    offsets = []
    for mode in ("direct", "distance"):
        for seed in range(3):
            settings = OptimizerSettings(mode=mode, no_constraint=True, d_cvg=1.0)
            rep = optimize(traffic, p, settings, seed=seed)
            assert rep.converged
            offsets.append(float(np.linalg.norm(rep.rrh_array()[0, 0] - cell_center(0, p))))
    note(f"max offset from the centre {max(offsets):.1e} m over 6 runs")
    assert max(offsets) <= 1.0


@pytest.mark.criterion(10)
def test_identical_runs_give_identical_csvs(tmp_path, note):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"seed": 3, "network": {"Q": 4, "N": 2, "M": 4, "K": 3}, '
                   '"traffic": {"quad_order": 8}, "optimizer": {"max_iter": 60, "d_cvg": 5.0}}',
                   encoding="utf-8")
    for out in ("a", "b"):
        main(["run", "--config", str(cfg), "--out-dir", str(tmp_path / out), "--trajectory"])
        main(["sweep-omega", "--config", str(cfg), "--out-dir", str(tmp_path / out),
              "--omegas", "2", "6"])
    names = sorted(p.name for p in (tmp_path / "a").glob("*.csv"))
    same = [(tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names]
    note(f"{sum(same)}/{len(names)} CSVs byte-identical ({', '.join(names)})")
    assert len(names) >= 4 and all(same)
    assert read_csv(tmp_path / "a" / "rrh_locations.csv")
