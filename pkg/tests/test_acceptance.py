"""Acceptance suite: one test per contract criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

The heavy studies (temporal convergence, method comparison, complexity
timing) run at desk scale; tolerances are fixed here, not tuned at runtime.
"""
import math
import time

import numpy as np
import pytest

import emom_md as em
from emom_md import bench, characteristics as ch, fvm
from emom_md import reconstruction as rec
from conftest import dot_volume_sums, make_benchmark_config

BUMP_NUMBER = math.pi * 0.05 * 0.25 / 3.0

# method-comparison horizon: long enough that the CFL-coupled forward-Euler
# time error of the baseline dominates its spatial transient on the ladder
COMPARISON_HORIZON = 0.04
COMPARISON_REFERENCE = (65536, 256, 256)
EMOM_LADDER = [(s * s, s, s) for s in (22, 32, 45, 64, 90, 128)]
FVM_LADDER = [(m, m) for m in (32, 48, 64, 96, 128, 192, 256, 384)]


def report(criterion: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


@pytest.fixture(scope="module")
def bench_law():
    return em.GrowthLaw.linear(1.0, 5.0, 0.0)


@pytest.fixture(scope="module")
def bench_q0():
    return em.InitialDensity.elliptical_bump()


def test_criterion_1_temporal_convergence_order(bench_law, bench_q0):
    """Fitted L-infinity error slope against n_time is -1.0 +- 0.15 with the
    quadrature fixed at 100 x 100 and a 10x finer reference."""
    cfg = make_benchmark_config(horizon=0.01)
    t0 = time.perf_counter()
    rows, fit = em.time_refinement_study(
        cfg, bench_q0, bench_law, resolution=(100, 100),
        ladder=[100, 316, 1000, 3162, 10000], reference_n_time=100000)
    elapsed = time.perf_counter() - t0
    errs = [r.norms.linf_max for r in rows]
    monotone = all(a > b for a, b in zip(errs, errs[1:]))
    ok = abs(fit.slope - (-1.0)) <= 0.15 and monotone and elapsed < 300.0
    report("criterion 1 (temporal order)",
           ok, f"slope = {fit.slope:.3f} (target -1.0 +- 0.15), "
               f"errors monotone = {monotone}, runtime {elapsed:.0f}s")


def test_criterion_2_method_comparison_orders(bench_law, bench_q0):
    """L2-error slopes vs DoF over a 3-decade ladder: -0.5 +- 0.1 for the
    fixed-point solver, -1/3 +- 0.1 for the finite-volume baseline, with the
    fixed-point error lower at every matched DoF."""
    cfg = make_benchmark_config(horizon=COMPARISON_HORIZON)
    t0 = time.perf_counter()
    rows, fits = em.dof_comparison_study(
        cfg, bench_q0, bench_law, EMOM_LADDER, FVM_LADDER,
        COMPARISON_REFERENCE)
    elapsed = time.perf_counter() - t0
    emom_rows = [r for r in rows if r.method == "emom"]
    fvm_rows = [r for r in rows if r.method == "fvm"]
    span_emom = math.log10(emom_rows[-1].dof / emom_rows[0].dof)
    span_fvm = math.log10(fvm_rows[-1].dof / fvm_rows[0].dof)
    e_dofs = [r.dof for r in emom_rows]
    e_errs = [r.norms.l2_max for r in emom_rows]
    dominated = all(
        bench.interp_loglog(r.dof, e_dofs, e_errs) < r.norms.l2_max
        for r in fvm_rows)
    ok_emom = abs(fits["emom"].slope - (-0.5)) <= 0.1
    ok_fvm = abs(fits["fvm"].slope - (-1.0 / 3.0)) <= 0.1
    ok = (ok_emom and ok_fvm and dominated and span_emom >= 3.0
          and span_fvm >= 3.0 and elapsed < 1800.0)
    report("criterion 2 (method comparison orders)",
           ok, f"emom slope = {fits['emom'].slope:.3f} (target -0.5 +- 0.1), "
               f"fvm slope = {fits['fvm'].slope:.3f} (target -0.333 +- 0.1), "
               f"emom lower at matched DoF = {dominated}, spans = "
               f"{span_emom:.2f}/{span_fvm:.2f} decades, "
               f"runtime {elapsed:.0f}s")


def test_criterion_3_discrete_mass_balance(bench_law, bench_q0):
    """V*C_ik + rho_i * sum V_i(state) q0 w = m_i(t_k) to relative 1e-12 at
    every step of several qualitatively different runs."""
    runs = []
    cfg = make_benchmark_config()
    runs.append(("midpoint", cfg, bench_q0, bench_law,
                 em.EmomGridSpec(501, (60, 60)), None))
    runs.append(("gauss", cfg, bench_q0, bench_law,
                 em.EmomGridSpec(301, (30, 30), "gauss"), None))
    seed = em.InitialDensity.dirac_seed(em.DisperseState(0.1, 0.5), 50.0)
    runs.append(("dirac", cfg, seed, bench_law,
                 em.EmomGridSpec(401, (1, 1)), None))
    rng = np.random.default_rng(11)
    irregular = np.concatenate([[0.0], np.sort(rng.uniform(0, 0.01, 200)),
                                [0.01]])
    runs.append(("irregular-grid", cfg, bench_q0, bench_law,
                 em.EmomGridSpec(2, (25, 25)), irregular))
    worst = 0.0
    for name, cfgr, q0r, lawr, grid, tgrid in runs:
        res = em.solve(cfgr, q0r, lawr, grid, time_grid=tgrid,
                       store_characteristics=True)
        if q0r.is_dirac:
            q0w = res.quadrature.weights
        else:
            q0w = q0r(res.quadrature.x1, res.quadrature.x2) \
                * res.quadrature.weights
        hist = res.characteristics.states
        for k in range(res.path.n_times):
            sums = dot_volume_sums(hist[k, :, 0], hist[k, :, 1], q0w)
            for i in (0, 1):
                lhs = cfgr.reactor_volume * res.path.values[k, i] \
                    + cfgr.densities[i] * sums[i]
                worst = max(worst, abs(lhs - res.feed_values[k, i])
                            / abs(res.feed_values[k, i]))
    ok = worst <= 1e-12
    report("criterion 3 (discrete mass balance)",
           ok, f"worst relative defect = {worst:.2e} (tolerance 1e-12) "
               f"across {len(runs)} runs, every step")


def test_criterion_4_characteristics_oracle(bench_law):
    """Discrete flow vs adaptive ODE integration on a frozen concentration
    path: max relative deviation <= 5e-4 at n_time = 1e5, halving as the
    step count doubles."""
    x0 = em.DisperseState(0.1, 0.75)
    oracle = em.ode_oracle(0.0, x0, 0.01, (2.0, 2.0), bench_law, tol=1e-10)

    def deviation(n_t):
        path = em.ConcentrationPath.constant(0.01, 2.0, 2.0, n_t)
        xi = em.xi_multi_step(0, x0, n_t - 1, path, bench_law)
        return max(abs(xi.x1 - oracle.x1) / oracle.x1,
                   abs(xi.x2 - oracle.x2) / abs(oracle.x2))

    dev_1e5 = deviation(100000)
    ratio = deviation(20000) / deviation(40000)
    ok = dev_1e5 <= 5e-4 and abs(ratio - 2.0) <= 0.3
    report("criterion 4 (oracle equivalence)",
           ok, f"deviation at 1e5 = {dev_1e5:.2e} (tolerance 5e-4), "
               f"halving ratio = {ratio:.3f} (target 2.0 +- 0.3)")


def test_criterion_5_boundedness_and_semigroup(bench_law):
    """1e5 randomized nonnegative-rate trials with zero composition-bound
    violations; semigroup identity to 1e-12 relative."""
    rng = np.random.default_rng(2024)
    n_single = 60000
    x1 = rng.uniform(1e-3, 10.0, n_single)
    x2 = rng.uniform(0.0, 1.0, n_single)
    g1 = rng.uniform(0.0, 50.0, n_single) * rng.uniform(1e-6, 1.0, n_single)
    g2 = rng.uniform(0.0, 50.0, n_single) * rng.uniform(1e-6, 1.0, n_single)
    n_exp = rng.choice([0.0, -1.0, 0.5], n_single)
    vals = em.step_composition(x1, x2, g1, g1 + g2, 0.0)
    vals_n = np.concatenate([
        em.step_composition(x1[n_exp == n], x2[n_exp == n],
                            g1[n_exp == n], (g1 + g2)[n_exp == n], n)
        for n in (0.0, -1.0, 0.5)])
    single_bad = int(np.sum((vals < 0) | (vals > 1))
                     + np.sum((vals_n < 0) | (vals_n > 1)))
    trials = n_single * 2

    # multi-step chains along random nonnegative-rate paths
    chain_bad = 0
    for trial in range(40):
        law = em.GrowthLaw.linear(rng.uniform(0.0, 2.0),
                                  rng.uniform(0.0, 2.0),
                                  float(rng.choice([0.0, -1.0, 0.5])))
        n_t = 26
        times = np.concatenate([[0.0], np.sort(rng.uniform(0, 0.05, n_t - 2)),
                                [0.05]])
        path = em.ConcentrationPath(
            times=times, values=rng.uniform(0.0, 3.0, (n_t, 2)))
        p1 = rng.uniform(0.05, 2.0, 50)
        p2 = rng.uniform(0.0, 1.0, 50)
        for i in (5, 12, n_t - 1):
            _, out2, valid = ch.xi_multi_step_many(0, p1, p2, i, path, law)
            chain_bad += int(np.sum((out2 < 0) | (out2 > 1)))
            trials += p2.size
    boundedness_ok = single_bad == 0 and chain_bad == 0 and trials >= 100000

    # semigroup identity on random paths and split points
    worst = 0.0
    for trial in range(30):
        law = em.GrowthLaw.linear(rng.uniform(0.1, 2.0),
                                  rng.uniform(0.1, 2.0),
                                  float(rng.choice([0.0, -1.0, 0.5])))
        n_t = 31
        times = np.concatenate([[0.0], np.sort(rng.uniform(0, 0.02, n_t - 2)),
                                [0.02]])
        path = em.ConcentrationPath(
            times=times, values=rng.uniform(0.0, 3.0, (n_t, 2)))
        x0 = em.DisperseState(rng.uniform(0.05, 1.0), rng.uniform(0.0, 1.0))
        i = int(rng.integers(2, n_t))
        mid = int(rng.integers(1, i))
        direct = em.xi_multi_step(0, x0, i, path, law)
        hop = em.xi_multi_step(mid, em.xi_multi_step(0, x0, mid, path, law),
                               i, path, law)
        worst = max(worst,
                    abs(hop.x1 - direct.x1) / abs(direct.x1),
                    abs(hop.x2 - direct.x2) / max(abs(direct.x2), 1e-12))
    semigroup_ok = worst <= 1e-12
    ok = boundedness_ok and semigroup_ok
    report("criterion 5 (boundedness + semigroup)",
           ok, f"{trials} bound trials, violations = "
               f"{single_bad + chain_bad}; semigroup worst rel = "
               f"{worst:.2e} (tolerance 1e-12)")


def test_criterion_6_jacobian_consistency(bench_law, bench_q0):
    """(xi1/x1)^n * Psi vs central-finite-difference determinant of the
    backward characteristic map: relative 1e-3 on 100 sampled states."""
    cfg = make_benchmark_config()
    res = em.solve(cfg, bench_q0, bench_law, em.EmomGridSpec(2001, (60, 60)))
    path = res.path
    k = path.n_times - 1
    rng = np.random.default_rng(5)
    # sample states with guaranteed ancestors: forward images of support
    # points
    u = rng.uniform(0.06, 0.14, 100)
    v = rng.uniform(0.55, 0.95, 100)
    zx, zy, valid = ch.xi_multi_step_many(0, u, v, k, path, bench_law)
    assert np.all(valid)
    h = 1e-6
    worst = 0.0
    for x1z, x2z in zip(zx, zy):
        fac = em.jacobian_factor(k, (x1z, x2z), path, bench_law)
        d1p, d1c, ok1 = ch.xi_multi_step_many(
            k, [x1z + h, x1z - h], [x2z, x2z], 0, path, bench_law)
        d2p, d2c, ok2 = ch.xi_multi_step_many(
            k, [x1z, x1z], [x2z + h, x2z - h], 0, path, bench_law)
        assert np.all(ok1) and np.all(ok2)
        det_fd = ((d1p[0] - d1p[1]) * (d2c[0] - d2c[1])
                  - (d2p[0] - d2p[1]) * (d1c[0] - d1c[1])) / (4 * h * h)
        worst = max(worst, abs(det_fd - fac.determinant)
                    / abs(fac.determinant))
    ok = worst <= 1e-3
    report("criterion 6 (jacobian consistency)",
           ok, f"worst relative deviation = {worst:.2e} over 100 states "
               "(tolerance 1e-3)")


def test_criterion_7_number_conservation(bench_q0):
    """Zeroth moment of the reconstructed density at t = 0.01 within 0.5 %
    of the initial particle number (pure growth, symmetric kinetics)."""
    law = em.GrowthLaw.linear(1.0, 1.0, 0.0)
    cfg = make_benchmark_config(horizon=0.01)
    res = em.solve(cfg, bench_q0, law, em.EmomGridSpec(2001, (100, 100)))
    k = res.path.n_times - 1
    snap = rec.snapshot_backward(k, res.path, law, bench_q0,
                                 shape=(200, 200), x_min=cfg.x_min)
    number = rec.moments(snap, cfg).number
    rel = abs(number - BUMP_NUMBER) / BUMP_NUMBER
    ok = rel <= 5e-3
    report("criterion 7 (number conservation)",
           ok, f"zeroth moment {number:.8f} vs initial {BUMP_NUMBER:.8f}, "
               f"relative defect {rel:.2e} (tolerance 5e-3)")


def test_criterion_8_radial_composition_limits(bench_q0):
    """Radial profiles: exactly 0.5 for pointwise-equal rates, 1/(1+ratio)
    to 1e-12 for constant-ratio rates, and ordered profiles for kinetics
    ratios {1, 2, 5}."""
    cfg = make_benchmark_config()
    seed = (0.1, 0.75)
    # (a) pointwise-equal rates: exact one half
    law_eq = em.GrowthLaw.power(3.0, 0.0, 3.0, 0.0, 0.0)
    res_eq = em.solve(cfg, bench_q0, law_eq, em.EmomGridSpec(501, (40, 40)))
    prof_eq = em.radial_composition(seed, res_eq.path, law_eq)
    exact_half = bool(np.all(prof_eq.fractions == 0.5))
    # (b) constant ratio 5: 1 / 6 everywhere
    law_r5 = em.GrowthLaw.power(2.0, 0.0, 10.0, 0.0, 0.0)
    res_r5 = em.solve(cfg, bench_q0, law_r5, em.EmomGridSpec(501, (40, 40)))
    prof_r5 = em.radial_composition(seed, res_r5.path, law_r5)
    dev_ratio = float(np.max(np.abs(prof_r5.fractions - 1.0 / 6.0)))
    # (c) qualitative ordering for linear-kinetics ratios {1, 2, 5}
    profs = {}
    for ratio in (1.0, 2.0, 5.0):
        law = em.GrowthLaw.linear(1.0, ratio, 0.0)
        res = em.solve(cfg, bench_q0, law, em.EmomGridSpec(501, (40, 40)))
        profs[ratio] = em.radial_composition(seed, res.path, law)
    ordered = bool(
        np.all(profs[1.0].fractions > profs[2.0].fractions)
        and np.all(profs[2.0].fractions > profs[5.0].fractions))
    ok = exact_half and dev_ratio <= 1e-12 and ordered
    report("criterion 8 (radial composition limits)",
           ok, f"equal-rate profile exactly 0.5 = {exact_half}; "
               f"ratio-5 max deviation from 1/6 = {dev_ratio:.2e} "
               f"(tolerance 1e-12); ratio ordering 1 > 2 > 5 = {ordered}")


def test_criterion_9_linear_complexity(bench_law, bench_q0):
    """Wall-clock slope against n_time * n_points is 1.0 +- 0.2 over two
    decades."""
    cfg = make_benchmark_config()
    sizes = [(316, 178, 178), (1778, 238, 238), (10000, 316, 316)]
    rows, fit = bench.complexity_timing_study(cfg, bench_q0, bench_law,
                                              sizes, repetitions=3)
    span = math.log10(rows[-1][2] / rows[0][2])
    ok = abs(fit.slope - 1.0) <= 0.2 and span >= 2.0
    detail = ", ".join(f"dof {d:.1e}: {s:.2f}s" for _, _, d, s in rows)
    report("criterion 9 (linear complexity)",
           ok, f"slope = {fit.slope:.3f} (target 1.0 +- 0.2) over "
               f"{span:.2f} decades [{detail}]")
