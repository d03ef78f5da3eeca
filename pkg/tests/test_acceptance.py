"""Acceptance criteria, one test each; a pass/fail line per criterion is printed at the end of the run."""
import itertools
import math
import time

import numpy as np
import pytest

from anchorstream import intervals
from anchorstream.estimators import (
    estimate_psi,
    estimate_psi_star,
    estimate_rs,
    fpc_factor,
    lincoln_petersen_variance,
)
from anchorstream.intervals import (
    PosteriorConfig,
    dirichlet_adjusted_interval,
    dirichlet_unadjusted_interval,
    jeffreys_fpc_interval,
    psi_posterior_draws,
    wald_interval,
)
from anchorstream.means import MeanData, mean_overall
from anchorstream.simlab import Series1Config, Series2Config, rows_to_csv, run_series1, run_series2
from anchorstream.tableau import CellCounts, design_context

from conftest import WORKED_EXAMPLE, record_acceptance


def within(value, target, tol):
    return abs(value - target) <= tol


def by_label(rows):
    return {(r.estimator, r.interval): r for r in rows}


def test_criterion_01_worked_example_point_estimates():
    cells = CellCounts(*WORKED_EXAMPLE)
    ctx = design_context(cells)
    rs, psi, star = estimate_rs(cells, ctx), estimate_psi(cells, ctx), estimate_psi_star(cells, ctx)
    checks = [
        within(rs.n_hat, 110.0, 0.05), within(rs.se, 28.1, 0.05),
        within(psi.n_hat, 111.0, 0.05), within(psi.se, 23.2, 0.05),
        within(star.n_hat, 103.8, 0.05), within(star.se, 21.9, 0.05),
    ]
    loops = 2000
    start = time.perf_counter()
    for _ in range(loops):
        estimate_rs(cells, ctx), estimate_psi(cells, ctx), estimate_psi_star(cells, ctx)
    per_call = (time.perf_counter() - start) / loops
    passed = all(checks) and per_call < 1e-3
    record_acceptance(1, passed,
                      f"RS {rs.n_hat:.2f} ({rs.se:.2f}), psi {psi.n_hat:.2f} ({psi.se:.2f}), "
                      f"psi* {star.n_hat:.2f} ({star.se:.2f}); {per_call * 1e6:.1f} us for all three")
    assert passed


def test_criterion_02_jeffreys_fpc_interval():
    cells = CellCounts(*WORKED_EXAMPLE)
    res = jeffreys_fpc_interval(cells, design_context(cells))
    passed = within(res.lower, 63.5, 0.5) and within(res.upper, 171.5, 0.5)
    record_acceptance(2, passed, f"Jeffreys-FPC ({res.lower:.2f}, {res.upper:.2f}) vs (63.5, 171.5) +/- 0.5")
    assert passed


def test_criterion_03_dirichlet_intervals_over_20_seeds():
    cells = CellCounts(*WORKED_EXAMPLE)
    ctx = design_context(cells)
    un, adj, times = [], [], []
    for seed in range(20):
        cfg = PosteriorConfig(10000, seed)
        start = time.perf_counter()
        draws = psi_posterior_draws(cells, ctx, cfg)
        u = dirichlet_unadjusted_interval(cells, ctx, cfg, draws=draws)
        a = dirichlet_adjusted_interval(cells, ctx, cfg, draws=draws)
        times.append(time.perf_counter() - start)
        un.append((u.lower, u.upper))
        adj.append((a.lower, a.upper))
    un_mean, adj_mean = np.mean(un, axis=0), np.mean(adj, axis=0)
    passed = (within(un_mean[0], 76.8, 2.5) and within(un_mean[1], 167.9, 2.5)
              and within(adj_mean[0], 72.3, 2.5) and within(adj_mean[1], 164.4, 2.5)
              and max(times) < 2.0)
    record_acceptance(3, passed,
                      f"unadjusted ({un_mean[0]:.2f}, {un_mean[1]:.2f}) vs (76.8, 167.9), "
                      f"adjusted ({adj_mean[0]:.2f}, {adj_mean[1]:.2f}) vs (72.3, 164.4) +/- 2.5; "
                      f"slowest seed {max(times):.3f} s")
    assert passed


@pytest.mark.slow
def test_criterion_04_low_prevalence_series1():
    cfg = Series1Config(n_tot=500, p=0.1, psi=0.2, reps=2000, posterior_draws=2000, seed=2024)
    start = time.perf_counter()
    rows = by_label(run_series1(cfg))
    wall = time.perf_counter() - start
    wald, cred = rows[("N_psistar", "Wald")], rows[("N_psistar", "DirichletSelected")]
    cov, width = 100 * cred.coverage, cred.avg_width
    passed = (within(wald.mc_mean, 49.9, 0.6) and within(wald.mc_sd, 9.3, 0.5)
              and within(cov, 95.4, 1.5) and within(width, 36.4, 2.0) and wall < 300)
    record_acceptance(4, passed,
                      f"psi* mean {wald.mc_mean:.2f} (49.9+/-0.6), sd {wald.mc_sd:.2f} (9.3+/-0.5), "
                      f"coverage {cov:.1f}% (95.4+/-1.5), width {width:.2f} (36.4+/-2.0); {wall:.1f} s")
    assert passed


@pytest.mark.slow
def test_criterion_05_efficiency_ordering_high_prevalence():
    cfg = Series1Config(n_tot=500, p=0.5, psi=0.2, reps=2000, posterior_draws=2000, seed=2024)
    rows = by_label(run_series1(cfg))
    sd_star = rows[("N_psistar", "Wald")].mc_sd
    sd_psi = rows[("N_psi", "Wald")].mc_sd
    sd_rs = rows[("N_RS", "Wald")].mc_sd
    passed = sd_star < sd_psi < sd_rs and within(sd_star, 16.7, 1.5)
    record_acceptance(5, passed,
                      f"sd psi* {sd_star:.2f} < psi {sd_psi:.2f} < RS {sd_rs:.2f}; psi* within 16.7+/-1.5")
    assert passed


@pytest.mark.slow
def test_criterion_06_series2_means():
    cfg = Series2Config(n_tot=500, p=0.2, psi=0.2, reps=1000, bootstrap_b=500, seed=2024)
    rows = by_label(run_series2(cfg))
    mu = rows[("mu_hat", "BootstrapFPC")]
    naive = rows[("xbar1_cases", "Bootstrap")]
    passed = (within(mu.mc_mean, 2.420, 0.02) and within(100 * mu.coverage, 93.5, 2.0)
              and within(naive.mc_mean, 9.087, 0.05) and 100 * naive.coverage < 2.0)
    record_acceptance(6, passed,
                      f"mu_hat mean {mu.mc_mean:.4f} (2.420+/-0.02), coverage {100 * mu.coverage:.1f}% "
                      f"(93.5+/-2.0); stream-1 case mean {naive.mc_mean:.4f} (9.087+/-0.05), "
                      f"coverage {100 * naive.coverage:.1f}% (<2%)")
    assert passed


def test_criterion_07_exhaustive_unbiasedness():
    is_case = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
    in_stream1 = [1, 0, 1, 1, 0, 0, 1, 0, 0, 0]
    values = []
    for subset in itertools.combinations(range(10), 4):
        chosen = set(subset)
        counts = [0] * 7
        for i in range(10):
            s1, s2 = in_stream1[i], i in chosen
            if s1 or s2:
                counts[(0 if s1 and s2 else 2 if s1 else 4) + is_case[i]] += 1
            else:
                counts[6] += 1
        cells = CellCounts(*counts)
        values.append(estimate_psi(cells, design_context(cells)).n_hat)
    avg = math.fsum(values) / len(values)
    passed = len(values) == 210 and abs(avg - 3) <= 1e-12
    record_acceptance(7, passed, f"{len(values)} subsets, average psi estimate {avg!r} vs 3")
    assert passed


def test_criterion_08_binary_x_equivalence():
    rng = np.random.default_rng(20240)
    worst, tables = 0.0, 0
    while tables < 1500:
        counts = rng.integers(0, 120, size=7)
        if rng.random() < 0.2:
            counts[rng.integers(0, 7)] = 0
        if counts[4] + counts[5] == 0:
            continue
        cells = CellCounts(*(int(c) for c in counts))
        ctx = design_context(cells)
        codes = np.repeat(np.arange(6), counts[:6])
        data = MeanData(codes, np.isin(codes, [1, 3, 5]).astype(float), ctx.n_tot)
        diff = abs(ctx.n_tot * mean_overall(data, ctx) - estimate_psi_star(cells, ctx).n_hat)
        worst = max(worst, diff)
        tables += 1
    passed = worst <= 1e-12
    record_acceptance(8, passed, f"{tables} tables, max |n_tot * mean - psi*| = {worst:.2e}")
    assert passed


def test_criterion_09_invariant_suite():
    rng = np.random.default_rng(909)
    start = time.perf_counter()
    failures = []
    checked = 0
    while checked < 400:
        counts = rng.integers(0, 40, size=7)
        if rng.random() < 0.25:
            counts[rng.integers(0, 7)] = 0
        n_rs = counts[0] + counts[1] + counts[4] + counts[5]
        if counts[4] + counts[5] == 0 or n_rs < 2 or n_rs >= counts.sum():
            continue
        cells = CellCounts(*(int(c) for c in counts))
        ctx = design_context(cells)
        checked += 1
        star = estimate_psi_star(cells, ctx)
        if star.n_hat < ctx.n_c:
            failures.append(("psi* below n_c", counts))
        var_rs = estimate_rs(cells, ctx).variance
        var_lp = lincoln_petersen_variance(ctx.n11, ctx.n10, ctx.n01)
        if var_rs > 0 and star.variance > min(var_rs, var_lp) * (1 + 1e-12):
            failures.append(("combined variance", counts))
        if not 0 < fpc_factor(ctx.n_rs, ctx.n_tot) <= 1:
            failures.append(("FPC range", counts))
        jr = jeffreys_fpc_interval(cells, ctx, floor=False)
        if jeffreys_fpc_interval(cells, ctx).lower != max(jr.lower, ctx.n_c):
            failures.append(("Jeffreys floor", counts))
        for est in (star, estimate_psi(cells, ctx)):
            if wald_interval(est, floor=ctx.n_c).lower != max(est.n_hat - 1.96 * est.se, ctx.n_c):
                failures.append(("Wald floor", counts))
        if ctx.n_c == 0:
            continue
        cfg = PosteriorConfig(500, int(rng.integers(2**32)))
        draws = psi_posterior_draws(cells, ctx, cfg)
        raw = dirichlet_unadjusted_interval(cells, ctx, cfg, floor=False, draws=draws)
        if dirichlet_unadjusted_interval(cells, ctx, cfg, draws=draws).lower != max(raw.lower, ctx.n_c):
            failures.append(("Dirichlet floor", counts))
        if estimate_psi(cells, ctx).variance > 0:
            (ll_ab, ul_ab), (ll_adj, ul_adj), _ = intervals._adjusted_parts(cells, ctx, cfg, 0.95, draws, None)
            if not (ll_adj <= ll_ab and ul_adj >= ul_ab):
                failures.append(("adjusted containment", counts))
            if dirichlet_adjusted_interval(cells, ctx, cfg, draws=draws).lower != max(ll_adj, ctx.n_c):
                failures.append(("adjusted floor", counts))
    wall = time.perf_counter() - start
    passed = not failures and wall < 60
    record_acceptance(9, passed, f"{checked} tables, {len(failures)} violations, {wall:.1f} s")
    assert passed, failures[:5]


@pytest.mark.slow
def test_criterion_10_reproducible_across_workers():
    cfg1 = Series1Config(n_tot=500, p=0.1, psi=0.2, reps=64, posterior_draws=1000, seed=123456789)
    cfg2 = Series2Config(n_tot=500, p=0.2, psi=0.2, reps=32, bootstrap_b=200, seed=123456789)
    outputs = {}
    for workers in (1, 2, 8):
        outputs[workers] = (rows_to_csv(run_series1(cfg1, workers=workers)).encode(),
                            rows_to_csv(run_series2(cfg2, workers=workers)).encode())
    passed = outputs[1] == outputs[2] == outputs[8]
    record_acceptance(10, passed, "series 1 and 2 CSVs byte-identical across 1, 2, 8 workers"
                      if passed else "CSV output differs between worker counts")
    assert passed
