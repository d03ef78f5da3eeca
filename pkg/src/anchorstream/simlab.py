"""Monte Carlo studies of the anchor-stream estimators.

Series 1 studies case-count estimators and their intervals; Series 2 studies
mean estimators for a continuous biomarker. Populations have a fixed number
of cases, symptoms depend on disease status, and symptomatic people volunteer
for stream-1 testing far more often. Stream 2 is a simple random sample of
the full roster.

Each replicate draws from its own Philox stream keyed by ``(seed, index)``;
results are aggregated in replicate order, so output does not depend on the
number of worker processes.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import _rng
from .estimators import estimate_psi, estimate_psi_star, estimate_rs
from .intervals import (
    PosteriorConfig,
    dirichlet_unadjusted_interval,
    jeffreys_fpc_interval,
    psi_posterior_draws,
    select_credible_interval,
    wald_interval,
)
from .means import (
    MeanData,
    Target,
    point_and_replicates,
    pooled_mean,
    resample_cells,
    stream_means,
)
from .tableau import DesignError, IndividualRecord, cells_from_flags, design_context

__all__ = [
    "SYMPTOM_RATE",
    "STREAM1_RATE",
    "DEFAULT_STRATA",
    "Series1Config",
    "Series2Config",
    "SimulatedPopulation",
    "SimSummaryRow",
    "generate_population",
    "run_series1",
    "run_series2",
    "rows_to_csv",
    "rows_to_json",
    "default_workers",
]

# P(symptomatic | case), P(symptomatic | non-case)
SYMPTOM_RATE = (0.5, 0.1)
# P(stream 1 | symptomatic), P(stream 1 | asymptomatic)
STREAM1_RATE = (0.9, 0.2)
# (mean, sd) of X keyed by (symptomatic, case)
DEFAULT_STRATA = {
    (1, 1): (10.0, 0.75),
    (0, 1): (5.0, 0.5),
    (1, 0): (2.5, 1.2),
    (0, 0): (1.0, 1.5),
}


@dataclass(frozen=True)
class Series1Config:
    n_tot: int
    p: float
    psi: float
    reps: int = 10000
    posterior_draws: int = 10000
    seed: int = 0
    case_count: str = "fixed"

    def __post_init__(self):
        if self.case_count not in ("fixed", "binomial"):
            raise DesignError(f"case_count must be 'fixed' or 'binomial', got {self.case_count!r}")
        if round(self.p * self.n_tot) < 1:
            raise DesignError("configuration implies fewer than one case")
        if self.n_rs < 2:
            raise DesignError("configuration implies a stream-2 sample smaller than 2")
        if self.n_rs > self.n_tot:
            raise DesignError("psi must not exceed 1")
        if self.reps < 1:
            raise DesignError("reps must be positive")

    @property
    def n_cases(self) -> int:
        return round(self.p * self.n_tot)

    @property
    def n_rs(self) -> int:
        return round(self.psi * self.n_tot)


@dataclass(frozen=True)
class Series2Config(Series1Config):
    bootstrap_b: int = 1000
    strata_params: dict = field(default_factory=lambda: dict(DEFAULT_STRATA))

    def __post_init__(self):
        super().__post_init__()
        if set(self.strata_params) != set(DEFAULT_STRATA):
            raise DesignError("strata_params needs (mean, sd) for each (symptom, case) pair")
        if any(sd <= 0 for _, sd in self.strata_params.values()):
            raise DesignError("stratum standard deviations must be positive")

    def subgroup_mean(self, case: int) -> float:
        s = SYMPTOM_RATE[0] if case else SYMPTOM_RATE[1]
        return s * self.strata_params[(1, case)][0] + (1 - s) * self.strata_params[(0, case)][0]

    def true_means(self) -> dict:
        """Superpopulation means of X used as coverage targets."""
        p = self.n_cases / self.n_tot if self.case_count == "fixed" else self.p
        mc, mn = self.subgroup_mean(1), self.subgroup_mean(0)
        return {"overall": p * mc + (1 - p) * mn, "cases": mc, "noncases": mn, "diff": mc - mn}


@dataclass
class SimulatedPopulation:
    """Full truth for one simulated population."""

    is_case: np.ndarray
    symptomatic: np.ndarray
    in_stream1: np.ndarray
    in_stream2: np.ndarray
    x: Optional[np.ndarray] = None

    @property
    def n_tot(self) -> int:
        return len(self.is_case)

    @property
    def n_cases(self) -> int:
        return int(self.is_case.sum())

    def cells(self):
        return cells_from_flags(self.in_stream1, self.in_stream2, self.is_case, self.n_tot)

    def mean_data(self) -> MeanData:
        x = self.x if self.x is not None else np.full(self.n_tot, np.nan)
        return MeanData.from_arrays(self.in_stream1, self.in_stream2, self.is_case, x, self.n_tot)

    def records(self) -> list:
        """Observable view: case status and X only for sampled people."""
        out = []
        for i in range(self.n_tot):
            s1, s2 = bool(self.in_stream1[i]), bool(self.in_stream2[i])
            seen = s1 or s2
            x = float(self.x[i]) if (seen and self.x is not None) else None
            out.append(IndividualRecord(i, s1, s2, bool(self.is_case[i]) if seen else None, x))
        return out


def generate_population(cfg: Series1Config, rng: np.random.Generator) -> SimulatedPopulation:
    n = cfg.n_tot
    k = cfg.n_cases if cfg.case_count == "fixed" else int(rng.binomial(n, cfg.p))
    is_case = np.zeros(n, dtype=bool)
    is_case[:k] = True
    symptomatic = rng.random(n) < np.where(is_case, SYMPTOM_RATE[0], SYMPTOM_RATE[1])
    in_stream1 = rng.random(n) < np.where(symptomatic, STREAM1_RATE[0], STREAM1_RATE[1])
    in_stream2 = np.zeros(n, dtype=bool)
    in_stream2[rng.permutation(n)[: cfg.n_rs]] = True
    x = None
    if isinstance(cfg, Series2Config):
        mu = np.empty(n)
        sd = np.empty(n)
        for (sym, case), (m, s) in cfg.strata_params.items():
            mask = (symptomatic == bool(sym)) & (is_case == bool(case))
            mu[mask], sd[mask] = m, s
        x = rng.normal(mu, sd)
    return SimulatedPopulation(is_case, symptomatic, in_stream1, in_stream2, x)


@dataclass(frozen=True)
class SimSummaryRow:
    estimator: str
    interval: str
    truth: float
    mc_mean: float
    mc_sd: float
    avg_se: float
    coverage: float
    avg_width: float
    reps: int
    excluded_estimate: int
    excluded_interval: int
    seed: int


_NAN5 = (math.nan,) * 5


def _guard(fn):
    try:
        return fn()
    except DesignError:
        return None


def _series1_replicate(cfg: Series1Config, index: int) -> tuple:
    """Per-replicate values: truth, then (est, se, lower, upper) for each row."""
    rng = _rng.stream(cfg.seed, index)
    pop = generate_population(cfg, rng)
    cells = pop.cells()
    ctx = design_context(cells)
    n_c = ctx.n_c
    pcfg = PosteriorConfig(cfg.posterior_draws, cfg.seed)
    draws = _guard(lambda: psi_posterior_draws(cells, ctx, pcfg, rng))

    def pack(est, interval):
        if est is None:
            return (math.nan,) * 4
        if interval is None:
            return (est.n_hat, est.se, math.nan, math.nan)
        return (est.n_hat, est.se, interval.lower, interval.upper)

    rs = estimate_rs(cells, ctx)
    psi = estimate_psi(cells, ctx)
    star = _guard(lambda: estimate_psi_star(cells, ctx))
    out = [float(pop.n_cases)]
    out += pack(rs, wald_interval(rs))
    out += pack(rs, jeffreys_fpc_interval(cells, ctx))
    out += pack(psi, wald_interval(psi, floor=n_c))
    out += pack(psi, None if draws is None else
                dirichlet_unadjusted_interval(cells, ctx, pcfg, draws=draws))
    out += pack(star, None if star is None else wald_interval(star, floor=n_c))
    out += pack(star, None if (star is None or draws is None) else
                _guard(lambda: select_credible_interval(cells, ctx, pcfg, draws=draws)))
    return tuple(out)


SERIES1_ROWS = (
    ("N_RS", "Wald"),
    ("N_RS", "JeffreysFPC"),
    ("N_psi", "Wald"),
    ("N_psi", "DirichletUnadjusted"),
    ("N_psistar", "Wald"),
    ("N_psistar", "DirichletSelected"),
)

SERIES2_ROWS = (
    ("xbar1", "none", "overall"),
    ("xbar2", "WaldFPC", "overall"),
    ("mu_hat", "BootstrapFPC", "overall"),
    ("xbar1_cases", "Bootstrap", "cases"),
    ("xbar2_cases", "Bootstrap", "cases"),
    ("mu_hat_cases", "Bootstrap", "cases"),
    ("xbar1_noncases", "Bootstrap", "noncases"),
    ("xbar2_noncases", "Bootstrap", "noncases"),
    ("mu_hat_noncases", "Bootstrap", "noncases"),
    ("xbar1_diff", "Bootstrap", "diff"),
    ("xbar2_diff", "Bootstrap", "diff"),
    ("mu_hat_diff", "Bootstrap", "diff"),
)

# (stream-1 cells, stream-2 cells), zero-based
_NAIVE_CELLS = {
    "cases": ((1, 3), (1, 5)),
    "noncases": ((0, 2), (0, 4)),
}


def _boot_stats(reps, level=0.95):
    reps = reps[~np.isnan(reps)]
    if len(reps) < 2:
        return math.nan, math.nan, math.nan
    alpha = 100 * (1 - level) / 2
    lo, hi = np.percentile(reps, [alpha, 100 - alpha])
    return float(np.std(reps, ddof=1)), float(lo), float(hi)


def _series2_replicate(cfg: Series2Config, index: int) -> tuple:
    rng = _rng.stream(cfg.seed, index)
    pop = generate_population(cfg, rng)
    data = pop.mean_data()
    counts, sums, _ = resample_cells(data, cfg.bootstrap_b, rng)
    c0, s0 = data.counts, data.sums
    out = []

    try:
        x1, x2, se2 = stream_means(data, None)
        out += [x1, math.nan, math.nan, math.nan]
        out += [x2, se2, x2 - 1.96 * se2, x2 + 1.96 * se2]
    except DesignError:
        out += [math.nan] * 8

    def boot_row(point, reps):
        if point is None or not np.isfinite(point):
            return [math.nan] * 4
        se, lo, hi = _boot_stats(reps)
        return [float(point), se, lo, hi]

    def estimator_row(target):
        try:
            mu, reps = point_and_replicates(data, target, counts, sums)
        except DesignError:
            return [math.nan] * 4
        return boot_row(mu, reps)

    out += estimator_row(Target.OVERALL)
    naive = {}
    for sub in ("cases", "noncases"):
        c1, c2 = _NAIVE_CELLS[sub]
        naive[sub] = [(float(pooled_mean(c0, s0, c)), pooled_mean(counts, sums, c)) for c in (c1, c2)]
    for sub, target in (("cases", Target.CASES), ("noncases", Target.NONCASES)):
        for point, reps in naive[sub]:
            out += boot_row(point, reps)
        out += estimator_row(target)
    for k in range(2):
        (pc, rc), (pn, rn) = naive["cases"][k], naive["noncases"][k]
        out += boot_row(pc - pn, rc - rn)
    out += estimator_row(Target.DIFFERENCE)
    return (0.0,) + tuple(float(v) for v in out)


def default_workers() -> int:
    env = os.environ.get("ANCHORSTREAM_THREADS")
    if env:
        return max(1, int(env))
    return 1


def _chunk(args):
    fn, cfg, start, stop = args
    return [fn(cfg, i) for i in range(start, stop)]


def _replicates(fn, cfg, workers: Optional[int]) -> np.ndarray:
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or cfg.reps == 1:
        rows = [fn(cfg, i) for i in range(cfg.reps)]
    else:
        size = max(1, math.ceil(cfg.reps / (4 * workers)))
        jobs = [(fn, cfg, s, min(s + size, cfg.reps)) for s in range(0, cfg.reps, size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [r for part in pool.map(_chunk, jobs) for r in part]
    return np.array(rows, dtype=float)


def _summarize(label, interval, truth, block, seed, with_interval=True, with_se=True):
    est, se, lo, hi = block.T
    ok = np.isfinite(est)
    ok_int = ok & np.isfinite(lo) & np.isfinite(hi)
    n_ok, n_int = int(ok.sum()), int(ok_int.sum())
    tr = np.broadcast_to(truth, est.shape)

    def mean(v):
        return float(np.mean(v)) if len(v) else math.nan

    mc_sd = float(np.std(est[ok], ddof=1)) if n_ok > 1 else math.nan
    if with_interval:
        cover = mean(((lo <= tr) & (tr <= hi))[ok_int].astype(float))
        width = mean((hi - lo)[ok_int])
        excluded_int = len(est) - n_int
    else:
        cover = width = math.nan
        excluded_int = 0
    return SimSummaryRow(
        estimator=label,
        interval=interval,
        truth=float(np.mean(tr)),
        mc_mean=mean(est[ok]),
        mc_sd=mc_sd,
        avg_se=mean(se[ok]) if with_se else math.nan,
        coverage=cover,
        avg_width=width,
        reps=len(est),
        excluded_estimate=len(est) - n_ok,
        excluded_interval=excluded_int,
        seed=int(seed),
    )


def run_series1(cfg: Series1Config, workers: Optional[int] = None) -> list:
    """Simulate case-count estimation; one summary row per estimator/interval pair.

    Wald intervals for the psi and psi-star estimators and every credible
    interval are floored at ``n_c``; the stream-2-only Wald interval is not.
    """
    values = _replicates(_series1_replicate, cfg, workers)
    truth = values[:, 0]
    rows = []
    for k, (label, interval) in enumerate(SERIES1_ROWS):
        block = values[:, 1 + 4 * k: 5 + 4 * k]
        rows.append(_summarize(label, interval, truth, block, cfg.seed))
    return rows


def run_series2(cfg: Series2Config, workers: Optional[int] = None) -> list:
    """Simulate biomarker-mean estimation; the twelve rows of the mean-estimator study."""
    values = _replicates(_series2_replicate, cfg, workers)
    truths = cfg.true_means()
    rows = []
    for k, (label, interval, key) in enumerate(SERIES2_ROWS):
        block = values[:, 1 + 4 * k: 5 + 4 * k]
        naive1_overall = label == "xbar1"
        rows.append(_summarize(label, interval, truths[key], block, cfg.seed,
                               with_interval=not naive1_overall, with_se=not naive1_overall))
    return rows


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def rows_to_csv(rows) -> str:
    names = [f.name for f in fields(SimSummaryRow)]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([_fmt(getattr(row, n)) for n in names])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    def clean(d):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}
    return json.dumps([clean(asdict(r)) for r in rows], indent=2)
