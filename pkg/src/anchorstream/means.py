"""Standardization estimators of general means and their bootstrap intervals.

The overall mean standardizes over stream-1 capture status: the stream-1
sample mean is weighted by the known stream-1 share of the population and
the stream-2-only sample mean stands in for everyone stream 1 missed. The
subgroup version does the same within cases (or non-cases), with the
subgroup size estimated by the psi-star estimator.

Every estimator here is a function of six per-cell summaries (count, sum of
X, sum of X squared over the observed cells ``n1`` .. ``n6``), which lets
the bootstrap evaluate all replicates at once.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _rng
from .estimators import fpc_factor
from .intervals import percentile
from .tableau import DesignContext, DesignError, IndividualRecord

__all__ = [
    "Target",
    "MeanEstimate",
    "FpcTriple",
    "BootstrapConfig",
    "MeanData",
    "fpc_triple",
    "mean_overall",
    "mean_subgroup",
    "bootstrap_mean",
    "stream_means",
    "pooled_mean",
    "resample_cells",
    "point_and_replicates",
    "summarize_replicates",
]

# zero-based cell indices
_STREAM1 = [0, 1, 2, 3]
_STREAM2 = [0, 1, 4, 5]
_S2_ONLY = [4, 5]
_CASE_CELLS = {"cases": (1, 3, 5), "noncases": (0, 2, 4)}


class Target(str, enum.Enum):
    OVERALL = "Overall"
    CASES = "Cases"
    NONCASES = "NonCases"
    DIFFERENCE = "Difference"


@dataclass(frozen=True)
class MeanEstimate:
    target: Target
    mu_hat: float
    se: float
    interval: tuple
    b_used: int
    b_requested: int
    warnings: tuple = ()


@dataclass(frozen=True)
class FpcTriple:
    fpc11: float
    fpc10: float
    fpc01: float


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 1000
    seed: int = 0
    level: float = 0.95


@dataclass
class MeanData:
    """Observed records reduced to cell codes and X values.

    ``codes`` holds the zero-based cell index (0..5) of every observed
    record; ``x`` holds X, NaN where missing.
    """

    codes: np.ndarray
    x: np.ndarray
    n_tot: int
    counts: np.ndarray = field(init=False)
    sums: np.ndarray = field(init=False)
    sumsq: np.ndarray = field(init=False)

    def __post_init__(self):
        self.codes = np.asarray(self.codes, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=float)
        if len(self.codes) > self.n_tot:
            raise DesignError(f"{len(self.codes)} observed records exceed n_tot = {self.n_tot}")
        xz = np.nan_to_num(self.x)
        self.counts = np.bincount(self.codes, minlength=6).astype(float)
        self.sums = np.bincount(self.codes, weights=xz, minlength=6)
        self.sumsq = np.bincount(self.codes, weights=xz * xz, minlength=6)

    @property
    def n7(self) -> int:
        return self.n_tot - len(self.codes)

    @classmethod
    def from_records(cls, records: Sequence[IndividualRecord], ctx: DesignContext) -> "MeanData":
        seen = set()
        codes, xs = [], []
        for rec in records:
            if rec.id in seen:
                raise DesignError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
            if not rec.sampled:
                continue
            codes.append(rec.cell - 1)
            xs.append(np.nan if rec.x_value is None else float(rec.x_value))
        data = cls(np.array(codes, dtype=np.int64), np.array(xs, dtype=float), ctx.n_tot)
        n_rs = int(data.counts[_STREAM2].sum())
        if n_rs != ctx.n_rs:
            raise DesignError(f"records hold {n_rs} stream-2 members but the design context says {ctx.n_rs}")
        return data

    @classmethod
    def from_arrays(cls, in_stream1, in_stream2, is_case, x, n_tot: int) -> "MeanData":
        s1 = np.asarray(in_stream1, dtype=bool)
        s2 = np.asarray(in_stream2, dtype=bool)
        obs = s1 | s2
        base = np.where(s1 & s2, 0, np.where(s1, 2, 4))
        codes = base[obs] + np.asarray(is_case, dtype=bool)[obs]
        return cls(codes, np.asarray(x, dtype=float)[obs], n_tot)

    def require_x(self, cells):
        missing = np.isin(self.codes, cells) & np.isnan(self.x)
        if missing.any():
            raise DesignError(f"{int(missing.sum())} contributing records lack an x_value")


def _pool(a, cells):
    return a[..., list(cells)].sum(axis=-1)


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.full(np.broadcast(num, den).shape, np.nan)
    np.divide(num, den, out=out, where=den > 0)
    return out


def pooled_mean(counts, sums, cells):
    """Mean of X over the union of `cells` (NaN when they are all empty)."""
    return _ratio(_pool(sums, cells), _pool(counts, cells))


def _weighted(xbar, weight):
    # a cell with zero weight contributes nothing even if its mean is undefined
    return np.where(weight > 0, xbar * weight, 0.0)


def _overall(counts, sums, n_tot):
    n_s1 = _pool(counts, _STREAM1)
    p1 = n_s1 / n_tot
    x1 = _ratio(_pool(sums, _STREAM1), n_s1)
    x01 = _ratio(_pool(sums, _S2_ONLY), _pool(counts, _S2_ONLY))
    return _weighted(x1, p1) + _weighted(x01, 1 - p1)


def _subgroup_total(counts, n7, sub, noncase_total="mirrored", n_tot=None):
    s2_only = _pool(counts, _S2_ONLY)
    ratio = _ratio(s2_only + n7, s2_only)
    if sub == "noncases" and noncase_total == "complement":
        cases_total = counts[..., 1] + counts[..., 3] + counts[..., 5] * ratio
        return n_tot - cases_total
    c11, c10, c01 = _CASE_CELLS[sub]
    return counts[..., c11] + counts[..., c10] + counts[..., c01] * ratio


def _subgroup(counts, sums, n7, sub, total_floor=None, noncase_total="mirrored", n_tot=None):
    c11, c10, c01 = _CASE_CELLS[sub]
    n_hat = _subgroup_total(counts, n7, sub, noncase_total, n_tot)
    if total_floor is not None:
        n_hat = np.maximum(n_hat, total_floor)
    n_s1 = counts[..., c11] + counts[..., c10]
    p1 = _ratio(n_s1, n_hat)
    x1 = _ratio(sums[..., c11] + sums[..., c10], n_s1)
    x01 = _ratio(sums[..., c01], counts[..., c01])
    # no stream-2-only members of the subgroup: the estimate is unobtainable
    out = _weighted(x1, p1) + (1 - p1) * x01
    return np.where(counts[..., c01] > 0, out, np.nan)


def fpc_triple(data: MeanData) -> FpcTriple:
    """Per-cell finite population corrections for the overall-mean bootstrap.

    Both stream-1 cells are treated as samples from the stream-1 population
    ``n1 + .. + n4``; the stream-2-only cell as a sample from everyone outside
    stream 1.
    """
    c = data.counts
    pop1 = int(c[_STREAM1].sum())
    pop0 = data.n_tot - pop1
    n11, n10, n01 = int(c[0] + c[1]), int(c[2] + c[3]), int(c[4] + c[5])
    for name, n in (("both-streams", n11), ("stream-1-only", n10), ("stream-2-only", n01)):
        if n < 2:
            raise DesignError(f"FPC for the {name} cell needs at least 2 records, got {n}")
    return FpcTriple(fpc_factor(n11, pop1), fpc_factor(n10, pop1), fpc_factor(n01, pop0))


def _overall_fpc(counts, sums, n_tot, xbar0, triple):
    """Overall mean with each cell mean shrunk towards its original-data value."""
    x11 = _ratio(sums[..., 0] + sums[..., 1], counts[..., 0] + counts[..., 1])
    x10 = _ratio(sums[..., 2] + sums[..., 3], counts[..., 2] + counts[..., 3])
    x01 = _ratio(_pool(sums, _S2_ONLY), _pool(counts, _S2_ONLY))
    adj = []
    for xb, x0, f in zip((x11, x10, x01), xbar0, (triple.fpc11, triple.fpc10, triple.fpc01)):
        a = math.sqrt(f)
        adj.append(a * xb + x0 * (1 - a))
    p11 = (counts[..., 0] + counts[..., 1]) / n_tot
    p10 = (counts[..., 2] + counts[..., 3]) / n_tot
    p0 = 1 - p11 - p10
    return _weighted(adj[0], p11) + _weighted(adj[1], p10) + p0 * adj[2]


def _data(records_or_data, ctx):
    if isinstance(records_or_data, MeanData):
        return records_or_data
    return MeanData.from_records(records_or_data, ctx)


def mean_overall(records, ctx: DesignContext) -> float:
    """Standardized estimate of the population mean of X."""
    data = _data(records, ctx)
    if data.counts[_S2_ONLY].sum() == 0:
        raise DesignError("no stream-2-only records; overall mean undefined")
    data.require_x(range(6))
    return float(_overall(data.counts, data.sums, data.n_tot))


def mean_subgroup(records, ctx: DesignContext, subgroup: Target,
                  noncase_total: str = "mirrored") -> float:
    """Standardized mean of X among cases or non-cases.

    The subgroup size is the psi-star estimate computed on that subgroup's
    cells. For non-cases, ``noncase_total="complement"`` uses ``n_tot``
    minus the estimated case count instead; the two forms agree exactly.
    """
    sub = _subgroup_key(subgroup)
    data = _data(records, ctx)
    c11, c10, c01 = _CASE_CELLS[sub]
    if data.counts[c11] + data.counts[c10] == 0:
        raise DesignError(f"no {sub} identified in stream 1")
    if data.counts[c01] == 0:
        raise DesignError(f"no {sub} identified in stream 2 but not stream 1")
    data.require_x(_CASE_CELLS[sub])
    return float(_subgroup(data.counts, data.sums, data.n7, sub,
                           noncase_total=noncase_total, n_tot=data.n_tot))


def _subgroup_key(target) -> str:
    target = Target(target)
    if target is Target.CASES:
        return "cases"
    if target is Target.NONCASES:
        return "noncases"
    raise ValueError(f"not a subgroup target: {target}")


def resample_cells(data: MeanData, B: int, rng: np.random.Generator):
    """Cell counts, X sums and X sums of squares for `B` with-replacement resamples.

    Returns three ``(B, 6)`` arrays. ``n7`` is not resampled.
    """
    n = len(data.codes)
    if n == 0:
        raise DesignError("no observed records to resample")
    idx = rng.integers(0, n, size=(B, n))
    flat = (data.codes[idx] + 6 * np.arange(B)[:, None]).ravel()
    xs = np.nan_to_num(data.x)[idx].ravel()
    counts = np.bincount(flat, minlength=6 * B).reshape(B, 6).astype(float)
    sums = np.bincount(flat, weights=xs, minlength=6 * B).reshape(B, 6)
    sumsq = np.bincount(flat, weights=xs * xs, minlength=6 * B).reshape(B, 6)
    return counts, sums, sumsq


def _original_cell_means(data):
    c, s = data.counts, data.sums
    return (
        float(_ratio(s[0] + s[1], c[0] + c[1])),
        float(_ratio(s[2] + s[3], c[2] + c[3])),
        float(_ratio(s[4] + s[5], c[4] + c[5])),
    )


def point_and_replicates(data: MeanData, target: Target, counts, sums,
                         noncase_total: str = "mirrored"):
    """Original-data estimate and per-replicate values (NaN where skipped)."""
    target = Target(target)
    if target is Target.OVERALL:
        mu = mean_overall(data, None)
        reps = _overall_fpc(counts, sums, data.n_tot, _original_cell_means(data), fpc_triple(data))
        return mu, reps
    if target is Target.DIFFERENCE:
        mu_c, r_c = point_and_replicates(data, Target.CASES, counts, sums, noncase_total)
        mu_n, r_n = point_and_replicates(data, Target.NONCASES, counts, sums, noncase_total)
        return mu_c - mu_n, r_c - r_n
    sub = _subgroup_key(target)
    mu = mean_subgroup(data, None, target, noncase_total)
    n_c = float(data.counts[list(_CASE_CELLS[sub])].sum())
    reps = _subgroup(counts, sums, data.n7, sub, total_floor=n_c,
                     noncase_total=noncase_total, n_tot=data.n_tot)
    return mu, reps


def summarize_replicates(target, mu_hat, reps, B, level=0.95) -> MeanEstimate:
    reps = np.asarray(reps, dtype=float)
    used = reps[~np.isnan(reps)]
    if len(used) < 2:
        raise DesignError(f"only {len(used)} usable bootstrap replicates")
    alpha = 100 * (1 - level) / 2
    lo, hi = percentile(used, [alpha, 100 - alpha])
    warnings = ()
    if len(used) < 0.9 * B:
        warnings = (f"only {len(used)} of {B} bootstrap replicates were usable",)
    return MeanEstimate(Target(target), float(mu_hat), float(np.std(used, ddof=1)),
                        (float(lo), float(hi)), len(used), B, warnings)


def bootstrap_mean(records, ctx: DesignContext, target: Target,
                   cfg: BootstrapConfig = BootstrapConfig(),
                   rng: Optional[np.random.Generator] = None,
                   noncase_total: str = "mirrored") -> MeanEstimate:
    """Percentile bootstrap for a standardized mean.

    Resamples the records observed in at least one stream with replacement,
    holding ``n7`` fixed. Subgroup replicates floor the resampled subgroup
    size at its original observed count and are dropped when the resample
    has no stream-2-only subgroup members. Overall-mean replicates shrink
    each capture-cell mean with FPC factors fixed from the original data.
    The difference target pairs case and non-case replicates from the same
    resample.
    """
    data = _data(records, ctx)
    if rng is None:
        rng = _rng.stream(cfg.seed)
    counts, sums, _ = resample_cells(data, cfg.B, rng)
    mu, reps = point_and_replicates(data, target, counts, sums, noncase_total)
    return summarize_replicates(target, mu, reps, cfg.B, cfg.level)


def stream_means(records, ctx: DesignContext):
    """Naive stream-1 mean, stream-2 mean, and the FPC-adjusted SE of the latter.

    The stream-1 mean is biased under self-selection and gets no SE.
    """
    data = _data(records, ctx)
    c, s, ss = data.counts, data.sums, data.sumsq
    n1, n2 = c[_STREAM1].sum(), c[_STREAM2].sum()
    if n1 == 0 or n2 == 0:
        raise DesignError("both streams must be non-empty")
    data.require_x(range(6))
    x1 = s[_STREAM1].sum() / n1
    x2 = s[_STREAM2].sum() / n2
    if n2 < 2:
        raise DesignError("stream-2 standard error needs at least 2 records")
    var = max(0.0, (ss[_STREAM2].sum() - n2 * x2 * x2) / (n2 - 1))
    se = math.sqrt(fpc_factor(int(n2), data.n_tot)) * math.sqrt(var) / math.sqrt(n2)
    return float(x1), float(x2), float(se)
