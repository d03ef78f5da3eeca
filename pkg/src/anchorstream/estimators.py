"""Closed-form case-count estimators and the stream-2 sample size planner."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .tableau import CellCounts, DesignContext, DesignError

__all__ = [
    "Method",
    "CountEstimate",
    "PlanInputs",
    "fpc_factor",
    "lincoln_petersen_variance",
    "estimate_rs",
    "estimate_chapman",
    "estimate_psi",
    "estimate_psi_star",
    "plan_sampling_rate",
]


class Method(str, enum.Enum):
    RS = "RS"
    CHAPMAN = "Chapman"
    PSI = "Psi"
    PSI_STAR = "PsiStar"


@dataclass(frozen=True)
class CountEstimate:
    """Point estimate of the case count with its estimated variance.

    The capture-recapture cells and ``psi`` the estimate was computed from
    are carried along for reporting.
    """

    method: Method
    n_hat: float
    variance: float
    n_tot: int
    n11: int
    n10: int
    n01: int
    psi: float

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)

    @property
    def prevalence_hat(self) -> float:
        return self.n_hat / self.n_tot


@dataclass(frozen=True)
class PlanInputs:
    p: float
    phi1: float
    n_tot: int
    sigma_p: float

    def __post_init__(self):
        if not 0 < self.p < 1:
            raise DesignError(f"assumed prevalence must lie in (0, 1), got {self.p}")
        if not 0 <= self.phi1 <= 1:
            raise DesignError(f"phi1 must lie in [0, 1], got {self.phi1}")
        if int(self.n_tot) != self.n_tot or self.n_tot <= 0:
            raise DesignError(f"n_tot must be a positive integer, got {self.n_tot}")
        if not self.sigma_p > 0:
            raise DesignError(f"sigma_p must be positive, got {self.sigma_p}")


def fpc_factor(n: int, N: int) -> float:
    """Finite population correction ``n(N - n) / (N(n - 1))``, capped at 1.

    Requires ``n >= 2``. A census (``n == N``) gives 0.
    """
    if n < 2:
        raise DesignError(f"finite population correction needs a sample of at least 2, got {n}")
    if n > N:
        raise DesignError(f"sample size {n} exceeds population size {N}")
    return min(1.0, n * (N - n) / (N * (n - 1)))


def lincoln_petersen_variance(n11: float, n10: float, n01: float) -> float:
    """Lincoln-Petersen variance with zero cells replaced by 0.5."""
    n11, n10, n01 = (0.5 if v == 0 else v for v in (n11, n10, n01))
    return (n11 + n10) * (n11 + n01) * n10 * n01 / n11**3


def _check(cells: CellCounts, ctx: DesignContext):
    if cells.total != ctx.n_tot or cells.n2 != ctx.n11 or cells.n4 != ctx.n10 or cells.n6 != ctx.n01:
        raise DesignError("design context does not match the cell counts")


def _estimate(method, n_hat, variance, ctx):
    return CountEstimate(method, float(n_hat), float(variance), ctx.n_tot,
                         ctx.n11, ctx.n10, ctx.n01, ctx.psi)


def estimate_rs(cells: CellCounts, ctx: DesignContext) -> CountEstimate:
    """Estimate from the stream-2 random sample alone.

    Scales the sample positivity ``(n2 + n6) / n_rs`` up to the population,
    with an FPC-adjusted binomial variance.
    """
    _check(cells, ctx)
    if ctx.n_rs < 2:
        raise DesignError("stream-2 estimator needs n_rs >= 2")
    p_hat = ctx.n_rs_pos / ctx.n_rs
    var_p = fpc_factor(ctx.n_rs, ctx.n_tot) * p_hat * (1 - p_hat) / ctx.n_rs
    return _estimate(Method.RS, ctx.n_tot * p_hat, ctx.n_tot**2 * var_p, ctx)


def estimate_chapman(cells: CellCounts, ctx: DesignContext) -> CountEstimate:
    """Chapman's bias-corrected two-stream estimator."""
    _check(cells, ctx)
    a, b, m = ctx.n1_dot + 1, ctx.n_dot1 + 1, ctx.n11 + 1
    n_hat = a * b / m - 1
    variance = a * b * ctx.n10 * ctx.n01 / (m**2 * (m + 1))
    return _estimate(Method.CHAPMAN, n_hat, variance, ctx)


def estimate_psi(cells: CellCounts, ctx: DesignContext) -> CountEstimate:
    """Anchor-stream estimator using the known stream-2 sampling rate.

    Stream-2-only cases are inflated by ``1 / psi``; every case seen in
    stream 1 is counted once.
    """
    _check(cells, ctx)
    psi = ctx.psi
    if psi <= 0:
        raise DesignError("psi must be positive")
    n_hat = ctx.n11 + ctx.n10 + ctx.n01 / psi
    variance = ctx.n01 * (1 - psi) / psi**2
    return _estimate(Method.PSI, n_hat, variance, ctx)


def estimate_psi_star(cells: CellCounts, ctx: DesignContext) -> CountEstimate:
    """Full-multinomial MLE of the case count.

    The variance is the harmonic combination of the stream-2 variance and
    the Lincoln-Petersen variance (zero cells replaced by 0.5 in the latter
    only). If either component is zero the combined variance is zero.
    """
    _check(cells, ctx)
    s2_only = cells.n5 + cells.n6
    if s2_only == 0:
        raise DesignError("Stream-2-only cell empty (n5 + n6 = 0); psi-star estimator undefined")
    n_hat = cells.n2 + cells.n4 + cells.n6 * (s2_only + cells.n7) / s2_only
    var_rs = estimate_rs(cells, ctx).variance
    var_lp = lincoln_petersen_variance(ctx.n11, ctx.n10, ctx.n01)
    if var_rs == 0 or var_lp == 0:
        variance = 0.0
    else:
        variance = 1.0 / (1.0 / var_rs + 1.0 / var_lp)
    return _estimate(Method.PSI_STAR, n_hat, variance, ctx)


def plan_sampling_rate(inputs: PlanInputs) -> float:
    """Stream-2 sampling rate needed for a target SE of the prevalence estimate.

    The formula keeps the squared population size in the
    denominator; intended for low prevalence (roughly ``p <= 0.2``).
    """
    k = inputs.p * (1 - inputs.phi1)
    psi = k / (inputs.n_tot**2 * inputs.sigma_p**2 + k)
    return min(1.0, max(0.0, psi))
