"""Interval estimates for the case count.

Three families:

* Wald intervals around any :class:`~anchorstream.estimators.CountEstimate`;
* an FPC-adjusted Jeffreys credible interval from the stream-2 sample alone;
* Dirichlet-multinomial posterior intervals that use both streams, in an
  unadjusted form (low prevalence) and a rescaled, widened form.

All credible intervals can be floored at ``n_c``, the number of distinct cases
already identified; no population can hold fewer cases than that.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Optional

import numpy as np

from . import _rng
from ._betainc import beta_ppf
from .estimators import (
    estimate_chapman,
    estimate_psi,
    estimate_psi_star,
    estimate_rs,
    fpc_factor,
)
from .tableau import CellCounts, DesignContext, DesignError

__all__ = [
    "IntervalMethod",
    "IntervalResult",
    "PosteriorConfig",
    "DegenerateVarianceError",
    "PREVALENCE_THRESHOLD",
    "percentile",
    "wald_interval",
    "jeffreys_fpc_interval",
    "psi_posterior_draws",
    "dirichlet_unadjusted_interval",
    "dirichlet_adjusted_interval",
    "select_credible_interval",
]

PREVALENCE_THRESHOLD = 0.2


class IntervalMethod(str, enum.Enum):
    WALD = "Wald"
    JEFFREYS_FPC = "JeffreysFPC"
    DIRICHLET_UNADJUSTED = "DirichletUnadjusted"
    DIRICHLET_ADJUSTED = "DirichletAdjusted"


class DegenerateVarianceError(DesignError):
    """The psi-estimator variance is zero, so the adjusted rescaling is undefined."""


@dataclass(frozen=True)
class IntervalResult:
    lower: float
    upper: float
    method: IntervalMethod
    floored: bool = False
    draws_used: int = 0

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class PosteriorConfig:
    n_draws: int = 10000
    seed: int = 0

    def __post_init__(self):
        if self.n_draws < 100:
            raise DesignError(f"need at least 100 posterior draws, got {self.n_draws}")


def _z(level: float) -> float:
    if level == 0.95:
        return 1.96
    return NormalDist().inv_cdf(0.5 + level / 2)


def percentile(values, q) -> np.ndarray:
    """Percentiles by linear interpolation between order statistics."""
    return np.percentile(np.asarray(values, dtype=float), q, method="linear")


def _floor(lower, upper, n_c, floor):
    if not floor:
        return float(lower), float(upper), False
    floored = lower < n_c
    return float(max(lower, n_c)), float(max(upper, n_c)), bool(floored)


def wald_interval(est, floor: Optional[int] = None, level: float = 0.95) -> IntervalResult:
    """``n_hat +/- z * se``.

    With `floor` (normally ``n_c``) the lower limit is raised to it;
    without, the lower limit is only kept non-negative.
    """
    half = _z(level) * est.se
    lower, upper = est.n_hat - half, est.n_hat + half
    if floor is None:
        return IntervalResult(max(lower, 0.0), upper, IntervalMethod.WALD)
    lower, upper, floored = _floor(lower, upper, floor, True)
    return IntervalResult(lower, upper, IntervalMethod.WALD, floored)


def jeffreys_fpc_interval(cells: CellCounts, ctx: DesignContext, level: float = 0.95,
                          floor: bool = True) -> IntervalResult:
    """Jeffreys credible interval for the stream-2 prevalence, rescaled for the FPC.

    The Beta(n+ + 1/2, n - n+ + 1/2) quantiles are mapped by ``a*q + b`` with
    ``a = sqrt(FPC)`` and ``b = p_hat * (1 - a)``, which shrinks the posterior
    variance by the FPC and recentres it on the sample proportion. Limits are
    returned on the count scale.
    """
    if ctx.n_rs < 2:
        raise DesignError("Jeffreys interval needs n_rs >= 2")
    pos, n = ctx.n_rs_pos, ctx.n_rs
    alpha = (1 - level) / 2
    q_lo = beta_ppf(alpha, pos + 0.5, n - pos + 0.5)
    q_hi = beta_ppf(1 - alpha, pos + 0.5, n - pos + 0.5)
    a = math.sqrt(fpc_factor(n, ctx.n_tot))
    b = pos / n * (1 - a)
    lower, upper, floored = _floor(ctx.n_tot * (a * q_lo + b), ctx.n_tot * (a * q_hi + b),
                                   ctx.n_c, floor)
    return IntervalResult(lower, upper, IntervalMethod.JEFFREYS_FPC, floored)


def psi_posterior_draws(cells: CellCounts, ctx: DesignContext, cfg: PosteriorConfig,
                        rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Posterior draws mimicking the psi estimator, floored at ``n_c``.

    For each draw: conditional capture probabilities from the
    Dirichlet(n11 + 1/2, n10 + 1/2, n01 + 1/2) posterior, the implied
    probability of being caught at all, a population size
    ``round(n_c / p_c)``, a binomial redraw of the number caught, and the psi
    estimator evaluated on the (real-valued) redrawn cells.
    """
    n_c = ctx.n_c
    if n_c < 1:
        raise DesignError("Dirichlet interval needs at least one identified case (n_c >= 1)")
    psi = ctx.psi
    if not 0 < psi <= 1:
        raise DesignError(f"psi must lie in (0, 1], got {psi}")
    if rng is None:
        rng = _rng.stream(cfg.seed)
    shapes = np.array([ctx.n11, ctx.n10, ctx.n01], dtype=float) + 0.5
    g = _rng.standard_gamma(rng, shapes, size=(cfg.n_draws, 3))
    p = g / g.sum(axis=1, keepdims=True)
    p11, p10, p01 = p[:, 0], p[:, 1], p[:, 2]
    s1 = psi * (p11 + p10)
    p1 = s1 / (s1 + p01)
    pc = p1 * (1 - psi) + psi
    # round half away from zero; the ratio is positive
    n_pop = np.floor(n_c / pc + 0.5).astype(np.int64)
    n_cj = rng.binomial(n_pop, pc)
    draws = n_cj * (p11 + p10) + n_cj * p01 / psi
    return np.maximum(draws, n_c)


def _percentile_limits(draws, level):
    alpha = 100 * (1 - level) / 2
    lo, hi = percentile(draws, [alpha, 100 - alpha])
    return float(lo), float(hi)


def dirichlet_unadjusted_interval(cells: CellCounts, ctx: DesignContext, cfg: PosteriorConfig,
                                  level: float = 0.95, floor: bool = True, draws=None,
                                  rng=None) -> IntervalResult:
    if draws is None:
        draws = psi_posterior_draws(cells, ctx, cfg, rng)
    lo, hi = _percentile_limits(draws, level)
    lower, upper, floored = _floor(lo, hi, ctx.n_c, floor)
    return IntervalResult(lower, upper, IntervalMethod.DIRICHLET_UNADJUSTED, floored, len(draws))


def _adjusted_parts(cells, ctx, cfg, level, draws, rng):
    if draws is None:
        draws = psi_posterior_draws(cells, ctx, cfg, rng)
    star = estimate_psi_star(cells, ctx)
    var_psi = estimate_psi(cells, ctx).variance
    if var_psi == 0:
        raise DegenerateVarianceError("psi-estimator variance is zero; adjusted interval scale undefined")
    a = math.sqrt(star.variance / var_psi)
    b = star.n_hat * (1 - a)
    ll_ab, ul_ab = _percentile_limits(a * draws + b, level)
    sigma_avg = math.sqrt((estimate_rs(cells, ctx).variance + estimate_chapman(cells, ctx).variance) / 4)
    half = _z(level) * sigma_avg
    ll_avg, ul_avg = star.n_hat - half, star.n_hat + half
    ll_adj = min(ll_ab, (ll_ab + ll_avg) / 2)
    ul_adj = max(ul_ab, (ul_ab + ul_avg) / 2)
    return (ll_ab, ul_ab), (ll_adj, ul_adj), len(draws)


def dirichlet_adjusted_interval(cells: CellCounts, ctx: DesignContext, cfg: PosteriorConfig,
                                level: float = 0.95, floor: bool = True, draws=None,
                                rng=None) -> IntervalResult:
    """Rescaled and widened Dirichlet interval for moderate-to-high prevalence.

    Posterior draws are mapped by ``a*N + b`` so their spread matches the
    psi-star variance (``a = sqrt(Var(psi*) / Var(psi))``, centred on the
    psi-star estimate). Each limit is then pushed outward halfway towards a
    Wald interval around the psi-star estimate whose variance is that of the
    average of the stream-2 and Chapman estimators, whenever that widens it.
    """
    _, (lo, hi), used = _adjusted_parts(cells, ctx, cfg, level, draws, rng)
    lower, upper, floored = _floor(lo, hi, ctx.n_c, floor)
    return IntervalResult(lower, upper, IntervalMethod.DIRICHLET_ADJUSTED, floored, used)


def select_credible_interval(cells: CellCounts, ctx: DesignContext, cfg: PosteriorConfig,
                             level: float = 0.95, floor: bool = True, draws=None,
                             rng=None) -> IntervalResult:
    """Unadjusted interval below 20% estimated prevalence, adjusted at or above it."""
    p_hat = estimate_psi_star(cells, ctx).prevalence_hat
    chooser = dirichlet_adjusted_interval if p_hat >= PREVALENCE_THRESHOLD else dirichlet_unadjusted_interval
    return chooser(cells, ctx, cfg, level=level, floor=floor, draws=draws, rng=rng)
