"""Beta distributions for uncertain rates and Monte Carlo interval propagation.

A rate reported as "median (lo - hi)" is modelled as a beta distribution
whose 2.5%, 50% and 97.5% quantiles match those numbers in the least-squares
sense.  Propagation draws every uncertain input independently, pushes the
draws through an estimator and reads off empirical quantiles.

Random streams: the master seed is split with ``numpy.random.SeedSequence``
into one child stream per fixed-size block of samples.  Blocks are the unit
of parallel work, so output does not depend on the number of threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .core import DiagAggError, RateEstimate, as_rate

QUANTILES = (0.025, 0.5, 0.975)
BOUNDARY_NUDGE = 1e-6
_FPMIN = 1e-300
_EPS = 1e-16


class BetaFitError(DiagAggError, ArithmeticError):
    """No beta distribution reproduces the given quantiles closely enough."""


class MonteCarloError(DiagAggError, ArithmeticError):
    """Too many Monte Carlo samples had to be rejected."""


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float
    residual: float = field(default=0.0, compare=False)

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0 and math.isfinite(self.alpha) and math.isfinite(self.beta)):
            raise ValueError(f"beta shape parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


@dataclass(frozen=True)
class MonteCarloConfig:
    n_samples: int = 1_000_000
    seed: int = 0
    quantiles: tuple = QUANTILES
    threads: int = 1
    block_size: int = 1 << 16

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.block_size < 1:
            raise ValueError("block_size must be at least 1")


# ------------------------------------------------------------------- CDF

def _betacf(a: float, b: float, x: float) -> float:
    # continued fraction for the incomplete beta function, modified Lentz method
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
    h = d
    max_iter = 200 + int(20 * math.sqrt(max(a, b)))
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > _FPMIN else _FPMIN)
        c = 1.0 + aa / c
        c = c if abs(c) > _FPMIN else _FPMIN
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def _betainc(a: float, b: float, x: float) -> float:
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    # the fraction converges fast for x below the mean-like switch point
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def beta_cdf(x, p: BetaParams):
    """Regularized incomplete beta function I_x(alpha, beta).

    Accepts a scalar or an array of x values.
    """
    if np.ndim(x) == 0:
        return min(1.0, max(0.0, _betainc(p.alpha, p.beta, float(x))))
    return np.array([beta_cdf(v, p) for v in np.ravel(x)]).reshape(np.shape(x))


# ------------------------------------------------------------------- fit

def _nudge(x: float) -> float:
    return min(max(x, BOUNDARY_NUDGE), 1.0 - BOUNDARY_NUDGE)


def _residual(params: BetaParams, xs, qs=QUANTILES) -> float:
    return sum((beta_cdf(x, params) - q) ** 2 for x, q in zip(xs, qs))


def fit_beta(
    median: float,
    lo: float,
    hi: float,
    max_residual: float = 1e-3,
    restarts: int = 3,
    seed: int = 0,
) -> BetaParams:
    """Beta distribution whose 2.5/50/97.5% quantiles best match (lo, median, hi).

    Minimizes the squared CDF misses at the three points with Nelder-Mead in
    (log alpha, log beta).  Endpoints at exactly 0 or 1 are first moved
    inward by 1e-6.  When the median itself sits on a boundary, no beta can
    put half its mass there; the fit then uses the J-shaped family
    Beta(a, 1) (median 1) or Beta(1, b) (median 0) matched to the one
    interior bound.

    Raises BetaFitError for zero-width intervals and when the best residual
    exceeds ``max_residual``.
    """
    median, lo, hi = as_rate(median, "median"), as_rate(lo, "lo"), as_rate(hi, "hi")
    if not lo <= median <= hi:
        raise ValueError(f"need lo <= median <= hi, got ({lo}, {median}, {hi})")
    if lo == hi:
        raise BetaFitError("zero-width interval: treat the rate as exact")
    return _fit_cached(median, lo, hi, max_residual, restarts, seed)


@lru_cache(maxsize=256)
def _fit_cached(median, lo, hi, max_residual, restarts, seed) -> BetaParams:
    if median >= 1.0 - BOUNDARY_NUDGE:
        a = math.log(QUANTILES[0]) / math.log(_nudge(lo))
        return BetaParams(a, 1.0, 0.0)
    if median <= BOUNDARY_NUDGE:
        b = math.log(1.0 - QUANTILES[2]) / math.log1p(-_nudge(hi))
        return BetaParams(1.0, b, 0.0)

    xs = (_nudge(lo), _nudge(median), _nudge(hi))

    def objective(v):
        if np.any(np.abs(v) > 30.0):
            return 10.0
        return _residual(BetaParams(math.exp(v[0]), math.exp(v[1])), xs)

    # moment-style starting point: mean ~ median, sd ~ interval width / 3.92
    m = xs[1]
    var = ((xs[2] - xs[0]) / 3.92) ** 2
    total = max(m * (1.0 - m) / var - 1.0, 2.0)
    start = np.log([m * total, (1.0 - m) * total])

    rng = np.random.default_rng(seed)
    opts = {"maxiter": 2000, "xatol": 1e-10, "fatol": 1e-12}
    best = minimize(objective, start, method="Nelder-Mead", options=opts)
    for _ in range(restarts):
        trial = minimize(objective, best.x + rng.normal(0.0, 0.5, 2), method="Nelder-Mead", options=opts)
        if trial.fun < best.fun:
            best = trial
    params = BetaParams(math.exp(best.x[0]), math.exp(best.x[1]), float(best.fun))
    if params.residual > max_residual:
        raise BetaFitError(
            f"best beta fit to ({lo}, {median}, {hi}) has residual {params.residual:.3g} "
            f"> {max_residual:g}"
        )
    return params


def fit_estimate(est: RateEstimate, **kw) -> BetaParams | None:
    """Beta fit for an estimate, or None when the rate is treated as exact."""
    if est.is_exact:
        return None
    return fit_beta(est.median, est.ci_low, est.ci_high, **kw)


# -------------------------------------------------------------- sampling

def _log_gamma_draws(rng: np.random.Generator, shape: float, size):
    # for shape < 1 use G(a) = G(a + 1) * U**(1/a), kept in log space so
    # tiny shapes do not underflow to zero
    if shape >= 1.0:
        return np.log(rng.standard_gamma(shape, size))
    g = rng.standard_gamma(shape + 1.0, size)
    u = rng.random(size)
    return np.log(g) + np.log(u) / shape


def sample_beta(rng: np.random.Generator, p: BetaParams, size=None):
    """Beta(alpha, beta) draws as X / (X + Y) with X, Y independent gammas."""
    la = _log_gamma_draws(rng, p.alpha, size)
    lb = _log_gamma_draws(rng, p.beta, size)
    return np.exp(la - np.logaddexp(la, lb))


# ----------------------------------------------------------- propagation

@dataclass
class MonteCarloSamples:
    values: np.ndarray
    n_rejected: int = 0

    def quantiles(self, qs=QUANTILES) -> tuple:
        return tuple(float(v) for v in np.quantile(self.values, qs))

    def estimate(self, qs=QUANTILES) -> RateEstimate:
        lo, med, hi = self.quantiles(qs)
        return RateEstimate(med, lo, hi)


def _draw(rng, params, fixed, size):
    return [
        np.full(size, fx) if p is None else sample_beta(rng, p, size)
        for p, fx in zip(params, fixed)
    ]


def mc_samples(
    inputs: Sequence[RateEstimate],
    estimator: Callable,
    mc: MonteCarloConfig = MonteCarloConfig(),
    max_reject: float = 0.01,
) -> MonteCarloSamples:
    """Draw every input, apply ``estimator`` and collect the results.

    ``estimator`` receives a list of equally long arrays (one per input, in
    order) and returns an array.  Non-finite results count as rejected
    samples and are redrawn from the same block stream.
    """
    params = [fit_estimate(est) for est in inputs]
    fixed = [est.median for est in inputs]
    n_blocks = -(-mc.n_samples // mc.block_size)
    seeds = np.random.SeedSequence(mc.seed).spawn(n_blocks)
    sizes = [mc.block_size] * (n_blocks - 1) + [mc.n_samples - mc.block_size * (n_blocks - 1)]
    budget = max_reject * mc.n_samples

    def run_block(b):
        rng = np.random.Generator(np.random.PCG64(seeds[b]))
        out = np.asarray(estimator(_draw(rng, params, fixed, sizes[b])), dtype=np.float64)
        bad = ~np.isfinite(out)
        rejected = 0
        while bad.any():
            k = int(bad.sum())
            rejected += k
            if rejected > budget:
                break
            out[bad] = np.asarray(estimator(_draw(rng, params, fixed, k)), dtype=np.float64)
            bad = ~np.isfinite(out)
        return out, rejected

    if mc.threads > 1:
        with ThreadPoolExecutor(max_workers=mc.threads) as pool:
            results = list(pool.map(run_block, range(n_blocks)))
    else:
        results = [run_block(b) for b in range(n_blocks)]
    n_rejected = sum(r for _, r in results)
    if n_rejected > budget:
        raise MonteCarloError(
            f"{n_rejected} of {mc.n_samples} samples rejected (limit {max_reject:.0%})"
        )
    return MonteCarloSamples(np.concatenate([v for v, _ in results]), n_rejected)


def propagate_ci(
    inputs: Sequence[RateEstimate], estimator: Callable, mc: MonteCarloConfig = MonteCarloConfig()
) -> RateEstimate:
    """Median and 95% interval of ``estimator`` under independent beta draws of the inputs."""
    return mc_samples(inputs, estimator, mc).estimate(mc.quantiles)
