"""Prevalence correction for aggregated tests and infection severity ratios.

The share of positive aggregate calls (apparent prevalence) mixes true
positives and false positives.  Inverting that mixture with the aggregate
sensitivity and specificity gives a Rogan-Gladen type estimate of the true
prevalence, which then feeds infection fatality and hospitalization
ratios.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .aggregation import AggregateCharacteristics, aggregate, aggregate_rates
from .core import (
    ArityError,
    RateEstimate,
    TestsLike,
    UndefinedRatioError,
    as_rate,
    as_test_set,
)
from .rules import AggregationRule
from .uncertainty import MonteCarloConfig, mc_samples

# raw estimates within this distance of [0, 1] are float noise, not clamping
CLAMP_FUZZ = 1e-12
# Monte Carlo draws whose aggregate youden index is this close to zero are redrawn
YOUDEN_REJECT = 1e-9


@dataclass(frozen=True)
class StratumRecord:
    """One age stratum: population, outcome counts and apparent prevalence.

    Deaths and hospitalizations may be None when a study does not break
    them down by stratum.
    """

    label: str
    population: int
    deaths: int | None
    hospitalizations: int | None
    apparent_prevalence: RateEstimate

    def __post_init__(self):
        if self.population < 0:
            raise ValueError("population must be non-negative")
        for name in ("deaths", "hospitalizations"):
            v = getattr(self, name)
            if v is not None and not 0 <= v <= self.population:
                raise ValueError(f"{name} must lie in [0, population], got {v}")


@dataclass(frozen=True)
class PrevalenceResult:
    apparent: RateEstimate
    corrected: RateEstimate
    clamped: bool
    point: float | None = None
    clamp_fraction: float = 0.0
    n_rejected: int = 0
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "apparent": self.apparent.to_dict(),
            "corrected": self.corrected.to_dict(),
            "point": self.point,
            "clamped": self.clamped,
            "clamp_fraction": self.clamp_fraction,
            "n_rejected": self.n_rejected,
        }


class SeverityRatios(NamedTuple):
    ifr: RateEstimate | None
    ihr: RateEstimate | None


def apparent_prevalence(f: float, agg: AggregateCharacteristics) -> float:
    """Expected share of positive aggregate calls at true prevalence f."""
    f = as_rate(f, "f")
    return f * agg.tpr + (1.0 - f) * (1.0 - agg.tnr)


def _clamp(raw: float) -> tuple:
    clamped = raw < -CLAMP_FUZZ or raw > 1.0 + CLAMP_FUZZ
    return min(1.0, max(0.0, raw)), clamped


def rogan_gladen(apparent: float, agg: AggregateCharacteristics) -> PrevalenceResult:
    """Point estimate of true prevalence from the apparent prevalence of an aggregate."""
    apparent = as_rate(apparent, "apparent prevalence")
    youden = agg.tpr + agg.tnr - 1.0
    if abs(youden) < CLAMP_FUZZ:
        raise UndefinedRatioError(
            "prevalence correction undefined: aggregate tpr + tnr = 1 (no discriminatory power)"
        )
    raw = (apparent + agg.tnr - 1.0) / youden
    value, clamped = _clamp(raw)
    return PrevalenceResult(RateEstimate(apparent), RateEstimate(value), clamped, point=raw)


def corrected_samples(
    apparent: RateEstimate, tests: TestsLike, rule: AggregationRule, mc: MonteCarloConfig
):
    """Unclamped Monte Carlo draws of the corrected prevalence."""
    tests = as_test_set(tests)
    n = len(tests)
    if rule.n != n:
        raise ArityError(f"rule takes {rule.n} tests, got {n}")
    inputs = [apparent] + [t.tpr for t in tests] + [t.tnr for t in tests]

    def estimator(draws):
        ap, tprs, tnrs = draws[0], draws[1:n + 1], draws[n + 1:]
        tpr_s, tnr_s = aggregate_rates(tprs, tnrs, rule)
        youden = tpr_s + tnr_s - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = (ap + tnr_s - 1.0) / youden
        return np.where(np.abs(youden) < YOUDEN_REJECT, np.nan, raw)

    return mc_samples(inputs, estimator, mc)


def rogan_gladen_ci(
    apparent: RateEstimate,
    tests: TestsLike,
    rule: AggregationRule,
    mc: MonteCarloConfig = MonteCarloConfig(),
) -> PrevalenceResult:
    """Corrected prevalence with a Monte Carlo interval.

    Every sample draws the apparent prevalence and each test's rates from
    their fitted betas (rates without an interval stay fixed), aggregates,
    corrects and clamps to [0, 1].  ``clamp_fraction`` reports how many
    samples needed clamping and ``n_rejected`` how many were redrawn
    because the aggregate had no discriminatory power.
    """
    tests = as_test_set(tests)
    point = rogan_gladen(apparent.median, aggregate(tests, rule))
    draws = corrected_samples(apparent, tests, rule, mc)
    raw = draws.values
    clamp_fraction = float(np.mean((raw < -CLAMP_FUZZ) | (raw > 1.0 + CLAMP_FUZZ)))
    values = np.clip(raw, 0.0, 1.0)
    lo, med, hi = (float(v) for v in np.quantile(values, mc.quantiles))
    return PrevalenceResult(
        apparent,
        RateEstimate(med, lo, hi),
        point.clamped,
        point=point.point,
        clamp_fraction=clamp_fraction,
        n_rejected=draws.n_rejected,
        samples=values,
    )


def _ratio(count, population, prevalence: PrevalenceResult, quantiles) -> RateEstimate | None:
    if count is None:
        return None
    if count == 0:
        return RateEstimate(0.0, 0.0, 0.0) if prevalence.samples is not None else RateEstimate(0.0)
    if prevalence.samples is None:
        return RateEstimate(count / (prevalence.corrected.median * population))
    with np.errstate(divide="ignore"):
        values = count / (prevalence.samples * population)
    lo, med, hi = (float(v) for v in np.quantile(values, quantiles))
    return RateEstimate(med, lo, hi)


def severity_ratios(
    stratum: StratumRecord, corrected: PrevalenceResult, quantiles=(0.025, 0.5, 0.975)
) -> SeverityRatios:
    """Infection fatality and hospitalization ratios, count / (prevalence * population).

    When ``corrected`` carries Monte Carlo samples the ratios get intervals
    from pushing those samples through the ratio.
    """
    if stratum.population <= 0:
        raise UndefinedRatioError("severity ratios need a positive population")
    if corrected.corrected.median <= 0.0:
        raise UndefinedRatioError("severity ratios undefined at zero prevalence")
    return SeverityRatios(
        _ratio(stratum.deaths, stratum.population, corrected, quantiles),
        _ratio(stratum.hospitalizations, stratum.population, corrected, quantiles),
    )


# ------------------------------------------------------------------ I/O

STRATA_COLUMNS = (
    "label", "population", "deaths", "hospitalizations", "apparent", "apparent_lo", "apparent_hi",
)


def strata_from_csv(text: str) -> list:
    """Parse strata CSV; lines starting with '#' are comments, empty counts mean unknown."""
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    rows = csv.DictReader(io.StringIO("\n".join(lines)))
    missing = set(STRATA_COLUMNS) - set(rows.fieldnames or ())
    if missing:
        raise ValueError(f"strata CSV lacks columns {sorted(missing)}")

    def count(s):
        s = s.strip()
        return int(s) if s else None

    out = []
    for r in rows:
        lo, hi = r["apparent_lo"].strip(), r["apparent_hi"].strip()
        est = RateEstimate(float(r["apparent"]), float(lo) if lo else None, float(hi) if hi else None)
        out.append(
            StratumRecord(r["label"], int(r["population"]), count(r["deaths"]),
                          count(r["hospitalizations"]), est)
        )
    return out


def load_strata(path) -> list:
    return strata_from_csv(Path(path).read_text())


def strata_to_csv(strata: Sequence[StratumRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(STRATA_COLUMNS)
    for s in strata:
        a = s.apparent_prevalence
        w.writerow([
            s.label, s.population,
            "" if s.deaths is None else s.deaths,
            "" if s.hospitalizations is None else s.hospitalizations,
            repr(a.median),
            repr(a.ci_low) if a.has_ci else "",
            repr(a.ci_high) if a.has_ci else "",
        ])
    return buf.getvalue()
