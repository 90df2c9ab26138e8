"""Aggregate sensitivity and specificity of a rule applied to independent tests.

Tests are assumed conditionally independent given disease status.  The
generic path sums, over the outcomes a rule calls positive (negative),
the probability of that outcome among the diseased (healthy).  The
closed forms for AND, OR and 3-test majority are kept as separate code so
they can be checked against the generic path.

All functions here take median rates; sampling over confidence intervals
lives in :mod:`diagagg.uncertainty`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ArityError, TestsLike, as_test_set
from .rules import AggregationRule, index_outcomes, named_rule


@dataclass(frozen=True)
class AggregateCharacteristics:
    tpr: float
    tnr: float
    rule: AggregationRule

    @property
    def fpr(self) -> float:
        return 1.0 - self.tnr

    @property
    def youden(self) -> float:
        """tpr + tnr - 1, the divisor of the prevalence correction."""
        return self.tpr + self.tnr - 1.0


def outcome_probabilities(rates, negative_rates=False):
    """Probability of each joint outcome j = 0..2**n - 1.

    With ``negative_rates=False`` the inputs are sensitivities and the result
    is P(outcome | diseased).  With ``True`` they are specificities and the
    result is P(outcome | healthy).  Rates may be floats or equally shaped
    arrays (one entry per Monte Carlo sample).
    """
    n = len(rates)
    probs = []
    for j in range(1 << n):
        p = 1.0
        for r, y in zip(rates, index_outcomes(j, n)):
            if negative_rates:
                p = p * ((1.0 - r) if y else r)
            else:
                p = p * (r if y else (1.0 - r))
        probs.append(p)
    return probs


def aggregate_rates(tprs, tnrs, rule: AggregationRule):
    """(TPR_S, TNR_S) for raw rate sequences; broadcasts over array inputs."""
    if len(tprs) != rule.n or len(tnrs) != rule.n:
        raise ArityError(f"rule takes {rule.n} tests, got {len(tprs)}")
    p_pos = outcome_probabilities(tprs)
    p_neg = outcome_probabilities(tnrs, negative_rates=True)
    tpr = 0.0
    tnr = 0.0
    for j in range(rule.size):
        if (rule.table >> j) & 1:
            tpr = tpr + p_pos[j]
        else:
            tnr = tnr + p_neg[j]
    return tpr, tnr


def aggregate(tests: TestsLike, rule: AggregationRule) -> AggregateCharacteristics:
    tests = as_test_set(tests)
    if len(tests) != rule.n:
        raise ArityError(f"rule takes {rule.n} tests, got {len(tests)}")
    tpr, tnr = aggregate_rates(tests.tprs, tests.tnrs, rule)
    return AggregateCharacteristics(_clip(tpr), _clip(tnr), rule)


def _clip(x: float) -> float:
    # sums of products of rates can overshoot 1 by an ulp
    return float(min(1.0, max(0.0, x)))


def aggregate_and(tests: TestsLike) -> AggregateCharacteristics:
    tests = as_test_set(tests)
    tpr = 1.0
    miss = 1.0
    for t in tests:
        tpr *= t.tpr.median
        miss *= 1.0 - t.tnr.median
    return AggregateCharacteristics(tpr, 1.0 - miss, named_rule("and", len(tests)))


def aggregate_or(tests: TestsLike) -> AggregateCharacteristics:
    tests = as_test_set(tests)
    miss = 1.0
    tnr = 1.0
    for t in tests:
        miss *= 1.0 - t.tpr.median
        tnr *= t.tnr.median
    return AggregateCharacteristics(1.0 - miss, tnr, named_rule("or", len(tests)))


def _majority3(a, b, c):
    return a * b + a * c + b * c - 2.0 * a * b * c


def aggregate_majority3(tests: TestsLike) -> AggregateCharacteristics:
    tests = as_test_set(tests)
    if len(tests) != 3:
        raise ArityError(f"the 3-test majority closed form needs 3 tests, got {len(tests)}")
    return AggregateCharacteristics(
        _majority3(*tests.tprs), _majority3(*tests.tnrs), named_rule("majority", 3)
    )


def byte_tables(probs) -> np.ndarray:
    """Lookup tables for summing ``probs`` over the set bits of a truth table.

    Row k, column b holds the sum of probs[8k + i] over the set bits i of
    byte b.  Summing row lookups over the bytes of a table gives the
    probability mass of its positive outcomes.
    """
    probs = np.asarray(probs, dtype=np.float64)
    n_bytes = max(1, (len(probs) + 7) // 8)
    padded = np.zeros(8 * n_bytes)
    padded[: len(probs)] = probs
    bits = (np.arange(256)[:, None] >> np.arange(8)) & 1
    return bits @ padded.reshape(n_bytes, 8).T  # (256, n_bytes)


def aggregate_tables(tprs, tnrs, tables: np.ndarray, n: int):
    """Vectorized (TPR_S, TNR_S) for an array of truth tables over n tests.

    Both rates are sums over the positive outcomes (TNR_S as one minus the
    false positive mass), so the all-negative rule lands exactly on (0, 0);
    the all-positive rule is pinned to (1, 1) in ROC terms.
    """
    tables = np.asarray(tables, dtype=np.uint64)
    lut_pos = byte_tables(outcome_probabilities(list(tprs)))
    lut_fp = byte_tables(outcome_probabilities(list(tnrs), negative_rates=True))
    size = 1 << n
    mask = np.uint64((1 << size) - 1) if size < 64 else np.uint64(0xFFFFFFFFFFFFFFFF)
    tpr = np.zeros(tables.shape)
    fpr = np.zeros(tables.shape)
    for k in range(lut_pos.shape[1]):
        byte = ((tables >> np.uint64(8 * k)) & np.uint64(0xFF)).astype(np.intp)
        tpr += lut_pos[byte, k]
        fpr += lut_fp[byte, k]
    full = tables == mask
    tpr[full] = 1.0
    fpr[full] = 1.0
    np.clip(tpr, 0.0, 1.0, out=tpr)
    np.clip(fpr, 0.0, 1.0, out=fpr)
    return tpr, 1.0 - fpr
