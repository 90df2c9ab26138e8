"""Predictive values and the economics of series versus parallel testing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .core import (
    ArityError,
    TestCharacteristics,
    TestsLike,
    UndefinedRatioError,
    ValidityError,
    as_rate,
    as_test_set,
)
from .rules import AggregationRule, full_mask


@dataclass(frozen=True)
class CostReport:
    """Expected tests per person under series administration versus parallel.

    ``ratio`` is parallel tests over expected series tests.  It is infinite
    for constant rules, which need no test at all.
    """

    prevalence: float
    expected_tests_series: float
    tests_parallel: int
    ratio: float


def ppv(f: float, tpr: float, tnr: float) -> float:
    """Positive predictive value: true positives over all positive calls."""
    f, tpr, tnr = as_rate(f, "f"), as_rate(tpr, "tpr"), as_rate(tnr, "tnr")
    true_pos = f * tpr
    calls = true_pos + (1.0 - f) * (1.0 - tnr)
    if calls == 0.0:
        raise UndefinedRatioError("PPV undefined: no positive calls are possible")
    return true_pos / calls


def npv(f: float, tpr: float, tnr: float) -> float:
    """Negative predictive value: true negatives over all negative calls."""
    f, tpr, tnr = as_rate(f, "f"), as_rate(tpr, "tpr"), as_rate(tnr, "tnr")
    true_neg = (1.0 - f) * tnr
    calls = true_neg + f * (1.0 - tpr)
    if calls == 0.0:
        raise UndefinedRatioError("NPV undefined: no negative calls are possible")
    return true_neg / calls


def ppv_npv_crossing(tpr: float, tnr: float) -> float:
    """Prevalence above which PPV >= NPV."""
    tpr, tnr = as_rate(tpr, "tpr"), as_rate(tnr, "tnr")
    a = math.sqrt(tnr * (1.0 - tnr))
    b = math.sqrt(tpr * (1.0 - tpr))
    if a + b == 0.0:
        raise UndefinedRatioError("PPV/NPV crossing undefined when both rates are 0 or 1")
    return a / (a + b)


def _first_rates(first_test) -> tuple:
    if isinstance(first_test, TestCharacteristics):
        return first_test.tpr.median, first_test.tnr.median
    tpr, tnr = first_test
    return as_rate(tpr, "tpr"), as_rate(tnr, "tnr")


def series_cost(f: float, first_test, kind: str = "and", n: int = 2) -> CostReport:
    """Two-test series protocol: the second test runs only when it can change the call.

    Under AND it runs after a positive first result, under OR after a
    negative one.  ``first_test`` is a TestCharacteristics or a (tpr, tnr) pair.
    """
    if n != 2:
        raise ValidityError("the closed-form series cost covers two tests; use series_cost_general")
    f = as_rate(f, "f")
    tpr, tnr = _first_rates(first_test)
    kind = kind.lower()
    if kind == "and":
        second = f * tpr + (1.0 - f) * (1.0 - tnr)
    elif kind == "or":
        second = f * (1.0 - tpr) + (1.0 - f) * tnr
    else:
        raise ValueError(f"kind must be 'and' or 'or', got {kind!r}")
    expected = 1.0 + second
    return CostReport(f, expected, 2, 2.0 / expected)


def critical_prevalence(first_test) -> float:
    """Prevalence below which AND-series needs fewer tests than OR-series."""
    tpr, tnr = _first_rates(first_test)
    if tnr < 0.5 or tpr + tnr <= 1.0:
        raise ValidityError(
            f"critical prevalence needs tnr >= 1/2 and tpr + tnr > 1, got tpr={tpr}, tnr={tnr}"
        )
    return (2.0 * tnr - 1.0) / (2.0 * (tpr + tnr - 1.0))


def _constant_on(table: int, fixed: dict, n: int):
    """Call of the rule if it is the same for every completion of ``fixed``, else None.

    ``fixed`` maps 0-based test index to its observed outcome.
    """
    seen = set()
    for j in range(1 << n):
        if all(((j >> (n - 1 - i)) & 1) == y for i, y in fixed.items()):
            seen.add((table >> j) & 1)
            if len(seen) > 1:
                return None
    return seen.pop()


def series_cost_general(
    f: float, tests: TestsLike, rule: AggregationRule, order: Sequence[int] | None = None
) -> CostReport:
    """Exact expected tests per person when tests are given one at a time.

    Tests are administered in ``order`` (1-based indices, default 1..n) and
    administration stops as soon as the rule's call no longer depends on
    the outcomes still unknown.  The expectation is computed over the full
    outcome tree, separately for diseased and healthy individuals.
    """
    f = as_rate(f, "f")
    tests = as_test_set(tests)
    n = rule.n
    if len(tests) != n:
        raise ArityError(f"rule takes {n} tests, got {len(tests)}")
    order = list(range(1, n + 1)) if order is None else list(order)
    if sorted(order) != list(range(1, n + 1)):
        raise ValueError(f"order must be a permutation of 1..{n}, got {order}")
    order = [i - 1 for i in order]
    table = rule.table & full_mask(n)

    def expected(fixed: dict, diseased: bool) -> float:
        if _constant_on(table, fixed, n) is not None:
            return 0.0
        i = order[len(fixed)]
        p_pos = tests[i].tpr.median if diseased else 1.0 - tests[i].tnr.median
        total = 1.0
        for y, p in ((1, p_pos), (0, 1.0 - p_pos)):
            if p > 0.0:
                total += p * expected({**fixed, i: y}, diseased)
        return total

    e = f * expected({}, True) + (1.0 - f) * expected({}, False)
    ratio = n / e if e > 0.0 else math.inf
    return CostReport(f, e, n, ratio)
