"""Enumerate aggregation rules, place them in ROC space and extract the efficient frontier.

The frontier is the upper-left chain of the convex hull of all (FPR, TPR)
points, running from (0, 0) to (1, 1).  Hulls use Andrew's monotone chain.

Large scans run in fixed-size chunks of truth tables.  Each chunk is
reduced to the points that could still sit on the global frontier, and
the final hull is taken over the union of those survivors.  Chunk
boundaries do not depend on the worker count, so results are identical
for any ``threads`` setting.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

from .aggregation import aggregate_tables
from .core import DiagAggError, TestsLike, as_test_set
from .rules import AggregationRule, format_rule

# Number of monotone Boolean functions of n variables.
DEDEKIND = {0: 2, 1: 3, 2: 6, 3: 20, 4: 168, 5: 7581}

MAX_FULL_N = 4
MAX_EXHAUSTIVE_N = 5
MAX_MONOTONE_N = 5
CROSS_TOL = 1e-12
DEFAULT_CHUNK = 1 << 20


class EnumerationLimitError(DiagAggError, ValueError):
    """Requested enumeration is larger than allowed without an explicit opt-in."""


@dataclass(frozen=True)
class RocPoint:
    fpr: float
    tpr: float
    rule: AggregationRule


@dataclass(frozen=True)
class RocFrontier:
    """Hull vertices ordered by fpr, plus optionally every efficient rule."""

    points: tuple
    pareto: tuple | None = None

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def to_rows(self, pareto: bool = False) -> list:
        pts = self.pareto if pareto else self.points
        return [{"fpr": p.fpr, "tpr": p.tpr, "rule": format_rule(p.rule)} for p in pts]


# ------------------------------------------------------------ enumeration

def check_limits(n: int, monotone_only: bool, exhaustive: bool = False) -> None:
    if n < 1:
        raise EnumerationLimitError(f"need at least one test, got n={n}")
    if monotone_only:
        if n > MAX_MONOTONE_N:
            raise EnumerationLimitError(
                f"monotone enumeration is limited to n <= {MAX_MONOTONE_N} (got n={n})"
            )
        return
    if n <= MAX_FULL_N:
        return
    if n == MAX_EXHAUSTIVE_N and exhaustive:
        return
    if n == MAX_EXHAUSTIVE_N:
        raise EnumerationLimitError(
            f"n={n} has 2**32 rules; pass monotone_only=True (--monotone) for the "
            f"{DEDEKIND[5]:,} monotone rules, or exhaustive=True (--exhaustive) for a "
            "full streaming scan"
        )
    raise EnumerationLimitError(f"full enumeration is limited to n <= {MAX_EXHAUSTIVE_N} (got n={n})")


@lru_cache(maxsize=None)
def monotone_tables(n: int) -> np.ndarray:
    """Sorted truth tables of all monotone rules over n tests.

    Built by splitting on test 1: a monotone rule is a pair (g0, g1) of
    monotone rules on the remaining tests with g0 <= g1 pointwise, where g0
    fills the outcomes with test 1 negative (low half of the table).
    """
    if n == 0:
        return np.array([0, 1], dtype=np.uint64)
    sub = monotone_tables(n - 1)
    half = np.uint64(1 << (n - 1))
    g0 = sub[:, None]
    g1 = sub[None, :]
    ok = (g0 & ~g1) == 0
    tables = (g0 | (g1 << half))[ok]
    tables = np.sort(tables)
    tables.setflags(write=False)
    return tables


def rule_count(n: int, monotone_only: bool) -> int:
    return DEDEKIND[n] if monotone_only else 1 << (1 << n)


def table_chunks(
    n: int, monotone_only: bool = False, exhaustive: bool = False, chunk_size: int = DEFAULT_CHUNK
) -> Iterator[np.ndarray]:
    """Yield truth tables in ascending order, ``chunk_size`` at a time."""
    check_limits(n, monotone_only, exhaustive)
    if monotone_only:
        tables = monotone_tables(n)
        for start in range(0, len(tables), chunk_size):
            yield tables[start:start + chunk_size]
        return
    total = 1 << (1 << n)
    for start in range(0, total, chunk_size):
        yield np.arange(start, min(total, start + chunk_size), dtype=np.uint64)


def enumerate_rules(
    n: int, monotone_only: bool = False, exhaustive: bool = False
) -> Iterator[AggregationRule]:
    """Yield every rule over n tests (or every monotone one) exactly once."""
    for chunk in table_chunks(n, monotone_only, exhaustive):
        for t in chunk.tolist():
            yield AggregationRule(n, t)


def cloud_arrays(tests: TestsLike, monotone_only: bool = False, exhaustive: bool = False):
    """(tables, fpr, tpr) arrays for all enumerated rules."""
    tests = as_test_set(tests)
    n = len(tests)
    tables = np.concatenate(list(table_chunks(n, monotone_only, exhaustive)))
    tpr, tnr = aggregate_tables(tests.tprs, tests.tnrs, tables, n)
    return tables, 1.0 - tnr, tpr


def roc_cloud(tests: TestsLike, monotone_only: bool = False) -> list:
    """One RocPoint per enumerated rule, in ascending table order."""
    tests = as_test_set(tests)
    n = len(tests)
    tables, fpr, tpr = cloud_arrays(tests, monotone_only)
    return [
        RocPoint(float(x), float(y), AggregationRule(n, int(t)))
        for t, x, y in zip(tables.tolist(), fpr.tolist(), tpr.tolist())
    ]


# ------------------------------------------------------------------ hulls

def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _turn(o, a, b, tol: float) -> bool:
    """True for a strict counterclockwise turn o -> a -> b.

    The cross product is compared against ``tol`` times the lengths of both
    legs, so the test is on the sine of the turning angle and does not
    depend on how close to the origin the points sit.
    """
    la = math.hypot(a[0] - o[0], a[1] - o[1])
    lb = math.hypot(b[0] - o[0], b[1] - o[1])
    return _cross(o, a, b) > tol * la * lb


def _half_hull(pts: Sequence, tol: float) -> list:
    chain = []
    for p in pts:
        while len(chain) >= 2 and not _turn(chain[-2], chain[-1], p, tol):
            chain.pop()
        chain.append(p)
    return chain


def convex_hull(points, tol: float = CROSS_TOL) -> list:
    """Hull vertices in counterclockwise order, starting from the lowest-left point.

    Duplicates collapse and collinear boundary points are dropped.  A single
    point returns itself; collinear input returns its two extremes.
    """
    pts = sorted(set((float(x), float(y)) for x, y in points))
    if len(pts) <= 2:
        return pts
    lower = _half_hull(pts, tol)
    upper = _half_hull(pts[::-1], tol)
    return lower[:-1] + upper[:-1]


def upper_hull(points, tol: float = CROSS_TOL) -> list:
    """Upper chain of the hull, left to right (from min-x to max-x)."""
    pts = sorted(set((float(x), float(y)) for x, y in points))
    return _half_hull(pts[::-1], tol)[::-1]


# --------------------------------------------------------------- frontier

def _candidates(tables, fpr, tpr, tol):
    """Keep points that may lie on the frontier: not clearly dominated, or an endpoint."""
    order = np.lexsort((-tpr, fpr))
    t, x, y = tables[order], fpr[order], tpr[order]
    prev_max = np.maximum.accumulate(np.concatenate(([-np.inf], y[:-1])))
    keep = (y >= prev_max - tol) & (y >= x - tol)
    keep |= (np.abs(x) <= tol) & (np.abs(y) <= tol)
    keep |= (np.abs(x - 1.0) <= tol) & (np.abs(y - 1.0) <= tol)
    return t[keep], x[keep], y[keep]


def _scan_chunk(tprs, tnrs, n, chunk, tol):
    tpr, tnr = aggregate_tables(tprs, tnrs, chunk, n)
    return _candidates(chunk, 1.0 - tnr, tpr, tol)


def _on_chain(x, y, chain, tol) -> bool:
    """True if (x, y) lies on the polyline ``chain`` (same sine test as the hull)."""
    if any(abs(x - cx) <= tol and abs(y - cy) <= tol for cx, cy in chain):
        return True
    for (x0, y0), (x1, y1) in zip(chain, chain[1:]):
        if x0 - tol <= x <= x1 + tol and min(y0, y1) - tol <= y <= max(y0, y1) + tol:
            la = math.hypot(x1 - x0, y1 - y0)
            lb = math.hypot(x - x0, y - y0)
            if abs(_cross((x0, y0), (x1, y1), (x, y))) <= tol * la * lb:
                return True
    return False


def roc_frontier(
    tests: TestsLike,
    monotone_only: bool = False,
    exhaustive: bool = False,
    threads: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
    pareto: bool = False,
    tol: float = CROSS_TOL,
) -> RocFrontier:
    """Efficient (FPR, TPR) frontier over all rules for ``tests``.

    Each hull vertex carries the rule with the smallest truth table among
    those landing on it.  With ``pareto=True`` the result also lists every
    rule on the frontier that no other rule dominates, collinear ones
    included.
    """
    tests = as_test_set(tests)
    n = len(tests)
    chunks = table_chunks(n, monotone_only, exhaustive, chunk_size)
    args = (tests.tprs, tests.tnrs, n)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda c: _scan_chunk(*args, c, tol), chunks))
    else:
        parts = [_scan_chunk(*args, c, tol) for c in chunks]
    tables = np.concatenate([p[0] for p in parts])
    fpr = np.concatenate([p[1] for p in parts])
    tpr = np.concatenate([p[2] for p in parts])
    tables, fpr, tpr = _candidates(tables, fpr, tpr, tol)
    order = np.lexsort((tables, tpr, fpr))
    tables, fpr, tpr = tables[order].tolist(), fpr[order].tolist(), tpr[order].tolist()

    chain = upper_hull(zip(fpr, tpr), tol)
    chain = [p for p in chain if p[1] >= p[0] - tol]

    points = []
    for vx, vy in chain:
        witness = min(
            t for t, x, y in zip(tables, fpr, tpr) if abs(x - vx) <= tol and abs(y - vy) <= tol
        )
        points.append(RocPoint(vx, vy, AggregationRule(n, witness)))

    efficient = None
    if pareto:
        efficient = []
        best = -np.inf
        # candidates are sorted by fpr then tpr; walk clusters of equal points
        i = 0
        while i < len(tables):
            j = i
            while j + 1 < len(tables) and abs(fpr[j + 1] - fpr[i]) <= tol and abs(tpr[j + 1] - tpr[i]) <= tol:
                j += 1
            # a cluster is dominated if a later cluster at the same fpr has higher tpr
            k = j + 1
            top = tpr[i]
            while k < len(tables) and abs(fpr[k] - fpr[i]) <= tol:
                top = max(top, tpr[k])
                k += 1
            undominated = tpr[i] > best + tol and top <= tpr[i] + tol
            if undominated and _on_chain(fpr[i], tpr[i], chain, tol):
                efficient += [RocPoint(fpr[m], tpr[m], AggregationRule(n, tables[m])) for m in range(i, j + 1)]
            best = max(best, max(tpr[i:j + 1]))
            i = j + 1
        efficient = tuple(efficient)
    return RocFrontier(tuple(points), efficient)
