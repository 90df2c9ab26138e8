"""Stochastic simulator used to check the analytic formulas empirically.

It draws disease status and test outcomes for synthetic individuals and
tallies what the aggregate call gets right.  Apart from the core types and
rule evaluation it shares no code with the analytic modules, so agreement
between the two is a genuine cross-check.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .core import ArityError, TestsLike, as_rate, as_test_set
from .rules import AggregationRule, evaluate_rule

BLOCK = 1 << 18


@dataclass(frozen=True)
class SimulationReport:
    n_individuals: int
    true_positives: int
    false_positives: int
    true_negatives: int
    false_negatives: int
    tests_administered: int
    empirical_tpr: float | None
    empirical_fpr: float | None
    empirical_apparent_prevalence: float

    @property
    def n_diseased(self) -> int:
        return self.true_positives + self.false_negatives

    @property
    def n_healthy(self) -> int:
        return self.false_positives + self.true_negatives

    def to_dict(self) -> dict:
        return asdict(self)


def _stop_tables(rule: AggregationRule, order: list) -> list:
    """stop[k][prefix] is True when the first k tests in ``order`` settle the call.

    ``prefix`` packs the k observed outcomes, first administered test as
    the most significant bit.  Settled means every completion of the
    untested outcomes gives the same call.
    """
    n = rule.n
    stop = []
    for k in range(n + 1):
        row = np.zeros(1 << k, dtype=bool)
        for prefix in range(1 << k):
            seen = set()
            for rest in itertools.product((0, 1), repeat=n - k):
                y = [0] * n
                bits = [(prefix >> (k - 1 - m)) & 1 for m in range(k)] + list(rest)
                for pos, b in zip(order, bits):
                    y[pos] = b
                seen.add(evaluate_rule(rule, y))
            row[prefix] = len(seen) == 1
        stop.append(row)
    return stop


def _simulate_block(rng, size, f, tpr, tnr, calls, order, stop):
    n = len(tpr)
    diseased = rng.random(size) < f
    outcomes = np.zeros((size, n), dtype=np.int64)
    if stop is None:
        for i in range(n):
            p = np.where(diseased, tpr[i], 1.0 - tnr[i])
            outcomes[:, i] = rng.random(size) < p
        used = n * size
    else:
        prefix = np.zeros(size, dtype=np.int64)
        active = np.full(size, not stop[0][0])
        used = 0
        for k, i in enumerate(order):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            p = np.where(diseased[idx], tpr[i], 1.0 - tnr[i])
            y = (rng.random(idx.size) < p).astype(np.int64)
            used += idx.size
            outcomes[idx, i] = y
            prefix[idx] = 2 * prefix[idx] + y
            active[idx] = ~stop[k + 1][prefix[idx]]
    index = outcomes @ (1 << np.arange(n - 1, -1, -1))
    z = calls[index]
    tp = int(np.sum(z & diseased))
    fp = int(np.sum(z & ~diseased))
    fn = int(np.sum(~z & diseased))
    tn = size - tp - fp - fn
    return np.array([tp, fp, tn, fn, used], dtype=np.int64)


def simulate(
    f: float,
    tests: TestsLike,
    rule: AggregationRule,
    order: Sequence[int] | None = None,
    n_individuals: int = 1_000_000,
    seed: int = 0,
    threads: int = 1,
) -> SimulationReport:
    """Simulate a testing protocol on ``n_individuals`` synthetic people.

    ``order`` gives the 1-based administration order for series testing;
    outcomes are drawn lazily and testing stops once the call is settled.
    ``order=None`` means parallel testing, where everyone takes all tests.
    Median rates are used.
    """
    f = as_rate(f, "f")
    tests = as_test_set(tests)
    n = len(tests)
    if rule.n != n:
        raise ArityError(f"rule takes {rule.n} tests, got {n}")
    if n_individuals < 1:
        raise ValueError("n_individuals must be positive")
    stop = None
    zero_order = list(range(n))
    if order is not None:
        if sorted(order) != list(range(1, n + 1)):
            raise ValueError(f"order must be a permutation of 1..{n}, got {list(order)}")
        zero_order = [i - 1 for i in order]
        stop = _stop_tables(rule, zero_order)
    calls = np.array(
        [evaluate_rule(rule, [(j >> (n - 1 - i)) & 1 for i in range(n)]) for j in range(1 << n)]
    )
    tpr = np.array(tests.tprs)
    tnr = np.array(tests.tnrs)

    n_blocks = -(-n_individuals // BLOCK)
    seeds = np.random.SeedSequence(seed).spawn(n_blocks)
    sizes = [BLOCK] * (n_blocks - 1) + [n_individuals - BLOCK * (n_blocks - 1)]

    def run(b):
        rng = np.random.Generator(np.random.PCG64(seeds[b]))
        return _simulate_block(rng, sizes[b], f, tpr, tnr, calls, zero_order, stop)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            tallies = list(pool.map(run, range(n_blocks)))
    else:
        tallies = [run(b) for b in range(n_blocks)]
    tp, fp, tn, fn, used = (int(v) for v in np.sum(tallies, axis=0))
    return SimulationReport(
        n_individuals, tp, fp, tn, fn, used,
        tp / (tp + fn) if tp + fn else None,
        fp / (fp + tn) if fp + tn else None,
        (tp + fp) / n_individuals,
    )
