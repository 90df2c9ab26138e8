"""Shared domain types: rates, rate estimates, test characteristics and test sets.

Rates are plain floats checked to lie in [0, 1].  Everything here is
immutable, so values can be handed to worker threads without copying.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence, Union

Rate = float

# Absolute tolerance used when comparing rates in checks and tests.
RATE_ATOL = 1e-9


class DiagAggError(Exception):
    """Base class for errors raised by this package."""


class RateError(DiagAggError, ValueError):
    """A probability fell outside [0, 1] or an estimate is inconsistent."""


class ArityError(DiagAggError, ValueError):
    """Number of tests does not match the arity of a rule."""


class ValidityError(DiagAggError, ValueError):
    """Inputs violate the validity conditions of a formula."""


class UndefinedRatioError(DiagAggError, ArithmeticError):
    """A ratio was requested whose denominator vanishes."""


def as_rate(value, name: str = "rate") -> float:
    """Return `value` as a float after checking 0 <= value <= 1."""
    x = float(value)
    if math.isnan(x) or x < 0.0 or x > 1.0:
        raise RateError(f"{name} must lie in [0, 1], got {value!r}")
    return x


@dataclass(frozen=True)
class RateEstimate:
    """Median rate with an optional 95% confidence interval."""

    median: float
    ci_low: float | None = None
    ci_high: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "median", as_rate(self.median, "median"))
        if (self.ci_low is None) != (self.ci_high is None):
            raise RateError("give both CI bounds or neither")
        if self.ci_low is not None:
            lo = as_rate(self.ci_low, "ci_low")
            hi = as_rate(self.ci_high, "ci_high")
            if not lo <= self.median <= hi:
                raise RateError(f"need ci_low <= median <= ci_high, got ({lo}, {self.median}, {hi})")
            object.__setattr__(self, "ci_low", lo)
            object.__setattr__(self, "ci_high", hi)

    @property
    def has_ci(self) -> bool:
        return self.ci_low is not None

    @property
    def is_exact(self) -> bool:
        """True when Monte Carlo propagation should hold this rate fixed."""
        return not self.has_ci or self.ci_low == self.ci_high

    def to_dict(self) -> dict:
        d = {"median": self.median}
        if self.has_ci:
            d["lo"] = self.ci_low
            d["hi"] = self.ci_high
        return d

    @classmethod
    def from_dict(cls, d) -> "RateEstimate":
        if isinstance(d, (int, float)):
            return cls(d)
        return cls(d["median"], d.get("lo"), d.get("hi"))


@dataclass(frozen=True)
class TestCharacteristics:
    """Sensitivity (tpr) and specificity (tnr) of one binary test."""

    __test__ = False  # keep pytest from collecting this class

    name: str
    tpr: RateEstimate
    tnr: RateEstimate

    def __post_init__(self):
        if not isinstance(self.name, str) or not self.name.strip():
            raise ValueError("test name must be a nonempty string")
        for field in ("tpr", "tnr"):
            v = getattr(self, field)
            if not isinstance(v, RateEstimate):
                object.__setattr__(self, field, RateEstimate(v))

    @classmethod
    def exact(cls, name: str, tpr: float, tnr: float) -> "TestCharacteristics":
        return cls(name, RateEstimate(tpr), RateEstimate(tnr))

    def to_dict(self) -> dict:
        return {"name": self.name, "tpr": self.tpr.to_dict(), "tnr": self.tnr.to_dict()}

    @classmethod
    def from_dict(cls, d) -> "TestCharacteristics":
        return cls(d["name"], RateEstimate.from_dict(d["tpr"]), RateEstimate.from_dict(d["tnr"]))


@dataclass(frozen=True)
class TestSet:
    """Ordered tests; position i is the i-th administered test."""

    __test__ = False

    tests: tuple

    def __post_init__(self):
        tests = tuple(self.tests)
        if not tests:
            raise ValueError("a test set needs at least one test")
        names = [t.name for t in tests]
        if len(set(names)) != len(names):
            raise ValueError(f"test names must be unique, got {names}")
        object.__setattr__(self, "tests", tests)

    def __len__(self) -> int:
        return len(self.tests)

    def __iter__(self) -> Iterator[TestCharacteristics]:
        return iter(self.tests)

    def __getitem__(self, i):
        return self.tests[i]

    @property
    def tprs(self) -> tuple:
        return tuple(t.tpr.median for t in self.tests)

    @property
    def tnrs(self) -> tuple:
        return tuple(t.tnr.median for t in self.tests)

    def to_json(self) -> str:
        return json.dumps([t.to_dict() for t in self.tests], indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for t in self.tests:
            row = [t.name]
            for est in (t.tpr, t.tnr):
                row += [repr(est.median)] + (
                    [repr(est.ci_low), repr(est.ci_high)] if est.has_ci else ["", ""]
                )
            w.writerow(row)
        return buf.getvalue()


CSV_COLUMNS = ("name", "tpr", "tpr_lo", "tpr_hi", "tnr", "tnr_lo", "tnr_hi")

TestsLike = Union[TestSet, Sequence[TestCharacteristics]]


def as_test_set(tests: TestsLike) -> TestSet:
    return tests if isinstance(tests, TestSet) else TestSet(tuple(tests))


def validate_discriminatory(test: TestCharacteristics) -> bool:
    """True iff the test is informative beyond chance (tpr + tnr > 1)."""
    return test.tpr.median + test.tnr.median > 1.0


def tests_from_json(text: str) -> TestSet:
    """Parse a JSON test set: either a bare array or an object with a "tests" key."""
    data = json.loads(text)
    if isinstance(data, dict):
        data = data["tests"]
    return TestSet(tuple(TestCharacteristics.from_dict(d) for d in data))


def tests_from_csv(text: str) -> TestSet:
    rows = csv.DictReader(io.StringIO(text))
    missing = set(CSV_COLUMNS) - set(rows.fieldnames or ())
    if missing:
        raise ValueError(f"test CSV lacks columns {sorted(missing)}")

    def est(row, key):
        lo, hi = row[key + "_lo"].strip(), row[key + "_hi"].strip()
        return RateEstimate(
            float(row[key]), float(lo) if lo else None, float(hi) if hi else None
        )

    return TestSet(
        tuple(TestCharacteristics(r["name"], est(r, "tpr"), est(r, "tnr")) for r in rows)
    )


def load_tests(path: Union[str, Path]) -> TestSet:
    """Load a test set from a .json or .csv file."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".csv":
        return tests_from_csv(text)
    return tests_from_json(text)
