"""Shared strategies and builders for the test suite."""

from hypothesis import strategies as st

from diagagg.core import TestCharacteristics, TestSet
from diagagg.rules import AggregationRule

rate = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def make_tests(pairs):
    return TestSet(tuple(TestCharacteristics.exact(f"T{i}", a, b) for i, (a, b) in enumerate(pairs)))


@st.composite
def panels(draw, min_n=1, max_n=4, rates=rate):
    """Test sets of exact rates."""
    n = draw(st.integers(min_n, max_n))
    return make_tests([(draw(rates), draw(rates)) for _ in range(n)])


@st.composite
def rules(draw, max_n=4):
    n = draw(st.integers(1, max_n))
    return AggregationRule(n, draw(st.integers(0, (1 << (1 << n)) - 1)))
