import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diagagg.aggregation import AggregateCharacteristics, aggregate, aggregate_and
from diagagg.core import RateEstimate, UndefinedRatioError
from diagagg.fixtures import norrbotten, norrbotten_strata
from diagagg.prevalence import (
    PrevalenceResult,
    StratumRecord,
    apparent_prevalence,
    rogan_gladen,
    rogan_gladen_ci,
    severity_ratios,
    strata_from_csv,
    strata_to_csv,
)
from diagagg.rules import named_rule, rule_from_spec
from diagagg.uncertainty import MonteCarloConfig
from helpers import make_tests, panels, rate

informative = st.floats(min_value=0.55, max_value=0.999, allow_nan=False)


def agg(tpr, tnr):
    return AggregateCharacteristics(tpr, tnr, named_rule("single", 1, 1))


def survey():
    data = norrbotten()
    return data["tests"], rule_from_spec(data["rule"], len(data["tests"])), data["overall"]


@pytest.fixture(scope="module")
def overall():
    ts, rule, s = survey()
    return s, rogan_gladen_ci(s.apparent_prevalence, ts, rule, MonteCarloConfig(1_000_000))


def and_expanded(p, t1, s1, t2, s2):
    """Corrected prevalence for a two-test AND, written out term by term."""
    return (p - 1 + s1 + s2 - s1 * s2) / (t1 * t2 + s1 + s2 - s1 * s2 - 1)


class TestApparent:
    def test_examples(self):
        assert apparent_prevalence(0.0, agg(0.9, 0.95)) == pytest.approx(0.05, abs=1e-15)
        assert apparent_prevalence(1.0, agg(0.9, 0.95)) == pytest.approx(0.9, abs=1e-15)
        assert apparent_prevalence(0.025, agg(0.757041, 1.0)) == pytest.approx(0.0189, abs=1e-4)

    @given(rate, rate, informative)
    def test_round_trip(self, f, tpr, tnr):
        if tpr + tnr - 1 < 1e-3:
            return
        a = agg(tpr, tnr)
        res = rogan_gladen(apparent_prevalence(f, a), a)
        assert res.corrected.median == pytest.approx(f, abs=1e-12)
        assert not res.clamped


class TestPointCorrection:
    def test_clamped_below(self):
        res = rogan_gladen(0.001, agg(0.99, 0.9))
        assert res.clamped
        assert res.corrected.median == 0.0
        assert res.point < 0

    def test_clamped_above(self):
        res = rogan_gladen(0.99, agg(0.9, 0.9))
        assert res.clamped and res.corrected.median == 1.0

    def test_no_discrimination(self):
        with pytest.raises(UndefinedRatioError):
            rogan_gladen(0.3, agg(0.6, 0.4))

    @given(rate, rate, rate, rate, rate)
    def test_and_expanded_formula(self, p, t1, s1, t2, s2):
        a = aggregate_and(make_tests([(t1, s1), (t2, s2)]))
        if abs(a.tpr + a.tnr - 1) < 1e-3:
            return
        res = rogan_gladen(p, a)
        assert res.point == pytest.approx(and_expanded(p, t1, s1, t2, s2), rel=1e-9, abs=1e-9)

    @given(informative, informative)
    def test_monotone_in_apparent(self, tpr, tnr):
        a = agg(tpr, tnr)
        vals = [rogan_gladen(p, a).corrected.median for p in np.linspace(0, 1, 101)]
        assert np.all(np.diff(vals) >= 0)

    def test_specificity_dominates_at_low_prevalence(self):
        # at f=0.05 most positives are false, so specificity errors move the estimate more
        base = agg(0.9, 0.95)
        p = apparent_prevalence(0.05, base)
        d_spec = abs(rogan_gladen(p, agg(0.9, 0.94)).point - 0.05)
        d_sens = abs(rogan_gladen(p, agg(0.89, 0.95)).point - 0.05)
        assert d_spec > d_sens

    def test_sensitivity_dominates_at_high_prevalence(self):
        base = agg(0.9, 0.95)
        p = apparent_prevalence(0.95, base)
        d_spec = abs(rogan_gladen(p, agg(0.9, 0.94)).point - 0.95)
        d_sens = abs(rogan_gladen(p, agg(0.89, 0.95)).point - 0.95)
        assert d_sens > d_spec


class TestIntervals:
    def test_exact_inputs_collapse(self):
        ts = make_tests([(0.9, 0.95), (0.8, 0.99)])
        res = rogan_gladen_ci(RateEstimate(0.1), ts, named_rule("and", 2), MonteCarloConfig(n_samples=2000))
        point = rogan_gladen(0.1, aggregate(ts, named_rule("and", 2))).corrected.median
        assert res.corrected.ci_low == res.corrected.ci_high == pytest.approx(point, abs=1e-12)

    def test_seed_determinism(self):
        ts, rule, _ = survey()
        s = norrbotten_strata()[0]
        a = rogan_gladen_ci(s.apparent_prevalence, ts, rule, MonteCarloConfig(20_000, seed=9))
        b = rogan_gladen_ci(s.apparent_prevalence, ts, rule, MonteCarloConfig(20_000, seed=9))
        assert a.corrected == b.corrected
        assert np.array_equal(a.samples, b.samples)

    @pytest.mark.parametrize(
        "k,expected",
        [(0, (0.0878, 0.0238, 0.2135)), (1, (0.00935, 0.00116, 0.0329)), (2, (0.0280, 0.0037, 0.0947))],
    )
    def test_norrbotten_strata(self, k, expected):
        ts, rule, _ = survey()
        s = norrbotten_strata()[k]
        res = rogan_gladen_ci(s.apparent_prevalence, ts, rule, MonteCarloConfig(1_000_000))
        got = (res.corrected.median, res.corrected.ci_low, res.corrected.ci_high)
        for g, e in zip(got, expected):
            assert g == pytest.approx(e, rel=0.05, abs=5e-4)


class TestSeverity:
    def test_overall_prevalence(self, overall):
        _, res = overall
        c = res.corrected
        assert (c.median, c.ci_low, c.ci_high) == pytest.approx((0.0253, 0.0106, 0.0498), rel=0.05)

    def test_ratios(self, overall):
        s, res = overall
        r = severity_ratios(s, res)
        assert r.ifr.median == pytest.approx(0.00935, rel=0.03)
        assert r.ihr.median == pytest.approx(0.03835, rel=0.03)
        assert r.ifr.ci_low < r.ifr.median < r.ifr.ci_high

    def test_uncorrected_ratios(self):
        s = norrbotten()["overall"]
        raw = PrevalenceResult(s.apparent_prevalence, RateEstimate(s.apparent_prevalence.median), False)
        r = severity_ratios(s, raw)
        assert r.ifr.median == pytest.approx(59 / (0.019 * 249614), abs=1e-15)
        assert r.ifr.median == pytest.approx(0.01244, abs=1e-5)

    def test_zero_deaths(self):
        s = StratumRecord("x", 1000, 0, None, RateEstimate(0.1, 0.05, 0.15))
        res = rogan_gladen(0.1, agg(0.9, 0.99))
        r = severity_ratios(s, res)
        assert r.ifr.median == 0.0
        assert r.ihr is None

    def test_zero_prevalence(self):
        s = StratumRecord("x", 1000, 3, 5, RateEstimate(0.001))
        with pytest.raises(UndefinedRatioError):
            severity_ratios(s, rogan_gladen(0.001, agg(0.99, 0.9)))

    def test_count_validation(self):
        with pytest.raises(ValueError):
            StratumRecord("x", 10, 11, None, RateEstimate(0.1))


class TestStrataIO:
    def test_round_trip(self):
        strata = norrbotten_strata()
        assert strata_from_csv(strata_to_csv(strata)) == strata

    def test_counts_optional(self):
        text = "label,population,deaths,hospitalizations,apparent,apparent_lo,apparent_hi\na,100,,4,0.1,,\n"
        (s,) = strata_from_csv(text)
        assert s.deaths is None and s.hospitalizations == 4
        assert not s.apparent_prevalence.has_ci

    def test_missing_column(self):
        with pytest.raises(ValueError):
            strata_from_csv("label,population\na,1\n")


@given(panels(min_n=2, max_n=3), rate)
def test_corrected_point_inverts_any_rule(ts, f):
    rule = named_rule("or", len(ts))
    a = aggregate(ts, rule)
    if abs(a.tpr + a.tnr - 1) < 1e-3:
        return
    assert rogan_gladen(apparent_prevalence(f, a), a).corrected.median == pytest.approx(f, abs=1e-9)
