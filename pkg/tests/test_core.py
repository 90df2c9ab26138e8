import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from diagagg import core
from diagagg.core import (
    RateError,
    RateEstimate,
    TestCharacteristics,
    TestSet,
    as_rate,
    load_tests,
    validate_discriminatory,
)
from diagagg.fixtures import antigen3, fixture_path

rates = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


class TestRate:
    @pytest.mark.parametrize("bad", [-1e-9, 1.0000001, math.nan, math.inf, -math.inf])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(RateError):
            as_rate(bad)

    @pytest.mark.parametrize("good", [0, 0.0, 0.5, 1, 1.0])
    def test_bounds_accepted(self, good):
        assert as_rate(good) == float(good)

    def test_estimate_order_enforced(self):
        with pytest.raises(RateError):
            RateEstimate(0.5, 0.6, 0.9)
        with pytest.raises(RateError):
            RateEstimate(0.5, 0.1, 0.4)

    def test_half_interval_rejected(self):
        with pytest.raises(RateError):
            RateEstimate(0.5, 0.1, None)

    def test_exactness(self):
        assert RateEstimate(0.3).is_exact
        assert RateEstimate(0.3, 0.3, 0.3).is_exact
        assert not RateEstimate(0.3, 0.2, 0.4).is_exact

    @given(st.lists(rates, min_size=3, max_size=3))
    def test_json_round_trip(self, xs):
        lo, med, hi = sorted(xs)
        est = RateEstimate(med, lo, hi)
        back = RateEstimate.from_dict(json.loads(json.dumps(est.to_dict())))
        assert back == est
        assert back.ci_low <= back.median <= back.ci_high

    @given(rates)
    def test_repr_round_trip(self, x):
        assert abs(float(repr(x)) - x) <= 1e-12


class TestDiscriminatory:
    def test_examples(self):
        assert validate_discriminatory(TestCharacteristics.exact("a", 0.95, 0.95))
        assert not validate_discriminatory(TestCharacteristics.exact("b", 0.5, 0.5))
        assert validate_discriminatory(TestCharacteristics.exact("Abbott", 0.748, 0.997))


class TestTestSet:
    def test_names_unique(self):
        t = TestCharacteristics.exact("x", 0.9, 0.9)
        with pytest.raises(ValueError):
            TestSet((t, t))

    def test_empty_name_rejected(self):
        with pytest.raises(ValueError):
            TestCharacteristics.exact(" ", 0.9, 0.9)

    def test_nonempty(self):
        with pytest.raises(ValueError):
            TestSet(())

    def test_fixture_contents(self):
        ts = antigen3()
        assert len(ts) == 3
        assert ts.tprs == (0.748, 0.681, 0.687)
        assert ts.tnrs == (0.997, 0.990, 1.0)
        assert ts[2].tnr.ci_low == 0.98

    def test_json_and_csv_round_trip(self, tmp_path):
        ts = antigen3()
        assert core.tests_from_json(ts.to_json()) == ts
        assert core.tests_from_csv(ts.to_csv()) == ts
        p = tmp_path / "t.csv"
        p.write_text(ts.to_csv())
        assert load_tests(p) == ts

    def test_csv_empty_cells_mean_exact(self):
        text = "name,tpr,tpr_lo,tpr_hi,tnr,tnr_lo,tnr_hi\nA,0.9,,,0.95,0.9,0.99\n"
        t = core.tests_from_csv(text)[0]
        assert t.tpr.is_exact and not t.tnr.is_exact

    def test_json_object_form(self):
        ts = load_tests(fixture_path("norrbotten"))
        assert [t.name for t in ts][0].startswith("Abbott")
        assert ts[0].tnr.is_exact
