"""How many tests does series testing save?

In series testing the second test is run only if the first leaves the
call open.  AND stops after a negative and OR after a positive, so which
is cheaper depends on prevalence.  The analytic expectations are checked
against a simulated population of one million people.
"""

from diagagg import critical_prevalence, named_rule, series_cost, simulate
from diagagg.core import TestCharacteristics, TestSet

rates = (0.95, 0.90)
pair = TestSet([TestCharacteristics.exact("A", *rates), TestCharacteristics.exact("B", *rates)])
fc = critical_prevalence(rates)
print(f"test: TPR {rates[0]:.0%}, TNR {rates[1]:.0%}; AND is cheaper below f = {fc:.3f}\n")
print("prevalence  tests/person AND  OR    simulated AND  OR")
for f in (0.01, 0.1, 0.3, fc, 0.7, 0.95):
    a = series_cost(f, rates, "and").expected_tests_series
    o = series_cost(f, rates, "or").expected_tests_series
    sa = simulate(f, pair, named_rule("and", 2), order=(1, 2), seed=1)
    so = simulate(f, pair, named_rule("or", 2), order=(1, 2), seed=2)
    print(f"{f:9.3f}   {a:14.4f} {o:6.4f}   {sa.tests_administered / sa.n_individuals:12.4f}"
          f" {so.tests_administered / so.n_individuals:6.4f}")
print("\nParallel testing always costs 2 tests per person; series AND at 1% prevalence saves almost half.")
