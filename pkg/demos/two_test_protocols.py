"""Combining two identical tests: what AND and OR buy you.

Two tests with 95% sensitivity and 95% specificity are combined by
requiring both to be positive (AND) or either (OR).  The script prints the
aggregate rates, positive and negative predictive values across prevalence,
and the prevalence where PPV and NPV meet.
"""

from diagagg import aggregate_and, aggregate_or, npv, ppv, ppv_npv_crossing
from diagagg.core import TestCharacteristics, TestSet

test = (0.95, 0.95)
pair = TestSet([TestCharacteristics.exact("first", *test), TestCharacteristics.exact("second", *test)])

print("single test           TPR 95.00%  TNR 95.00%")
for label, agg in (("AND (both positive)", aggregate_and(pair)), ("OR (either positive)", aggregate_or(pair))):
    print(f"{label:22s} TPR {agg.tpr:6.2%}  TNR {agg.tnr:6.2%}")

print("\nprevalence   PPV single  PPV AND   PPV OR  | NPV single  NPV AND   NPV OR")
a, o = aggregate_and(pair), aggregate_or(pair)
for f in (0.01, 0.05, 0.1, 0.3, 0.5, 0.8):
    row = [ppv(f, *test), ppv(f, a.tpr, a.tnr), ppv(f, o.tpr, o.tnr),
           npv(f, *test), npv(f, a.tpr, a.tnr), npv(f, o.tpr, o.tnr)]
    print(f"{f:10.0%}   " + "  ".join(f"{v:8.2%}" for v in row[:3]) + "  | "
          + "  ".join(f"{v:8.2%}" for v in row[3:]))

print(f"\nPPV equals NPV for the single test at f = {ppv_npv_crossing(*test):.0%};")
print("AND pushes PPV up at low prevalence, OR keeps NPV high when disease is common.")
