"""Correcting a seroprevalence survey for the errors of a two-test protocol.

The survey called a sample positive only when two antibody tests agreed.
That protocol is nearly perfectly specific but misses about a quarter of
infections, so the raw positive share understates true prevalence and
inflates fatality and hospitalization ratios.  Uncertainty in every input
is propagated with one million Monte Carlo draws.
"""

from diagagg import (
    MonteCarloConfig,
    aggregate,
    norrbotten,
    norrbotten_strata,
    rogan_gladen_ci,
    rule_from_spec,
    severity_ratios,
)


def pct(e):
    return f"{e.median:6.2%} ({e.ci_low:.2%} - {e.ci_high:.2%})"


data = norrbotten()
tests = data["tests"]
rule = rule_from_spec(data["rule"], len(tests))
agg = aggregate(tests, rule)
print(f"protocol: both tests positive; aggregate TPR {agg.tpr:.2%}, TNR {agg.tnr:.2%}\n")

mc = MonteCarloConfig(n_samples=1_000_000, seed=0)
print(f"{'stratum':18s} {'apparent':26s} corrected")
for s in norrbotten_strata() + [data["overall"]]:
    res = rogan_gladen_ci(s.apparent_prevalence, tests, rule, mc)
    print(f"{s.label:18s} {pct(s.apparent_prevalence):26s} {pct(res.corrected)}")
    if s.deaths is not None:
        overall, corrected = s, res

r = severity_ratios(overall, corrected)
f_raw = overall.apparent_prevalence.median
print(f"\nwhole population, {overall.deaths} deaths and {overall.hospitalizations} hospitalizations:")
print(f"  IFR {pct(r.ifr)}   uncorrected {overall.deaths / (f_raw * overall.population):.2%}")
print(f"  IHR {pct(r.ihr)}   uncorrected {overall.hospitalizations / (f_raw * overall.population):.2%}")
