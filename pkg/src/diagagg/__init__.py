"""Exact rates, ROC frontiers and prevalence correction for aggregated diagnostic tests."""

from .aggregation import (
    AggregateCharacteristics,
    aggregate,
    aggregate_and,
    aggregate_majority3,
    aggregate_or,
    aggregate_rates,
)
from .core import (
    ArityError,
    DiagAggError,
    RateError,
    RateEstimate,
    TestCharacteristics,
    TestSet,
    UndefinedRatioError,
    ValidityError,
    load_tests,
)
from .fixtures import antigen3, norrbotten, norrbotten_strata
from .frontier import (
    EnumerationLimitError,
    RocFrontier,
    RocPoint,
    enumerate_rules,
    roc_cloud,
    roc_frontier,
)
from .metrics import (
    CostReport,
    critical_prevalence,
    npv,
    ppv,
    ppv_npv_crossing,
    series_cost,
    series_cost_general,
)
from .oracle import SimulationReport, simulate
from .prevalence import (
    PrevalenceResult,
    StratumRecord,
    apparent_prevalence,
    rogan_gladen,
    rogan_gladen_ci,
    severity_ratios,
)
from .rules import (
    AggregationRule,
    RuleSyntaxError,
    complement_rule,
    evaluate_rule,
    format_rule,
    is_monotone,
    named_rule,
    parse_rule,
    rule_from_spec,
)
from .uncertainty import (
    BetaFitError,
    BetaParams,
    MonteCarloConfig,
    MonteCarloError,
    beta_cdf,
    fit_beta,
    propagate_ci,
    sample_beta,
)

__all__ = [name for name in dir() if not name.startswith("_")]
