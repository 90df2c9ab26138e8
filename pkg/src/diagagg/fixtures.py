"""Bundled study data, addressable as ``builtin:<name>`` from the CLI.

- ``antigen3``: three rapid antigen tests (median sensitivity and
  specificity with 95% intervals, symptomatic patients).
- ``norrbotten``: the two serology assays of the Norrbotten survey, the
  whole-population prevalence and outbreak counts.
- ``norrbotten_strata``: the survey's age strata.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .core import RateEstimate, TestSet, load_tests
from .prevalence import StratumRecord, load_strata

_FILES = {
    "antigen3": "antigen3.json",
    "norrbotten": "norrbotten.json",
    "norrbotten_strata": "norrbotten_strata.csv",
}
PREFIX = "builtin:"


def fixture_path(name: str) -> Path:
    if name not in _FILES:
        raise KeyError(f"unknown fixture {name!r}; available: {sorted(_FILES)}")
    return Path(str(resources.files("diagagg.data").joinpath(_FILES[name])))


def resolve(path_or_name: str) -> Path:
    """Map ``builtin:<name>`` to the bundled file; other strings are plain paths."""
    if path_or_name.startswith(PREFIX):
        return fixture_path(path_or_name[len(PREFIX):])
    return Path(path_or_name)


def antigen3() -> TestSet:
    return load_tests(fixture_path("antigen3"))


def norrbotten() -> dict:
    """Tests, rule spec and whole-population stratum of the Norrbotten survey."""
    path = fixture_path("norrbotten")
    raw = json.loads(path.read_text())
    o = raw["overall"]
    overall = StratumRecord(
        o["label"], o["population"], o["deaths"], o["hospitalizations"],
        RateEstimate.from_dict(o["apparent"]),
    )
    return {"tests": load_tests(path), "rule": raw["rule"], "overall": overall}


def norrbotten_strata() -> list:
    return load_strata(fixture_path("norrbotten_strata"))
