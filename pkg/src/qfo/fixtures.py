"""Pre-optimized gate reports shipped with the package.

``hadamard`` and ``cnot`` come from the default synthesis settings. The
``*_physical`` variants were optimized with a leakage penalty so their pupils
keep nearly all diffracted light inside the mode window, which makes them
usable in wave-propagation scenes.
"""

from __future__ import annotations

import json
from importlib import resources

from .synthesis import GateReport

__all__ = ["FIXTURES", "fixture_path", "load_fixture"]

FIXTURES = ("hadamard", "cnot", "hadamard_physical", "cnot_physical")


def fixture_path(name: str):
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; choose from {', '.join(FIXTURES)}")
    return resources.files("qfo") / "data" / f"{name}_report.json"


def load_fixture(name: str) -> GateReport:
    return GateReport.from_dict(json.loads(fixture_path(name).read_text()))
