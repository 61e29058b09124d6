"""Scenarios shipped with the package."""

from __future__ import annotations

from importlib import resources
from typing import List

from .attacks import CASES, attack_scenario
from .scenario import Scenario

_FILES = ("appendix_b", "appendix_c")


def names() -> List[str]:
    return list(_FILES) + [f"attack_{c}" for c in CASES]


def builtin(name: str) -> Scenario:
    if name in _FILES:
        text = resources.files(__package__).joinpath("scenarios", f"{name}.yaml").read_text()
        return Scenario.loads(text)
    if name.startswith("attack_") and name[len("attack_"):] in CASES:
        policy, params, schedules, *_ = CASES[name[len("attack_"):]]
        return attack_scenario(policy, params, schedules=schedules)
    raise KeyError(f"no built-in scenario named {name!r}")
