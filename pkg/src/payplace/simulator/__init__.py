"""Discrete-tick simulation of the full protocol with adversary policies and probes."""

from .attacks import attack_suite, format_report
from .builtin import builtin, names as builtin_names
from .engine import Engine, run
from .probes import assert_conservation
from .scenario import POLICIES, Scenario, ScenarioError, random_scenario
from .trace import Record, Trace, Violation, read_trace

__all__ = [
    "Engine", "POLICIES", "Record", "Scenario", "ScenarioError", "Trace", "Violation",
    "assert_conservation", "attack_suite", "builtin", "builtin_names", "format_report",
    "random_scenario", "read_trace", "run",
]
