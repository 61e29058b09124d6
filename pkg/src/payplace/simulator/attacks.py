"""Canned scenario per adversary policy and the expected-outcome matrix."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

from .engine import run
from .scenario import (DEFAULT_TIMING, Deposit, MerchantSpec, Payment, Policy, Scenario)
from .trace import Trace


def attack_scenario(policy: str, params: Optional[dict] = None, seed: int = 7,
                    schedules: Optional[Dict[str, List[bool]]] = None) -> Scenario:
    """Three merchants, two consumers, four rounds. c1 pays every merchant each round."""
    schedules = schedules or {}
    merchants = [MerchantSpec(m, 1, schedules.get(m, [])) for m in ("m1", "m2", "m3")]
    payments = [
        Payment(5, "c1", {"m1": 10, "m2": 10, "m3": 10}),
        Payment(5, "c2", {"m1": 5}),
        Payment(25, "c1", {"m1": 5, "m2": 5, "m3": 5}),
        Payment(45, "c1", {"m1": 5, "m2": 5, "m3": 5}),
        Payment(65, "c2", {"m2": 5}),
    ]
    return Scenario(
        name=f"attack_{policy}", seed=seed, timing=DEFAULT_TIMING, horizon=4 * DEFAULT_TIMING.beta + 12,
        consumers=["c1", "c2"], merchants=merchants,
        deposits=[Deposit(0, "c1", 100), Deposit(0, "c2", 50)],
        payments=payments, policy=Policy(policy, params or {}),
    ).validate()


@dataclass
class Outcome:
    case: str
    expected: str
    observed: str
    passed: bool
    trace: Trace


def _reasons(trace: Trace, action: str) -> List[Optional[str]]:
    return [r.reason for r in trace.select(action=action)]


def _double_spend(trace: Trace):
    signs = trace.select(action="sign")
    honest_sigs = [r for r in signs if r.reason is None]
    refusals = sorted({r.reason for r in signs if r.reason})
    ok = not honest_sigs and "double-spend" in refusals and trace.ok
    return ok, f"honest signatures={len(honest_sigs)} refusals={refusals}"


def _rogue(trace: Trace):
    rs = trace.select(action="attack:register")
    ok = bool(rs) and all(r.reason in ("pop-refused", "caller-auth-failed") for r in rs) and trace.ok
    return ok, f"register={[r.reason for r in rs]}"


def _duplicate(trace: Trace):
    rs = trace.select(action="attack:register")
    ok = bool(rs) and all(r.data.get("result") == 0 for r in rs) and trace.ok
    return ok, f"results={[(r.data.get('result'), r.reason) for r in rs]}"


def _stale(trace: Trace):
    subs = [r for r in trace.select(action="submit") if not r.data.get("honest")]
    ok = bool(subs) and all(r.reason == "stale-timestamp" for r in subs) and trace.ok
    return ok, f"replayed={[r.reason for r in subs]}"


def _colluding(trace: Trace):
    rs = [r for r in trace.records if r.action.startswith("attack:")]
    moved = sum(r.data.get("amount", 0) for r in rs)
    ok = len(rs) >= 2 and moved == 0 and trace.final["attack_transfers"] == 0 and trace.ok
    return ok, f"transferred={moved} reasons={[r.reason for r in rs]}"


def _fabricated(trace: Trace):
    subs = [r for r in trace.select(action="submit") if not r.data.get("honest")]
    ok = bool(subs) and all(r.reason == "pop-failed" for r in subs) and trace.ok
    return ok, f"fabricated={[r.reason for r in subs]}"


def _withhold(trace: Trace):
    refusals = {r.reason for r in trace.select(action="sign") if r.reason}
    withdrawals = trace.select(action="withdraw")
    ok = refusals == {"data-unavailable"} and trace.ok and len(withdrawals) <= 3
    return ok, f"refusals={sorted(refusals)} violations={len(trace.violations)}"


def _omit(trace: Trace):
    refusals = {r.reason for r in trace.select(action="sign") if r.reason}
    ok = "missing-merchant-omitted" in refusals and trace.ok
    return ok, f"refusals={sorted(refusals)}"


def _honest(trace: Trace):
    accepted = [r for r in trace.select(action="submit") if r.reason is None]
    return trace.ok and len(accepted) == 4, f"notarized={len(accepted)} violations={len(trace.violations)}"


CASES: Dict[str, tuple] = {
    "honest": ("honest", {}, None, "every round notarized, no probe fires", _honest),
    "double_spend": ("double_spend", {"factor": 2.0}, None, "no honest signature (double-spend)", _double_spend),
    "rogue_key": ("rogue_key", {"tick": 30}, None, "registration refused", _rogue),
    "rogue_key_collusion": ("rogue_key", {"tick": 30, "collude": True}, None,
                            "registration refused", _rogue),
    "duplicate_registration": ("duplicate_registration", {"tick": 30}, None, "second call returns 0", _duplicate),
    "duplicate_registration_same_period": ("duplicate_registration", {"tick": 2}, None,
                                           "second call returns 0", _duplicate),
    "stale_commit": ("stale_commit", {"from_round": 2}, None, "rejected stale-timestamp", _stale),
    "colluding_withdraw": ("colluding_withdraw", {"tick": 30}, None, "0 transferred", _colluding),
    "fabricated_missing": ("fabricated_missing", {"from_round": 2}, None, "rejected pop-failed", _fabricated),
    "data_withhold": ("data_withhold", {"from_round": 2}, None,
                      "merchants refuse, confirmed funds stay withdrawable", _withhold),
    "omit_merchant": ("omit_merchant", {"from_round": 3}, {"m3": [True, False, True, True]},
                      "refused at missing-merchant gate", _omit),
}


def attack_suite(seed: int = 7, cases: Optional[List[str]] = None) -> List[Outcome]:
    out = []
    for case in cases or list(CASES):
        policy, params, schedules, expected, judge = CASES[case]
        trace = run(attack_scenario(policy, params, seed, schedules))
        passed, observed = judge(trace)
        out.append(Outcome(case, expected, observed, passed, trace))
    return out


def format_report(outcomes: List[Outcome]) -> str:
    lines = ["case\texpected\tobserved\tresult"]
    for o in outcomes:
        lines.append(f"{o.case}\t{o.expected}\t{o.observed}\t{'PASS' if o.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"
