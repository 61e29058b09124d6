"""Post-hoc trace checks."""

from __future__ import annotations

from collections import defaultdict
from typing import Dict, List

from .trace import Trace, Violation


def assert_conservation(trace: Trace) -> List[Violation]:
    """Deposits equal transfers out plus the residual balance; no consumer is debited
    beyond the largest promise it revealed."""
    out: List[Violation] = []
    deposited = 0
    paid_out = 0
    debited: Dict[str, int] = defaultdict(int)
    last_tick = 0
    for r in trace.records:
        last_tick = max(last_tick, r.tick)
        if r.action == "deposit" and r.reason is None:
            deposited += r.data["amount"]
        elif r.reason is None and "debits" in r.data:
            paid_out += r.data["amount"]
            if sum(r.data["debits"].values()) != r.data["amount"]:
                out.append(Violation("conservation", r.tick, f"{r.actor}: debits do not add up to the transfer"))
            for c, a in r.data["debits"].items():
                debited[c] += a
    balance = trace.final.get("balance")
    if balance is None:
        return out
    if deposited != paid_out + balance:
        out.append(Violation("conservation", last_tick,
                             f"deposits {deposited} != transfers {paid_out} + balance {balance}"))
    for c, info in sorted(trace.final.get("consumers", {}).items()):
        cap = max(info["revealed"], 0)
        if debited.get(c, 0) > min(cap, info["promised"]):
            out.append(Violation("conservation", last_tick,
                                 f"{c}: debited {debited[c]} beyond revealed {cap}"))
        if debited.get(c, 0) != info["withdrawn"]:
            out.append(Violation("conservation", last_tick,
                                 f"{c}: trace debits {debited.get(c, 0)} != ledger {info['withdrawn']}"))
    return out
