"""Deterministic tick loop over consumers, merchants, operator and contract."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Tuple

from ..bls_crypto import PublicKey, backend
from ..channel_model import ConsumerAccount, InsufficientFunds, consumer_pay
from ..contract import Contract, Window, WithdrawalRequest, Withdrew, attempt
from ..encoding import commitment_message
from ..merchant_agent import MerchantAgent
from ..merkle import proof_height
from ..operator import Block, Operator
from ..reasons import Reason, Rejected
from .policies import make_policy
from .probes import assert_conservation
from .scenario import Scenario
from .trace import Record, Trace


@dataclass
class _Round:
    index: int
    block: Block
    tau: Optional[int] = None
    proposal: Any = None
    responses: Optional[Dict[PublicKey, Any]] = None
    notarized: bool = False


class Engine:
    def __init__(self, scenario: Scenario) -> None:
        scenario.validate()
        self.scenario = sc = scenario
        self.timing = sc.timing
        self.bls = backend(sc.backend)
        seed = sc.seed
        op_sk, op_pk = self.bls.keygen(f"{seed}/operator")
        self.contract = Contract(op_pk, sc.timing, self.bls)
        self.policy = make_policy(sc.policy.name, sc.policy.params)
        self.operator = Operator(op_sk, op_pk, self.bls, sc.timing, sc.fee_bps, self.policy.strategy())
        self.names: Dict[PublicKey, str] = {op_pk: "operator"}
        self.merchants: Dict[str, MerchantAgent] = {}
        for m in sc.merchants:
            sk, pk = self.bls.keygen(f"{seed}/merchant/{m.name}")
            self.merchants[m.name] = MerchantAgent(m.name, sk, pk, self.bls, sc.timing, op_pk, m.schedule)
            self.names[pk] = m.name
        self.consumers: Dict[str, Tuple[Any, ConsumerAccount]] = {}
        for c in sc.consumers:
            sk, pk = self.bls.keygen(f"{seed}/consumer/{c}")
            self.consumers[c] = (sk, ConsumerAccount(pk))
            self.names[pk] = c
        self.trace = Trace(sc.name, seed)
        self.tickets: Dict[str, Tuple[Any, int]] = {}
        self.shadow: List[PublicKey] = []
        self.ever_registered: set = set()
        self.round: Optional[_Round] = None
        self.blocks: Dict[int, Block] = {}
        self.withdrawals_at: Dict[Tuple[int, str], int] = {}
        self.credited: Dict[Tuple[str, str], List[Tuple[int, int]]] = defaultdict(list)
        self.attack_transfers = 0
        self.tx_per_period: Dict[int, int] = defaultdict(int)
        self.payments_per_period: Dict[int, int] = defaultdict(int)
        self.previous_leaves: Optional[int] = None

    # helpers

    def name(self, pk: PublicKey) -> str:
        return self.names.get(pk, pk.short())

    def record(self, tick: int, actor: str, action: str, reason: Optional[Reason],
               data: Optional[Dict[str, Any]] = None) -> None:
        self.trace.log(Record(tick, actor, action, reason.value if reason else None,
                              self.contract.state.digest(), data or {}))

    def named_sets(self, sets) -> Dict[str, Dict[str, int]]:
        return {self.name(p): {self.name(c): a for c, a in sorted(ps.amounts().items())}
                for p, ps in sorted(sets.items())}

    def withdraw_data(self, req: WithdrawalRequest, amount: int, reason: Optional[Reason]) -> Dict[str, Any]:
        data = {"amount": amount, "exit": req.exit,
                "claimed": {self.name(p.source): p.amount for p in req.payments.payments}}
        last = self.contract.events[-1] if self.contract.events else None
        if reason is None and isinstance(last, Withdrew):
            data["debits"] = {self.name(d.consumer): d.amount for d in last.debits}
        return data

    def _tx(self, t: int) -> None:
        self.tx_per_period[t // self.timing.beta] += 1

    # main loop

    def run(self) -> Trace:
        for t in range(self.scenario.horizon + 1):
            self.step(t)
        self.finish()
        return self.trace

    def step(self, t: int) -> None:
        sc, beta = self.scenario, self.timing.beta
        k, phase = divmod(t, beta)
        self.operator.sync(self.contract.events)
        self.probe_merchant_safety(t)

        if t == 0:
            self.register_operator(t)
        for d in sc.deposits:
            if d.tick == t:
                self.deposit(t, d.consumer, d.amount)
        for m in sc.merchants:
            if m.register == t:
                self.register(t, m.name)
        for p in sc.payments:
            if p.tick == t:
                self.pay(t, p.consumer, p.shares)

        if phase == 0 and k >= 1:
            self.generate(t, k)
        if self.round and self.round.index == k:
            if phase == 1:
                self.broadcast(t)
            if phase == 1 + self.timing.gamma_prime:
                self.submit(t)

        for w in sc.withdrawals:
            if w.tick == t:
                self.withdraw(t, w.merchant, w.exit)
        self.policy.act(self, t)

        self.probe_consumer_safety(t)
        self.check_expectations(t)
        self.probe_income(t)

    # actions

    def register_operator(self, t: int) -> None:
        ticket, tau_r, auth = self.operator.self_registration(t)
        result, reason = attempt(self.contract.register_merchant, ticket, tau_r, self.operator.pk, t, auth)
        self._tx(t)
        self.record(t, "operator", "register", reason, {"result": result})
        if result:
            self.tickets["operator"] = (ticket, tau_r)
            self.shadow.append(self.operator.pk)
            self.ever_registered.add(self.operator.pk)

    def deposit(self, t: int, consumer: str, amount: int) -> None:
        _, acct = self.consumers[consumer]
        total = self.contract.deposit(acct.pk, amount, t)
        acct.deposited = total
        self.record(t, consumer, "deposit", None, {"amount": amount, "total": total})

    def register(self, t: int, name: str) -> None:
        agent = self.merchants[name]
        self.operator.sync(self.contract.events)
        try:
            ticket, tau_r = self.operator.issue_registration_ticket(agent.pk, agent.pop(), t)
        except Rejected as exc:
            self.record(t, name, "register", exc.reason, {"stage": "ticket"})
            return
        auth = agent.registration_auth(ticket, tau_r)
        result, reason = attempt(self.contract.register_merchant, ticket, tau_r, agent.pk, t, auth)
        self._tx(t)
        self.record(t, name, "register", reason, {"result": result})
        if result:
            self.tickets[name] = (ticket, tau_r)
            self.shadow.append(agent.pk)
            self.ever_registered.add(agent.pk)

    def pay(self, t: int, consumer: str, shares: Dict[str, int]) -> None:
        sk, acct = self.consumers[consumer]
        increment = sum(shares.values())
        data = {"increment": increment, "shares": dict(sorted(shares.items()))}
        try:
            sp = consumer_pay(acct, increment, sk, self.operator.pk, self.bls)
        except InsufficientFunds:
            self.record(t, consumer, "pay", Reason.INSUFFICIENT_DEPOSIT, data)
            return
        pairs = [(self.merchants[m].pk, a) for m, a in sorted(shares.items())]
        try:
            self.operator.receive_payment(sp, pairs)
        except Rejected as exc:
            self.record(t, consumer, "pay", exc.reason, data)
            return
        acct.promised = sp.amount
        self.payments_per_period[t // self.timing.beta] += 1
        fee = self.scenario.fee_bps
        for m, a in shares.items():
            self.credited[(m, consumer)].append((t, a - a * fee // 10_000))
        self.record(t, consumer, "pay", None, {**data, "promised": sp.amount})

    def generate(self, t: int, k: int) -> None:
        op = self.operator
        op.round = k
        self.round = None
        try:
            block = op.generate_block(t)
        except (Rejected, ValueError) as exc:
            self.record(t, "operator", "generate", getattr(exc, "reason", Reason.MALFORMED), {"error": str(exc)})
            return
        self.round = _Round(k, block)
        self.blocks[t] = block
        self.record(t, "operator", "generate", None,
                    {"round": k, "root": block.root.hex()[:16], "sets": self.named_sets(block.sets)})
        if self.policy.honest_operator:
            gaps = op.solvency_gaps(block)
            if gaps:
                self.trace.flag("operator-solvency", t, repr({self.name(c): g for c, g in gaps.items()}))

    def broadcast(self, t: int) -> None:
        rnd, op = self.round, self.operator
        rnd.tau = t
        rnd.proposal = op.propose(rnd.block, t)
        rnd.responses = {}
        if op.pk in op.mirror.registered:
            rnd.responses[op.pk] = self.bls.sign(commitment_message(rnd.block.root, t), op.sk)
        for name in sorted(self.merchants):
            agent = self.merchants[name]
            if agent.pk not in op.mirror.registered or not agent.active(rnd.index - 1):
                continue
            agent.sync(self.contract.events)
            try:
                rnd.responses[agent.pk] = agent.verify_and_sign(rnd.proposal, t)
                self.record(t, name, "sign", None, {"round": rnd.index})
            except Rejected as exc:
                self.record(t, name, "sign", exc.reason, {"round": rnd.index, "detail": exc.detail})

    def submit(self, t: int) -> None:
        rnd, op = self.round, self.operator
        if rnd.responses is None:
            return
        op.sync(self.contract.events)
        agg = op.collect_and_aggregate(rnd.block, rnd.responses, rnd.tau)
        if agg is None or all(p == op.pk for p in agg.signers):
            self.record(t, "operator", "skip-round", None, {"round": rnd.index})
            return
        honest_before = self.contract.snapshot()
        subs = op.submissions_for(rnd.block, agg, rnd.tau, t)
        honest = op.last_submission
        for sub in subs:
            self._tx(t)
            try:
                report = self.contract.verify_commitment(sub, t)
            except Rejected as exc:
                counter = getattr(exc, "counter", None)
                self.record(t, "operator", "submit", exc.reason,
                            {"round": rnd.index, "honest": sub is honest,
                             "ops": counter.model_counts() if counter else None})
                continue
            rnd.notarized = True
            self.on_notarized(t, rnd, sub, sub is honest, agg, report, honest_before)

    def on_notarized(self, t, rnd, sub, is_honest, agg, report, before) -> None:
        bls = self.bls
        leaves = len(rnd.block.tree.leaves)
        obs = {
            "p_r": leaves,
            "p_r_prev": self.previous_leaves or 0,
            "p_m": len(sub.missing),
            "p_m_prime": report.still_missing,
            "p_a": report.signers_returning,
            "p_x": report.exits,
            "p_b": sum(1 for p in sub.missing if p in before.registered_since),
            "p_w": sum(1 for p in sub.missing if p in before.withdrawn_since),
            "k": report.newly_missing,
        }
        self.previous_leaves = leaves
        counts = dict(zip(("pairings", "g1_muls", "hash_to_g0", "hashes"), report.counter.model_counts()))
        self.trace.notarizations.append({"tick": t, "round": rnd.index, "observed": obs, "counts": counts,
                                         "fast_path": report.fast_path})
        self.record(t, "operator", "submit", None,
                    {"round": rnd.index, "honest": is_honest, "signers": sorted(self.name(p) for p in agg.signers),
                     "missing": sorted(self.name(p) for p in sub.missing), "ops": counts})
        if not is_honest:
            self.trace.flag("forged-notarization", t, "a non-honest submission was notarized")
            return
        # shadow registry: every registered key is a signer, claimed missing or exiting
        covered = set(agg.signers) | set(sub.missing) | set(sub.exits)
        if set(self.shadow) != covered:
            self.trace.flag("registry-coverage", t, "signers, missing and exits do not cover the registry")
        if not (set(sub.missing) | set(sub.exits)) <= self.ever_registered:
            self.trace.flag("phantom-key", t, "unregistered key claimed missing or exiting")
        if before.apk != bls.aggregate_keys(self.shadow):
            self.trace.flag("apk-shadow", t, "apk differs from shadow product before notarization")
        for p in sub.exits:
            self.shadow.remove(p)
        if self.shadow and self.contract.state.apk != bls.aggregate_keys(self.shadow):
            self.trace.flag("apk-shadow", t, "apk differs from shadow product after notarization")

    def withdraw(self, t: int, name: str, exit: bool) -> None:
        agent = self.merchants[name]
        agent.sync(self.contract.events)
        expected = agent.confirmed_funds()
        try:
            req = agent.assemble_withdrawal(exit)
        except Rejected as exc:
            self.record(t, name, "withdraw", exc.reason, {"stage": "local", "exit": exit})
            return
        amount, reason = attempt(self.contract.process_withdrawal, req, t)
        self._tx(t)
        self.withdrawals_at[(t, name)] = amount
        self.record(t, name, "withdraw", reason, self.withdraw_data(req, amount, reason))
        if reason is None and amount != expected:
            self.trace.flag("merchant-safety", t, f"{name} withdrew {amount}, confirmed {expected}")
        if reason == Reason.FROZEN and self.contract.freeze_status(t) == Window.OPEN:
            self.trace.flag("liveness", t, f"{name} refused in an open window")

    # probes

    def probe_merchant_safety(self, t: int) -> None:
        tm = self.timing
        k, phase = divmod(t, tm.beta)
        if k < 1 or phase != tm.gamma + tm.delta + 1 or not (self.round and self.round.index == k
                                                             and self.round.notarized):
            return
        for name in sorted(self.merchants):
            agent = self.merchants[name]
            agent.sync(self.contract.events)
            funds = agent.confirmed_funds()
            if funds == 0:
                continue
            req = agent.assemble_withdrawal()
            amount, reason = attempt(self.contract.dry_run_withdrawal, req, t)
            self.record(t, "probe", "can-withdraw", reason, {"merchant": name, "amount": amount, "funds": funds})
            if amount != funds:
                self.trace.flag("merchant-safety", t,
                                f"{name}: dry run gives {amount} ({reason}), confirmed {funds}")

    def probe_consumer_safety(self, t: int) -> None:
        for name, (_, acct) in sorted(self.consumers.items()):
            led = self.contract.ledger(acct.pk)
            if not led.withdrawn <= led.revealed <= led.deposited:
                self.trace.flag("consumer-safety", t,
                                f"{name}: w*={led.withdrawn} mu'={led.revealed} D={led.deposited}")
            if led.revealed > acct.promised:
                self.trace.flag("consumer-safety", t, f"{name}: revealed {led.revealed} > promised {acct.promised}")

    def probe_income(self, t: int) -> None:
        if not self.policy.honest_operator or self.policy.name != "honest":
            return
        tm = self.timing
        theta = tm.beta + tm.gamma + tm.delta
        steady = {m.name for m in self.scenario.merchants if all(m.schedule)
                  and not any(w.merchant == m.name for w in self.scenario.withdrawals)}
        for (m, c), entries in sorted(self.credited.items()):
            if m not in steady:
                continue
            due = [a for when, a in entries if when + theta <= t]
            if not any(when + theta == t for when, _ in entries):
                continue
            agent = self.merchants[m]
            agent.sync(self.contract.events)
            _, acct = self.consumers[c]
            have = agent.confirmed_set().amounts().get(acct.pk, 0)
            if have < sum(due):
                self.trace.flag("income-certainty", t, f"{m} has {have} from {c}, expected {sum(due)}")

    # expectations

    def check_expectations(self, t: int) -> None:
        for exp in self.scenario.expect:
            if exp.get("tick") != t:
                continue
            got = self.observe(exp, t)
            want = exp.get("value")
            ok = got == want
            self.record(t, "check", f"expect:{exp['kind']}", None if ok else Reason.MALFORMED,
                        {"expected": want, "observed": got})
            if not ok:
                self.trace.flag("expectation", t, f"{exp['kind']}: expected {want!r}, observed {got!r}")

    def observe(self, exp: Dict[str, Any], t: int) -> Any:
        kind = exp["kind"]
        consumer = self.consumers.get(exp.get("consumer", ""), (None, None))[1]
        st = self.contract.state
        if kind == "deposit":
            return self.contract.ledger(consumer.pk).deposited
        if kind == "promised":
            return self.operator.channels.promised(consumer.pk)
        if kind == "consumer_funds":
            return self.contract.ledger(consumer.pk).deposited - self.operator.channels.promised(consumer.pk)
        if kind == "block":
            block = self.blocks.get(t)
            return self.named_sets(block.sets) if block else None
        if kind == "withdrawal":
            return self.withdrawals_at.get((t, exp["merchant"]))
        if kind == "reserved":
            return {str(g): {self.name(c): a for c, a in v.items()} for g, v in st.reserved_view().items()}
        if kind == "missing":
            return {self.name(p): gap for p, gap in sorted(st.missing.items(), key=lambda kv: self.name(kv[0]))}
        if kind == "confirmed":
            agent = self.merchants[exp["merchant"]]
            agent.sync(self.contract.events)
            return agent.confirmed_funds()
        raise ValueError(f"unknown expectation kind {kind!r}")

    # wrap-up

    def finish(self) -> None:
        st = self.contract.state
        for a in self.merchants.values():
            a.sync(self.contract.events)
        self.trace.final = {
            "state_hash": st.digest(),
            "balance": st.balance,
            "consumers": {self.name(c): {"deposited": l.deposited, "revealed": l.revealed,
                                         "withdrawn": l.withdrawn, "promised": self.consumers[self.name(c)][1].promised}
                          for c, l in sorted(st.consumers.items(), key=lambda kv: self.name(kv[0]))},
            "confirmed": {n: a.confirmed_funds() for n, a in sorted(self.merchants.items())},
            "missing": sorted(self.name(p) for p in st.missing),
            "notarizations": len(self.trace.notarizations),
            "attack_transfers": self.attack_transfers,
            "tx_per_period": {str(k): v for k, v in sorted(self.tx_per_period.items())},
            "payments_per_period": {str(k): v for k, v in sorted(self.payments_per_period.items())},
            "policy": self.policy.name,
        }
        for v in assert_conservation(self.trace):
            self.trace.violations.append(v)


def run(scenario: Scenario) -> Trace:
    return Engine(scenario).run()
