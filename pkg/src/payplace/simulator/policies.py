"""Adversary policies. Each one perturbs a documented operator hook or merchant action."""

from __future__ import annotations

import math
import random
from typing import TYPE_CHECKING, Dict, List, Optional

from ..bls_crypto import BLS, Domain, PublicKey, SecretKey
from ..contract import (CommitmentSubmission, MissingEvidence, WithdrawalRequest, attempt,
                        registration_message)
from ..merkle import PaymentSet, prove
from ..operator import Operator, OperatorStrategy
from ..reasons import Rejected

if TYPE_CHECKING:
    from .engine import Engine


class AdversaryPolicy:
    name = "honest"
    honest_operator = True

    def __init__(self, **params) -> None:
        self.params = params

    def strategy(self) -> OperatorStrategy:
        return OperatorStrategy()

    def act(self, eng: "Engine", t: int) -> None:
        pass


class Honest(AdversaryPolicy):
    pass


# operator-side


class _DoubleSpendStrategy(OperatorStrategy):
    def __init__(self, factor: float) -> None:
        self.factor = factor
        self.inflated: List[tuple] = []

    def shape_block(self, op: Operator, sets: Dict[PublicKey, PaymentSet]) -> Dict[PublicKey, PaymentSet]:
        assigned: Dict[PublicKey, int] = {}
        for ps in sets.values():
            for c, a in ps.amounts().items():
                assigned[c] = assigned.get(c, 0) + a
        if not assigned:
            return sets
        victim = max(sorted(assigned), key=lambda c: assigned[c])
        target = next(p for p in sorted(sets) if p != op.pk and victim in sets[p].amounts())
        room = op.channels.promised(victim) - op.mirror.w_star(victim) - assigned[victim]
        amounts = sets[target].amounts()
        extra = max(math.ceil(amounts[victim] * (self.factor - 1)), room + 1)
        amounts[victim] += extra
        self.inflated.append((op.round, target, victim, extra))
        out = dict(sets)
        out[target] = PaymentSet.from_amounts(target, amounts)
        return out


class DoubleSpend(AdversaryPolicy):
    name = "double_spend"
    honest_operator = False

    def strategy(self) -> OperatorStrategy:
        return _DoubleSpendStrategy(float(self.params.get("factor", 1.5)))


class _WithholdStrategy(OperatorStrategy):
    def __init__(self, from_round: int) -> None:
        self.from_round = from_round

    def withhold(self, op: Operator) -> bool:
        return op.round >= self.from_round


class DataWithhold(AdversaryPolicy):
    name = "data_withhold"
    honest_operator = False

    def strategy(self) -> OperatorStrategy:
        return _WithholdStrategy(int(self.params.get("from_round", 2)))


class _OmitStrategy(OperatorStrategy):
    def __init__(self, from_round: int) -> None:
        self.from_round = from_round

    def shape_block(self, op: Operator, sets):
        victims = [p for p in sorted(op.mirror.missing) if p in sets]
        if op.round < self.from_round or not victims:
            return sets
        return {p: ps for p, ps in sets.items() if p != victims[0]}


class OmitMerchant(AdversaryPolicy):
    name = "omit_merchant"
    honest_operator = False

    def strategy(self) -> OperatorStrategy:
        return _OmitStrategy(int(self.params.get("from_round", 1)))


class _StaleStrategy(OperatorStrategy):
    def __init__(self, from_round: int) -> None:
        self.from_round = from_round

    def submissions(self, op: Operator, honest: CommitmentSubmission, now: int):
        if op.round >= self.from_round and op.last_submission is not None:
            return [op.last_submission, honest]
        return [honest]


class StaleCommit(AdversaryPolicy):
    name = "stale_commit"
    honest_operator = False

    def strategy(self) -> OperatorStrategy:
        return _StaleStrategy(int(self.params.get("from_round", 2)))


def fabricate_missing(op: Operator, honest: CommitmentSubmission) -> Optional[CommitmentSubmission]:
    """Hide one signer and every honest non-signer behind a single made-up key.

    The fake key makes the key accounting balance, but nobody knows its
    secret, so no valid proof of possession can accompany it.
    """
    agg = op.current_aggregate
    bls: BLS = op.bls
    m = op.mirror
    known = set(m.missing) | m.fresh | m.withdrawn
    victims = [p for p in agg.signers if p != op.pk and p not in known] if agg else []
    if not victims or len(agg.signers) < 2:
        return None
    hidden = victims[0]
    rest = [p for p in agg.signers if p != hidden]
    ars = bls.aggregate_signatures([agg.signatures[p] for p in rest])
    apk_active = bls.aggregate_keys(rest)
    fake = bls.aggregate_keys([hidden, *sorted(honest.missing)])
    if fake in known:
        return None
    junk = SecretKey(int.from_bytes(fake.data[:16], "big") + 1)
    pop = bls.sign(bls.pop_message(fake), junk, Domain.POP)
    template = op.submitted
    proof = None
    if template is not None and hidden in template.sets:
        proof = prove(template.tree, hidden)
    ev = MissingEvidence(pop, PaymentSet(fake), proof, PaymentSet(fake), proof)
    returning = {p: op.mirror.missing_sets[p] for p in op.mirror.missing}
    return CommitmentSubmission(honest.root, honest.tau, honest.exits, apk_active, ars,
                                frozenset({fake}), {fake: ev}, returning)


class _FabricateStrategy(OperatorStrategy):
    def __init__(self, from_round: int) -> None:
        self.from_round = from_round

    def submissions(self, op: Operator, honest: CommitmentSubmission, now: int):
        if op.round >= self.from_round:
            fake = fabricate_missing(op, honest)
            if fake is not None:
                return [fake, honest]
        return [honest]


class FabricatedMissing(AdversaryPolicy):
    name = "fabricated_missing"
    honest_operator = False

    def strategy(self) -> OperatorStrategy:
        return _FabricateStrategy(int(self.params.get("from_round", 1)))


# merchant-side


class _CollusionStrategy(OperatorStrategy):
    def __init__(self, collude: bool) -> None:
        self.collude = collude

    def accept_bad_pop(self, op: Operator, pk: PublicKey) -> bool:
        return self.collude


class RogueKey(AdversaryPolicy):
    """Register g1^b times the inverse of every registered key."""

    name = "rogue_key"

    def strategy(self) -> OperatorStrategy:
        return _CollusionStrategy(bool(self.params.get("collude", False)))

    def act(self, eng: "Engine", t: int) -> None:
        if t != int(self.params.get("tick", -1)):
            return
        bls, op = eng.bls, eng.operator
        op.sync(eng.contract.events)
        b = random.Random(f"{eng.scenario.seed}/rogue").randrange(1, bls.group.order)
        g = bls.group
        acc = g.g1_exp(g.g1_generator(), b)
        for pk in sorted(op.mirror.registered):
            acc = g.g1_mul(acc, g.g1_inv(pk.data))
        rogue = PublicKey(acc)
        eng.names[rogue] = "rogue"
        # best available forgery: a self-signature under b, which belongs to g1^b
        pop = bls.sign(bls.pop_message(rogue), SecretKey(b), Domain.POP)
        try:
            ticket, tau_r = op.issue_registration_ticket(rogue, pop, t)
        except Rejected as exc:
            eng.record(t, "rogue", "attack:register", exc.reason, {"stage": "ticket"})
            return
        auth = bls.sign(registration_message(rogue, tau_r, ticket), SecretKey(b))
        result, reason = attempt(eng.contract.register_merchant, ticket, tau_r, rogue, t, auth)
        eng.record(t, "rogue", "attack:register", reason, {"stage": "contract", "result": result})
        if result:
            eng.shadow.append(rogue)


class DuplicateRegistration(AdversaryPolicy):
    name = "duplicate_registration"

    def strategy(self) -> OperatorStrategy:
        return _CollusionStrategy(bool(self.params.get("collude", False)))

    def act(self, eng: "Engine", t: int) -> None:
        if t != int(self.params.get("tick", -1)):
            return
        candidates = [n for n in sorted(eng.tickets) if n != "operator"]
        if not candidates:
            return
        name = candidates[0]
        agent = eng.merchants[name]
        ticket, tau_r = eng.tickets[name]
        if self.params.get("collude"):
            ticket, tau_r = eng.operator.issue_registration_ticket(agent.pk, agent.pop(), t)
        auth = agent.registration_auth(ticket, tau_r)
        result, reason = attempt(eng.contract.register_merchant, ticket, tau_r, agent.pk, t, auth)
        eng.record(t, name, "attack:register", reason, {"result": result})
        if result:
            eng.shadow.append(agent.pk)


class ColludingWithdraw(AdversaryPolicy):
    """A merchant, helped by the operator's data, tries to pull funds it has no right to."""

    name = "colluding_withdraw"

    def act(self, eng: "Engine", t: int) -> None:
        if t != int(self.params.get("tick", -1)):
            return
        for a in eng.merchants.values():
            a.sync(eng.contract.events)
        registered = [n for n in sorted(eng.merchants) if eng.merchants[n].pk in eng.operator.mirror.registered]
        if not registered:
            return
        funded = [n for n in registered if eng.merchants[n].confirmed_funds() > 0]
        attacker = eng.merchants[(funded or registered)[0]]
        victims = [n for n in funded if eng.merchants[n] is not attacker]
        c = eng.contract
        stolen = 0

        if victims:
            victim = eng.merchants[victims[0]]
            vreq = victim.assemble_withdrawal()
            theirs = attacker.request(vreq.payments, vreq.sources, vreq.proof, False)
            amount, reason = attempt(c.process_withdrawal, theirs, t)
            eng.record(t, attacker.name, "attack:foreign-set", reason, eng.withdraw_data(theirs, amount, reason))
            stolen += amount
            forged = WithdrawalRequest(victim.pk, vreq.payments, vreq.sources, vreq.proof, False,
                                       attacker.request(vreq.payments, vreq.sources, vreq.proof, False).auth)
            amount, reason = attempt(c.process_withdrawal, forged, t)
            eng.record(t, attacker.name, "attack:impersonate", reason, eng.withdraw_data(forged, amount, reason))
            stolen += amount
        if attacker.confirmed_funds() > 0:
            req = attacker.assemble_withdrawal()
            amount, reason = attempt(c.process_withdrawal, req, t)
            eng.record(t, attacker.name, "withdraw", reason, eng.withdraw_data(req, amount, reason))
            amount, reason = attempt(c.process_withdrawal, req, t)
            eng.record(t, attacker.name, "attack:replay", reason, eng.withdraw_data(req, amount, reason))
            stolen += amount
        eng.attack_transfers += stolen


REGISTRY = {cls.name: cls for cls in (Honest, DoubleSpend, DataWithhold, OmitMerchant, StaleCommit,
                                      FabricatedMissing, RogueKey, DuplicateRegistration,
                                      ColludingWithdraw)}


def make_policy(name: str, params: Optional[dict] = None) -> AdversaryPolicy:
    try:
        return REGISTRY[name](**(params or {}))
    except KeyError:
        raise ValueError(f"unknown adversary policy {name!r}") from None
