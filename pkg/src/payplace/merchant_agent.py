"""Merchant agent: block verification and signing, confirmed funds, withdrawals."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .bls_crypto import BLS, PublicKey, SecretKey, Signature
from .channel_model import SignedPayment, valid_source
from .contract import (Notarized, TimingParams, WithdrawalRequest, Withdrew,
                       registration_message)
from .encoding import commitment_message
from .merkle import MerkleProof, PaymentSet, merklize, prove
from .mirror import ContractMirror
from .reasons import Reason, Rejected


@dataclass(frozen=True)
class SignedBlock:
    """Everything a merchant keeps about a block it signed."""

    root: bytes
    tau: int
    payments: PaymentSet
    proof: MerkleProof
    sources: Tuple[SignedPayment, ...]


class MerchantAgent:
    def __init__(self, name: str, sk: SecretKey, pk: PublicKey, bls: BLS, timing: TimingParams,
                 operator: PublicKey, schedule: Optional[Sequence[bool]] = None) -> None:
        self.name, self.sk, self.pk, self.bls, self.timing = name, sk, pk, bls, timing
        self.operator = operator
        self.schedule = tuple(schedule) if schedule is not None else ()
        self.mirror = ContractMirror()
        self.confirmed: Optional[SignedBlock] = None
        self.pending: Optional[SignedBlock] = None
        self.has_withdrawn = False
        self.refusals: List[Tuple[int, Reason]] = []

    # schedule

    def active(self, round_index: int) -> bool:
        """Round k covers the generation at k*beta; missing entries mean active."""
        if round_index < len(self.schedule):
            return self.schedule[round_index]
        return True

    # registration

    def pop(self) -> Signature:
        return self.bls.pop_create(self.sk, self.pk)

    def registration_auth(self, ticket: Signature, tau_r: int) -> Signature:
        return self.bls.sign(registration_message(self.pk, tau_r, ticket), self.sk)

    # events

    def sync(self, log: Sequence[object]) -> None:
        self.mirror.sync(log, self.on_event)

    def on_event(self, ev: object) -> None:
        if isinstance(ev, Notarized):
            # the mirror already reflects ev, so membership in M means we were not counted
            if self.pending and ev.root == self.pending.root and self.pk not in self.mirror.missing:
                self.confirmed = self.pending
                self.has_withdrawn = False
            self.pending = None
        elif isinstance(ev, Withdrew) and ev.merchant == self.pk:
            self.has_withdrawn = True

    # funds

    def confirmed_set(self) -> PaymentSet:
        if self.has_withdrawn or self.confirmed is None:
            return PaymentSet(self.pk)
        return self.confirmed.payments

    def confirmed_funds(self) -> int:
        return self.confirmed_set().total()

    # signing

    def verify_and_sign(self, proposal, now: int) -> Signature:
        try:
            sig = self._verify_and_sign(proposal, now)
        except Rejected as exc:
            self.refusals.append((now, exc.reason))
            raise
        return sig

    def _verify_and_sign(self, proposal, now: int) -> Signature:
        g = self.timing.trigger(now)
        if not g < proposal.tau <= now < g + self.timing.gamma:
            raise Rejected(Reason.OUTSIDE_WINDOW)
        sets: Optional[Mapping[PublicKey, PaymentSet]] = proposal.sets
        if sets is None or self.pk not in sets:
            raise Rejected(Reason.DATA_UNAVAILABLE)
        mine = sets[self.pk]
        if mine.merchant != self.pk:
            raise Rejected(Reason.MALFORMED)

        if not self.has_withdrawn and self.pk not in self.mirror.withdrawn and self.confirmed:
            if not mine.covers(self.confirmed.payments):
                raise Rejected(Reason.NON_MONOTONE)

        channels: Mapping[PublicKey, SignedPayment] = proposal.channels
        sources = []
        for pay in mine.payments:
            sp = channels.get(pay.source)
            if sp is None or not valid_source(sp, pay.source, self.mirror.deposited(pay.source),
                                              self.bls, self.operator):
                raise Rejected(Reason.MISSING_SOURCE, pay.source.short())
            sources.append(sp)

        for m, old in sorted(self.mirror.missing_sets.items()):
            if m in self.mirror.withdrawn:
                continue
            if m not in sets:
                raise Rejected(Reason.MISSING_MERCHANT_OMITTED, m.short())
            if not sets[m].covers(old):
                raise Rejected(Reason.MISSING_MERCHANT_REDUCED, m.short())

        for sp in sources:
            c = sp.sender
            assigned = sum(ps.amounts().get(c, 0) for ps in sets.values())
            if assigned > sp.amount - self.mirror.w_star(c):
                raise Rejected(Reason.DOUBLE_SPEND, c.short())

        try:
            tree = merklize(sets.values())
        except ValueError as exc:
            raise Rejected(Reason.MALFORMED, str(exc)) from None
        if tree.root != proposal.root:
            raise Rejected(Reason.ROOT_MISMATCH)

        self.pending = SignedBlock(proposal.root, proposal.tau, mine, prove(tree, self.pk), tuple(sources))
        return self.bls.sign(commitment_message(proposal.root, proposal.tau), self.sk)

    # withdrawal

    def assemble_withdrawal(self, exit: bool = False) -> WithdrawalRequest:
        payments = self.confirmed_set()
        if payments.total() == 0 and not exit:
            raise Rejected(Reason.NO_FUNDS)
        if self.pk in self.mirror.missing or self.confirmed is None or self.has_withdrawn:
            proof = None
        else:
            proof = self.confirmed.proof
        sources = self.confirmed.sources if self.confirmed and not self.has_withdrawn else ()
        return self.request(payments, sources, proof, exit)

    def request(self, payments: PaymentSet, sources: Tuple[SignedPayment, ...],
                proof: Optional[MerkleProof], exit: bool) -> WithdrawalRequest:
        """Sign an arbitrary withdrawal body as this merchant."""
        body = WithdrawalRequest.body(self.pk, payments, sources, proof, exit)
        return WithdrawalRequest(self.pk, payments, sources, proof, exit, self.bls.sign(body, self.sk))
