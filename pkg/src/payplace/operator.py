"""Operator agent: channel intake, block generation, signature collection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .bls_crypto import BLS, PublicKey, SecretKey, Signature
from .channel_model import ChannelTable, SignedPayment
from .contract import (CommitmentSubmission, MissingEvidence, Notarized, TimingParams,
                       registration_message)
from .encoding import commitment_message, ticket_message
from .merkle import MerkleTree, PaymentSet, merklize, prove
from .mirror import ContractMirror
from .reasons import Reason, Rejected


@dataclass(frozen=True)
class Order:
    """A merchant-bound share of a consumer's channel increment."""

    amount: int
    merchant: PublicKey
    consumer: PublicKey


@dataclass(frozen=True)
class Block:
    sets: Mapping[PublicKey, PaymentSet]
    tree: MerkleTree
    consumed: int  # pending orders folded in

    @property
    def root(self) -> bytes:
        return self.tree.root

    @property
    def participants(self) -> Tuple[PublicKey, ...]:
        return self.tree.owners


@dataclass(frozen=True)
class Proposal:
    """What merchants receive: the root, the timestamp and (unless withheld) the data."""

    root: bytes
    tau: int
    sets: Optional[Mapping[PublicKey, PaymentSet]]
    channels: Mapping[PublicKey, SignedPayment]


@dataclass
class Aggregate:
    ars: Signature
    apk_active: PublicKey
    signers: Tuple[PublicKey, ...]
    missing: Tuple[PublicKey, ...]
    signatures: Dict[PublicKey, Signature] = field(default_factory=dict)


class OperatorStrategy:
    """Hooks a malicious operator can override. The defaults are honest."""

    def shape_block(self, op: "Operator", sets: Dict[PublicKey, PaymentSet]) -> Dict[PublicKey, PaymentSet]:
        return sets

    def withhold(self, op: "Operator") -> bool:
        return False

    def accept_bad_pop(self, op: "Operator", pk: PublicKey) -> bool:
        return False

    def submissions(self, op: "Operator", honest: CommitmentSubmission,
                    now: int) -> List[CommitmentSubmission]:
        return [honest]


class Operator:
    def __init__(self, sk: SecretKey, pk: PublicKey, bls: BLS, timing: TimingParams,
                 fee_bps: int = 0, strategy: Optional[OperatorStrategy] = None) -> None:
        if not 0 <= fee_bps <= 10_000:
            raise ValueError("fee must be within 0..10000 basis points")
        self.sk, self.pk, self.bls, self.timing = sk, pk, bls, timing
        self.fee_bps = fee_bps
        self.strategy = strategy or OperatorStrategy()
        self.channels = ChannelTable(pk, bls)
        self.mirror = ContractMirror()
        self.pops: Dict[PublicKey, Signature] = {}
        self.pending: List[Order] = []
        self.notarized: Optional[Block] = None
        self.history: List[Block] = []
        self.submitted: Optional[Block] = None
        self.last_submission: Optional[CommitmentSubmission] = None
        self.current_aggregate: Optional[Aggregate] = None
        self.round = 0

    # sync

    def sync(self, log: Sequence[object]) -> None:
        self.mirror.sync(log, self._on_event)

    def _on_event(self, ev: object) -> None:
        if isinstance(ev, Notarized) and self.submitted and ev.root == self.submitted.root:
            self.pending = self.pending[self.submitted.consumed:]
            self.notarized = self.submitted
            self.history.append(self.submitted)
            self.submitted = None

    # registration

    def issue_registration_ticket(self, pk: PublicKey, pop: Signature, now: int) -> Tuple[Signature, int]:
        if not self.bls.pop_verify(pk, pop) and not self.strategy.accept_bad_pop(self, pk):
            raise Rejected(Reason.POP_REFUSED)
        self.pops[pk] = pop
        return self.bls.sign(ticket_message(pk.data, now), self.sk), now

    def self_registration(self, now: int) -> Tuple[Signature, int, Signature]:
        """Ticket and caller signature for registering the operator's own leaf."""
        pop = self.bls.pop_create(self.sk, self.pk)
        ticket, tau_r = self.issue_registration_ticket(self.pk, pop, now)
        auth = self.bls.sign(registration_message(self.pk, tau_r, ticket), self.sk)
        return ticket, tau_r, auth

    # payments

    def receive_payment(self, sp: SignedPayment, shares: Sequence[Tuple[PublicKey, int]]) -> None:
        """Accept a channel update whose increment is split across the named merchants."""
        increment = sp.amount - self.channels.promised(sp.sender)
        if sum(a for _, a in shares) != increment or any(a <= 0 for _, a in shares):
            raise Rejected(Reason.MALFORMED, "shares must add up to the channel increment")
        if any(m not in self.mirror.registered or m == self.pk for m, _ in shares):
            raise Rejected(Reason.UNKNOWN_MERCHANT)
        self.channels.accept(sp, self.mirror.deposited(sp.sender))
        for merchant, amount in shares:
            fee = amount * self.fee_bps // 10_000
            self.pending.append(Order(amount - fee, merchant, sp.sender))
            if fee:
                self.pending.append(Order(fee, self.pk, sp.sender))

    # blocks

    def base_set(self, p: PublicKey) -> Dict[PublicKey, int]:
        if self.notarized is None or p in self.mirror.withdrawn or p in self.mirror.fresh:
            return {}
        ps = self.notarized.sets.get(p)
        return ps.amounts() if ps is not None else {}

    def generate_block(self, now: int) -> Block:
        if now % self.timing.beta:
            raise ValueError("blocks are generated only at multiples of beta")
        members = self.mirror.active_merchants()
        table = {p: self.base_set(p) for p in members}
        for o in self.pending:
            if o.merchant not in table:
                raise Rejected(Reason.UNKNOWN_MERCHANT, o.merchant.short())
            entry = table[o.merchant]
            entry[o.consumer] = entry.get(o.consumer, 0) + o.amount
        sets = {p: PaymentSet.from_amounts(p, amounts) for p, amounts in table.items()}
        sets = self.strategy.shape_block(self, sets)
        return Block(sets, merklize(sets.values()), len(self.pending))

    def propose(self, block: Block, tau: int) -> Proposal:
        data = None if self.strategy.withhold(self) else dict(block.sets)
        return Proposal(block.root, tau, data, self.channels.snapshot())

    def collect_and_aggregate(self, block: Block, responses: Mapping[PublicKey, object],
                              tau: int) -> Optional[Aggregate]:
        msg = commitment_message(block.root, tau)
        expected = self.mirror.active_merchants()
        signers, sigs = [], []
        for p in expected:
            sig = responses.get(p)
            if isinstance(sig, Signature) and self.bls.verify(p, msg, sig):
                signers.append(p)
                sigs.append(sig)
        if not signers:
            return None
        missing = tuple(p for p in expected if p not in signers)
        return Aggregate(self.bls.aggregate_signatures(sigs), self.bls.aggregate_keys(signers),
                         tuple(signers), missing, dict(zip(signers, sigs)))

    def build_submission(self, block: Block, agg: Aggregate, tau: int) -> CommitmentSubmission:
        m = self.mirror
        evidence = {}
        for p in agg.missing:
            if p in m.missing or p in m.fresh or p in m.withdrawn:
                continue
            if p not in self.pops:
                raise KeyError(f"no stored proof of possession for {p.short()}")
            prev = self.notarized
            evidence[p] = MissingEvidence(self.pops[p], block.sets[p], prove(block.tree, p),
                                          prev.sets[p], prove(prev.tree, p))
        returning = {p: m.missing_sets[p] for p in agg.signers if p in m.missing}
        return CommitmentSubmission(
            root=block.root, tau=tau, exits=frozenset(m.exited), apk_active=agg.apk_active,
            ars=agg.ars, missing=frozenset(agg.missing), evidence=evidence, returning=returning)

    def submissions_for(self, block: Block, agg: Aggregate, tau: int, now: int) -> List[CommitmentSubmission]:
        honest = self.build_submission(block, agg, tau)
        self.submitted = block
        self.current_aggregate = agg
        out = self.strategy.submissions(self, honest, now)
        self.last_submission = honest
        return out

    # probes

    def solvency_gaps(self, block: Block) -> Dict[PublicKey, int]:
        """Consumers whose assigned total exceeds their promise minus withdrawals."""
        assigned: Dict[PublicKey, int] = {}
        for ps in block.sets.values():
            for c, a in ps.amounts().items():
                assigned[c] = assigned.get(c, 0) + a
        out = {}
        for c, total in sorted(assigned.items()):
            room = self.channels.promised(c) - self.mirror.w_star(c)
            if total > room:
                out[c] = total - room
        return out
