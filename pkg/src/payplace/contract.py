"""On-chain contract as a deterministic in-process state machine.

Every entry point takes the current tick explicitly. Rejections raise
``Rejected`` before any state is touched, so a failed call leaves the
state bit-identical.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Set, Tuple

from .bls_crypto import BLS, OpCounter, PublicKey, Signature
from .channel_model import SignedPayment, checked_add, get_source_transaction
from .encoding import commitment_message, encode_list, ticket_message, tx_message
from .merkle import EMPTY_SET_LEAF, MerkleProof, PaymentSet, check_mp, leaf_hash
from .reasons import Reason, Rejected


@dataclass(frozen=True)
class TimingParams:
    beta: int
    gamma: int
    delta: int
    gamma_prime: int = 0  # 0 means gamma // 2

    def __post_init__(self) -> None:
        if self.gamma_prime == 0:
            object.__setattr__(self, "gamma_prime", max(self.gamma // 2, 1))
        if min(self.beta, self.gamma, self.delta) <= 0:
            raise ValueError("timing parameters must be positive")
        if not self.gamma + 2 * self.delta < self.beta:
            raise ValueError("need gamma + 2*delta < beta")
        if not 0 < self.gamma_prime < self.gamma:
            raise ValueError("need 0 < gamma' < gamma")

    def trigger(self, now: int) -> int:
        """Latest commitment-generation trigger at or before now; 0 before the first one."""
        return (now // self.beta) * self.beta

    def is_open(self, now: int) -> bool:
        g = self.trigger(now)
        lower = g + self.gamma + self.delta if g > 0 else -1
        return lower < now < g + self.beta - self.delta


class Window(str, Enum):
    OPEN = "open"
    FROZEN = "frozen"
    SUBMISSION = "submission_window"


# events


@dataclass(frozen=True)
class Deposited:
    tick: int
    consumer: PublicKey
    amount: int
    total: int


@dataclass(frozen=True)
class Registered:
    tick: int
    merchant: PublicKey
    apk: PublicKey


@dataclass(frozen=True)
class ConsumerDebit:
    consumer: PublicKey
    amount: int
    withdrawn: int
    revealed: int


@dataclass(frozen=True)
class Withdrew:
    tick: int
    merchant: PublicKey
    amount: int
    exit: bool
    debits: Tuple[ConsumerDebit, ...]


@dataclass(frozen=True)
class Notarized:
    tick: int
    root: bytes
    tau: int
    apk: PublicKey
    apk_active: PublicKey
    added: Tuple[Tuple[PublicKey, PaymentSet], ...]
    removed: Tuple[PublicKey, ...]
    exits: Tuple[PublicKey, ...]


Event = object


# inputs


@dataclass(frozen=True)
class MissingEvidence:
    """Bundle for a merchant that signed the previous block but not this one."""

    pop: Signature
    current: PaymentSet
    current_proof: MerkleProof
    previous: PaymentSet
    previous_proof: MerkleProof


@dataclass(frozen=True)
class CommitmentSubmission:
    root: bytes
    tau: int
    exits: frozenset
    apk_active: PublicKey
    ars: Signature
    missing: frozenset
    evidence: Mapping[PublicKey, MissingEvidence] = field(default_factory=dict)
    returning: Mapping[PublicKey, PaymentSet] = field(default_factory=dict)


def _proof_fields(proof: Optional[MerkleProof]) -> Tuple[bytes, int, bytes]:
    if proof is None:
        return b"", 0, b""
    return proof.leaf, proof.index, encode_list(proof.siblings)


@dataclass(frozen=True)
class WithdrawalRequest:
    merchant: PublicKey
    payments: PaymentSet
    sources: Tuple[SignedPayment, ...]
    proof: Optional[MerkleProof]
    exit: bool
    auth: Signature

    @staticmethod
    def body(merchant: PublicKey, payments: PaymentSet, sources: Tuple[SignedPayment, ...],
             proof: Optional[MerkleProof], exit: bool) -> bytes:
        srcs = encode_list(sp.payment.message() + sp.signature.data for sp in sources)
        return tx_message("withdraw", merchant.data, payments.encoded(), srcs,
                          *_proof_fields(proof), int(exit))

    def message(self) -> bytes:
        return self.body(self.merchant, self.payments, self.sources, self.proof, self.exit)


def attempt(call, *args, **kwargs):
    """Run a contract entry point the way a root-chain caller sees it: (result, reason)."""
    try:
        return call(*args, **kwargs), None
    except Rejected as exc:
        return 0, exc.reason


def registration_message(merchant: PublicKey, tau_r: int, ticket: Signature) -> bytes:
    return tx_message("register", merchant.data, tau_r, ticket.data)


# state


@dataclass
class ConsumerLedger:
    deposited: int = 0
    revealed: int = 0
    withdrawn: int = 0


@dataclass
class ContractState:
    operator: PublicKey
    apk: Optional[PublicKey] = None
    apk_active_last: Optional[PublicKey] = None
    last_trigger: int = 0
    last_submission: int = -1
    last_root: Optional[bytes] = None
    exited: Set[PublicKey] = field(default_factory=set)
    registered_since: Set[PublicKey] = field(default_factory=set)
    withdrawn_since: Set[PublicKey] = field(default_factory=set)
    missing: Dict[PublicKey, int] = field(default_factory=dict)
    reserved: Dict[int, Dict[PublicKey, int]] = field(default_factory=dict)
    missing_leaf: Dict[PublicKey, bytes] = field(default_factory=dict)
    consumers: Dict[PublicKey, ConsumerLedger] = field(default_factory=dict)
    balance: int = 0

    def reserved_view(self) -> Dict[int, Dict[PublicKey, int]]:
        return {-gap: dict(sorted(v.items())) for gap, v in sorted(self.reserved.items())}

    def canonical(self) -> dict:
        hx = lambda pk: pk.data.hex() if pk is not None else None
        return {
            "operator": hx(self.operator),
            "apk": hx(self.apk),
            "apk_a": hx(self.apk_active_last),
            "g": self.last_trigger,
            "s": self.last_submission,
            "root": self.last_root.hex() if self.last_root else None,
            "X": sorted(hx(p) for p in self.exited),
            "B": sorted(hx(p) for p in self.registered_since),
            "W": sorted(hx(p) for p in self.withdrawn_since),
            "M": sorted((hx(p), g) for p, g in self.missing.items()),
            "N": sorted((g, sorted((hx(c), a) for c, a in v.items())) for g, v in self.reserved.items()),
            "L": sorted((hx(p), h.hex()) for p, h in self.missing_leaf.items()),
            "consumers": sorted((hx(c), l.deposited, l.revealed, l.withdrawn)
                                for c, l in self.consumers.items()),
            "balance": self.balance,
        }

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class NotarizationReport:
    tick: int
    fast_path: bool
    counter: OpCounter
    signers_returning: int
    newly_missing: int
    newly_missing_from_fresh: int
    still_missing: int
    exits: int


@dataclass
class _WithdrawalPlan:
    amount: int
    gap: int
    debits: List[ConsumerDebit]


class Contract:
    def __init__(self, operator: PublicKey, timing: TimingParams, bls: BLS) -> None:
        self.timing = timing
        self.bls = bls
        self.state = ContractState(operator)
        self.events: List[Event] = []

    # time

    def _sync(self, now: int) -> None:
        self.state.last_trigger = max(self.state.last_trigger, self.timing.trigger(now))

    def freeze_status(self, now: int) -> Window:
        t = self.timing
        g = t.trigger(now)
        if g >= t.beta and now - g <= t.gamma:
            return Window.SUBMISSION
        return Window.OPEN if t.is_open(now) else Window.FROZEN

    # helpers

    def ledger(self, consumer: PublicKey) -> ConsumerLedger:
        return self.state.consumers.get(consumer, ConsumerLedger())

    def reserved(self, consumer: PublicKey, gap: int) -> int:
        return sum(v.get(consumer, 0) for x, v in self.state.reserved.items() if x > gap)

    def snapshot(self) -> ContractState:
        return copy.deepcopy(self.state)

    def _release(self, gap: int, ps: PaymentSet) -> None:
        bucket = self.state.reserved.get(gap, {})
        for c, a in ps.amounts().items():
            left = bucket.get(c, 0) - a
            if left > 0:
                bucket[c] = left
            else:
                bucket.pop(c, None)
        if not bucket:
            self.state.reserved.pop(gap, None)

    # deposits

    def deposit(self, consumer: PublicKey, amount: int, now: int) -> int:
        if amount <= 0:
            raise ValueError("deposit must be positive")
        self._sync(now)
        led = self.state.consumers.setdefault(consumer, ConsumerLedger())
        led.deposited = checked_add(led.deposited, amount)
        self.state.balance = checked_add(self.state.balance, amount)
        self.events.append(Deposited(now, consumer, amount, led.deposited))
        return led.deposited

    # registration

    def register_merchant(self, ticket: Signature, tau_r: int, merchant: PublicKey, now: int,
                          auth: Signature) -> int:
        self._sync(now)
        st = self.state
        if not self.bls.verify(merchant, registration_message(merchant, tau_r, ticket), auth):
            raise Rejected(Reason.CALLER_AUTH)
        if not self.timing.is_open(now):
            raise Rejected(Reason.FROZEN)
        if not st.last_submission < tau_r:
            raise Rejected(Reason.STALE_TICKET)
        if merchant in st.registered_since | st.exited | st.withdrawn_since or merchant in st.missing:
            raise Rejected(Reason.ALREADY_KNOWN)
        if not self.bls.verify(st.operator, ticket_message(merchant.data, tau_r), ticket):
            raise Rejected(Reason.BAD_TICKET)
        st.apk = merchant if st.apk is None else self.bls.aggregate_keys([st.apk, merchant])
        st.registered_since.add(merchant)
        self.events.append(Registered(now, merchant, st.apk))
        return 1

    # notarization

    def verify_commitment(self, sub: CommitmentSubmission, now: int) -> NotarizationReport:
        self._sync(now)
        counter = OpCounter()
        try:
            plan = self._check_commitment(sub, now, counter)
        except Rejected as exc:
            exc.counter = counter
            raise
        return self._apply_commitment(sub, now, counter, *plan)

    def _check_commitment(self, sub: CommitmentSubmission, now: int, counter: OpCounter):
        st, bls = self.state, self.bls
        g = st.last_trigger
        if not sub.tau > g:
            raise Rejected(Reason.STALE_TIMESTAMP)
        if not sub.tau <= now < g + self.timing.gamma:
            raise Rejected(Reason.OUTSIDE_WINDOW)
        if st.last_submission > g:
            raise Rejected(Reason.ALREADY_NOTARIZED)
        if st.apk is None:
            raise Rejected(Reason.NO_MERCHANTS)
        missing_t, exits_t = frozenset(sub.missing), frozenset(sub.exits)

        returning = sorted(p for p in st.missing if p not in missing_t and p not in exits_t)
        for p in returning:
            ps = sub.returning.get(p)
            if ps is None or ps.merchant != p or leaf_hash(ps, counter) != st.missing_leaf[p]:
                raise Rejected(Reason.RETURNING_MISMATCH, p.short())
        if st.exited & missing_t:
            raise Rejected(Reason.EXITED_CLAIMED_MISSING)

        msg = commitment_message(sub.root, sub.tau)
        if not missing_t and not exits_t:
            if not bls.verify(st.apk, msg, sub.ars, counter=counter):
                raise Rejected(Reason.BAD_AGGREGATE)
            return returning, st.apk, None, True, {}

        partial = bls.aggregate_keys([sub.apk_active, *sorted(missing_t)], counter)
        full = bls.aggregate_keys([partial, *sorted(exits_t)], counter)
        if full != st.apk:
            raise Rejected(Reason.KEY_ACCOUNTING)
        if not exits_t <= st.exited:
            raise Rejected(Reason.EXITS_NOT_SUBSET)
        if not bls.verify(sub.apk_active, msg, sub.ars, counter=counter):
            raise Rejected(Reason.BAD_AGGREGATE)

        fresh = st.registered_since | st.withdrawn_since
        newly = sorted(p for p in missing_t if p not in st.missing and p not in fresh)
        evidence = {}
        for p in newly:
            ev = sub.evidence.get(p)
            if ev is None:
                raise Rejected(Reason.MISSING_EVIDENCE, p.short())
            evidence[p] = ev
        if not bls.pop_verify_batch([(p, evidence[p].pop) for p in newly], counter):
            raise Rejected(Reason.POP_FAILED)
        prev_leaves = {}
        for p in newly:
            ev = evidence[p]
            if ev.current.merchant != p or ev.previous.merchant != p:
                raise Rejected(Reason.MALFORMED, p.short())
            cur_leaf = leaf_hash(ev.current, counter)
            prev_leaf = leaf_hash(ev.previous, counter)
            ok = (st.last_root is not None
                  and ev.current_proof.leaf == cur_leaf
                  and ev.previous_proof.leaf == prev_leaf
                  and check_mp(ev.current_proof, sub.root, counter)
                  and check_mp(ev.previous_proof, st.last_root, counter))
            if not ok:
                raise Rejected(Reason.MERKLE_PROOF_FAILED, p.short())
            if not ev.current.covers(ev.previous):
                raise Rejected(Reason.NOT_SUPERSET, p.short())
            prev_leaves[p] = prev_leaf
        return returning, sub.apk_active, partial, False, prev_leaves

    def _apply_commitment(self, sub, now, counter, returning, apk_active, partial, fast, prev_leaves):
        st = self.state
        missing_t, exits_t = frozenset(sub.missing), frozenset(sub.exits)
        fresh = st.registered_since | st.withdrawn_since

        st.last_root = sub.root
        st.last_submission = now
        st.apk_active_last = apk_active
        if exits_t:
            st.apk = partial

        for p in returning:
            gap = st.missing.pop(p)
            del st.missing_leaf[p]
            self._release(gap, sub.returning[p])
        still = len(st.missing)
        st.missing = {p: gap + 1 for p, gap in st.missing.items()}
        st.reserved = {gap + 1: v for gap, v in st.reserved.items()}

        added = []
        for p in sorted(missing_t):
            if p in st.missing:
                continue
            st.missing[p] = 1
            if p in fresh:
                st.missing_leaf[p] = EMPTY_SET_LEAF
                added.append((p, PaymentSet(p)))
                continue
            ev = sub.evidence[p]
            st.missing_leaf[p] = prev_leaves[p]
            bucket = st.reserved.setdefault(1, {})
            for c, a in ev.previous.amounts().items():
                bucket[c] = bucket.get(c, 0) + a
            added.append((p, ev.previous))
        if not st.reserved.get(1, True):
            del st.reserved[1]

        st.registered_since.clear()
        st.withdrawn_since.clear()
        st.exited.clear()
        self.events.append(Notarized(now, sub.root, sub.tau, st.apk, apk_active, tuple(added),
                                     tuple(returning), tuple(sorted(exits_t))))
        return NotarizationReport(
            tick=now, fast_path=fast, counter=counter, signers_returning=len(returning),
            newly_missing=len(prev_leaves), newly_missing_from_fresh=len(added) - len(prev_leaves),
            still_missing=still, exits=len(exits_t))

    # withdrawal

    def process_withdrawal(self, req: WithdrawalRequest, now: int) -> int:
        self._sync(now)
        plan = self._check_withdrawal(req, now)
        st = self.state
        p = req.merchant
        for d in plan.debits:
            led = st.consumers[d.consumer]
            led.revealed, led.withdrawn = d.revealed, d.withdrawn
        st.balance -= plan.amount
        if p in st.missing:
            del st.missing_leaf[p]
            del st.missing[p]
            self._release(plan.gap, req.payments)
        (st.exited if req.exit else st.withdrawn_since).add(p)
        self.events.append(Withdrew(now, p, plan.amount, req.exit, tuple(plan.debits)))
        return plan.amount

    def dry_run_withdrawal(self, req: WithdrawalRequest, now: int) -> int:
        """Evaluate a withdrawal against a copy of the state; the live state is untouched."""
        shadow = copy.copy(self)
        shadow.state = self.snapshot()
        shadow.events = []
        return shadow.process_withdrawal(req, now)

    def _check_withdrawal(self, req: WithdrawalRequest, now: int) -> _WithdrawalPlan:
        st, bls = self.state, self.bls
        p = req.merchant
        if not bls.verify(p, req.message(), req.auth):
            raise Rejected(Reason.CALLER_AUTH)
        if not self.timing.is_open(now):
            raise Rejected(Reason.FROZEN)
        if p in st.exited:
            raise Rejected(Reason.EXITED)
        if p in st.registered_since:
            raise Rejected(Reason.NEWLY_REGISTERED)
        if p in st.withdrawn_since:
            raise Rejected(Reason.ALREADY_WITHDRAWN)
        if req.payments.merchant != p:
            raise Rejected(Reason.WRONG_RECIPIENT)
        if p in st.missing:
            if leaf_hash(req.payments) != st.missing_leaf[p]:
                raise Rejected(Reason.LEAF_MISMATCH)
            gap = st.missing[p]
        else:
            proof = req.proof
            if (proof is None or st.last_root is None or proof.leaf != leaf_hash(req.payments)
                    or not check_mp(proof, st.last_root)):
                raise Rejected(Reason.BAD_PROOF)
            gap = 0
        total, debits = 0, []
        for pay in req.payments.payments:
            led = self.ledger(pay.source)
            src = get_source_transaction(pay.source, req.sources, led.deposited, bls, st.operator)
            if src is None:
                raise Rejected(Reason.MISSING_SOURCE, pay.source.short())
            revealed = max(led.revealed, src.amount)
            owed = min(max(revealed - self.reserved(pay.source, gap) - led.withdrawn, 0), pay.amount)
            total += owed
            debits.append(ConsumerDebit(pay.source, owed, led.withdrawn + owed, revealed))
        return _WithdrawalPlan(total, gap, debits)
