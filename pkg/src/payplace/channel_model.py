"""Consumer virtual channels: cumulative signed promises to the operator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, Mapping, Optional, Union

from .bls_crypto import BLS, OpCounter, PublicKey, SecretKey, Signature
from .encoding import Kind, U64_MAX, encode
from .reasons import Reason, Rejected


def checked_add(a: int, b: int) -> int:
    total = a + b
    if total > U64_MAX:
        raise OverflowError("amount overflow")
    return total


@dataclass(frozen=True)
class OffChainPayment:
    """T = (mu, pk_operator, pk_consumer); mu is the running total promised."""

    amount: int
    recipient: PublicKey
    sender: PublicKey

    def __post_init__(self) -> None:
        if not 0 <= self.amount <= U64_MAX:
            raise ValueError("amount outside u64 range")

    def message(self) -> bytes:
        return encode(Kind.PAYMENT, self.amount, self.recipient.data, self.sender.data)


@dataclass(frozen=True)
class SignedPayment:
    payment: OffChainPayment
    signature: Signature

    @property
    def amount(self) -> int:
        return self.payment.amount

    @property
    def sender(self) -> PublicKey:
        return self.payment.sender


@dataclass(frozen=True)
class MerchantPayment:
    """T' = (mu', pk_merchant, pk_consumer); mu' is cumulative per (merchant, consumer)."""

    amount: int
    recipient: PublicKey
    source: PublicKey

    def __post_init__(self) -> None:
        if not 0 <= self.amount <= U64_MAX:
            raise ValueError("amount outside u64 range")

    def encoded(self) -> bytes:
        return encode(Kind.MERCHANT_PAYMENT, self.amount, self.recipient.data, self.source.data)


@dataclass
class ConsumerAccount:
    """Consumer-side view of one channel."""

    pk: PublicKey
    deposited: int = 0
    promised: int = 0

    @property
    def available(self) -> int:
        return self.deposited - self.promised


class InsufficientFunds(ValueError):
    def __init__(self) -> None:
        super().__init__("insufficient channel funds")


def consumer_pay(account: ConsumerAccount, increment: int, sk: SecretKey,
                 operator: PublicKey, bls: BLS) -> SignedPayment:
    if increment < 0:
        raise ValueError("negative increment")
    total = checked_add(account.promised, increment)
    if total > account.deposited:
        raise InsufficientFunds()
    payment = OffChainPayment(total, operator, account.pk)
    return SignedPayment(payment, bls.sign(payment.message(), sk))


def valid_source(sp: SignedPayment, consumer: PublicKey, deposited: int, bls: BLS,
                 operator: Optional[PublicKey] = None,
                 counter: Optional[OpCounter] = None) -> bool:
    p = sp.payment
    if p.sender != consumer or p.amount > deposited:
        return False
    if operator is not None and p.recipient != operator:
        return False
    return bls.verify(consumer, p.message(), sp.signature, counter=counter)


def get_source_transaction(consumer: PublicKey,
                           candidates: Union[Mapping[PublicKey, SignedPayment], Iterable[SignedPayment]],
                           deposited: int, bls: BLS, operator: Optional[PublicKey] = None,
                           counter: Optional[OpCounter] = None) -> Optional[SignedPayment]:
    if isinstance(candidates, Mapping):
        candidates = [candidates[consumer]] if consumer in candidates else []
    for sp in candidates:
        if sp.sender == consumer and valid_source(sp, consumer, deposited, bls, operator, counter):
            return sp
    return None


@dataclass
class ChannelTable:
    """Operator-side C_t: the latest accepted payment from each consumer."""

    operator: PublicKey
    bls: BLS
    latest: Dict[PublicKey, SignedPayment] = field(default_factory=dict)

    def promised(self, consumer: PublicKey) -> int:
        sp = self.latest.get(consumer)
        return sp.amount if sp else 0

    def accept(self, sp: SignedPayment, deposited: int) -> None:
        p = sp.payment
        if p.recipient != self.operator:
            raise Rejected(Reason.WRONG_RECIPIENT)
        if not self.bls.verify(p.sender, p.message(), sp.signature):
            raise Rejected(Reason.INVALID_SIGNATURE)
        if p.amount > deposited:
            raise Rejected(Reason.INSUFFICIENT_DEPOSIT, f"{p.amount} > {deposited}")
        if p.amount < self.promised(p.sender):
            raise Rejected(Reason.NON_MONOTONE)
        self.latest[p.sender] = sp

    def snapshot(self) -> Dict[PublicKey, SignedPayment]:
        return dict(sorted(self.latest.items()))

    def __iter__(self) -> Iterator[SignedPayment]:
        return iter(self.snapshot().values())
