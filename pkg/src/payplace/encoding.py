"""Canonical byte encoding for every signed or hashed payload.

Each message starts with a one-byte kind tag followed by length-prefixed
fields in a fixed order, so distinct payloads never share an encoding.
"""

from __future__ import annotations

from enum import IntEnum
from typing import Iterable, Union

U64_MAX = 2**64 - 1

Field = Union[bytes, int]


class Kind(IntEnum):
    PAYMENT = 1
    MERCHANT_PAYMENT = 2
    PAYMENT_SET = 3
    COMMITMENT = 4
    TICKET = 5
    POP = 6
    TX = 7


def u64(value: int) -> bytes:
    if not 0 <= value <= U64_MAX:
        raise OverflowError(f"value {value} outside u64 range")
    return value.to_bytes(8, "big")


def _field(value: Field) -> bytes:
    raw = u64(value) if isinstance(value, int) else bytes(value)
    return len(raw).to_bytes(4, "big") + raw


def encode(kind: Kind, *fields: Field) -> bytes:
    return bytes([kind]) + b"".join(_field(f) for f in fields)


def encode_list(items: Iterable[bytes]) -> bytes:
    items = list(items)
    return u64(len(items)) + b"".join(_field(i) for i in items)


def commitment_message(root: bytes, tau: int) -> bytes:
    return encode(Kind.COMMITMENT, root, tau)


def ticket_message(merchant: bytes, tau_r: int) -> bytes:
    return encode(Kind.TICKET, merchant, tau_r)


def tx_message(action: str, *fields: Field) -> bytes:
    """Root-chain transaction payload; its signature authenticates the caller."""
    return encode(Kind.TX, action.encode(), *fields)
