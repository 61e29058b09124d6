"""Stable rejection codes shared by the contract, operator and merchants."""

from __future__ import annotations

from enum import Enum


class Reason(str, Enum):
    # channel intake
    INVALID_SIGNATURE = "invalid-signature"
    INSUFFICIENT_DEPOSIT = "insufficient-deposit"
    NON_MONOTONE = "non-monotone"
    WRONG_RECIPIENT = "wrong-recipient"
    UNKNOWN_MERCHANT = "unknown-merchant"

    # windows
    FROZEN = "frozen"
    STALE_TIMESTAMP = "stale-timestamp"
    OUTSIDE_WINDOW = "outside-window"
    ALREADY_NOTARIZED = "already-notarized"

    # registration
    STALE_TICKET = "stale-ticket"
    ALREADY_KNOWN = "already-known"
    BAD_TICKET = "bad-ticket"
    CALLER_AUTH = "caller-auth-failed"
    POP_REFUSED = "pop-refused"

    # commitment verification
    NO_MERCHANTS = "no-merchants"
    RETURNING_MISMATCH = "returning-leaf-mismatch"
    EXITED_CLAIMED_MISSING = "exited-claimed-missing"
    KEY_ACCOUNTING = "key-accounting"
    EXITS_NOT_SUBSET = "exits-not-subset"
    BAD_AGGREGATE = "bad-aggregate"
    MISSING_EVIDENCE = "missing-evidence"
    POP_FAILED = "pop-failed"
    MERKLE_PROOF_FAILED = "merkle-proof-failed"
    NOT_SUPERSET = "not-superset"
    MALFORMED = "malformed"

    # withdrawal
    EXITED = "exited"
    NEWLY_REGISTERED = "newly-registered"
    ALREADY_WITHDRAWN = "already-withdrawn"
    LEAF_MISMATCH = "leaf-mismatch"
    BAD_PROOF = "bad-proof"
    MISSING_SOURCE = "missing-source"
    NO_FUNDS = "no-funds"

    # merchant signing gates
    DATA_UNAVAILABLE = "data-unavailable"
    MISSING_MERCHANT_OMITTED = "missing-merchant-omitted"
    MISSING_MERCHANT_REDUCED = "missing-merchant-reduced"
    DOUBLE_SPEND = "double-spend"
    ROOT_MISMATCH = "root-mismatch"


class Rejected(Exception):
    """A protocol participant refused an input. State is left untouched."""

    def __init__(self, reason: Reason, detail: str = "") -> None:
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)
        self.reason = reason
        self.detail = detail
