"""Merkle trees over per-merchant payment sets."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Optional, Tuple

from .bls_crypto import OpCounter, PublicKey, tally
from .channel_model import MerchantPayment
from .encoding import encode_list

LEAF_PREFIX = b"\x00"
NODE_PREFIX = b"\x01"


@dataclass(frozen=True)
class PaymentSet:
    """T_p: at most one cumulative payment per source consumer, all to one merchant."""

    merchant: PublicKey
    payments: Tuple[MerchantPayment, ...] = ()

    def __post_init__(self) -> None:
        sources = [p.source for p in self.payments]
        if len(set(sources)) != len(sources):
            raise ValueError("duplicate source consumer in payment set")
        if any(p.recipient != self.merchant for p in self.payments):
            raise ValueError("payment names a different recipient")
        object.__setattr__(self, "payments", tuple(sorted(self.payments, key=lambda p: p.source.data)))

    @classmethod
    def from_amounts(cls, merchant: PublicKey, amounts: Mapping[PublicKey, int]) -> "PaymentSet":
        return cls(merchant, tuple(MerchantPayment(a, merchant, c) for c, a in amounts.items()))

    def amounts(self) -> Dict[PublicKey, int]:
        return {p.source: p.amount for p in self.payments}

    def total(self) -> int:
        return sum(p.amount for p in self.payments)

    def covers(self, older: "PaymentSet") -> bool:
        """Cumulative superset: every (consumer, mu') in older appears here with mu' no smaller."""
        mine = self.amounts()
        return all(c in mine and mine[c] >= a for c, a in older.amounts().items())

    def encoded(self) -> bytes:
        return encode_list(p.encoded() for p in self.payments)

    def __len__(self) -> int:
        return len(self.payments)


def _h(*parts: bytes) -> bytes:
    return hashlib.sha256(b"".join(parts)).digest()


def leaf_hash(ps: PaymentSet, counter: Optional[OpCounter] = None) -> bytes:
    tally(counter, hashes=1)
    return _h(LEAF_PREFIX, ps.encoded())


def node_hash(left: bytes, right: bytes, counter: Optional[OpCounter] = None) -> bytes:
    tally(counter, hashes=1)
    return _h(NODE_PREFIX, left, right)


EMPTY_SET_LEAF = _h(LEAF_PREFIX, encode_list([]))


@dataclass(frozen=True)
class MerkleProof:
    leaf: bytes
    index: int
    siblings: Tuple[bytes, ...]


@dataclass(frozen=True)
class MerkleTree:
    owners: Tuple[PublicKey, ...]
    levels: Tuple[Tuple[bytes, ...], ...]

    @property
    def root(self) -> bytes:
        return self.levels[-1][0]

    @property
    def leaves(self) -> Tuple[bytes, ...]:
        return self.levels[0]

    @property
    def height(self) -> int:
        return len(self.levels) - 1

    def index_of(self, pk: PublicKey) -> int:
        try:
            return self.owners.index(pk)
        except ValueError:
            raise KeyError(f"no leaf for {pk!r}") from None


def canonical_order(sets: Iterable[PaymentSet]) -> Tuple[PaymentSet, ...]:
    return tuple(sorted(sets, key=lambda s: s.merchant.data))


def merklize(sets: Iterable[PaymentSet]) -> MerkleTree:
    ordered = canonical_order(sets)
    if not ordered:
        raise ValueError("cannot merklize an empty block")
    owners = tuple(s.merchant for s in ordered)
    if len(set(owners)) != len(owners):
        raise ValueError("duplicate leaf owner")
    level = tuple(leaf_hash(s) for s in ordered)
    levels = [level]
    while len(level) > 1:
        padded = level + (level[-1],) if len(level) % 2 else level
        level = tuple(node_hash(padded[i], padded[i + 1]) for i in range(0, len(padded), 2))
        levels.append(level)
    return MerkleTree(owners, tuple(levels))


def prove(tree: MerkleTree, pk: PublicKey) -> MerkleProof:
    index = tree.index_of(pk)
    siblings = []
    pos = index
    for level in tree.levels[:-1]:
        mate = pos ^ 1
        siblings.append(level[mate] if mate < len(level) else level[pos])
        pos //= 2
    return MerkleProof(tree.leaves[index], index, tuple(siblings))


def check_mp(proof: MerkleProof, root: bytes, counter: Optional[OpCounter] = None) -> bool:
    node, pos = proof.leaf, proof.index
    if pos < 0 or pos >= 1 << len(proof.siblings):
        return False
    for sib in proof.siblings:
        node = node_hash(sib, node, counter) if pos & 1 else node_hash(node, sib, counter)
        pos //= 2
    return node == root


def proof_height(leaf_count: int) -> int:
    return max(leaf_count - 1, 0).bit_length()
