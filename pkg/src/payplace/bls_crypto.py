"""BLS signatures with aggregation and proof of possession.

Signatures live in G0 and public keys in G1. Verification checks
e(sigma, g1) * e(H0(m), pk)^-1 == 1 as one product-of-pairings equation.

Two group backends share one interface:

* ``Bls12381``: the real curve. G0 is BLS12-381 G2 and G1 is BLS12-381 G1.
  Hash-to-curve comes from blspy (RFC 9380 SSWU) and all group arithmetic
  and pairings come from arkworks.
* ``TransparentGroup``: a bilinear group written in exponent form, where
  every element is its own discrete log modulo a prime. The pairing is
  multiplication of exponents. It has the same algebra and the same
  operation counts, but offers no security. It exists so that thousands
  of simulated protocol runs fit in a test budget.
"""

from __future__ import annotations

import hashlib
from abc import ABC, abstractmethod
from dataclasses import dataclass, fields
from enum import Enum
from functools import lru_cache
from typing import Iterable, Optional, Sequence, Tuple, Union

from .encoding import Kind, encode

# Order of the BLS12-381 prime-order subgroups.
CURVE_ORDER = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001


class Domain(Enum):
    STANDARD = "standard"
    POP = "pop"


_DST = {
    Domain.STANDARD: b"PAYPLACE-V1-BLS_SIG_BLS12381G2_XMD:SHA-256_SSWU_RO_NUL_",
    Domain.POP: b"PAYPLACE-V1-BLS_POP_BLS12381G2_XMD:SHA-256_SSWU_RO_POP_",
}


@dataclass
class OpCounter:
    """Per-call-context tally of the operations priced by the cost model."""

    pairings: int = 0
    g1_muls: int = 0
    g0_muls: int = 0
    hash_to_g0: int = 0
    hashes: int = 0
    exponentiations: int = 0

    def add(self, **deltas: int) -> None:
        for name, delta in deltas.items():
            setattr(self, name, getattr(self, name) + delta)

    def merge(self, other: "OpCounter") -> None:
        for f in fields(self):
            self.add(**{f.name: getattr(other, f.name)})

    def model_counts(self) -> Tuple[int, int, int, int]:
        return (self.pairings, self.g1_muls, self.hash_to_g0, self.hashes)


def tally(counter: Optional[OpCounter], **deltas: int) -> None:
    if counter is not None:
        counter.add(**deltas)


@dataclass(frozen=True)
class SecretKey:
    value: int

    def __repr__(self) -> str:
        return "SecretKey(<hidden>)"


@dataclass(frozen=True, order=True)
class PublicKey:
    data: bytes

    def short(self) -> str:
        return self.data.hex()[:10]

    def __repr__(self) -> str:
        return f"PublicKey({self.short()})"


@dataclass(frozen=True)
class Signature:
    data: bytes

    def __repr__(self) -> str:
        return f"Signature({self.data.hex()[:10]})"


class PairingGroup(ABC):
    """Type-3 pairing group e: G0 x G1 -> GT over canonical byte encodings."""

    name: str
    order: int

    @abstractmethod
    def g1_generator(self) -> bytes: ...

    @abstractmethod
    def g1_identity(self) -> bytes: ...

    @abstractmethod
    def g1_mul(self, a: bytes, b: bytes) -> bytes: ...

    @abstractmethod
    def g1_inv(self, a: bytes) -> bytes: ...

    @abstractmethod
    def g1_exp(self, a: bytes, k: int) -> bytes: ...

    @abstractmethod
    def g1_valid(self, a: bytes) -> bool: ...

    @abstractmethod
    def g0_identity(self) -> bytes: ...

    @abstractmethod
    def g0_mul(self, a: bytes, b: bytes) -> bytes: ...

    @abstractmethod
    def g0_exp(self, a: bytes, k: int) -> bytes: ...

    @abstractmethod
    def g0_valid(self, a: bytes) -> bool: ...

    @abstractmethod
    def hash_to_g0(self, msg: bytes, dst: bytes) -> bytes: ...

    @abstractmethod
    def pairing_check(self, pairs: Sequence[Tuple[bytes, bytes]]) -> bool:
        """True iff the product of e(a, b) over (G0, G1) pairs is the identity."""


class Bls12381(PairingGroup):
    name = "bls12-381"
    order = CURVE_ORDER

    def __init__(self) -> None:
        import blspy
        import py_arkworks_bls12381 as ark

        self._ark = ark
        self._blspy = blspy
        self._g1_gen = bytes(ark.G1Point().to_compressed_bytes())

        @lru_cache(maxsize=1 << 16)
        def g1(raw: bytes):
            return ark.G1Point.from_compressed_bytes(raw)

        @lru_cache(maxsize=1 << 16)
        def g0(raw: bytes):
            return ark.G2Point.from_compressed_bytes(raw)

        @lru_cache(maxsize=1 << 14)
        def h2c(msg: bytes, dst: bytes) -> bytes:
            return bytes(blspy.G2Element.from_message(msg, dst))

        self._g1, self._g0, self._h2c = g1, g0, h2c

    def _scalar(self, k: int):
        return self._ark.Scalar(k % self.order)

    @staticmethod
    def _enc(point) -> bytes:
        return bytes(point.to_compressed_bytes())

    def g1_generator(self) -> bytes:
        return self._g1_gen

    def g1_identity(self) -> bytes:
        return self._enc(self._ark.G1Point.identity())

    def g1_mul(self, a: bytes, b: bytes) -> bytes:
        return self._enc(self._g1(a) + self._g1(b))

    def g1_inv(self, a: bytes) -> bytes:
        return self._enc(-self._g1(a))

    def g1_exp(self, a: bytes, k: int) -> bytes:
        return self._enc(self._g1(a) * self._scalar(k))

    def g1_valid(self, a: bytes) -> bool:
        try:
            self._g1(bytes(a))
        except Exception:
            return False
        return True

    def g0_identity(self) -> bytes:
        return self._enc(self._ark.G2Point.identity())

    def g0_mul(self, a: bytes, b: bytes) -> bytes:
        return self._enc(self._g0(a) + self._g0(b))

    def g0_exp(self, a: bytes, k: int) -> bytes:
        return self._enc(self._g0(a) * self._scalar(k))

    def g0_valid(self, a: bytes) -> bool:
        try:
            self._g0(bytes(a))
        except Exception:
            return False
        return True

    def hash_to_g0(self, msg: bytes, dst: bytes) -> bytes:
        return self._h2c(bytes(msg), dst)

    def pairing_check(self, pairs: Sequence[Tuple[bytes, bytes]]) -> bool:
        ark = self._ark
        try:
            sig_side = [self._g0(a) for a, _ in pairs]
            key_side = [self._g1(b) for _, b in pairs]
        except Exception:
            return False
        return ark.GT.multi_pairing(key_side, sig_side) == ark.GT.one()


class TransparentGroup(PairingGroup):
    """Exponent-form bilinear group. Insecure by design: use for simulation only."""

    name = "transparent"
    order = CURVE_ORDER

    def _dec(self, raw: bytes) -> int:
        return int.from_bytes(raw, "big")

    def _enc(self, value: int) -> bytes:
        return (value % self.order).to_bytes(32, "big")

    def _valid(self, raw: bytes) -> bool:
        return len(raw) == 32 and self._dec(raw) < self.order

    def g1_generator(self) -> bytes:
        return self._enc(1)

    def g1_identity(self) -> bytes:
        return self._enc(0)

    def g1_mul(self, a: bytes, b: bytes) -> bytes:
        return self._enc(self._dec(a) + self._dec(b))

    def g1_inv(self, a: bytes) -> bytes:
        return self._enc(-self._dec(a))

    def g1_exp(self, a: bytes, k: int) -> bytes:
        return self._enc(self._dec(a) * k)

    def g1_valid(self, a: bytes) -> bool:
        return self._valid(a)

    g0_identity = g1_identity
    g0_mul = g1_mul
    g0_exp = g1_exp
    g0_valid = g1_valid

    def hash_to_g0(self, msg: bytes, dst: bytes) -> bytes:
        digest = hashlib.sha512(len(dst).to_bytes(2, "big") + dst + msg).digest()
        return self._enc(int.from_bytes(digest, "big") % (self.order - 1) + 1)

    def pairing_check(self, pairs: Sequence[Tuple[bytes, bytes]]) -> bool:
        if not all(self._valid(a) and self._valid(b) for a, b in pairs):
            return False
        return sum(self._dec(a) * self._dec(b) for a, b in pairs) % self.order == 0


Seed = Union[int, str, bytes]


def _seed_bytes(seed: Seed) -> bytes:
    if isinstance(seed, int):
        return b"i" + str(seed).encode()
    if isinstance(seed, str):
        return b"s" + seed.encode()
    return b"b" + bytes(seed)


class BLS:
    """BLS scheme bound to one pairing group. Stateless apart from caller-supplied counters."""

    def __init__(self, group: PairingGroup) -> None:
        self.group = group

    def __repr__(self) -> str:
        return f"BLS({self.group.name})"

    # keys

    def keygen(self, seed: Seed) -> Tuple[SecretKey, PublicKey]:
        digest = hashlib.sha512(b"payplace/keygen/" + _seed_bytes(seed)).digest()
        sk = SecretKey(int.from_bytes(digest, "big") % (self.group.order - 1) + 1)
        return sk, self.public_key(sk)

    def public_key(self, sk: SecretKey, counter: Optional[OpCounter] = None) -> PublicKey:
        tally(counter, exponentiations=1)
        g = self.group
        return PublicKey(g.g1_exp(g.g1_generator(), sk.value))

    def generator(self) -> PublicKey:
        return PublicKey(self.group.g1_generator())

    def identity(self) -> PublicKey:
        return PublicKey(self.group.g1_identity())

    def aggregate_keys(self, keys: Iterable[PublicKey], counter: Optional[OpCounter] = None) -> PublicKey:
        keys = list(keys)
        if not keys:
            raise ValueError("empty aggregation")
        acc = keys[0].data
        for pk in keys[1:]:
            acc = self.group.g1_mul(acc, pk.data)
        tally(counter, g1_muls=len(keys) - 1)
        return PublicKey(acc)

    def remove_key(self, apk: PublicKey, pk: PublicKey, counter: Optional[OpCounter] = None) -> PublicKey:
        tally(counter, g1_muls=1)
        return PublicKey(self.group.g1_mul(apk.data, self.group.g1_inv(pk.data)))

    # signatures

    def hash_to_g0(self, msg: bytes, domain: Domain = Domain.STANDARD,
                   counter: Optional[OpCounter] = None) -> bytes:
        tally(counter, hash_to_g0=1)
        return self.group.hash_to_g0(msg, _DST[domain])

    def sign(self, msg: bytes, sk: SecretKey, domain: Domain = Domain.STANDARD,
             counter: Optional[OpCounter] = None) -> Signature:
        point = self.hash_to_g0(msg, domain, counter)
        tally(counter, exponentiations=1)
        return Signature(self.group.g0_exp(point, sk.value))

    def verify(self, pk: PublicKey, msg: bytes, sig: Signature, domain: Domain = Domain.STANDARD,
               counter: Optional[OpCounter] = None) -> bool:
        g = self.group
        if not (g.g1_valid(pk.data) and g.g0_valid(sig.data)):
            return False
        point = self.hash_to_g0(msg, domain, counter)
        tally(counter, pairings=2)
        return g.pairing_check([(sig.data, g.g1_generator()), (point, g.g1_inv(pk.data))])

    def aggregate_signatures(self, sigs: Iterable[Signature],
                             counter: Optional[OpCounter] = None) -> Signature:
        sigs = list(sigs)
        if not sigs:
            raise ValueError("empty aggregation")
        acc = sigs[0].data
        for s in sigs[1:]:
            acc = self.group.g0_mul(acc, s.data)
        tally(counter, g0_muls=len(sigs) - 1)
        return Signature(acc)

    # proof of possession

    @staticmethod
    def pop_message(pk: PublicKey) -> bytes:
        return encode(Kind.POP, pk.data)

    def pop_create(self, sk: SecretKey, pk: PublicKey) -> Signature:
        return self.sign(self.pop_message(pk), sk, Domain.POP)

    def pop_verify(self, pk: PublicKey, sig: Signature, counter: Optional[OpCounter] = None) -> bool:
        return self.verify(pk, self.pop_message(pk), sig, Domain.POP, counter)

    def pop_verify_batch(self, pairs: Sequence[Tuple[PublicKey, Signature]],
                         counter: Optional[OpCounter] = None) -> bool:
        """Check x PoPs with one (x+1)-pairing equation.

        e(prod sigma_i, g1) == prod e(H_pop(pk_i), pk_i). The messages are the
        distinct keys themselves, so this is plain BLS aggregate verification
        over distinct messages.
        """
        if not pairs:
            return True
        keys = [pk for pk, _ in pairs]
        if len(set(keys)) != len(keys):
            return False
        g = self.group
        if not all(g.g1_valid(pk.data) and g.g0_valid(s.data) for pk, s in pairs):
            return False
        agg = self.aggregate_signatures([s for _, s in pairs], counter)
        terms = [(agg.data, g.g1_generator())]
        for pk in keys:
            point = self.hash_to_g0(self.pop_message(pk), Domain.POP, counter)
            terms.append((point, g.g1_inv(pk.data)))
        tally(counter, pairings=len(terms))
        return g.pairing_check(terms)


@lru_cache(maxsize=None)
def real_curve() -> BLS:
    return BLS(Bls12381())


@lru_cache(maxsize=None)
def transparent() -> BLS:
    return BLS(TransparentGroup())


def backend(name: str) -> BLS:
    if name in ("bls12-381", "bls12381", "real"):
        return real_curve()
    if name in ("transparent", "fast"):
        return transparent()
    raise ValueError(f"unknown group backend {name!r}")
