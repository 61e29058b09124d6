import pytest
from hypothesis import given, settings, strategies as st

from payplace.bls_crypto import (CURVE_ORDER, Domain, OpCounter, PublicKey, SecretKey, Signature,
                                 backend, transparent)


def keys(bls, n, tag="k"):
    return [bls.keygen(f"{tag}/{i}") for i in range(n)]


def test_sign_verify_roundtrip(bls):
    sk, pk = bls.keygen("alice")
    sig = bls.sign(b"hello", sk)
    assert bls.verify(pk, b"hello", sig)
    assert not bls.verify(pk, b"hellp", sig)
    _, other = bls.keygen("bob")
    assert not bls.verify(other, b"hello", sig)


def test_keygen_deterministic(bls):
    assert bls.keygen("x") == bls.keygen("x")
    assert bls.keygen("x")[1] != bls.keygen("y")[1]


def test_domain_separation(bls):
    sk, pk = bls.keygen("d")
    sig = bls.sign(b"m", sk, Domain.STANDARD)
    assert not bls.verify(pk, b"m", sig, Domain.POP)
    pop = bls.pop_create(sk, pk)
    # a PoP is not a standard-domain signature over the same bytes
    assert not bls.verify(pk, bls.pop_message(pk), pop, Domain.STANDARD)
    assert bls.pop_verify(pk, pop)


AGG_CASES = [("transparent", k) for k in range(1, 9)] + [("bls12-381", k) for k in (1, 4, 8)]


@pytest.mark.parametrize("backend_name,k", AGG_CASES)
def test_aggregation_soundness(backend_name, k):
    bls = backend(backend_name)
    pairs = keys(bls, k, f"agg{k}")
    msg = b"root||tau"
    apk = bls.aggregate_keys(pk for _, pk in pairs)
    agg = bls.aggregate_signatures(bls.sign(msg, sk) for sk, _ in pairs)
    assert bls.verify(apk, msg, agg)
    # dropping any signer breaks it
    if k > 1:
        partial = bls.aggregate_signatures(bls.sign(msg, sk) for sk, _ in pairs[1:])
        assert not bls.verify(apk, msg, partial)
        assert bls.verify(bls.remove_key(apk, pairs[0][1]), msg, partial)


def test_pop_batch_pairing_count(bls):
    pairs = keys(bls, 5, "pop")
    batch = [(pk, bls.pop_create(sk, pk)) for sk, pk in pairs]
    c = OpCounter()
    assert bls.pop_verify_batch(batch, c)
    assert c.pairings == len(batch) + 1
    assert c.hash_to_g0 == len(batch)


def test_pop_batch_rejects_bad_and_duplicates(bls):
    pairs = keys(bls, 3, "popbad")
    batch = [(pk, bls.pop_create(sk, pk)) for sk, pk in pairs]
    sk_x, pk_x = bls.keygen("outsider")
    forged = [batch[0], batch[1], (batch[2][0], bls.pop_create(sk_x, pk_x))]
    assert not bls.pop_verify_batch(forged)
    # the batch checks the product: permuting valid PoPs among their keys is not detected and not needed
    swapped = [(batch[0][0], batch[1][1]), (batch[1][0], batch[0][1]), batch[2]]
    assert bls.pop_verify_batch(swapped)
    assert not bls.pop_verify_batch([batch[0], batch[0]])
    assert bls.pop_verify_batch([])


def test_rogue_key_has_no_pop(fast):
    bls = fast
    _, victim = bls.keygen("victim")
    sk_a, pk_a = bls.keygen("attacker")
    # pk_rogue = g^a / pk_victim, so apk(victim, rogue) = g^a
    rogue = bls.remove_key(pk_a, victim)
    apk = bls.aggregate_keys([victim, rogue])
    sig = bls.sign(b"forged", sk_a)
    assert bls.verify(apk, b"forged", sig)
    # but the attacker cannot produce a PoP for the rogue key
    assert not bls.pop_verify(rogue, bls.pop_create(sk_a, rogue))


def test_invalid_encodings_rejected(bls):
    sk, pk = bls.keygen("enc")
    sig = bls.sign(b"m", sk)
    assert not bls.verify(PublicKey(b"\x00" * len(pk.data)), b"m", sig)
    assert not bls.verify(pk, b"m", Signature(b"\x01" * len(sig.data)))


def test_identity_key_rejected(bls):
    sk, pk = bls.keygen("id")
    assert not bls.verify(bls.identity(), b"m", bls.sign(b"m", sk))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(1, CURVE_ORDER - 1), min_size=1, max_size=8, unique=True), st.binary(max_size=64))
def test_transparent_aggregate_property(secrets, msg):
    bls = transparent()
    sks = [SecretKey(s) for s in secrets]
    pks = [bls.public_key(s) for s in sks]
    agg = bls.aggregate_signatures(bls.sign(msg, s) for s in sks)
    assert bls.verify(bls.aggregate_keys(pks), msg, agg)
    assert not bls.verify(bls.aggregate_keys(pks), msg + b"!", agg)
