import random

import pytest
from hypothesis import given, settings, strategies as st

from payplace.bls_crypto import OpCounter, transparent
from payplace.channel_model import MerchantPayment
from payplace.merkle import (MerkleProof, PaymentSet, check_mp, leaf_hash, merklize, proof_height,
                             prove)

BLS = transparent()
MERCHANTS = [BLS.keygen(f"m{i}")[1] for i in range(24)]
CONSUMERS = [BLS.keygen(f"c{i}")[1] for i in range(6)]


def block(rng, n):
    out = []
    for m in rng.sample(MERCHANTS, n):
        srcs = rng.sample(CONSUMERS, rng.randint(0, 3))
        out.append(PaymentSet.from_amounts(m, {c: rng.randint(1, 500) for c in srcs}))
    return out


def test_roundtrip_all_leaves():
    rng = random.Random(1)
    for n in range(1, 18):
        sets = block(rng, n)
        tree = merklize(sets)
        assert tree.height == proof_height(n)
        for s in sets:
            p = prove(tree, s.merchant)
            assert p.leaf == leaf_hash(s)
            assert check_mp(p, tree.root)


def test_order_independent():
    rng = random.Random(2)
    sets = block(rng, 7)
    assert merklize(sets).root == merklize(reversed(sets)).root


def test_rejects_empty_and_duplicates():
    with pytest.raises(ValueError):
        merklize([])
    ps = PaymentSet(MERCHANTS[0])
    with pytest.raises(ValueError, match="duplicate leaf owner"):
        merklize([ps, ps])


def test_payment_set_invariants():
    m, c = MERCHANTS[0], CONSUMERS[0]
    with pytest.raises(ValueError):
        PaymentSet(m, (MerchantPayment(1, m, c), MerchantPayment(2, m, c)))
    with pytest.raises(ValueError):
        PaymentSet(m, (MerchantPayment(1, MERCHANTS[1], c),))
    old = PaymentSet.from_amounts(m, {c: 5})
    assert PaymentSet.from_amounts(m, {c: 5, CONSUMERS[1]: 1}).covers(old)
    assert not PaymentSet.from_amounts(m, {c: 4}).covers(old)


def test_leaf_and_node_domains_differ():
    # a two-leaf tree's root must not verify as a leaf of anything
    rng = random.Random(3)
    sets = block(rng, 2)
    tree = merklize(sets)
    assert tree.root not in tree.leaves


def test_proof_hash_count():
    rng = random.Random(4)
    sets = block(rng, 9)
    tree = merklize(sets)
    c = OpCounter()
    assert check_mp(prove(tree, sets[0].merchant), tree.root, c)
    assert c.hashes == proof_height(9)


def test_mutation_binding_fuzz():
    """10^4 random single-field mutations of (leaf, index, sibling, root) never verify."""
    rng = random.Random(5)
    cases = 0
    while cases < 10_000:
        sets = block(rng, rng.randint(2, 20))
        tree = merklize(sets)
        target = rng.choice(sets)
        proof = prove(tree, target.merchant)
        assert check_mp(proof, tree.root)
        for _ in range(10):
            kind = rng.randrange(4)
            root = tree.root
            if kind == 0:
                # change one payment amount in the leaf
                amounts = target.amounts() or {CONSUMERS[0]: 0}
                c = rng.choice(sorted(amounts, key=lambda k: k.data))
                amounts[c] += rng.randint(1, 9)
                mutated = MerkleProof(leaf_hash(PaymentSet.from_amounts(target.merchant, amounts)),
                                      proof.index, proof.siblings)
            elif kind == 1:
                mutated = MerkleProof(proof.leaf, proof.index ^ (1 << rng.randrange(len(proof.siblings))),
                                      proof.siblings)
                if _is_padding_alias(tree, proof, mutated):
                    continue
            elif kind == 2:
                i = rng.randrange(len(proof.siblings))
                sib = bytearray(proof.siblings[i])
                sib[rng.randrange(len(sib))] ^= 1 << rng.randrange(8)
                mutated = MerkleProof(proof.leaf, proof.index, proof.siblings[:i] + (bytes(sib),) + proof.siblings[i + 1:])
            else:
                mutated = proof
                r = bytearray(root)
                r[rng.randrange(len(r))] ^= 1 << rng.randrange(8)
                root = bytes(r)
            assert not check_mp(mutated, root), (kind, cases)
            cases += 1


def _is_padding_alias(tree, proof, mutated):
    # flipping an index bit where the sibling equals the node itself (odd-width padding) is benign:
    # the same leaf still hashes to the same root, it does not bind a different leaf
    pos = proof.index
    node = proof.leaf
    from payplace.merkle import node_hash
    for level, sib in enumerate(proof.siblings):
        if (proof.index ^ mutated.index) >> level & 1:
            return sib == node
        node = node_hash(sib, node) if pos & 1 else node_hash(node, sib)
        pos //= 2
    return False


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 24), st.integers(0, 2**32))
def test_roundtrip_property(n, seed):
    rng = random.Random(seed)
    sets = block(rng, n)
    tree = merklize(sets)
    for s in sets:
        assert check_mp(prove(tree, s.merchant), tree.root)


def test_out_of_range_index_rejected():
    rng = random.Random(6)
    sets = block(rng, 4)
    tree = merklize(sets)
    p = prove(tree, sets[0].merchant)
    assert not check_mp(MerkleProof(p.leaf, 1 << len(p.siblings), p.siblings), tree.root)
    assert not check_mp(MerkleProof(p.leaf, -1, p.siblings), tree.root)
