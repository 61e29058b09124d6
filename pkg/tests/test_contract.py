from dataclasses import replace

import pytest

from payplace.bls_crypto import transparent
from payplace.channel_model import OffChainPayment, SignedPayment
from payplace.contract import (Contract, TimingParams, Window, attempt, registration_message)
from payplace.encoding import ticket_message
from payplace.merchant_agent import MerchantAgent
from payplace.reasons import Reason, Rejected

from helpers import engine_at

BLS = transparent()
TIMING = TimingParams(20, 6, 2, 3)
OP_SK, OP = BLS.keygen("op")


def fresh_contract():
    return Contract(OP, TIMING, BLS)


def ticket_for(pk, tau):
    return BLS.sign(ticket_message(pk.data, tau), OP_SK)


def register(c, seed, now, tau=None):
    sk, pk = BLS.keygen(seed)
    tau = now if tau is None else tau
    t = ticket_for(pk, tau)
    auth = BLS.sign(registration_message(pk, tau, t), sk)
    return attempt(c.register_merchant, t, tau, pk, now, auth), sk, pk


# timing

def test_timing_validation():
    with pytest.raises(ValueError):
        TimingParams(10, 6, 2)
    with pytest.raises(ValueError):
        TimingParams(20, 6, 0)
    assert TimingParams(20, 6, 2).gamma_prime == 3


@pytest.mark.parametrize("now,expected", [
    (0, Window.OPEN), (17, Window.OPEN), (18, Window.FROZEN), (20, Window.SUBMISSION),
    (26, Window.SUBMISSION), (27, Window.FROZEN), (28, Window.FROZEN), (29, Window.OPEN),
    (37, Window.OPEN), (38, Window.FROZEN),
])
def test_freeze_status(now, expected):
    assert fresh_contract().freeze_status(now) is expected


# deposits and registration

def test_deposit_accumulates():
    c = fresh_contract()
    _, cpk = BLS.keygen("c1")
    assert c.deposit(cpk, 30, 1) == 30
    assert c.deposit(cpk, 40, 3) == 70
    assert c.state.balance == 70
    with pytest.raises(ValueError):
        c.deposit(cpk, 0, 4)


def test_register_once():
    c = fresh_contract()
    (res, reason), sk, pk = register(c, "m", 1)
    assert (res, reason) == (1, None)
    t = ticket_for(pk, 2)
    again = attempt(c.register_merchant, t, 2, pk, 2, BLS.sign(registration_message(pk, 2, t), sk))
    assert again == (0, Reason.ALREADY_KNOWN)


def test_register_rejections():
    c = fresh_contract()
    sk, pk = BLS.keygen("m")
    t = ticket_for(pk, 1)
    good_auth = BLS.sign(registration_message(pk, 1, t), sk)
    _, other = BLS.keygen("x")
    assert attempt(c.register_merchant, t, 1, pk, 1, BLS.sign(b"nope", sk)) == (0, Reason.CALLER_AUTH)
    assert attempt(c.register_merchant, t, 1, pk, 19, good_auth) == (0, Reason.FROZEN)
    bad = BLS.sign(ticket_message(other.data, 1), OP_SK)
    assert attempt(c.register_merchant, bad, 1, pk, 1,
                   BLS.sign(registration_message(pk, 1, bad), sk)) == (0, Reason.BAD_TICKET)
    assert c.state.apk is None and not c.events


def test_stale_ticket_after_notarization():
    eng = engine_at("appendix_b", 99)
    c = eng.contract
    assert c.state.last_submission > 80
    (res, reason), _, _ = register(c, "late", 100, tau=c.state.last_submission)
    assert (res, reason) == (0, Reason.STALE_TICKET)


def test_apk_is_product_of_registered():
    c = fresh_contract()
    pks = [register(c, f"m{i}", 1)[2] for i in range(4)]
    assert c.state.apk == BLS.aggregate_keys(pks)


# commitment verification

def without_clock(canon):
    # the cached trigger follows the block clock on every call, accepted or not
    return {k: v for k, v in canon.items() if k != "g"}


def honest_submission(eng, now):
    rnd, op = eng.round, eng.operator
    op.sync(eng.contract.events)
    agg = op.collect_and_aggregate(rnd.block, rnd.responses, rnd.tau)
    return op.build_submission(rnd.block, agg, rnd.tau)


@pytest.fixture
def churn_round():
    """Churn example, round 2: b, c, d sign round 1 then go silent, so they become newly missing."""
    eng = engine_at("appendix_c", 43)
    return eng, honest_submission(eng, 44)


def test_honest_submission_accepted(churn_round):
    eng, sub = churn_round
    report = eng.contract.verify_commitment(sub, 44)
    assert not report.fast_path
    assert report.newly_missing == 3
    assert report.counter.pairings == 2 + 3 + 1


@pytest.mark.parametrize("mutate,reason", [
    (lambda s, e: replace(s, tau=40), Reason.STALE_TIMESTAMP),
    (lambda s, e: replace(s, tau=45), Reason.OUTSIDE_WINDOW),
    (lambda s, e: replace(s, missing=s.missing - {next(iter(sorted(s.missing)))}), Reason.KEY_ACCOUNTING),
    (lambda s, e: replace(s, ars=e.bls.sign(b"other", e.operator.sk)), Reason.BAD_AGGREGATE),
    (lambda s, e: replace(s, evidence={}), Reason.MISSING_EVIDENCE),
    (lambda s, e: replace(s, root=b"\x00" * 32), Reason.BAD_AGGREGATE),
])
def test_commitment_rejections_leave_state(churn_round, mutate, reason):
    eng, sub = churn_round
    before = without_clock(eng.contract.state.canonical())
    n_events = len(eng.contract.events)
    with pytest.raises(Rejected) as exc:
        eng.contract.verify_commitment(mutate(sub, eng), 44)
    assert exc.value.reason is reason
    assert without_clock(eng.contract.state.canonical()) == before
    assert len(eng.contract.events) == n_events


def test_bad_pop_in_evidence(churn_round):
    eng, sub = churn_round
    p = sorted(sub.evidence)[0]
    ev = replace(sub.evidence[p], pop=eng.bls.sign(b"junk", eng.operator.sk))
    with pytest.raises(Rejected) as exc:
        eng.contract.verify_commitment(replace(sub, evidence={**sub.evidence, p: ev}), 44)
    assert exc.value.reason is Reason.POP_FAILED


def test_evidence_must_be_superset(churn_round):
    eng, sub = churn_round
    p = sorted(sub.evidence)[0]
    ev = sub.evidence[p]
    swapped = replace(ev, current=ev.previous, previous=ev.current,
                      current_proof=ev.previous_proof, previous_proof=ev.current_proof)
    with pytest.raises(Rejected) as exc:
        eng.contract.verify_commitment(replace(sub, evidence={**sub.evidence, p: swapped}), 44)
    assert exc.value.reason is Reason.MERKLE_PROOF_FAILED


def test_second_notarization_in_period(churn_round):
    eng, sub = churn_round
    eng.contract.verify_commitment(sub, 44)
    with pytest.raises(Rejected) as exc:
        eng.contract.verify_commitment(sub, 45)
    assert exc.value.reason is Reason.ALREADY_NOTARIZED


# withdrawal

def test_appendix_c_bookkeeping():
    eng = engine_at("appendix_c", 70)
    st = eng.contract.state
    view = {g: {eng.name(c): a for c, a in v.items()} for g, v in st.reserved_view().items()}
    assert view == {-1: {"c1": 10}, -2: {"c1": 40, "c5": 80}}
    assert {eng.name(p): g for p, g in st.missing.items()} == {"a": 1, "b": 2, "c": 2, "d": 2}


def test_appendix_c_withdrawal_against_reserved():
    """e is owed 100 by c1; c1's newest signed total is 120 and 50 of it is reserved for a and c."""
    eng = engine_at("appendix_c", 70)
    e = eng.merchants["e"]
    c1_sk, c1 = eng.consumers["c1"]
    assert e.confirmed_set().amounts() == {c1.pk: 100}
    assert eng.contract.reserved(c1.pk, 0) == 50
    pay = OffChainPayment(120, eng.operator.pk, c1.pk)
    source = SignedPayment(pay, eng.bls.sign(pay.message(), c1_sk))
    req = e.request(e.confirmed_set(), (source,), e.confirmed.proof, False)
    assert eng.contract.dry_run_withdrawal(req, 75) == 70


def test_missing_merchant_withdraws_from_reserved():
    eng = engine_at("appendix_c", 70)
    c = eng.merchants["c"]
    st = eng.contract.state
    assert c.pk in st.missing
    req = c.assemble_withdrawal()
    assert req.proof is None
    assert eng.contract.process_withdrawal(req, 71) == 40
    assert c.pk not in st.missing
    assert {eng.name(x): a for x, a in st.reserved.get(2, {}).items()} == {"c5": 80}


def test_withdrawal_rejections_are_atomic():
    eng = engine_at("appendix_c", 70)
    e = eng.merchants["e"]
    con = eng.contract
    before = con.state.digest()
    req = e.assemble_withdrawal()
    forged = replace(req, auth=eng.bls.sign(b"x", e.sk))
    assert attempt(con.process_withdrawal, forged, 71) == (0, Reason.CALLER_AUTH)
    assert attempt(con.process_withdrawal, req, 78) == (0, Reason.FROZEN)
    no_proof = e.request(req.payments, req.sources, None, False)
    assert attempt(con.process_withdrawal, no_proof, 71) == (0, Reason.BAD_PROOF)
    no_src = e.request(req.payments, (), req.proof, False)
    assert attempt(con.process_withdrawal, no_src, 71) == (0, Reason.MISSING_SOURCE)
    assert con.state.digest() == before
    assert con.process_withdrawal(req, 71) == 100
    assert attempt(con.process_withdrawal, req, 72) == (0, Reason.ALREADY_WITHDRAWN)


def test_dry_run_does_not_touch_state():
    eng = engine_at("appendix_c", 70)
    req = eng.merchants["e"].assemble_withdrawal()
    before = eng.contract.state.digest()
    assert eng.contract.dry_run_withdrawal(req, 71) == 100
    assert eng.contract.state.digest() == before
    assert eng.contract.process_withdrawal(req, 71) == 100


def test_newly_registered_cannot_withdraw():
    eng = engine_at("appendix_b", 99)
    sk, pk = eng.bls.keygen("newbie")
    agent = MerchantAgent("newbie", sk, pk, eng.bls, eng.timing, eng.operator.pk)
    ticket, tau = eng.operator.issue_registration_ticket(pk, agent.pop(), 100)
    assert eng.contract.register_merchant(ticket, tau, pk, 100, agent.registration_auth(ticket, tau)) == 1
    req = agent.assemble_withdrawal(exit=True)
    assert attempt(eng.contract.process_withdrawal, req, 101) == (0, Reason.NEWLY_REGISTERED)
