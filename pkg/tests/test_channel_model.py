import pytest

from payplace.bls_crypto import transparent
from payplace.channel_model import (ChannelTable, ConsumerAccount, InsufficientFunds, OffChainPayment,
                                    SignedPayment, checked_add, consumer_pay, get_source_transaction,
                                    valid_source)
from payplace.encoding import U64_MAX
from payplace.reasons import Reason, Rejected

BLS = transparent()
OP_SK, OP = BLS.keygen("op")
C_SK, C = BLS.keygen("c")


def funded(amount=100):
    acct = ConsumerAccount(C, deposited=amount)
    return acct


def test_pay_is_cumulative():
    acct = funded()
    sp = consumer_pay(acct, 30, C_SK, OP, BLS)
    acct.promised = sp.amount
    sp2 = consumer_pay(acct, 20, C_SK, OP, BLS)
    assert (sp.amount, sp2.amount) == (30, 50)
    assert valid_source(sp2, C, 100, BLS, OP)


def test_pay_respects_deposit():
    with pytest.raises(InsufficientFunds):
        consumer_pay(funded(10), 11, C_SK, OP, BLS)
    with pytest.raises(ValueError):
        consumer_pay(funded(), -1, C_SK, OP, BLS)


def test_overflow_guard():
    with pytest.raises(OverflowError):
        checked_add(U64_MAX, 1)
    with pytest.raises(ValueError):
        OffChainPayment(U64_MAX + 1, OP, C)


def test_valid_source_checks():
    sp = consumer_pay(funded(), 40, C_SK, OP, BLS)
    assert not valid_source(sp, C, 39, BLS, OP)
    _, other = BLS.keygen("other")
    assert not valid_source(sp, other, 100, BLS, OP)
    assert not valid_source(sp, C, 100, BLS, other)
    forged = SignedPayment(OffChainPayment(90, OP, C), sp.signature)
    assert not valid_source(forged, C, 100, BLS, OP)


def test_get_source_transaction():
    sp = consumer_pay(funded(), 40, C_SK, OP, BLS)
    assert get_source_transaction(C, [sp], 100, BLS, OP) == sp
    assert get_source_transaction(C, {C: sp}, 100, BLS, OP) == sp
    assert get_source_transaction(C, [], 100, BLS, OP) is None


def test_channel_table_monotone():
    table = ChannelTable(OP, BLS)
    acct = funded()
    sp50 = consumer_pay(acct, 50, C_SK, OP, BLS)
    sp20 = consumer_pay(acct, 20, C_SK, OP, BLS)
    table.accept(sp50, 100)
    with pytest.raises(Rejected) as exc:
        table.accept(sp20, 100)
    assert exc.value.reason is Reason.NON_MONOTONE
    with pytest.raises(Rejected) as exc:
        table.accept(consumer_pay(funded(200), 150, C_SK, OP, BLS), 100)
    assert exc.value.reason is Reason.INSUFFICIENT_DEPOSIT
    assert table.promised(C) == 50
