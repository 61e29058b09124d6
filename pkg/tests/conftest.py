import pytest

from payplace.bls_crypto import real_curve, transparent


@pytest.fixture(params=["transparent", "bls12-381"])
def bls(request):
    return transparent() if request.param == "transparent" else real_curve()


@pytest.fixture
def fast():
    return transparent()


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
