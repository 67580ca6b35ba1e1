from __future__ import annotations

import pytest

import shiftlab as sl

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        _ACCEPTANCE_RESULTS[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_line("")
    terminalreporter.write_line("acceptance criteria:")
    for nodeid in sorted(_ACCEPTANCE_RESULTS):
        outcome = _ACCEPTANCE_RESULTS[nodeid]
        label = nodeid.split("::", 1)[1]
        status = "PASS" if outcome == "passed" else outcome.upper()
        terminalreporter.write_line(f"  {label}: {status}")


@pytest.fixture(scope="session")
def golden():
    return sl.sft_from_forbidden(sl.SftSpec.from_strings("01", ["11"]))


@pytest.fixture(scope="session")
def forbid111():
    return sl.sft_from_forbidden(sl.SftSpec.from_strings("01", ["111"]))


@pytest.fixture(scope="session")
def full2():
    return sl.full_shift(2)


@pytest.fixture(scope="session")
def cycle5():
    return sl.cycle_sft(5)


@pytest.fixture(scope="session")
def sgap12():
    return sl.s_gap_shift(sl.SGapSpec((1, 2)))


@pytest.fixture(scope="session")
def cocyclic_runs():
    # commuting projections: the cocyclic rule reproduces the SFT forbidding
    # {12, 21} (pure runs of a single symbol)
    return sl.cocyclic_shift(sl.CocyclicSpec.from_lists(
        [[[1, 0], [0, 0]], [[0, 0], [0, 1]]]
    ))


@pytest.fixture(scope="session")
def cocyclic_swap():
    # projections plus a swap: a sofic but non-SFT cocyclic shift; extendable
    # because the two projections sum to the identity
    return sl.cocyclic_shift(sl.CocyclicSpec.from_lists(
        [[[1, 0], [0, 0]], [[0, 0], [0, 1]], [[0, 1], [1, 0]]]
    ))
