import pytest

from artifact.arithmetic import build_tau_table

# criterion number -> list of (part, ok, detail), filled by test_acceptance
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def table():
    return build_tau_table(200000)


@pytest.fixture(scope="session")
def small_table():
    return build_tau_table(5000)


@pytest.fixture
def acceptance_log():
    def log(n, part, ok, detail):
        ACCEPTANCE.setdefault(n, []).append((part, ok, detail))
        print(f"{'PASS' if ok else 'FAIL'} criterion {n} [{part}] {detail}")
    return log


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        parts = ACCEPTANCE[n]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{p[0]}: {'ok' if p[1] else 'FAILED'} {p[2]}" for p in parts)
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
