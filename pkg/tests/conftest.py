import pytest

# filled by tests/test_acceptance.py; printed at the end of the session
ACCEPTANCE_LINES = {}


def record(criterion, passed, text, soft=False):
    status = "PASS" if passed else ("SOFT-FAIL" if soft else "FAIL")
    line = f"[{status}] criterion {criterion}: {text}"
    ACCEPTANCE_LINES[criterion] = line
    print(line)
    return line


@pytest.fixture
def report():
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (len(str(k)), str(k))):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
