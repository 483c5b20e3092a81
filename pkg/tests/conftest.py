import pytest

# criterion id -> "PASS ..." / "FAIL ..." line, filled by test_acceptance
CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(num: int, name: str, passed: bool, detail: str):
        line = f"{'PASS' if passed else 'FAIL'} criterion {num:2d} {name}: {detail}"
        CRITERIA[num] = line
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[num])
