import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance():
    """Record one criterion outcome for the end-of-run acceptance summary."""

    def record(label: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((label, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}")
