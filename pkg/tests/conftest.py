import os

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def full_budget() -> bool:
    """Acceptance budget switch: TCOPULA_BUDGET=full enables the slow paths."""
    return os.environ.get("TCOPULA_BUDGET", "desk").lower() == "full"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
