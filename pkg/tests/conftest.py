import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

_acceptance_lines = []


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs (deselect with -m 'not slow')")


@pytest.fixture
def acceptance_report():
    """Collects one verdict line per acceptance check for the terminal summary."""
    return _acceptance_lines.append


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda l: int(l.split("]")[1].split()[0])):
            terminalreporter.write_line(line)
