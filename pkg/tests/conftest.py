import pytest

from cutbal.catalog import CATALOG
from cutbal.dynamics import integrate


@pytest.fixture(scope="session")
def catalog_runs():
    """Continuous catalogue scenarios integrated once per session: name -> (entry, scenario, trajectory)."""
    out = {}
    for name, entry in CATALOG.items():
        sc = entry.scenario()
        if sc.mode == "continuous":
            out[name] = (entry, sc, integrate(sc))
    return out


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the lines are repeated in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
