import numpy as np
import pytest

from cddscert.sysfile import bundled_path, load_system


@pytest.fixture(scope="session")
def example1():
    return load_system(bundled_path("example1"))


@pytest.fixture(scope="session")
def example2():
    return load_system(bundled_path("example2"))


@pytest.fixture(scope="session")
def neutral():
    return load_system(bundled_path("neutral3"))


@pytest.fixture(scope="session")
def distributed():
    return load_system(bundled_path("neutral3_dist"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion; printed inline and in the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        with capman.global_and_fixture_disabled():
            print("\n" + line, flush=True)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
