import numpy as np
import pytest

from qubosdp.instances import AspInstance

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    n, title = mark.args
    _criteria[n] = ("PASS" if rep.passed else "FAIL", title)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, title = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}: {title}")


def random_affinity(rng: np.random.Generator, n: int, density: float = 0.7) -> np.ndarray:
    s = np.triu(rng.uniform(0, 1, (n, n)) * (rng.uniform(0, 1, (n, n)) < density), 1)
    s = np.round(s, 3)
    return s + s.T


def tiny_asp(rng: np.random.Generator) -> AspInstance:
    """ASP whose compiled QUBO has at most 12 bits."""
    shape = rng.integers(3)
    if shape == 0:
        return AspInstance(random_affinity(rng, 3), (2, 2))
    if shape == 1:
        return AspInstance(random_affinity(rng, 4), (2, 2))
    return AspInstance(random_affinity(rng, 3), (1, 2))


def random_symmetric(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    a = rng.normal(0, scale, (n, n))
    return (a + a.T) / 2.0


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
