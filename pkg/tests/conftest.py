import pytest

from robust_vpo import pipeline
from robust_vpo.problem_file import bundled, parse_problem

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def report(number: int, ok: bool, detail: str) -> None:
    """Record the outcome of an acceptance criterion (printed in the summary)."""
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def example1():
    return parse_problem(bundled("example1"))


@pytest.fixture(scope="session")
def example2():
    return parse_problem(bundled("example2"))


@pytest.fixture(scope="session")
def sweep1(example1):
    import time
    t0 = time.perf_counter()
    res = pipeline.sweep(example1)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def sweep2(example2):
    return pipeline.sweep(example2)
