import pytest

from nonlocal_kpp import env, kernel as kn, speed as sp

_criteria: list[tuple[str, bool, str]] = []


@pytest.fixture
def record_criterion():
    """Store one acceptance line; printed together at the end of the session."""

    def _record(label: str, passed: bool, detail: str = ""):
        line = f"{label}: {'PASS' if passed else 'FAIL'} {detail}".rstrip()
        print(line)
        _criteria.append((label, passed, detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_criteria, key=lambda c: int(c[0].split()[-1])):
        terminalreporter.write_line(f"{label}: {'PASS' if passed else 'FAIL'} {detail}".rstrip())


@pytest.fixture(scope="session")
def gauss():
    return kn.gaussian(1.0)


@pytest.fixture(scope="session")
def ref_curve(gauss):
    return sp.minimize_speed(gauss, 2.0)


@pytest.fixture(scope="session")
def mu2():
    return env.constant(2.0)
