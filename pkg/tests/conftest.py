import pytest

ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    return request.config.stash.setdefault(ACCEPTANCE, {})


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines, key=lambda k: int(k)):
        terminalreporter.write_line(lines[key])
