import pytest

from kahlerlab.manifold import make_fubini_study, model_from_config


@pytest.fixture(scope="session")
def fs1():
    return make_fubini_study(1)


@pytest.fixture(scope="session")
def fs2():
    return make_fubini_study(2)


@pytest.fixture(scope="session")
def pert1():
    return model_from_config({"manifold": "fs1", "epsilon": 0.1})


@pytest.fixture(scope="session")
def pert2():
    return model_from_config({"manifold": "fs2", "epsilon": 0.05})


@pytest.fixture(scope="session")
def prod11():
    return model_from_config({"manifold": "fs1xfs1"})


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
