import time

import pytest
from hypothesis import HealthCheck, settings

from markovcap import channels
from markovcap.optimizer import Algo1Config, Algo3Config, run_algorithm1, run_algorithm3

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# lines collected by test_acceptance, echoed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)


def _timed(fn, *args):
    start = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - start


@pytest.fixture(scope="session")
def bec_seq():
    return channels.bec_objective()


@pytest.fixture(scope="session")
def noiseless_seq():
    return channels.noiseless_objective()


@pytest.fixture(scope="session")
def ge_seq():
    return channels.ge_objective()


@pytest.fixture(scope="session")
def bec_run(bec_seq):
    return _timed(run_algorithm1, bec_seq, Algo1Config(alpha=0.4, beta=0.9, theta0=0.5, outer_iters=110))


@pytest.fixture(scope="session")
def noiseless_run(noiseless_seq):
    return _timed(run_algorithm1, noiseless_seq, Algo1Config(alpha=0.4, beta=0.9, theta0=0.5, outer_iters=450))


@pytest.fixture(scope="session")
def ge_run(ge_seq):
    return _timed(run_algorithm3, ge_seq, Algo3Config(alpha=0.4, beta=0.5, b=0.5, theta0=0.2, outer_iters=10))
