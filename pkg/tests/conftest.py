import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from mixedq.moments import validate

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

_ACCEPTANCE_KEY = pytest.StashKey[list]()


@st.composite
def structure_matrices(draw, n_min=1, n_max=3, q_max=0.95):
    n = draw(st.integers(n_min, n_max))
    vals = draw(st.lists(st.floats(-q_max, q_max, allow_nan=False), min_size=n * n, max_size=n * n))
    a = np.array(vals).reshape(n, n)
    return validate(np.triu(a) + np.triu(a, 1).T)


def random_Q(rng: np.random.Generator, N: int, q_max: float = 0.95):
    a = rng.uniform(-q_max, q_max, (N, N))
    return validate(np.triu(a) + np.triu(a, 1).T)


@pytest.fixture(scope="session")
def acceptance_log(request):
    log = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])
    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
