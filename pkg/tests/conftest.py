import numpy as np
import pytest
from hypothesis import settings

from pssmp import levy_model as lm
from pssmp.pathkit import PathSkeleton

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def models():
    return lm.catalogue()


def skeleton(values, dt=1.0):
    values = np.asarray(values, dtype=float)
    return PathSkeleton(np.arange(len(values)) * dt, values)


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.LINES:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.LINES:
            terminalreporter.write_line(line)
