import numpy as np
import pytest

from lrdlab.gauss_lrd import InnovationStream, generate_path, make_model
from lrdlab.processes import SubordinatedSeries, subordinate


class ConstantInnovations:
    """Innovation double returning the same value at every index."""

    def __init__(self, value=1.0):
        self.value = float(value)

    def values(self, start, stop):
        return np.full(stop - start, self.value)

    def ref(self):
        return {"seed": None, "stream_id": None, "constant": self.value}


@pytest.fixture
def constant_innovations():
    return ConstantInnovations


def ones_series(n=10, c=1.0):
    return SubordinatedSeries(np.full(n, c), c, None, f"constant:c={c}")


@pytest.fixture
def ones():
    return ones_series


@pytest.fixture
def qexp_series():
    """Positive series of length 100 from the exponential-quantile map."""
    model = make_model(0.4, 256)
    path = generate_path(model, 100, InnovationStream(7))
    return subordinate(path, "quantile-exponential")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
