import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def independence_model():
    from oracles import exact_independence_model

    return exact_independence_model()


@pytest.fixture(scope="session")
def independence_fit():
    """Two-stage fit to a stationary independent-Laplace path (T = 10,000)."""
    from nsgeo.copulas import CopulaSpec, sample_path
    from nsgeo.model import fit_model
    from nsgeo.numerics import RngStream

    series = sample_path(CopulaSpec("gaussian_linear", 10_000, {"rho": 0.0}), RngStream(7))
    return series, fit_model(series)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
