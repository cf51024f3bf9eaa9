import sys

import numpy as np
import pytest
from hypothesis import settings

from chemoblow import Params, build_grid

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def g3():
    return build_grid(1.0, 3, 64)


@pytest.fixture
def params():
    return Params(chi=2.0, xi=1.0)


def smooth_positive(g, seed=0, level=1.0, amp=0.5, modes=3):
    """Positive radial field built from Neumann-compatible cosines."""
    rng = np.random.default_rng(seed)
    coef = rng.uniform(-1.0, 1.0, modes)
    shape = np.cos(np.pi * np.outer(g.r / g.R, np.arange(1, modes + 1))) @ coef
    return level * (1.0 + amp * shape / max(np.max(np.abs(shape)), 1e-300))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.summary_line(k))
