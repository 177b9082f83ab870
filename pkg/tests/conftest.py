from __future__ import annotations

import numpy as np
import pytest

from ductscatter.geometry import round_corners, s_bend, step_duct
from ductscatter.profile import build_profile, profile_from_coefficients
from ductscatter.stripmap import solve_strip_map

ACCEPTANCE_LOG: list[tuple[str, bool, str]] = []


def bump(u, w=2.0):
    """Smooth compactly supported bump, 1 at u = 0 and 0 for |u| >= w."""
    x = np.asarray(u, dtype=float) / w
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - x[m] ** 2))
    return out


@pytest.fixture(scope="session")
def smooth_profile():
    """mu(u, v) = 1 + 0.2 b(u) cos(pi v) + 0.1 b(u)^2 cos(2 pi v) on a unit strip."""
    ug = np.linspace(-2.5, 2.5, 1001)
    return profile_from_coefficients(lambda u: [1.0, 0.2 * bump(u), 0.1 * bump(u) ** 2], ug, L=16)


@pytest.fixture(scope="session")
def step_map():
    return solve_strip_map(round_corners(step_duct(1.0, 0.6), 0.05))


@pytest.fixture(scope="session")
def step_profile(step_map):
    return build_profile(step_map, L=32)


@pytest.fixture(scope="session")
def bend_map():
    return solve_strip_map(round_corners(s_bend(1.0, 1.0, 1.0), 0.05))


@pytest.fixture(scope="session")
def bend_profile(bend_map):
    return build_profile(bend_map, L=16)


@pytest.fixture
def record_criterion():
    def record(name, passed, detail):
        ACCEPTANCE_LOG.append((name, bool(passed), detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(ACCEPTANCE_LOG):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
