import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from persmon.model import MissionConfig, SamplePoint, SwitchingSchedule, uniform_config  # noqa: E402


@pytest.fixture(scope="session")
def ex1():
    return uniform_config(L=20, r=4, B=3, T=36, M=21, A=0.01, R0=2)


@pytest.fixture(scope="session")
def ex2():
    return uniform_config(L=100, r=4, B=3, T=980, M=101, A=0.01, R0=2)


def random_case(seed: int, max_N: int = 4):
    """A small random mission and a feasible schedule."""
    rng = np.random.default_rng(seed)
    L = float(rng.uniform(5, 20))
    r = float(rng.uniform(1, 5))
    B = float(rng.uniform(1, 4))
    M = int(rng.integers(2, 8))
    alphas = np.sort(rng.uniform(0, L, M))
    A = rng.uniform(0.01, 0.5 * B, M)
    R0 = rng.uniform(0, 3, M)
    T = float(rng.uniform(0.5, 3) * L)
    cfg = MissionConfig(L=L, r=r, B=B, T=T, points=tuple(
        SamplePoint(float(a), float(x), float(q)) for a, x, q in zip(alphas, A, R0)))
    N = int(rng.integers(1, max_N + 1))
    theta = [float(rng.uniform(0.3, 0.95) * L)]
    for j in range(1, N):
        prev = theta[-1]
        if j % 2:
            theta.append(float(rng.uniform(0.05 * L, prev - 0.02 * L)))
        else:
            theta.append(float(rng.uniform(prev + 0.02 * L, 0.95 * L)))
    return cfg, SwitchingSchedule(tuple(theta))


seeds = st.integers(min_value=0, max_value=2**32 - 1)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
