from __future__ import annotations

import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from npg2.integrate import SolveConfig, solve  # noqa: E402

ROUND_A = -36.0
SQUASHED_A = 108.0 / 5.0
ROUND_T_STAR = 2 * math.pi
SQUASHED_T_STAR = 6 * math.pi / math.sqrt(5)
X_O = (-4.5, 6.75, 6.75, -6.75, -6.75)


@pytest.fixture(scope="session")
def round_long():
    return solve(SolveConfig(a=ROUND_A, t_max=12.0, sample_count=4000))


@pytest.fixture(scope="session")
def squashed_long():
    return solve(SolveConfig(a=SQUASHED_A, t_max=12.0, sample_count=4000))


@pytest.fixture(scope="session")
def round_short():
    return solve(SolveConfig(a=ROUND_A, t_max=1.0, sample_count=1000))


@pytest.fixture(scope="session")
def squashed_short():
    return solve(SolveConfig(a=SQUASHED_A, t_max=1.0, sample_count=1000))
