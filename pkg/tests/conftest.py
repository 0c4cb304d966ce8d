from __future__ import annotations

import math

import pytest

from radweb.geometry import ModelParams


@pytest.fixture
def params() -> ModelParams:
    return ModelParams(theta=math.pi / 4, n=1e4, alpha=0.5, a_exp=0.3, b_exp=0.45)


def three_se(p: float, trials: int) -> float:
    """Three binomial standard errors at frequency ``p``."""
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)
