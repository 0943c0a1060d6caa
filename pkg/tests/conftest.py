"""Shared fixtures and hypothesis strategies."""
from __future__ import annotations

import random
import sys
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings, strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from mechlab.distributions import PrivateInfoDist  # noqa: E402
from mechlab.generate import random_spec  # noqa: E402
from mechlab.valuation import KINDS, ValuationSpec  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

F = Fraction


def uniform12(n: int = 2, kind: str = "additive", **kw) -> ValuationSpec:
    d = PrivateInfoDist.uniform([1, 2])
    return ValuationSpec(n, kind, tuple(d for _ in range(n)), **kw)


@st.composite
def specs(draw, n_max: int = 3, support: int = 2, kinds=KINDS, vmax: int = 6):
    seed = draw(st.integers(0, 10 ** 6))
    n = draw(st.integers(1, n_max))
    kind = draw(st.sampled_from(kinds))
    return random_spec(random.Random(seed), n, kind, support, vmax)


@pytest.fixture
def add12():
    return uniform12()


@pytest.fixture
def unit12():
    return uniform12(kind="kdemand", k=1)
