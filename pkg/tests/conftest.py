from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pmclogit.policy_text import (
    IndicatorScheme,
    KeywordRule,
    PrimaryIndicator,
    SecondaryIndicator,
)

settings.register_profile(
    "ci",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


def make_scheme(secondary_counts, rule_kind="any_of", name="test") -> IndicatorScheme:
    """Scheme with the given per-primary secondary counts and globally unique terms."""
    primaries = []
    idx = 0
    for i, n_i in enumerate(secondary_counts, start=1):
        secs = []
        for j in range(1, n_i + 1):
            terms = (f"kw{idx:03d}", f"键{idx:03d}")
            secs.append(
                SecondaryIndicator(
                    code=f"P{i}:{j}",
                    label=f"indicator {idx}",
                    rule=KeywordRule(kind=rule_kind, terms=terms),
                )
            )
            idx += 1
        primaries.append(PrimaryIndicator(code=f"P{i}", label=f"dimension {i}", secondaries=tuple(secs)))
    return IndicatorScheme(name=name, primaries=tuple(primaries))


def random_secondary_counts(rng: np.random.Generator) -> list[int]:
    """Ten primaries with 1..8 secondaries each."""
    return [int(rng.integers(1, 9)) for _ in range(10)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def toy_ologit_data():
    """Small 3-category dataset drawn from a known ordered-logit model."""
    gen = np.random.default_rng(2024)
    n = 400
    X = gen.standard_normal((n, 3))
    beta = np.array([0.8, -0.5, 0.25])
    cut = np.array([-0.9, 0.8])
    eta = X @ beta
    u = gen.random(n)
    c1 = 1 / (1 + np.exp(-(cut[0] - eta)))
    c2 = 1 / (1 + np.exp(-(cut[1] - eta)))
    y = 1 + (u > c1).astype(int) + (u > c2).astype(int)
    return {"y": y, "x1": X[:, 0], "x2": X[:, 1], "x3": X[:, 2]}
