from __future__ import annotations

import os
from dataclasses import replace
from fractions import Fraction
from typing import Any, Callable

import pytest

from torsim.core.geometry.topology import TorusShape
from torsim.core.sim.models import SimConfig

SLOW_ENV = "TORSIM_SLOW"


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: long simulations, run with TORSIM_SLOW=1")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if os.environ.get(SLOW_ENV) == "1":
        return
    skip_slow = pytest.mark.skip(reason=f"set {SLOW_ENV}=1 to run long simulations")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def small_config() -> Callable[..., SimConfig]:
    """A 4x4x4 torus with short messages and a few microseconds of measurement."""
    base = SimConfig(
        shape=TorusShape((4, 4, 4)),
        gamma=Fraction(1, 10),
        capacity=4,
        message_size=2,
        warmup_ns=1_000,
        measure_ns=8_000,
    )

    def _make(**overrides: Any) -> SimConfig:
        if "gamma" in overrides:
            overrides["gamma"] = Fraction(str(overrides["gamma"]))
        return replace(base, **overrides)

    return _make


@pytest.fixture(autouse=True)
def _no_config_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("TORSIM_CONFIG", raising=False)
