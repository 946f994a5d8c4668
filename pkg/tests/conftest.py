"""Test configuration and fixtures for the radio labeling toolkit."""

import json
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

from radio_labeling.config import SimulationSettings
from radio_labeling.graph_core import (
    Graph,
    complete_graph,
    cycle_graph,
    path_graph,
    star_graph,
)
from radio_labeling.run_state import RunState
from radio_labeling.scenario import Scenario

ENV_KEYS = (
    "HORIZON",
    "POLICY",
    "PRIME_BOUND",
    "BRUTE_FORCE_LIMIT",
    "FAST_FORWARD",
    "LOG_LEVEL",
    "MAX_CONCURRENCY",
)


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    """Keep the developer's environment out of the configuration tests."""
    for key in ENV_KEYS:
        monkeypatch.delenv(f"RADIO_LABELING_{key}", raising=False)


@pytest.fixture
def settings() -> SimulationSettings:
    return SimulationSettings(horizon=200_000, max_concurrency=2)


@pytest.fixture
def path3() -> Graph:
    return path_graph(3)


@pytest.fixture
def path5() -> Graph:
    return path_graph(5)


@pytest.fixture
def star3() -> Graph:
    return star_graph(3)


@pytest.fixture
def k4() -> Graph:
    return complete_graph(4)


@pytest.fixture
def cycle4() -> Graph:
    return cycle_graph(4)


@pytest.fixture
def asymmetric_tree() -> Graph:
    """Smallest tree without non-trivial automorphisms: branches 1, 2, 3."""
    return Graph.from_edges(7, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 6)])


@pytest.fixture
def run_state() -> RunState:
    return RunState()


@pytest.fixture
def make_scenario() -> Callable[..., Scenario]:
    """Scenario factory with small defaults."""

    def factory(**overrides: Any) -> Scenario:
        data: Dict[str, Any] = {
            "name": "test",
            "graph": {"kind": "path", "size": 4},
            "algorithm": "kb",
            "horizon": 100_000,
        }
        data.update(overrides)
        return Scenario.model_validate(data)

    return factory


@pytest.fixture
def scenario_file(tmp_path: Path) -> Callable[..., Path]:
    """Write a scenario dictionary to a JSON file."""

    def write(data: Dict[str, Any], name: str = "scenario.json") -> Path:
        target = tmp_path / name
        target.write_text(json.dumps(data))
        return target

    return write


def sieve_primes(limit: int) -> np.ndarray:
    """All primes up to ``limit``, by the sieve of Eratosthenes."""
    is_prime = np.ones(limit + 1, dtype=bool)
    is_prime[:2] = False
    for p in range(2, int(limit**0.5) + 1):
        if is_prime[p]:
            is_prime[p * p :: p] = False
    return np.flatnonzero(is_prime)


@pytest.fixture(scope="session")
def prime_table() -> np.ndarray:
    """``prime_table[i - 1]`` is the ``i``-th prime, for ``i`` up to 10 000."""
    return sieve_primes(105_000)[:10_000]
