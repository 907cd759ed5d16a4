from __future__ import annotations

import pytest

from agentgate.benchgen import DOMAINS, GenSpec, generate_benchmark


@pytest.fixture(scope="session")
def bench_instances():
    return generate_benchmark(GenSpec(seed=42))


@pytest.fixture(scope="session")
def domain_cards():
    return tuple(spec.card for spec in DOMAINS)
