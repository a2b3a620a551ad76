from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from gpd_elcr.models import GpdParams, ModelSpec, gpd_quantile

DATA_DIR = Path(__file__).parent / "data"
FIXTURE = DATA_DIR / "frechet1_n1000.txt"


def philox(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def gpd_excesses(rng: np.random.Generator, k: int, gamma: float = 1.0, sigma: float = 1.0) -> np.ndarray:
    return gpd_quantile(rng.random(k), GpdParams(gamma, sigma))


@pytest.fixture
def rng():
    return philox(12345)


@pytest.fixture(scope="session")
def burr11():
    return ModelSpec("burr", (1.0, 1.0))


@pytest.fixture(scope="session")
def fixture_path():
    return str(FIXTURE)


ACCEPTANCE_RESULTS: list = []


def record_criterion(number: int, ok: bool, detail: str) -> None:
    line = f"acceptance criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_RESULTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
