import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scrisk.datasets import SynthSpec, generate_synthetic  # noqa: E402
from scrisk.network import ScNetwork  # noqa: E402
from scrisk.production import Essentiality, EssentialityMatrix  # noqa: E402

E, N, I = Essentiality.ESSENTIAL, Essentiality.NON_ESSENTIAL, Essentiality.IRRELEVANT


def net_from(sectors, links, weighted=True):
    """Network over firms named A, B, C, ... with money-unit weights."""
    labels = [chr(ord("A") + k) for k in range(len(sectors))]
    return ScNetwork.from_links(labels, sectors, links, weighted=weighted)


def all_essential():
    return EssentialityMatrix(default=E)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synth200():
    return generate_synthetic(SynthSpec(n_firms=200, seed=1))


@pytest.fixture(scope="session")
def synth40():
    return generate_synthetic(SynthSpec(n_firms=40, n_sectors=5, seed=3))


_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record an acceptance verdict; the summary prints one line per criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        ok, detail = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
