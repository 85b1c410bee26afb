import time

import numpy as np
import pytest

from temperedpareto.simulation import run_study, scenario

STUDY_GRID = (50, 100, 200, 300, 400, 499)

_ACCEPTANCE = []


@pytest.fixture(scope="session")
def studies():
    """The two desk-scale 100-replication studies (a few minutes in total)."""
    out = {}
    t0 = time.perf_counter()
    for name in ("pareto-weibull", "burr-weibull"):
        cfg = scenario(name, n=500, n_reps=100, seed=2024, k_grid=STUDY_GRID)
        out[name] = run_study(cfg, jobs=1)
    out["runtime_s"] = time.perf_counter() - t0
    return out


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
