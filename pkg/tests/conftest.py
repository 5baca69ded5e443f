from __future__ import annotations

import numpy as np
import pytest

from wigharm.states import DensityState

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(name: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_density_state(seed: int, dim: int, k: int = 2,
                         support: int | None = None) -> DensityState:
    rng = np.random.default_rng(seed)
    support = support or dim
    w = rng.random(k)
    w /= w.sum()
    vecs = np.zeros((k, dim), dtype=complex)
    raw = rng.normal(size=(k, support)) + 1j * rng.normal(size=(k, support))
    vecs[:, :support] = raw / np.linalg.norm(raw, axis=1)[:, None]
    return DensityState.from_members(w, vecs)


@pytest.fixture
def rng():
    return np.random.default_rng(20080521)
