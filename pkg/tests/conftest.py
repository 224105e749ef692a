from __future__ import annotations

import numpy as np
import pytest

from narrate.dataset import CHANNELS, SensorStream
from narrate.synth import CorpusConfig, generate_corpus


@pytest.fixture(scope="session")
def small_corpus():
    cfg = CorpusConfig(n_subjects=4, n_positions=3, n_primitives=8, segments_per_subject=20, seed=7)
    d, gt = generate_corpus(cfg)
    return cfg, d, gt


def make_stream(T=120, position="wrist_r", fs=30.0, missing_rows=(), seed=0) -> SensorStream:
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(T, len(CHANNELS)))
    mask = np.zeros_like(x, dtype=bool)
    for r in missing_rows:
        mask[r] = True
    x[mask] = np.nan
    return SensorStream(position, fs, np.arange(T) / fs, x, mask)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
