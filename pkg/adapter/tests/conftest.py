"""Adapter test fixtures: synthetic WAV builders."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from diarkit_adapter.audio import write_wav


def tone_burst_wav(path: Path, rate: int = 16_000, bursts=((0.2, 1.0), (1.6, 2.4)),
                   total: float = 3.0, freq: float = 440.0) -> Path:
    """Silence with sine bursts at the given (start, end) second intervals."""
    t = np.arange(int(total * rate)) / rate
    samples = np.zeros_like(t)
    for start, end in bursts:
        inside = (t >= start) & (t < end)
        samples[inside] = 0.3 * np.sin(2 * np.pi * freq * t[inside])
    write_wav(path, samples, rate)
    return path


def silence_wav(path: Path, rate: int = 16_000, seconds: float = 1.0) -> Path:
    write_wav(path, np.zeros(int(rate * seconds)), rate)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(77)
