"""Shared test helpers: randomized record generators and blob data."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from diarkit import formats
from diarkit.formats import EmbeddingSet, RttmRecord, SegmentRecord, TimeSpan


def random_rttm_records(rng: np.random.Generator, n: int) -> list[RttmRecord]:
    """Random records quantized to centiseconds, matching the writer's precision."""
    records = []
    for _ in range(n):
        records.append(
            RttmRecord(
                file_id=f"ID{rng.integers(1, 40)}",
                onset=int(rng.integers(0, 500_000)) / 100.0,
                duration=int(rng.integers(0, 30_000)) / 100.0,
                speaker=f"spk{rng.integers(0, 12)}",
                channel=int(rng.integers(1, 3)),
            )
        )
    return records


_WORDS = ("namaste", "hello", "theek", "chalo", "right", "acha", "ok,then", "bas")


def random_segment_records(rng: np.random.Generator, n: int, schema: str) -> list[SegmentRecord]:
    """Random valid records carrying the payload fields the schema serializes."""
    records = []
    for _ in range(n):
        start = int(rng.integers(0, 100_000)) / 1000.0
        span = TimeSpan(start, start + int(rng.integers(1, 10_000)) / 1000.0)
        kwargs = {}
        if schema == "LID":
            kwargs["language"] = str(rng.choice(["hi", "pa", "en", "other"]))
        if schema in ("ASR", "NMT"):
            kwargs["text"] = " ".join(rng.choice(_WORDS, size=rng.integers(1, 6)))
        if schema == "NMT":
            kwargs["translation"] = " ".join(rng.choice(_WORDS, size=rng.integers(1, 6)))
        records.append(SegmentRecord(file_id=f"ID{rng.integers(1, 30)}.wav", span=span, **kwargs))
    return records


def speaker_blobs(rng: np.random.Generator, n_per: int, dim: int, n_speakers: int = 3,
                  spread: float = 0.1, separation: float = 10.0):
    """Well-separated Gaussian blobs standing in for speaker embeddings."""
    means = []
    while len(means) < n_speakers:
        candidate = rng.normal(0, 1, dim)
        candidate *= separation / np.linalg.norm(candidate)
        if all(np.linalg.norm(candidate - m) >= separation for m in means):
            means.append(candidate)
    X = np.vstack([rng.normal(0, spread, (n_per, dim)) + m for m in means])
    y = np.repeat(np.arange(n_speakers), n_per)
    return X, y


def write_semb(path: Path, rows: np.ndarray, meta) -> None:
    es = EmbeddingSet(dim=rows.shape[1], rows=rows.astype(np.float32), meta=tuple(meta))
    path.write_bytes(formats.write_embeddings(es))


def blob_semb(path: Path, rng: np.random.Generator, file_ids=("MIX1",), n_per=20, dim=192) -> None:
    """SEMB fixture: per file, three well-separated speaker blobs on a window grid."""
    rows_all, meta = [], []
    for fid in file_ids:
        X, _ = speaker_blobs(rng, n_per, dim)
        rows_all.append(X)
        for i in range(X.shape[0]):
            meta.append(SegmentRecord(fid, TimeSpan(i * 0.5, i * 0.5 + 1.0)))
    write_semb(path, np.vstack(rows_all), meta)


def read_tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260809)
