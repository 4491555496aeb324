"""Span windowing and frame rasterization.

Converts VAD spans into pseudo-RTTM, produces the two windowing schemes used
by the embedding stages (1.0 s / 0.5 s sliding windows for clustering, 3.0 s
chunks for identification), and rasterizes spans onto fixed 10 ms frame
timelines for metric computation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .formats import RttmRecord, TimeSpan

__all__ = [
    "FrameTimeline",
    "spans_to_pseudo_rttm",
    "sliding_windows",
    "chunk_spans",
    "rasterize",
    "merge_overlapping_spans",
]

# Slack for boundary comparisons; keeps k*hop grid arithmetic from dropping
# or duplicating windows at representable-but-inexact span edges.
_EPS = 1e-9


@dataclass(frozen=True)
class FrameTimeline:
    """Fixed-rate frame labeling of one recording.

    ``labels[f]`` is an index into ``label_names``; index 0 is reserved for
    "no label" (non-speech).  Frame ``f`` covers ``[f*frame_len, (f+1)*frame_len)``.
    """

    frame_len: float
    labels: np.ndarray
    label_names: tuple

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels, dtype=np.int32)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @property
    def n_frames(self) -> int:
        return int(self.labels.shape[0])

    @property
    def mask(self) -> np.ndarray:
        """Boolean speech/non-speech view of the timeline."""
        return self.labels > 0

    def name_of(self, frame: int):
        return self.label_names[self.labels[frame]]


def spans_to_pseudo_rttm(spans: Sequence[TimeSpan], file_id: str) -> list[RttmRecord]:
    """One pseudo-RTTM record per VAD span, with placeholder speaker "speech".

    Overlapping spans are emitted unmerged; merging is an explicit separate
    pass (see merge_overlapping_spans).  Spans must be valid and sorted.
    """
    for i, span in enumerate(spans):
        if not span.valid:
            raise ValueError(f"span {i} is invalid: [{span.start}, {span.end}]")
        if i and span.start < spans[i - 1].start:
            raise ValueError(f"spans are not sorted by start at index {i}")
    return [RttmRecord(file_id, s.start, s.end - s.start, "speech") for s in spans]


def sliding_windows(span: TimeSpan, win: float = 1.0, hop: float = 0.5) -> list[TimeSpan]:
    """Cover a span with fixed-length windows on a hop grid.

    Windows start at ``span.start + k*hop`` while they fit inside the span.
    If an uncovered tail remains, one final end-anchored window
    ``[span.end - min(win, duration), span.end]`` is appended so the union of
    windows equals the span exactly.
    """
    if win <= 0 or hop <= 0:
        raise ValueError(f"win and hop must be positive, got win={win} hop={hop}")
    if hop > win:
        raise ValueError(f"hop must not exceed win, got win={win} hop={hop}")
    if not span.valid:
        raise ValueError(f"invalid span [{span.start}, {span.end}]")

    windows = []
    k = 0
    while span.start + k * hop + win <= span.end + _EPS:
        start = span.start + k * hop
        windows.append(TimeSpan(start, min(start + win, span.end)))
        k += 1
    covered = windows[-1].end if windows else span.start
    if span.end - covered > _EPS:
        start = span.end - min(win, span.end - span.start)
        windows.append(TimeSpan(max(start, span.start), span.end))
    return windows


def chunk_spans(
    spans: Iterable[TimeSpan], chunk: float = 3.0, min_tail: float = 0.5
) -> list[TimeSpan]:
    """Cut spans into consecutive chunk-length pieces.

    The final partial piece of each span is kept iff its duration is at least
    ``min_tail`` (sub-0.5 s leftovers make poor embedding inputs).
    """
    if chunk <= 0:
        raise ValueError(f"chunk must be positive, got {chunk}")
    pieces = []
    for i, span in enumerate(spans):
        if not span.valid:
            raise ValueError(f"span {i} is invalid: [{span.start}, {span.end}]")
        j = 0
        while span.start + (j + 1) * chunk <= span.end + _EPS:
            start = span.start + j * chunk
            pieces.append(TimeSpan(start, min(start + chunk, span.end)))
            j += 1
        tail_start = span.start + j * chunk
        tail = span.end - tail_start
        if tail > _EPS and tail >= min_tail - _EPS:
            pieces.append(TimeSpan(tail_start, span.end))
    return pieces


def rasterize(
    spans: Sequence[tuple[TimeSpan, str]], frame_len: float, total: float
) -> FrameTimeline:
    """Rasterize labeled spans onto a frame timeline.

    A frame gets a span's label iff its midpoint lies inside the half-open
    span ``[start, end)``; later spans in list order win label conflicts.
    """
    if frame_len <= 0:
        raise ValueError(f"frame_len must be positive, got {frame_len}")
    max_end = max((s.end for s, _ in spans), default=0.0)
    if total + _EPS < max_end:
        raise ValueError(f"total={total} is shorter than the last span end {max_end}")

    n_frames = int(np.ceil(total / frame_len - _EPS)) if total > 0 else 0
    mids = (np.arange(n_frames) + 0.5) * frame_len
    labels = np.zeros(n_frames, dtype=np.int32)
    names: list = [None]
    index: dict = {}
    for span, name in spans:
        if not span.valid:
            raise ValueError(f"invalid span [{span.start}, {span.end}]")
        if name not in index:
            names.append(name)
            index[name] = len(names) - 1
        lo = int(np.searchsorted(mids, span.start, side="left"))
        hi = int(np.searchsorted(mids, span.end, side="left"))
        labels[lo:hi] = index[name]
    return FrameTimeline(frame_len=frame_len, labels=labels, label_names=tuple(names))


def merge_overlapping_spans(spans: Iterable[TimeSpan]) -> list[TimeSpan]:
    """Merge overlapping or touching valid spans into maximal disjoint spans."""
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    merged: list[TimeSpan] = []
    for span in ordered:
        if not span.valid:
            raise ValueError(f"invalid span [{span.start}, {span.end}]")
        if merged and span.start <= merged[-1].end + _EPS:
            if span.end > merged[-1].end:
                merged[-1] = TimeSpan(merged[-1].start, span.end)
        else:
            merged.append(span)
    return merged
