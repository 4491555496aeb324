"""Evaluation metrics: frame-level SAD scores, DER with optimal speaker
mapping, IER, the dual WER protocols, corpus/file BLEU, and relative
improvement.

All operations are deterministic pure functions.  DER follows the standard
decomposition (missed speech + false alarm + speaker confusion over the
reference speech time) with a Hungarian assignment between reference and
hypothesis speakers and an optional no-score collar around reference
boundaries.
"""

from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .formats import RttmRecord, SegmentRecord
from .segmenter import FrameTimeline, rasterize
from .textproc import tokenize

__all__ = [
    "SadReport",
    "DerBreakdown",
    "EditStats",
    "BleuReport",
    "sad_report_from_counts",
    "sad_frame_metrics",
    "optimal_mapping",
    "der",
    "ier",
    "edit_distance",
    "wer_file_level",
    "wer_segment_level",
    "combine_bleu",
    "bleu",
    "relative_improvement",
]

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# SAD frame metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SadReport:
    """Frame-level speech activity scores.

    ``fa_rate`` is FP/(TP+FP) = 1 - precision; ``fa_rate_alt`` is the
    FP/(FP+TN) normalization, reported alongside because published FA
    figures do not always say which one they use.
    """

    precision: float
    recall: float
    f1: float
    miss_rate: float
    fa_rate: float
    accuracy: float
    fa_rate_alt: float
    tp: int
    fp: int
    fn: int
    tn: int


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def sad_report_from_counts(tp: int, fp: int, fn: int, tn: int) -> SadReport:
    """Build a SadReport from frame counts."""
    if min(tp, fp, fn, tn) < 0:
        raise ValueError("frame counts must be non-negative")
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return SadReport(
        precision=precision,
        recall=recall,
        f1=f1,
        miss_rate=_ratio(fn, tp + fn),
        fa_rate=_ratio(fp, tp + fp),
        accuracy=_ratio(tp + tn, tp + fp + fn + tn),
        fa_rate_alt=_ratio(fp, fp + tn),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
    )


def sad_frame_metrics(ref: FrameTimeline, hyp: FrameTimeline) -> SadReport:
    """Frame-by-frame comparison of two speech/non-speech timelines."""
    rmask, hmask = ref.mask, hyp.mask
    if rmask.shape != hmask.shape:
        raise ValueError(f"frame counts differ: {rmask.shape[0]} vs {hmask.shape[0]}")
    tp = int(np.sum(rmask & hmask))
    fp = int(np.sum(~rmask & hmask))
    fn = int(np.sum(rmask & ~hmask))
    tn = int(np.sum(~rmask & ~hmask))
    return sad_report_from_counts(tp, fp, fn, tn)


# ---------------------------------------------------------------------------
# DER
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DerBreakdown:
    """Diarization error decomposition, all terms in seconds of speech."""

    missed: float
    false_alarm: float
    confusion: float
    total_ref: float
    der: float


def optimal_mapping(ref_labels: Sequence, hyp_labels: Sequence, overlap) -> dict:
    """One-to-one partial speaker assignment maximizing total overlap.

    ``overlap[i][j]`` is the co-occurring duration of reference speaker i and
    hypothesis speaker j; zero-overlap assignments are omitted, so unmapped
    hypothesis speakers contribute pure false alarm or confusion.
    """
    matrix = np.asarray(overlap, dtype=np.float64)
    if matrix.shape != (len(ref_labels), len(hyp_labels)):
        raise ValueError(f"overlap shape {matrix.shape} does not match label counts")
    if matrix.size == 0:
        return {}
    rows, cols = linear_sum_assignment(matrix, maximize=True)
    return {
        ref_labels[i]: hyp_labels[j]
        for i, j in zip(rows, cols)
        if matrix[i, j] > 0
    }


def _one_file_id(records: Sequence[RttmRecord], role: str) -> str | None:
    ids = {r.file_id for r in records}
    if len(ids) > 1:
        raise ValueError(f"{role} records span multiple files: {sorted(ids)}")
    return next(iter(ids)) if ids else None


def der(
    ref: Sequence[RttmRecord],
    hyp: Sequence[RttmRecord],
    frame: float = 0.01,
    collar: float = 0.0,
) -> DerBreakdown:
    """Diarization error rate of one recording at frame resolution.

    Both sides are rasterized at ``frame``; frames whose midpoints fall
    within ``collar`` of any reference segment boundary are excluded.  Missed
    speech, false alarm, and the confusion left after the optimal speaker
    mapping are all expressed relative to the reference speech time.
    """
    rid, hid = _one_file_id(ref, "reference"), _one_file_id(hyp, "hypothesis")
    if rid is not None and hid is not None and rid != hid:
        raise ValueError(f"file ids differ: reference {rid!r} vs hypothesis {hid!r}")

    total = max((r.onset + r.duration for r in (*ref, *hyp)), default=0.0)
    ref_tl = rasterize([(r.span, r.speaker) for r in ref], frame, total)
    hyp_tl = rasterize([(r.span, r.speaker) for r in hyp], frame, total)

    keep = np.ones(ref_tl.n_frames, dtype=bool)
    if collar > 0:
        mids = (np.arange(ref_tl.n_frames) + 0.5) * frame
        for r in ref:
            for boundary in (r.onset, r.onset + r.duration):
                keep &= np.abs(mids - boundary) > collar

    ref_lab = ref_tl.labels[keep]
    hyp_lab = hyp_tl.labels[keep]
    ref_speech = ref_lab > 0
    hyp_speech = hyp_lab > 0
    n_ref = int(ref_speech.sum())
    if n_ref == 0:
        raise ValueError("undefined DER: reference contains no scored speech")

    n_missed = int(np.sum(ref_speech & ~hyp_speech))
    n_fa = int(np.sum(~ref_speech & hyp_speech))
    both = ref_speech & hyp_speech

    ref_names = list(ref_tl.label_names[1:])
    hyp_names = list(hyp_tl.label_names[1:])
    counts = np.zeros((len(ref_names) + 1, len(hyp_names) + 1), dtype=np.int64)
    np.add.at(counts, (ref_lab[both], hyp_lab[both]), 1)
    overlap = counts[1:, 1:] * frame
    mapping = optimal_mapping(ref_names, hyp_names, overlap)
    n_matched = sum(
        int(counts[ref_names.index(a) + 1, hyp_names.index(b) + 1]) for a, b in mapping.items()
    )
    n_confusion = int(both.sum()) - n_matched

    missed = n_missed * frame
    false_alarm = n_fa * frame
    confusion = n_confusion * frame
    total_ref = n_ref * frame
    return DerBreakdown(
        missed=missed,
        false_alarm=false_alarm,
        confusion=confusion,
        total_ref=total_ref,
        der=(missed + false_alarm + confusion) / total_ref,
    )


def ier(fn_dur: float, fp_dur: float, total_ref: float) -> float:
    """Identification error rate: (FN + FP duration) / total reference duration."""
    if total_ref <= 0:
        raise ValueError(f"total_ref must be positive, got {total_ref}")
    if fn_dur < 0 or fp_dur < 0:
        raise ValueError("durations must be non-negative")
    return (fn_dur + fp_dur) / total_ref


# ---------------------------------------------------------------------------
# WER
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EditStats:
    """Minimal edit-operation counts between a reference and a hypothesis."""

    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def wer(self) -> float:
        if self.ref_len == 0:
            raise ValueError("WER undefined for an empty reference")
        return self.errors / self.ref_len


def edit_distance(ref: Sequence, hyp: Sequence) -> EditStats:
    """Minimal unit-cost edit statistics by dynamic programming.

    Among minimal-cost alignments, the one with the fewest insert+delete
    operations is reported (substitutions are preferred over insert+delete
    pairs).  Cells pack (cost, deletions+insertions) into one integer so the
    lexicographic tie-break rides on plain ``min``.
    """
    r, h = list(ref), list(hyp)
    n, m = len(r), len(h)
    base = n + m + 2
    prev = [j * base + j for j in range(m + 1)]
    for i in range(1, n + 1):
        cur = [i * base + i]
        ri = r[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if ri == h[j - 1] else base)
            up = prev[j] + base + 1
            left = cur[j - 1] + base + 1
            cur.append(min(diag, up, left))
        prev = cur
    packed = prev[m]
    cost, di = divmod(packed, base)
    deletions = (di + n - m) // 2
    insertions = di - deletions
    return EditStats(
        substitutions=cost - di,
        deletions=deletions,
        insertions=insertions,
        ref_len=n,
    )


def _file_order_tokens(rows: Iterable[SegmentRecord]) -> list[str]:
    """Concatenated tokens of one file's rows in temporal order.

    Valid rows sort by (start, end); rows with unusable timestamps keep
    their order of appearance and follow the valid ones (temporal order is
    undefined for corrupted timestamps).
    """
    rows = list(rows)
    timed = [r for r in rows if r.span.valid]
    untimed = [r for r in rows if not r.span.valid]
    timed.sort(key=lambda r: (r.span.start, r.span.end))
    tokens: list[str] = []
    for r in (*timed, *untimed):
        tokens.extend(tokenize(r.text or "", "wer"))
    return tokens


def wer_file_level(
    ref_rows: Iterable[SegmentRecord], hyp_rows: Iterable[SegmentRecord]
) -> tuple[dict[str, float], float]:
    """Timestamp-independent WER: concatenate each file's transcript.

    Returns per-file WERs and the micro average (pooled errors over pooled
    reference tokens).  A file missing from the hypothesis scores against an
    empty transcript, with a warning.
    """
    by_file_ref: dict[str, list[SegmentRecord]] = defaultdict(list)
    by_file_hyp: dict[str, list[SegmentRecord]] = defaultdict(list)
    for r in ref_rows:
        by_file_ref[r.file_id].append(r)
    for r in hyp_rows:
        by_file_hyp[r.file_id].append(r)
    for extra in sorted(set(by_file_hyp) - set(by_file_ref)):
        logger.warning("hypothesis file %r has no reference; counting pure insertions", extra)

    per_file: dict[str, float] = {}
    total_errors = 0
    total_ref = 0
    for fid in sorted(set(by_file_ref) | set(by_file_hyp)):
        if fid not in by_file_hyp and fid in by_file_ref:
            logger.warning("file %r missing from hypothesis; treating as empty", fid)
        stats = edit_distance(
            _file_order_tokens(by_file_ref.get(fid, ())),
            _file_order_tokens(by_file_hyp.get(fid, ())),
        )
        total_errors += stats.errors
        total_ref += stats.ref_len
        if stats.ref_len:
            per_file[fid] = stats.wer()
        else:
            per_file[fid] = 0.0 if stats.errors == 0 else math.inf
    if total_ref == 0:
        raise ValueError("reference corpus has no tokens")
    return per_file, total_errors / total_ref


def _segment_key(record: SegmentRecord) -> tuple[str, str, str]:
    return (record.file_id, repr(record.span.start), repr(record.span.end))


def wer_segment_level(
    ref_rows: Iterable[SegmentRecord], hyp_rows: Iterable[SegmentRecord]
) -> tuple[float, int, int]:
    """WER over key-matched segments with internally consistent timestamps.

    Segments match on (file, StartTS, EndTS); matched rows flagged invalid
    (EndTS < StartTS, missing timestamps) are excluded from scoring but
    counted, so ``n_valid = n_total - n_invalid``.  Returns
    (micro WER, n_valid, n_total).
    """
    hyp_by_key: dict[tuple, SegmentRecord] = {}
    for r in hyp_rows:
        key = _segment_key(r)
        if key in hyp_by_key:
            logger.warning("duplicate hypothesis key %r; keeping the last row", key)
        hyp_by_key[key] = r

    n_total = 0
    n_valid = 0
    total_errors = 0
    total_ref = 0
    for r in ref_rows:
        match = hyp_by_key.get(_segment_key(r))
        if match is None:
            continue
        n_total += 1
        if not r.valid:
            continue
        n_valid += 1
        stats = edit_distance(tokenize(r.text or "", "wer"), tokenize(match.text or "", "wer"))
        total_errors += stats.errors
        total_ref += stats.ref_len
    if total_ref == 0:
        micro = 0.0 if total_errors == 0 else math.inf
    else:
        micro = total_errors / total_ref
    return micro, n_valid, n_total


# ---------------------------------------------------------------------------
# BLEU
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BleuReport:
    """BLEU with its component terms exposed.

    ``precisions`` are the modified n-gram precisions for n = 1..4; ``bp``
    is the brevity penalty; ``ref_len``/``hyp_len`` are the pooled token
    counts R and C.  ``per_file`` is populated in per-file mode.
    """

    precisions: tuple[float, float, float, float]
    bp: float
    bleu: float
    ref_len: int
    hyp_len: int
    per_file: Mapping[str, "BleuReport"] | None = None

    @property
    def p1(self) -> float:
        return self.precisions[0]

    @property
    def p2(self) -> float:
        return self.precisions[1]

    @property
    def p3(self) -> float:
        return self.precisions[2]

    @property
    def p4(self) -> float:
        return self.precisions[3]


def combine_bleu(precisions: Sequence[float], bp: float) -> float:
    """BP * exp(mean log pn); zero whenever any precision is zero."""
    if len(precisions) != 4:
        raise ValueError(f"expected 4 precisions, got {len(precisions)}")
    if any(p < 0 or p > 1 for p in precisions):
        raise ValueError(f"precisions must lie in [0, 1]: {precisions}")
    if any(p == 0 for p in precisions):
        return 0.0
    return bp * math.exp(sum(math.log(p) for p in precisions) / 4.0)


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _corpus_bleu(refs: Sequence[Sequence], hyps: Sequence[Sequence]) -> BleuReport:
    ref_len = sum(len(r) for r in refs)
    hyp_len = sum(len(h) for h in hyps)
    if hyp_len == 0:
        raise ValueError("empty hypothesis corpus")
    precisions = []
    for n in range(1, 5):
        clipped = 0
        total = 0
        for ref, hyp in zip(refs, hyps):
            hyp_counts = _ngrams(hyp, n)
            ref_counts = _ngrams(ref, n)
            clipped += sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
            total += sum(hyp_counts.values())
        precisions.append(clipped / total if total else 0.0)
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return BleuReport(
        precisions=tuple(precisions),
        bp=bp,
        bleu=combine_bleu(precisions, bp),
        ref_len=ref_len,
        hyp_len=hyp_len,
    )


def bleu(
    refs: Sequence[Sequence],
    hyps: Sequence[Sequence],
    mode: str = "corpus",
    file_ids: Sequence[str] | None = None,
) -> BleuReport:
    """Single-reference BLEU over sentence-aligned token lists (no smoothing).

    corpus mode pools all pairs.  per_file mode needs ``file_ids`` aligned
    with the pairs, computes one report per file, and returns their
    unweighted mean in each summary field with the per-file reports attached.
    """
    if len(refs) != len(hyps):
        raise ValueError(f"{len(refs)} references vs {len(hyps)} hypotheses")
    if not refs:
        raise ValueError("empty hypothesis corpus")
    if mode == "corpus":
        return _corpus_bleu(refs, hyps)
    if mode != "per_file":
        raise ValueError(f"mode must be 'corpus' or 'per_file', got {mode!r}")
    if file_ids is None or len(file_ids) != len(refs):
        raise ValueError("per_file mode needs one file_id per pair")

    groups: dict[str, list[int]] = defaultdict(list)
    for i, fid in enumerate(file_ids):
        groups[fid].append(i)
    reports = {
        fid: _corpus_bleu([refs[i] for i in idx], [hyps[i] for i in idx])
        for fid, idx in groups.items()
    }
    mean = lambda values: sum(values) / len(values)  # noqa: E731
    return BleuReport(
        precisions=tuple(mean([r.precisions[n] for r in reports.values()]) for n in range(4)),
        bp=mean([r.bp for r in reports.values()]),
        bleu=mean([r.bleu for r in reports.values()]),
        ref_len=sum(r.ref_len for r in reports.values()),
        hyp_len=sum(r.hyp_len for r in reports.values()),
        per_file=dict(reports),
    )


# ---------------------------------------------------------------------------
# Relative improvement
# ---------------------------------------------------------------------------


def relative_improvement(baseline: float, improved: float) -> float:
    """Percent change of a metric relative to its baseline value."""
    if baseline == 0:
        raise ValueError("relative improvement undefined for a zero baseline")
    return 100.0 * (baseline - improved) / baseline
