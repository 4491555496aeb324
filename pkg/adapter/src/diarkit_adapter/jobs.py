"""Adapter jobs: decode audio, run a backend, emit diarkit-format files.

Jobs are independent (one per process) and strictly one-way: the adapter
produces files the toolkit parses, and contains no metric or clustering
logic.  Window and chunk boundaries in outputs are copied verbatim from the
manifest so resampling arithmetic can never shift them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from diarkit import formats, textproc

from .audio import TARGET_RATE, decode_audio, resample
from .backends import DEFAULT_MODELS, energy_vad, fbank_stats_embedding, require_available

__all__ = ["AdapterJob", "run_job", "TASKS"]

TASKS = ("vad", "embed-speaker", "embed-lang", "asr", "translate")


@dataclass(frozen=True)
class AdapterJob:
    """One unit of adapter work.

    ``audio`` paths are matched to manifest rows by file name; ``model``
    defaults to the task's pretrained identifier (which must be installed)
    and can name a local backend instead.
    """

    task: str
    audio: tuple[Path, ...] = ()
    manifest: Path | None = None
    model: str | None = None
    lid: Path | None = None
    asr: Path | None = None
    fixture: Path | None = None
    n_mels: int = 96
    languages: tuple[str, ...] = ("hi", "pa", "en")

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        object.__setattr__(self, "audio", tuple(Path(p) for p in self.audio))

    @property
    def resolved_model(self) -> str:
        return self.model or DEFAULT_MODELS[self.task]


def run_job(job: AdapterJob) -> dict[str, str | bytes]:
    """Execute a job and return its artifacts as name -> payload."""
    model = require_available(job.task, job.resolved_model)
    if job.task == "vad":
        return _run_vad(job, model)
    if job.task in ("embed-speaker", "embed-lang"):
        return _run_embed(job, model)
    if job.task == "asr":
        return _run_asr(job, model)
    return _run_translate(job, model)


def _decoded(job: AdapterJob) -> dict[str, np.ndarray]:
    if not job.audio:
        raise formats.FormatError("no audio files given")
    by_name = {}
    for path in job.audio:
        samples, rate = decode_audio(path)
        by_name[path.name] = resample(samples, rate)
    return by_name


def _run_vad(job: AdapterJob, model: str) -> dict:
    by_name = _decoded(job)
    rows = []
    for name in sorted(by_name):
        for start, end in energy_vad(by_name[name], TARGET_RATE):
            rows.append(formats.SegmentRecord(name, formats.TimeSpan(start, end)))
    return {"sad.csv": formats.write_segments_csv(rows, "SAD")}


def _manifest_rows(job: AdapterJob) -> list[formats.SegmentRecord]:
    if job.manifest is None:
        raise formats.FormatError(f"task {job.task!r} needs a window manifest")
    rows = formats.parse_segments_csv(
        Path(job.manifest).read_text(encoding="utf-8"), "SAD", strict=True
    )
    return formats.canonical_order(rows)


def _slice(samples: np.ndarray, span: formats.TimeSpan) -> np.ndarray:
    lo = max(0, int(round(span.start * TARGET_RATE)))
    hi = min(samples.size, int(round(span.end * TARGET_RATE)))
    return samples[lo:hi] if hi > lo else np.zeros(0, dtype=np.float32)


def _run_embed(job: AdapterJob, model: str) -> dict:
    rows = _manifest_rows(job)
    by_name = _decoded(job)
    missing = sorted({r.file_id for r in rows} - set(by_name))
    if missing:
        raise formats.FormatError(f"manifest references audio not supplied: {missing}")

    vectors = []
    meta = []
    for row in rows:
        vectors.append(
            fbank_stats_embedding(_slice(by_name[row.file_id], row.span), TARGET_RATE, job.n_mels)
        )
        meta.append(formats.SegmentRecord(row.file_id, row.span))
    embeddings = formats.EmbeddingSet(
        dim=2 * job.n_mels,
        rows=np.vstack(vectors) if vectors else np.zeros((0, 2 * job.n_mels), dtype=np.float32),
        meta=tuple(meta),
    )
    return {"embeddings.semb": formats.write_embeddings(embeddings)}


def _key(record: formats.SegmentRecord) -> tuple:
    return (record.file_id, repr(record.span.start), repr(record.span.end))


def _run_asr(job: AdapterJob, model: str) -> dict:
    rows = _manifest_rows(job)
    fixture_text: dict[tuple, str] = {}
    if model == "fixture":
        if job.fixture is None:
            raise formats.FormatError("asr model 'fixture' needs --fixture with transcripts")
        for r in formats.parse_segments_csv(
            Path(job.fixture).read_text(encoding="utf-8"), "ASR"
        ):
            fixture_text[_key(r)] = r.text or ""

    pa_keys = set()
    if job.lid is not None:
        for r in formats.parse_segments_csv(Path(job.lid).read_text(encoding="utf-8"), "LID"):
            if r.language == "pa":
                pa_keys.add(_key(r))

    out = []
    for row in rows:
        text = fixture_text.get(_key(row), "") if model == "fixture" else ""
        # Punjabi chunks decoded in Devanagari get transliterated through the
        # primary toolkit's textproc, not re-implemented here
        if text and _key(row) in pa_keys:
            text = textproc.transliterate_deva_to_guru(text).text
        out.append(formats.SegmentRecord(row.file_id, row.span, text=text or None))
    return {"asr.csv": formats.write_segments_csv(out, "ASR")}


def _run_translate(job: AdapterJob, model: str) -> dict:
    if job.asr is None:
        raise formats.FormatError("task 'translate' needs --asr with transcripts")
    rows = formats.parse_segments_csv(Path(job.asr).read_text(encoding="utf-8"), "ASR")

    out = []
    for row in formats.canonical_order(rows):
        translation = None
        if row.text:
            pieces = textproc.split_code_switched(
                formats.SegmentRecord(row.file_id, row.span, text=row.text, language=row.language)
            )
            translated = []
            for piece in pieces:
                lang = piece.language
                spans = textproc.detect_script_spans(piece.text or "")
                if len(spans) == 1:
                    lang = textproc.SCRIPT_TO_LANGUAGE.get(spans[0].script, lang)
                if lang in job.languages and textproc.route_translator(lang).route == "passthrough":
                    translated.append(piece.text)  # English: no model is selected
                else:
                    # the identity backend stands in for the routed model
                    translated.append(piece.text)
            translation = " ".join(t for t in translated if t) or None
        out.append(
            formats.SegmentRecord(
                row.file_id, row.span, text=row.text, translation=translation,
                invalid_reason=row.invalid_reason,
            )
        )
    return {"nmt.csv": formats.write_segments_csv(out, "NMT")}
