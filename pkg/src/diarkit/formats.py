"""On-disk interchange formats: RTTM, the segment CSV schemas, and the SEMB embedding container.

Everything here is a pure function over immutable values; parsers never drop
rows silently (bad rows come back flagged with a reason) and writers are exact
inverses of the parsers for valid data.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "FormatError",
    "TimeSpan",
    "RttmRecord",
    "SegmentRecord",
    "EmbeddingSet",
    "UNDEFINED_TIME",
    "parse_rttm",
    "write_rttm",
    "parse_segments_csv",
    "write_segments_csv",
    "read_embeddings",
    "write_embeddings",
    "canonical_key",
    "canonical_order",
]

SEMB_MAGIC = b"SEMB"
SEMB_VERSION = 1

#: Marker for a missing/undefined timestamp, distinct from 0.0.
UNDEFINED_TIME = math.nan


class FormatError(ValueError):
    """Raised when an on-disk artifact cannot be parsed or written."""


@dataclass(frozen=True)
class TimeSpan:
    """A timestamped region of one audio file, in seconds.

    Spans with ``end < start`` or non-finite bounds are representable (ground
    truth files contain them) but report ``valid == False``.
    """

    start: float
    end: float

    @property
    def valid(self) -> bool:
        return math.isfinite(self.start) and math.isfinite(self.end) and self.end >= self.start

    def duration(self) -> float:
        if not self.valid:
            raise ValueError(f"duration undefined for invalid span [{self.start}, {self.end}]")
        return self.end - self.start


def _check_identifier(name: str, value: str) -> None:
    if not value or any(ch.isspace() for ch in value):
        raise FormatError(f"{name} must be non-empty and contain no whitespace: {value!r}")


@dataclass(frozen=True)
class RttmRecord:
    """One SPEAKER line of an RTTM file."""

    file_id: str
    onset: float
    duration: float
    speaker: str
    channel: int = 1

    def __post_init__(self) -> None:
        _check_identifier("file_id", self.file_id)
        _check_identifier("speaker", self.speaker)
        if not (math.isfinite(self.onset) and self.onset >= 0):
            raise FormatError(f"onset must be >= 0, got {self.onset}")
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise FormatError(f"duration must be >= 0, got {self.duration}")
        if self.channel < 0:
            raise FormatError(f"channel must be >= 0, got {self.channel}")

    @property
    def span(self) -> TimeSpan:
        return TimeSpan(self.onset, self.onset + self.duration)


@dataclass(frozen=True)
class SegmentRecord:
    """One row of a segment CSV: a span of one file plus optional payloads.

    ``invalid_reason`` is set by the parsers whenever a row could not be fully
    interpreted; such rows are preserved, never dropped.
    """

    file_id: str
    span: TimeSpan
    speaker: str | None = None
    language: str | None = None
    text: str | None = None
    translation: str | None = None
    confidence: float | None = None
    invalid_reason: str | None = None

    def __post_init__(self) -> None:
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise FormatError(f"confidence must be in [0, 1], got {self.confidence}")

    @property
    def valid(self) -> bool:
        return self.span.valid and self.invalid_reason is None


def canonical_key(record: SegmentRecord):
    """Sort key for the canonical (file_id, span.start) ordering.

    Rows with undefined timestamps sort after defined ones within a file.
    """
    bad = 0 if math.isfinite(record.span.start) else 1
    start = record.span.start if bad == 0 else 0.0
    end = record.span.end if math.isfinite(record.span.end) else 0.0
    return (record.file_id, bad, start, end)


def canonical_order(records: Iterable[SegmentRecord]) -> list[SegmentRecord]:
    """Stable sort into the canonical (file_id, span.start) ordering."""
    return sorted(records, key=canonical_key)


@dataclass(frozen=True)
class EmbeddingSet:
    """N fixed-dimension float32 vectors with per-row segment metadata.

    ``meta`` carries only (file_id, span) per row; payload fields must be
    empty so that the SEMB container round-trips exactly.
    """

    dim: int
    rows: np.ndarray
    meta: tuple[SegmentRecord, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        rows = np.array(self.rows, dtype=np.float32, order="C", copy=True)
        if rows.ndim != 2:
            raise FormatError(f"rows must be a 2-D array, got shape {rows.shape}")
        if self.dim <= 0:
            raise FormatError(f"dim must be positive, got {self.dim}")
        if rows.shape[1] != self.dim:
            raise FormatError(f"rows have {rows.shape[1]} components, expected dim={self.dim}")
        if not np.all(np.isfinite(rows)):
            raise FormatError("embedding vectors must be finite (no NaN/Inf)")
        meta = tuple(self.meta)
        if len(meta) != rows.shape[0]:
            raise FormatError(f"{rows.shape[0]} rows but {len(meta)} metadata records")
        for i, m in enumerate(meta):
            if (m.speaker, m.language, m.text, m.translation, m.confidence) != (None,) * 5:
                raise FormatError(f"metadata row {i} carries payload fields; SEMB metadata is (file, span) only")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "meta", meta)

    def __len__(self) -> int:
        return self.rows.shape[0]


# ---------------------------------------------------------------------------
# RTTM
# ---------------------------------------------------------------------------

_RTTM_FIELDS = ("TYPE", "FILE", "CHAN", "ONSET", "DUR", "ORT", "STYPE", "SPEAKER", "CONF", "SLAT")


def parse_rttm(text: str) -> list[RttmRecord]:
    """Parse RTTM text into records, one per well-formed SPEAKER line.

    Field order is TYPE FILE CHAN ONSET DUR _ _ SPEAKER _ _.  Lines of other
    record types are ignored; malformed SPEAKER lines raise FormatError naming
    the line number and offending field.  Empty input yields an empty list.
    """
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0] != "SPEAKER":
            continue
        if len(fields) < 8:
            raise FormatError(f"line {lineno}: expected at least 8 RTTM fields, got {len(fields)}")
        try:
            channel = int(fields[2])
        except ValueError:
            raise FormatError(f"line {lineno}: field CHAN is not an integer: {fields[2]!r}") from None
        onset = _parse_rttm_float(fields[3], "ONSET", lineno)
        duration = _parse_rttm_float(fields[4], "DUR", lineno)
        try:
            records.append(RttmRecord(fields[1], onset, duration, fields[7], channel))
        except FormatError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return records


def _parse_rttm_float(token: str, name: str, lineno: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise FormatError(f"line {lineno}: field {name} is not numeric: {token!r}") from None
    if not math.isfinite(value):
        raise FormatError(f"line {lineno}: field {name} is not finite: {token!r}")
    return value


def write_rttm(records: Iterable[RttmRecord]) -> str:
    """Serialize records as RTTM; onset/duration printed with 2-decimal precision."""
    lines = []
    for r in records:
        lines.append(
            f"SPEAKER {r.file_id} {r.channel} {r.onset:.2f} {r.duration:.2f} "
            f"<NA> <NA> {r.speaker} <NA> <NA>"
        )
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Segment CSVs
# ---------------------------------------------------------------------------

# Required columns per schema; the file column of ASR/NMT accepts either
# spelling found in the wild ("AudioFileName" and "AudioFile").
_SCHEMAS: dict[str, dict] = {
    "SAD": {"file": ("AudioFileName",), "start": "StartTS", "end": "EndTS", "extra": ()},
    "LID": {"file": ("AudioFile",), "start": "Start", "end": "End", "extra": ("Language",)},
    "ASR": {"file": ("AudioFileName", "AudioFile"), "start": "StartTS", "end": "EndTS", "extra": ("Transcript",)},
    "NMT": {"file": ("AudioFileName", "AudioFile"), "start": "StartTS", "end": "EndTS", "extra": ("Transcript", "Translation")},
}

#: Optional columns recognised on parse and attachable on write.
_OPTIONAL_COLUMNS = {"Speaker": "speaker", "Confidence": "confidence", "Language": "language"}


def parse_segments_csv(text: str, schema: str, strict: bool = False) -> list[SegmentRecord]:
    """Parse a segment CSV under one of the SAD/LID/ASR/NMT schemas.

    Every data row becomes exactly one SegmentRecord.  Rows with missing,
    unparseable, or reversed timestamps are returned flagged via
    ``invalid_reason``; with ``strict=True`` any flagged row raises instead.
    Unknown columns are ignored.
    """
    spec = _schema(schema)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise FormatError("missing header row") from None
    header = [h.strip() for h in header]
    index = {name: i for i, name in enumerate(header)}

    file_col = next((c for c in spec["file"] if c in index), None)
    if file_col is None:
        raise FormatError(f"missing required column {spec['file'][0]!r} for schema {schema}")
    for col in (spec["start"], spec["end"], *spec["extra"]):
        if col not in index:
            raise FormatError(f"missing required column {col!r} for schema {schema}")

    records = []
    for rowno, row in enumerate(reader, start=2):
        if not row:
            continue
        rec = _parse_row(row, index, file_col, spec)
        if strict and not rec.valid:
            raise FormatError(f"row {rowno}: {rec.invalid_reason or 'invalid span'}")
        records.append(rec)
    return records


def _schema(schema: str) -> dict:
    try:
        return _SCHEMAS[schema]
    except KeyError:
        raise FormatError(f"unknown schema {schema!r}; expected one of {sorted(_SCHEMAS)}") from None


def _cell(row: Sequence[str], index: Mapping[str, int], col: str) -> str:
    i = index[col]
    return row[i].strip() if i < len(row) else ""


def _parse_row(row, index, file_col, spec) -> SegmentRecord:
    reasons = []
    file_id = _cell(row, index, file_col)
    if not file_id:
        reasons.append(f"missing {file_col}")
    start = _parse_time(_cell(row, index, spec["start"]), spec["start"], reasons)
    end = _parse_time(_cell(row, index, spec["end"]), spec["end"], reasons)
    span = TimeSpan(start, end)
    if not reasons and not span.valid:
        reasons.append(f"{spec['end']} < {spec['start']}" if end < start else "non-finite timestamp")

    payload: dict = {}
    if "Language" in spec["extra"]:
        payload["language"] = _cell(row, index, "Language") or None
    if "Transcript" in spec["extra"]:
        payload["text"] = _cell(row, index, "Transcript") or None
    if "Translation" in spec["extra"]:
        payload["translation"] = _cell(row, index, "Translation") or None
    for col, attr in _OPTIONAL_COLUMNS.items():
        if col in index and col not in spec["extra"] and attr not in payload:
            cell = _cell(row, index, col)
            if attr == "confidence":
                try:
                    payload[attr] = float(cell) if cell else None
                except ValueError:
                    reasons.append(f"unparseable Confidence: {cell!r}")
                    payload[attr] = None
                if payload[attr] is not None and not (0.0 <= payload[attr] <= 1.0):
                    reasons.append(f"Confidence out of [0, 1]: {cell!r}")
                    payload[attr] = None
            else:
                payload[attr] = cell or None

    return SegmentRecord(
        file_id=file_id,
        span=span,
        invalid_reason="; ".join(reasons) if reasons else None,
        **payload,
    )


def _parse_time(cell: str, col: str, reasons: list[str]) -> float:
    if not cell:
        reasons.append(f"missing {col}")
        return UNDEFINED_TIME
    try:
        return float(cell)
    except ValueError:
        reasons.append(f"unparseable {col}: {cell!r}")
        return UNDEFINED_TIME


def write_segments_csv(
    records: Sequence[SegmentRecord],
    schema: str,
    extras: Mapping[str, Sequence] | None = None,
) -> str:
    """Serialize records under a schema; ``extras`` appends named columns.

    Timestamps are written with shortest round-trip precision; undefined
    timestamps become empty cells.  Newlines inside text fields are not
    representable in this dialect and raise.
    """
    spec = _schema(schema)
    extras = dict(extras or {})
    for name, values in extras.items():
        if len(values) != len(records):
            raise FormatError(f"extras column {name!r} has {len(values)} values for {len(records)} records")

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    columns = [spec["file"][0], *_value_columns(spec)]
    writer.writerow(columns + list(extras))
    for i, rec in enumerate(records):
        cells = [rec.file_id]
        for col in _value_columns(spec):
            cells.append(_format_cell(rec, col, spec))
        cells.extend("" if extras[name][i] is None else str(extras[name][i]) for name in extras)
        for cell in cells:
            if "\n" in cell or "\r" in cell:
                raise FormatError("newlines inside CSV fields are not supported")
        writer.writerow(cells)
    return out.getvalue()


def _value_columns(spec: dict) -> tuple[str, ...]:
    if "Language" in spec["extra"]:
        return ("Language", spec["start"], spec["end"])
    return (spec["start"], spec["end"], *spec["extra"])


def _format_cell(rec: SegmentRecord, col: str, spec: dict) -> str:
    if col == spec["start"]:
        return _format_time(rec.span.start)
    if col == spec["end"]:
        return _format_time(rec.span.end)
    value = {"Language": rec.language, "Transcript": rec.text, "Translation": rec.translation}[col]
    return value if value is not None else ""


def _format_time(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


# ---------------------------------------------------------------------------
# SEMB embedding container
# ---------------------------------------------------------------------------


def write_embeddings(embeddings: EmbeddingSet) -> bytes:
    """Serialize an EmbeddingSet to the SEMB binary layout (bit-exact)."""
    n = len(embeddings)
    meta_csv = write_segments_csv(embeddings.meta, "ASR").encode("utf-8")
    parts = [
        SEMB_MAGIC,
        struct.pack("<H", SEMB_VERSION),
        struct.pack("<I", n),
        struct.pack("<I", embeddings.dim),
        embeddings.rows.astype("<f4", copy=False).tobytes(order="C"),
        struct.pack("<Q", len(meta_csv)),
        meta_csv,
    ]
    return b"".join(parts)


def read_embeddings(data: bytes) -> EmbeddingSet:
    """Parse SEMB bytes back into an EmbeddingSet; exact inverse of write_embeddings."""
    view = memoryview(data)
    if len(view) < 4 or bytes(view[:4]) != SEMB_MAGIC:
        raise FormatError("bad magic: not a SEMB file")
    offset = 4
    version, offset = _unpack(view, "<H", offset)
    if version != SEMB_VERSION:
        raise FormatError(f"unsupported SEMB version {version}")
    n, offset = _unpack(view, "<I", offset)
    dim, offset = _unpack(view, "<I", offset)
    if dim == 0:
        raise FormatError("dim must be positive")
    nbytes = n * dim * 4
    if len(view) < offset + nbytes:
        raise FormatError("truncated SEMB payload (vectors)")
    rows = np.frombuffer(view[offset : offset + nbytes], dtype="<f4").reshape(n, dim)
    offset += nbytes
    meta_len, offset = _unpack(view, "<Q", offset)
    if len(view) < offset + meta_len:
        raise FormatError("truncated SEMB payload (metadata)")
    if len(view) > offset + meta_len:
        raise FormatError("trailing bytes after SEMB payload")
    meta_csv = bytes(view[offset : offset + meta_len]).decode("utf-8")
    meta = parse_segments_csv(meta_csv, "ASR")
    if len(meta) != n:
        raise FormatError(f"SEMB metadata has {len(meta)} rows, expected {n}")
    return EmbeddingSet(dim=int(dim), rows=rows, meta=tuple(meta))


def _unpack(view: memoryview, fmt: str, offset: int) -> tuple[int, int]:
    size = struct.calcsize(fmt)
    if len(view) < offset + size:
        raise FormatError("truncated SEMB header")
    (value,) = struct.unpack_from(fmt, view, offset)
    return value, offset + size


def strip_payload(record: SegmentRecord) -> SegmentRecord:
    """Copy of a record with only (file_id, span) kept, for SEMB metadata."""
    return replace(
        record,
        speaker=None,
        language=None,
        text=None,
        translation=None,
        confidence=None,
        invalid_reason=None,
    )
