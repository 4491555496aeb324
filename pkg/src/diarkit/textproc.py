"""Text-side processing: script detection, code-switch splitting,
Devanagari-to-Gurmukhi transliteration, translator routing, and the shared
tokenizer behind WER and BLEU.

Language detection on text is purely script-based: Hindi, Punjabi, and
English occupy disjoint Unicode blocks once Punjabi ASR output has been
transliterated, so no model is needed and results are fully deterministic.
"""

from __future__ import annotations

import unicodedata
from collections import Counter
from dataclasses import dataclass, replace
from importlib import resources

from .formats import SegmentRecord, TimeSpan

__all__ = [
    "ScriptSpan",
    "TranslatorRoute",
    "TransliterationResult",
    "detect_script_spans",
    "split_code_switched",
    "transliterate_deva_to_guru",
    "route_translator",
    "tokenize",
    "SCRIPT_TO_LANGUAGE",
]

SCRIPT_TO_LANGUAGE = {"devanagari": "hi", "gurmukhi": "pa", "latin": "en"}

_ROUTES = {"en": "passthrough", "hi": "indictrans2_hi_en", "pa": "opusmt_pa_en"}

_DEFAULT_BEAM = 5

# Devanagari ranges that map onto the Gurmukhi block by a fixed +0x100 offset.
_OFFSET_RANGES = (
    (0x0905, 0x0914),  # independent vowels
    (0x0915, 0x0939),  # consonants
    (0x093E, 0x094D),  # matras and virama
    (0x0966, 0x096F),  # digits
)
_BLOCK_OFFSET = 0x100


@dataclass(frozen=True)
class ScriptSpan:
    """A maximal run of one script inside a string (character slice bounds)."""

    start: int
    end: int
    script: str


@dataclass(frozen=True)
class TranslatorRoute:
    """Which translation model a segment's language selects."""

    source_lang: str
    route: str
    beam: int = _DEFAULT_BEAM

    def __post_init__(self) -> None:
        if (self.route == "passthrough") != (self.source_lang == "en"):
            raise ValueError("passthrough is exactly the English route")


@dataclass(frozen=True)
class TransliterationResult:
    """Transliterated text plus a count of codepoints left untouched."""

    text: str
    unmapped: dict


def _script_of(ch: str) -> str:
    cp = ord(ch)
    if cp in (0x0964, 0x0965):  # danda is script-shared punctuation
        return "neutral"
    if 0x0900 <= cp <= 0x097F:
        return "devanagari"
    if 0x0A00 <= cp <= 0x0A7F:
        return "gurmukhi"
    if 0x41 <= cp <= 0x5A or 0x61 <= cp <= 0x7A:
        return "latin"
    return "neutral"


def detect_script_spans(text: str) -> list[ScriptSpan]:
    """Partition a string into maximal runs of one script.

    Neutral characters (digits, punctuation, whitespace) merge into the
    preceding non-neutral span; leading neutrals join the following span.
    A string with no non-neutral character is a single neutral span.
    """
    if not text:
        return []
    scripts = [_script_of(ch) for ch in text]
    effective = list(scripts)
    last = None
    for i, s in enumerate(effective):
        if s == "neutral" and last is not None:
            effective[i] = last
        elif s != "neutral":
            last = s
    nxt = None
    for i in range(len(effective) - 1, -1, -1):
        if effective[i] == "neutral" and nxt is not None:
            effective[i] = nxt
        elif effective[i] != "neutral":
            nxt = effective[i]

    spans = []
    run_start = 0
    for i in range(1, len(effective) + 1):
        if i == len(effective) or effective[i] != effective[run_start]:
            spans.append(ScriptSpan(run_start, i, effective[run_start]))
            run_start = i
    return spans


def split_code_switched(segment: SegmentRecord) -> list[SegmentRecord]:
    """Split a mixed-script segment into one sub-segment per script run.

    Sub-segments get languages mapped from their scripts and subdivide the
    parent span proportionally to character counts, so the total duration is
    preserved.  Mono-script segments come back unchanged as a single element.
    """
    if segment.text is None:
        raise ValueError("segment has no text to split")
    spans = detect_script_spans(segment.text)
    if len(spans) <= 1:
        return [segment]
    if not segment.span.valid:
        return [segment]  # timestamps cannot be subdivided

    total_chars = len(segment.text)
    start, duration = segment.span.start, segment.span.duration()
    out = []
    consumed = 0
    sub_start = start
    for i, span in enumerate(spans):
        consumed += span.end - span.start
        sub_end = segment.span.end if i == len(spans) - 1 else start + duration * consumed / total_chars
        out.append(
            replace(
                segment,
                span=TimeSpan(sub_start, sub_end),
                language=SCRIPT_TO_LANGUAGE.get(span.script, segment.language),
                text=segment.text[span.start : span.end],
                translation=None,
            )
        )
        sub_start = sub_end
    return out


def _load_exceptions() -> dict[int, str]:
    table = {}
    path = resources.files("diarkit").joinpath("data/deva_guru_exceptions.tsv")
    for line in path.read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        source, target = line.split("\t")
        table[int(source, 16)] = target
    return table


_EXCEPTIONS = _load_exceptions()


def transliterate_deva_to_guru(text: str) -> TransliterationResult:
    """Map Devanagari text into the Gurmukhi block.

    Core vowels, consonants, matras, and digits shift by a fixed +0x100
    offset (the blocks are layout-parallel); codepoints without a Gurmukhi
    counterpart go through the shipped exception table.  Everything else
    passes through unchanged; Devanagari codepoints with no mapping at all
    are counted in the returned diagnostic.
    """
    pieces = []
    unmapped: Counter = Counter()
    for ch in text:
        cp = ord(ch)
        if cp in _EXCEPTIONS:
            pieces.append(_EXCEPTIONS[cp])
        elif any(lo <= cp <= hi for lo, hi in _OFFSET_RANGES):
            pieces.append(chr(cp + _BLOCK_OFFSET))
        else:
            if 0x0900 <= cp <= 0x097F:
                unmapped[ch] += 1
            pieces.append(ch)
    return TransliterationResult(text="".join(pieces), unmapped=dict(unmapped))


def route_translator(lang: str) -> TranslatorRoute:
    """Select the translation route for a segment language.

    English needs no model and passes through; Hindi and Punjabi select
    their dedicated models with the default beam of 5.
    """
    if lang not in _ROUTES:
        raise ValueError(f"unroutable language {lang!r}; expected one of {sorted(_ROUTES)}")
    return TranslatorRoute(source_lang=lang, route=_ROUTES[lang], beam=_DEFAULT_BEAM)


def tokenize(text: str, mode: str = "wer") -> list[str]:
    """Shared scoring tokenizer: NFC, lowercase, strip punctuation, split.

    ``mode`` selects wer or bleu and is reserved for future divergence; the
    rules are currently identical.
    """
    if mode not in ("wer", "bleu"):
        raise ValueError(f"mode must be 'wer' or 'bleu', got {mode!r}")
    normalized = unicodedata.normalize("NFC", text).lower()
    kept = []
    for ch in normalized:
        if unicodedata.category(ch).startswith("P") or ord(ch) in (0x0964, 0x0965):
            continue
        kept.append(ch)
    return "".join(kept).split()
