"""Model backends behind the adapter tasks.

Model identifiers are plain config strings.  The defaults name the
pretrained models the pipeline was built around (Silero-VAD, ECAPA-TDNN,
VoxLingua107, Whisper/IndicWhisper, IndicTrans2/Opus-MT); when those are not
available locally, selecting them raises MissingModelError.  Each task also
has a deterministic DSP or rule-based backend that needs no downloads, which
is what the test suite drives:

  vad:        "energy"       frame-RMS gate with span merging
  embeddings: "fbank-stats"  log-mel filterbank mean+std (192-dim)
  asr:        "silence"      empty transcripts; "fixture" replays a CSV
  translate:  "identity"     copies the transcript through
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "MissingModelError",
    "DEFAULT_MODELS",
    "energy_vad",
    "fbank_stats_embedding",
    "require_available",
]

#: Paper-era defaults per task; none are bundled with this package.
DEFAULT_MODELS = {
    "vad": "silero-vad",
    "embed-speaker": "ecapa-voxceleb",
    "embed-lang": "voxlingua107-ecapa",
    "asr": "whisper-small.en+indicwhisper-hi",
    "translate": "indictrans2-hi-en+opusmt-pa-en",
}

_LOCAL_BACKENDS = {
    "vad": ("energy",),
    "embed-speaker": ("fbank-stats",),
    "embed-lang": ("fbank-stats",),
    "asr": ("silence", "fixture"),
    "translate": ("identity",),
}


class MissingModelError(RuntimeError):
    """The selected model is not available in this environment."""


def require_available(task: str, model: str) -> str:
    """Validate a model id for a task; raise MissingModelError for
    pretrained identifiers that are not installed locally."""
    if task not in DEFAULT_MODELS:
        raise ValueError(f"unknown task {task!r}")
    if model in _LOCAL_BACKENDS[task]:
        return model
    raise MissingModelError(
        f"model {model!r} for task {task!r} is not available locally; "
        f"install it or select one of {_LOCAL_BACKENDS[task]}"
    )


# ---------------------------------------------------------------------------
# VAD
# ---------------------------------------------------------------------------


def energy_vad(
    samples: np.ndarray,
    rate: int,
    frame: float = 0.03,
    hop: float = 0.01,
    abs_floor: float = 1e-3,
    rel_gate: float = 0.1,
    min_span: float = 0.05,
) -> list[tuple[float, float]]:
    """Frame-RMS speech detector.

    A frame is speech when its RMS clears both an absolute floor and a gate
    relative to the loudest frame; consecutive speech frames merge into
    spans, and spans shorter than ``min_span`` are dropped.  Digital silence
    yields no spans.
    """
    n_frame = max(1, int(round(frame * rate)))
    n_hop = max(1, int(round(hop * rate)))
    if samples.size < n_frame:
        return []
    n_steps = 1 + (samples.size - n_frame) // n_hop
    rms = np.empty(n_steps)
    for i in range(n_steps):
        chunk = samples[i * n_hop : i * n_hop + n_frame]
        rms[i] = float(np.sqrt(np.mean(chunk.astype(np.float64) ** 2)))
    gate = max(abs_floor, rel_gate * float(rms.max()))
    active = rms >= gate
    if not active.any():
        return []

    spans = []
    start = None
    for i, flag in enumerate(active):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            spans.append((start, i))
            start = None
    if start is not None:
        spans.append((start, n_steps))

    out = []
    for a, b in spans:
        t0 = a * n_hop / rate
        t1 = ((b - 1) * n_hop + n_frame) / rate
        if t1 - t0 >= min_span:
            out.append((round(t0, 3), round(t1, 3)))
    return out


# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------


def _mel_filterbank(n_mels: int, n_fft: int, rate: int) -> np.ndarray:
    def hz_to_mel(hz):
        return 2595.0 * np.log10(1.0 + hz / 700.0)

    def mel_to_hz(mel):
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)

    mel_points = np.linspace(hz_to_mel(0.0), hz_to_mel(rate / 2.0), n_mels + 2)
    bins = np.floor((n_fft + 1) * mel_to_hz(mel_points) / rate).astype(int)
    bank = np.zeros((n_mels, n_fft // 2 + 1))
    for m in range(1, n_mels + 1):
        lo, center, hi = bins[m - 1], bins[m], bins[m + 1]
        for k in range(lo, center):
            if center > lo:
                bank[m - 1, k] = (k - lo) / (center - lo)
        for k in range(center, hi):
            if hi > center:
                bank[m - 1, k] = (hi - k) / (hi - center)
    return bank


def fbank_stats_embedding(
    samples: np.ndarray,
    rate: int,
    n_mels: int = 96,
    frame: float = 0.025,
    hop: float = 0.01,
) -> np.ndarray:
    """Deterministic 2*n_mels-dim embedding: log-mel filterbank mean and std.

    A stand-in extractor with the same interface (and, at the default 96
    mels, the same 192 dimensions) as the pretrained speaker embedder.
    Short inputs are zero-padded to one frame.
    """
    n_frame = int(round(frame * rate))
    n_hop = int(round(hop * rate))
    if samples.size < n_frame:
        samples = np.pad(samples, (0, n_frame - samples.size))
    n_steps = 1 + (samples.size - n_frame) // n_hop
    window = np.hanning(n_frame)
    n_fft = 1
    while n_fft < n_frame:
        n_fft *= 2
    bank = _mel_filterbank(n_mels, n_fft, rate)

    feats = np.empty((n_steps, n_mels))
    for i in range(n_steps):
        chunk = samples[i * n_hop : i * n_hop + n_frame].astype(np.float64) * window
        power = np.abs(np.fft.rfft(chunk, n=n_fft)) ** 2
        feats[i] = np.log(bank @ power + 1e-10)
    return np.concatenate([feats.mean(axis=0), feats.std(axis=0)]).astype(np.float32)
