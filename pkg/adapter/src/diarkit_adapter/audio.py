"""Audio decoding and resampling for the adapter.

WAV files decode natively through scipy (8/16/32-bit PCM and float, any
rate, mono or multichannel).  The compressed formats the challenge allows
(mp3, ogg, flac) need an external decoder; without one installed they raise
UndecodableAudioError, which the CLI turns into a clean nonzero exit.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

__all__ = ["UndecodableAudioError", "decode_audio", "resample", "TARGET_RATE"]

TARGET_RATE = 16_000


class UndecodableAudioError(ValueError):
    """The audio file cannot be decoded in this environment."""


def decode_audio(path: str | Path) -> tuple[np.ndarray, int]:
    """Decode an audio file to float32 mono in [-1, 1] plus its sample rate."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix != ".wav":
        raise UndecodableAudioError(
            f"cannot decode {path.name!r}: {suffix or 'extensionless'} needs an external "
            "decoder and none is installed (wav is supported natively)"
        )
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise UndecodableAudioError(f"cannot decode {path.name!r}: {exc}") from exc

    if data.dtype == np.uint8:
        samples = (data.astype(np.float32) - 128.0) / 128.0
    elif data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float32) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float32)
    else:
        raise UndecodableAudioError(f"cannot decode {path.name!r}: unsupported sample dtype {data.dtype}")
    if samples.ndim > 1:
        samples = samples.mean(axis=1)
    return np.ascontiguousarray(samples, dtype=np.float32), int(rate)


def resample(samples: np.ndarray, rate: int, target: int = TARGET_RATE) -> np.ndarray:
    """Polyphase resampling; identity when the rate already matches."""
    if rate == target:
        return samples
    g = math.gcd(rate, target)
    out = resample_poly(samples.astype(np.float64), target // g, rate // g)
    return np.ascontiguousarray(out, dtype=np.float32)


def write_wav(path: str | Path, samples: np.ndarray, rate: int) -> None:
    """Write float samples as 16-bit PCM (test fixtures and diagnostics)."""
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    wavfile.write(path, rate, (clipped * 32767.0).astype(np.int16))
