"""diarkit-adapter: inference shim feeding the diarkit toolkit.

Decodes audio, resamples to 16 kHz, runs VAD / embedding / ASR / translation
backends, and emits files in the toolkit's exact formats (SAD/LID/ASR/NMT
CSVs and the SEMB embedding container).  Strictly one-way: no metric or
clustering logic lives here.
"""

from .audio import UndecodableAudioError, decode_audio, resample
from .backends import DEFAULT_MODELS, MissingModelError
from .jobs import AdapterJob, run_job

__version__ = "0.1.0"

__all__ = [
    "AdapterJob",
    "run_job",
    "decode_audio",
    "resample",
    "UndecodableAudioError",
    "MissingModelError",
    "DEFAULT_MODELS",
    "__version__",
]
