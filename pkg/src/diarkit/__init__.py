"""diarkit: the non-neural spine of a multilingual diarization pipeline.

Segmentation and windowing, multi-kernel consensus spectral clustering,
speaker-identification scoring with an analytic Gaussian threshold,
logistic-regression language ID, code-switch text handling, and a complete
evaluation suite (SAD frame metrics, DER, IER, WER, BLEU) over the RTTM /
CSV / SEMB interchange formats.
"""

from . import cluster, formats, lid, metrics, segmenter, sid, textproc
from .cluster import ConsensusSpectralClustering, consensus_cluster
from .formats import EmbeddingSet, RttmRecord, SegmentRecord, TimeSpan
from .lid import LogisticLanguageID
from .sid import CentroidSpeakerVerifier

__version__ = "0.1.0"

__all__ = [
    "cluster",
    "formats",
    "lid",
    "metrics",
    "segmenter",
    "sid",
    "textproc",
    "ConsensusSpectralClustering",
    "consensus_cluster",
    "EmbeddingSet",
    "RttmRecord",
    "SegmentRecord",
    "TimeSpan",
    "LogisticLanguageID",
    "CentroidSpeakerVerifier",
    "__version__",
]
