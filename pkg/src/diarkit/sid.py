"""Speaker identification against enrolled centroids.

Enrollment is the raw mean of a speaker's embeddings; test chunks are scored
by cosine similarity, label sequences are stabilized with a windowed-majority
median filter, and the accept/reject boundary is the analytic threshold from
Gaussian models of the genuine and impostor score distributions.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .formats import EmbeddingSet
from .validation import as_float_matrix, as_float_vector

__all__ = [
    "SpeakerCentroid",
    "ScoreStats",
    "enroll",
    "cosine_score",
    "median_smooth",
    "fit_score_stats",
    "gaussian_threshold",
    "decide",
    "CentroidSpeakerVerifier",
]

_DEGENERATE_NORM = 1e-6


@dataclass(frozen=True)
class SpeakerCentroid:
    """Mean embedding of one enrolled speaker."""

    speaker: str
    vector: np.ndarray
    n_enrolled: int

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64)
        vec.flags.writeable = False
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class ScoreStats:
    """Means and standard deviations of genuine and impostor cosine scores."""

    mu_g: float
    sigma_g: float
    mu_i: float
    sigma_i: float

    def __post_init__(self) -> None:
        if not (self.sigma_g > 0 and self.sigma_i > 0):
            raise ValueError(f"sigmas must be positive, got {self.sigma_g}, {self.sigma_i}")
        for name, mu in (("mu_g", self.mu_g), ("mu_i", self.mu_i)):
            if not -1.0 <= mu <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1], got {mu}")


def enroll(embeddings, speaker: str) -> SpeakerCentroid:
    """Form a speaker centroid as the unweighted mean of enrollment embeddings.

    No pre-normalization is applied; cosine scoring makes the centroid's
    scale irrelevant to decisions.
    """
    rows = embeddings.rows if isinstance(embeddings, EmbeddingSet) else embeddings
    rows = as_float_matrix(rows, name="enrollment embeddings")
    centroid = rows.mean(axis=0)
    if np.linalg.norm(centroid) < _DEGENERATE_NORM:
        raise ValueError("degenerate centroid: enrollment mean has near-zero norm")
    return SpeakerCentroid(speaker=speaker, vector=centroid, n_enrolled=rows.shape[0])


def cosine_score(x, centroid) -> float:
    """Cosine similarity between a test vector and a centroid, in [-1, 1]."""
    xv = as_float_vector(x, name="x")
    cv = centroid.vector if isinstance(centroid, SpeakerCentroid) else as_float_vector(centroid, name="centroid")
    nx = np.linalg.norm(xv)
    nc = np.linalg.norm(cv)
    if nx == 0 or nc == 0:
        raise ValueError("cosine score undefined for zero vectors")
    return float(np.clip(xv @ cv / (nx * nc), -1.0, 1.0))


def median_smooth(labels: Sequence, smooth_k: int = 5) -> list:
    """Windowed-majority filter over a categorical label sequence.

    Each position takes the majority label inside its centered window of
    ``smooth_k`` positions (the window shrinks at the edges).  Ties keep the
    original center label; a tie among other labels takes the earliest one in
    the window.  smooth_k must be odd.
    """
    if smooth_k < 1 or smooth_k % 2 == 0:
        raise ValueError(f"smooth_k must be a positive odd integer, got {smooth_k}")
    seq = list(labels)
    if smooth_k == 1:
        return seq
    half = smooth_k // 2
    out = []
    for i, center in enumerate(seq):
        window = seq[max(0, i - half) : i + half + 1]
        counts = Counter(window)
        best = max(counts.values())
        if counts[center] == best:
            out.append(center)
        else:
            out.append(next(lab for lab in window if counts[lab] == best))
    return out


def fit_score_stats(genuine, impostor) -> ScoreStats:
    """Fit ScoreStats from raw genuine/impostor score samples (population std)."""
    g = as_float_vector(genuine, name="genuine scores")
    i = as_float_vector(impostor, name="impostor scores")
    if g.size < 2 or i.size < 2:
        raise ValueError("need at least 2 scores per distribution")
    return ScoreStats(
        mu_g=float(g.mean()),
        sigma_g=float(g.std()),
        mu_i=float(i.mean()),
        sigma_i=float(i.std()),
    )


def gaussian_threshold(stats: ScoreStats) -> float:
    """Analytic decision threshold (mu_g*sigma_i + mu_i*sigma_g)/(sigma_g + sigma_i).

    A sigma-weighted mean of the two score means, so it always lies between
    them; equal sigmas reduce it to the exact midpoint.
    """
    denom = stats.sigma_g + stats.sigma_i
    if denom == 0:
        raise ValueError("sigma_g + sigma_i must be positive")
    if stats.sigma_g == stats.sigma_i:
        return (stats.mu_g + stats.mu_i) / 2.0
    return (stats.mu_g * stats.sigma_i + stats.mu_i * stats.sigma_g) / denom


def decide(scores: Iterable[tuple], delta: float) -> list[tuple]:
    """Binary enrollment decisions: accept iff score >= delta."""
    return [(segment, score >= delta) for segment, score in scores]


class CentroidSpeakerVerifier(BaseEstimator):
    """Estimator wrapper: fit enrolls a centroid, predict applies a threshold.

    ``decision_function`` returns raw cosine scores; ``predict`` compares
    them against ``threshold`` (score == threshold accepts).
    """

    def __init__(self, speaker: str = "enrolled", threshold: float = 0.0):
        self.speaker = speaker
        self.threshold = threshold

    def fit(self, X, y=None):
        del y
        self.centroid_ = enroll(X, self.speaker)
        return self

    def decision_function(self, X) -> np.ndarray:
        rows = X.rows if isinstance(X, EmbeddingSet) else X
        rows = as_float_matrix(rows, name="X")
        return np.array([cosine_score(row, self.centroid_) for row in rows])

    def predict(self, X) -> np.ndarray:
        return self.decision_function(X) >= self.threshold
