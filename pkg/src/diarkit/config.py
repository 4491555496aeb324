"""Run configuration shared by the CLI subcommands.

Defaults follow the pipeline's published operating point: 1.0 s windows with
0.5 s hop, 3.0 s chunks, 15 nearest neighbours, 10 ms frames.  Values merge
with precedence flags > config file > defaults; the file form is a flat JSON
object that round-trips exactly.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .cluster import KERNEL_KINDS

__all__ = ["RunConfig"]


@dataclass(frozen=True)
class RunConfig:
    out: str = "out"
    seed: int = 0
    jobs: int = 1
    win: float = 1.0
    hop: float = 0.5
    chunk: float = 3.0
    min_tail: float = 0.5
    knn: int = 15
    k_max: int = 10
    kernels: tuple[str, ...] = KERNEL_KINDS
    smooth_k: int = 5
    frame: float = 0.01
    collar: float = 0.0
    languages: tuple[str, ...] = ("hi", "pa", "en")

    def __post_init__(self) -> None:
        object.__setattr__(self, "kernels", tuple(self.kernels))
        object.__setattr__(self, "languages", tuple(self.languages))

    def validate(self) -> "RunConfig":
        if self.win <= 0 or self.hop <= 0 or self.hop > self.win:
            raise ValueError(f"need 0 < hop <= win, got win={self.win} hop={self.hop}")
        if self.chunk <= 0:
            raise ValueError(f"chunk must be positive, got {self.chunk}")
        if self.frame <= 0:
            raise ValueError(f"frame must be positive, got {self.frame}")
        if self.collar < 0:
            raise ValueError(f"collar must be non-negative, got {self.collar}")
        if self.knn < 1 or self.k_max < 1:
            raise ValueError(f"knn and k_max must be >= 1, got knn={self.knn} k_max={self.k_max}")
        if self.smooth_k < 1 or self.smooth_k % 2 == 0:
            raise ValueError(f"smooth_k must be a positive odd integer, got {self.smooth_k}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")
        unknown = set(self.kernels) - set(KERNEL_KINDS)
        if not self.kernels or unknown:
            raise ValueError(f"kernels must be a non-empty subset of {KERNEL_KINDS}, got {self.kernels}")
        return self

    def to_json(self) -> str:
        data = asdict(self)
        data["kernels"] = list(self.kernels)
        data["languages"] = list(self.languages)
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ValueError("config file must hold a flat JSON object")
        return cls.from_mapping(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def overridden(self, **updates) -> "RunConfig":
        updates = {k: v for k, v in updates.items() if v is not None}
        return replace(self, **updates)
