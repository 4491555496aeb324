"""Adapter CLI, mirroring the primary toolkit's flag style and layout.

Each task writes its artifacts plus a manifest.json into ``<out>/<task>/``.
Exit codes: 0 success, 1 validation error, 2 I/O error, 3 missing model.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from diarkit import formats

from . import __version__
from .audio import UndecodableAudioError
from .backends import MissingModelError
from .jobs import TASKS, AdapterJob, run_job

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_MISSING_MODEL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_VALIDATION)


def _build_parser() -> _Parser:
    parser = _Parser(prog="diarkit-adapter", description=__doc__)
    parser.add_argument("--version", action="version", version=f"diarkit-adapter {__version__}")
    sub = parser.add_subparsers(dest="task", metavar="TASK")
    for task in TASKS:
        p = sub.add_parser(task, help=f"run the {task} stage")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--model", help="model identifier (default: the pretrained one)")
        if task in ("vad", "embed-speaker", "embed-lang", "asr"):
            p.add_argument("--audio", nargs="+", type=Path, default=[], help="audio files")
        if task in ("embed-speaker", "embed-lang", "asr"):
            p.add_argument("--manifest", type=Path, required=True, help="window/chunk manifest CSV")
            p.add_argument("--n-mels", type=int, default=96, dest="n_mels")
        if task == "asr":
            p.add_argument("--lid", type=Path, help="LID CSV guiding Punjabi transliteration")
            p.add_argument("--fixture", type=Path, help="transcript CSV for the fixture backend")
        if task == "translate":
            p.add_argument("--asr", type=Path, required=True, help="ASR CSV to translate")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.task:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION

    job = AdapterJob(
        task=args.task,
        audio=tuple(getattr(args, "audio", ())),
        manifest=getattr(args, "manifest", None),
        model=args.model,
        lid=getattr(args, "lid", None),
        asr=getattr(args, "asr", None),
        fixture=getattr(args, "fixture", None),
        n_mels=getattr(args, "n_mels", 96),
    )
    try:
        artifacts = run_job(job)
    except MissingModelError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_MISSING_MODEL
    except (formats.FormatError, UndecodableAudioError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO

    out_dir = Path(args.out) / args.task
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, payload in sorted(artifacts.items()):
        target = out_dir / name
        if isinstance(payload, bytes):
            target.write_bytes(payload)
        else:
            target.write_text(payload, encoding="utf-8")
    manifest = {"command": args.task, "artifacts": sorted(artifacts), "model": job.resolved_model}
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    sys.stdout.write(f"{out_dir}\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
