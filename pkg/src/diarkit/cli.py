"""Subcommand CLI wiring the toolkit into the full pipeline.

Subcommands: segment, cluster, sid, lid-train, lid-predict, textprep,
score-sad, score-der, score-wer, score-bleu, report.  Each run validates all
inputs before writing anything, then writes its artifacts plus a manifest
into ``<out>/<subcommand>/``.  Outputs are byte-identical for a fixed config
and seed, regardless of --jobs.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__, cluster, formats, lid, metrics, segmenter, sid, textproc
from .config import RunConfig

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2

logger = logging.getLogger("diarkit")


class _Parser(argparse.ArgumentParser):
    """argparse that exits 1 with usage on bad flags/subcommands."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_VALIDATION)


def _build_parser() -> _Parser:
    parser = _Parser(prog="diarkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"diarkit {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat JSON config file")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("--win", type=float)
    common.add_argument("--hop", type=float)
    common.add_argument("--chunk", type=float)
    common.add_argument("--knn", type=int)
    common.add_argument("--k-max", type=int, dest="k_max")
    common.add_argument("--smooth-k", type=int, dest="smooth_k")
    common.add_argument("--frame", type=float)
    common.add_argument("--collar", type=float)
    common.add_argument("--kernels", help="comma-separated kernel list")

    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND")

    p = sub.add_parser("segment", parents=[common], help="SAD CSV to pseudo-RTTM and window/chunk manifests")
    p.add_argument("--sad", type=Path, required=True, help="SAD-schema CSV of speech spans")
    p.add_argument("--merge", action="store_true", help="merge overlapping spans first")

    p = sub.add_parser("cluster", parents=[common], help="embeddings to per-recording diarization RTTM")
    p.add_argument("--embeddings", type=Path, required=True, help="SEMB file of window embeddings")
    p.add_argument("--k", type=int, help="oracle speaker count (default: eigengap estimate)")
    p.add_argument("--merge", action="store_true", help="merge adjacent same-speaker windows")

    p = sub.add_parser("sid", parents=[common], help="enroll, score, smooth, decide")
    p.add_argument("--enroll", type=Path, required=True, help="SEMB of enrollment embeddings")
    p.add_argument("--test", type=Path, required=True, help="SEMB of test chunk embeddings")
    p.add_argument("--speaker", default="enrolled", help="label of the enrolled speaker")
    p.add_argument("--delta", type=float, help="decision threshold")
    p.add_argument("--genuine", type=Path, help="text file of genuine scores (one per line)")
    p.add_argument("--impostor", type=Path, help="text file of impostor scores (one per line)")
    p.add_argument("--ref", type=Path, help="reference CSV (ASR schema + Speaker) for IER")

    p = sub.add_parser("lid-train", parents=[common], help="train the language classifier")
    p.add_argument("--embeddings", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True, help="LID-schema CSV with Language per chunk")
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=500, dest="max_iter")

    p = sub.add_parser("lid-predict", parents=[common], help="predict chunk languages")
    p.add_argument("--embeddings", type=Path, required=True)
    p.add_argument("--model", type=Path, required=True)

    p = sub.add_parser("textprep", parents=[common], help="split/transliterate/route ASR rows for translation")
    p.add_argument("--asr", type=Path, required=True, help="ASR-schema CSV")
    p.add_argument("--lid", type=Path, help="LID-schema CSV guiding Punjabi transliteration")
    p.add_argument("--transliterate", action="store_true", help="transliterate pa rows from Devanagari")

    p = sub.add_parser("score-sad", parents=[common], help="frame-level SAD metrics")
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--hyp", type=Path, required=True)
    p.add_argument("--metric-name", default="VAD Acc. (%)", dest="metric_name")

    p = sub.add_parser("score-der", parents=[common], help="diarization error rate")
    p.add_argument("--ref", type=Path, required=True, help="reference RTTM")
    p.add_argument("--hyp", type=Path, required=True, help="hypothesis RTTM")
    p.add_argument("--metric-name", default="DER (%)", dest="metric_name")

    p = sub.add_parser("score-wer", parents=[common], help="dual-protocol word error rate")
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--hyp", type=Path, required=True)
    p.add_argument("--metric-name", default="ASR WER (%)", dest="metric_name")

    p = sub.add_parser("score-bleu", parents=[common], help="corpus and per-file BLEU")
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--hyp", type=Path, required=True)
    p.add_argument("--metric-name", default="NMT BLEU", dest="metric_name")

    p = sub.add_parser("report", parents=[common], help="merge metric CSVs into a summary table")
    p.add_argument("--metrics", type=Path, nargs="+", required=True, help="metrics.csv files from score runs")

    return parser


def _merge_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    kernels = None
    if getattr(args, "kernels", None):
        kernels = tuple(k.strip() for k in args.kernels.split(",") if k.strip())
    cfg = cfg.overridden(
        out=getattr(args, "out", None),
        seed=getattr(args, "seed", None),
        jobs=getattr(args, "jobs", None),
        win=getattr(args, "win", None),
        hop=getattr(args, "hop", None),
        chunk=getattr(args, "chunk", None),
        knn=getattr(args, "knn", None),
        k_max=getattr(args, "k_max", None),
        smooth_k=getattr(args, "smooth_k", None),
        frame=getattr(args, "frame", None),
        collar=getattr(args, "collar", None),
        kernels=kernels,
    )
    return cfg.validate()


def _read_text(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def _check_file_id(fid: str) -> str:
    if "/" in fid or "\\" in fid or fid in (".", "..") or not fid:
        raise formats.FormatError(f"file id unusable as a file name: {fid!r}")
    return fid


def _natural_key(fid: str):
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", fid))


def _parallel_map(fn, items, jobs: int) -> list:
    """Order-preserving map; thread count never changes results."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


class _Run:
    """Collects artifacts in memory, then writes them all at once."""

    def __init__(self, out_dir: Path, command: str):
        self.dir = out_dir / command
        self.command = command
        self.files: dict[str, str | bytes] = {}

    def add(self, name: str, payload: str | bytes) -> None:
        self.files[name] = payload

    def flush(self) -> Path:
        self.dir.mkdir(parents=True, exist_ok=True)
        for name, payload in sorted(self.files.items()):
            target = self.dir / name
            if isinstance(payload, bytes):
                target.write_bytes(payload)
            else:
                target.write_text(payload, encoding="utf-8")
        manifest = {"command": self.command, "artifacts": sorted(self.files)}
        (self.dir / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return self.dir


def _metrics_csv(rows: list[tuple[str, str, float]]) -> str:
    lines = ["File,Metric,Value"]
    for fid, metric, value in rows:
        lines.append(f'{fid},"{metric}",{value:.4f}')
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_segment(args, cfg: RunConfig) -> _Run:
    records = formats.parse_segments_csv(_read_text(args.sad), "SAD", strict=True)
    by_file: dict[str, list[formats.TimeSpan]] = {}
    for rec in formats.canonical_order(records):
        by_file.setdefault(_check_file_id(rec.file_id), []).append(rec.span)

    rttm_records: list[formats.RttmRecord] = []
    window_rows: list[formats.SegmentRecord] = []
    chunk_rows: list[formats.SegmentRecord] = []
    for fid in sorted(by_file, key=_natural_key):
        spans = sorted(by_file[fid], key=lambda s: (s.start, s.end))
        if args.merge:
            spans = segmenter.merge_overlapping_spans(spans)
        rttm_records.extend(segmenter.spans_to_pseudo_rttm(spans, fid))
        for span in spans:
            for w in segmenter.sliding_windows(span, cfg.win, cfg.hop):
                window_rows.append(formats.SegmentRecord(fid, w))
        for c in segmenter.chunk_spans(spans, cfg.chunk, cfg.min_tail):
            chunk_rows.append(formats.SegmentRecord(fid, c))

    run = _Run(Path(cfg.out), "segment")
    run.add("speech.rttm", formats.write_rttm(rttm_records))
    run.add("windows.csv", formats.write_segments_csv(window_rows, "SAD"))
    run.add("chunks.csv", formats.write_segments_csv(chunk_rows, "SAD"))
    return run


def _group_embeddings(embeddings: formats.EmbeddingSet) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    order = sorted(range(len(embeddings)), key=lambda i: formats.canonical_key(embeddings.meta[i]))
    for i in order:
        groups.setdefault(_check_file_id(embeddings.meta[i].file_id), []).append(i)
    return groups


def _cmd_cluster(args, cfg: RunConfig) -> _Run:
    embeddings = formats.read_embeddings(args.embeddings.read_bytes())
    if len(embeddings) == 0:
        raise formats.FormatError("embedding set is empty")
    groups = _group_embeddings(embeddings)

    def diarize_one(fid: str) -> tuple[str, str]:
        idx = groups[fid]
        assignments = cluster.consensus_cluster(
            embeddings.rows[idx],
            kernels=cfg.kernels,
            k=args.k,
            knn=cfg.knn,
            seed=cfg.seed,
            k_max=cfg.k_max,
        )
        records = []
        if args.merge:
            spans_by_speaker: dict[str, list[formats.TimeSpan]] = {}
            for row, label in assignments:
                spans_by_speaker.setdefault(label, []).append(embeddings.meta[idx[row]].span)
            merged = []
            for label in sorted(spans_by_speaker):
                for span in segmenter.merge_overlapping_spans(spans_by_speaker[label]):
                    merged.append((span, label))
            merged.sort(key=lambda item: (item[0].start, item[0].end, item[1]))
            records = [
                formats.RttmRecord(fid, span.start, span.duration(), label)
                for span, label in merged
            ]
        else:
            for row, label in assignments:
                span = embeddings.meta[idx[row]].span
                records.append(formats.RttmRecord(fid, span.start, span.duration(), label))
        return fid, formats.write_rttm(records)

    fids = sorted(groups, key=_natural_key)
    results = _parallel_map(diarize_one, fids, cfg.jobs)
    run = _Run(Path(cfg.out), "cluster")
    for fid, payload in results:
        run.add(f"{fid}.rttm", payload)
    return run


def _parse_score_file(path: Path) -> list[float]:
    values = []
    for token in _read_text(path).split():
        values.append(float(token))
    if not values:
        raise formats.FormatError(f"score file {path} is empty")
    return values


def _cmd_sid(args, cfg: RunConfig) -> _Run:
    enroll_set = formats.read_embeddings(args.enroll.read_bytes())
    test_set = formats.read_embeddings(args.test.read_bytes())
    if (args.delta is None) == (args.genuine is None or args.impostor is None):
        raise formats.FormatError("give either --delta or both --genuine and --impostor")
    ref_rows = (
        formats.parse_segments_csv(_read_text(args.ref), "ASR") if args.ref else None
    )

    centroid = sid.enroll(enroll_set, args.speaker)
    if args.delta is not None:
        delta = args.delta
        stats = None
    else:
        stats = sid.fit_score_stats(_parse_score_file(args.genuine), _parse_score_file(args.impostor))
        delta = sid.gaussian_threshold(stats)

    groups = _group_embeddings(test_set)
    ordered_idx = [i for fid in sorted(groups, key=_natural_key) for i in groups[fid]]
    scores = {i: sid.cosine_score(test_set.rows[i], centroid) for i in ordered_idx}

    labels_by_idx: dict[int, str] = {}
    for fid in sorted(groups, key=_natural_key):
        idx = groups[fid]
        raw = [args.speaker if scores[i] >= delta else "other" for i in idx]
        for i, label in zip(idx, sid.median_smooth(raw, cfg.smooth_k)):
            labels_by_idx[i] = label

    rows = [test_set.meta[i] for i in ordered_idx]
    run = _Run(Path(cfg.out), "sid")
    run.add(
        "decisions.csv",
        formats.write_segments_csv(
            rows,
            "ASR",
            extras={
                "Speaker": [labels_by_idx[i] for i in ordered_idx],
                "Score": [f"{scores[i]:.6f}" for i in ordered_idx],
            },
        ),
    )

    summary = {
        "speaker": args.speaker,
        "delta": delta,
        "n_enrolled": len(enroll_set),
        "n_test": len(test_set),
        "n_accepted": sum(1 for i in ordered_idx if labels_by_idx[i] == args.speaker),
    }
    if stats is not None:
        summary["score_stats"] = {
            "mu_g": stats.mu_g,
            "sigma_g": stats.sigma_g,
            "mu_i": stats.mu_i,
            "sigma_i": stats.sigma_i,
        }

    if ref_rows is not None:
        metric_rows, ier_summary = _sid_ier(
            ref_rows, test_set, ordered_idx, labels_by_idx, args.speaker
        )
        run.add("metrics.csv", _metrics_csv(metric_rows))
        summary.update(ier_summary)

    run.add("summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return run


def _sid_ier(ref_rows, test_set, ordered_idx, labels_by_idx, speaker):
    ref_by_key = {}
    for r in ref_rows:
        ref_by_key[(r.file_id, repr(r.span.start), repr(r.span.end))] = r
    fn_dur: dict[str, float] = {}
    fp_dur: dict[str, float] = {}
    ref_dur: dict[str, float] = {}
    unmatched = 0
    for i in ordered_idx:
        m = test_set.meta[i]
        ref = ref_by_key.get((m.file_id, repr(m.span.start), repr(m.span.end)))
        if ref is None:
            unmatched += 1
            continue
        duration = ref.span.duration() if ref.span.valid else 0.0
        genuine = ref.speaker == speaker
        accepted = labels_by_idx[i] == speaker
        if genuine:
            ref_dur[m.file_id] = ref_dur.get(m.file_id, 0.0) + duration
            if not accepted:
                fn_dur[m.file_id] = fn_dur.get(m.file_id, 0.0) + duration
        elif accepted:
            fp_dur[m.file_id] = fp_dur.get(m.file_id, 0.0) + duration
    if unmatched:
        logger.warning("%d test segments had no reference row; excluded from IER", unmatched)

    fids = sorted(set(ref_dur) | set(fn_dur) | set(fp_dur), key=_natural_key)
    rows = []
    for fid in fids:
        if ref_dur.get(fid, 0.0) > 0:
            value = metrics.ier(fn_dur.get(fid, 0.0), fp_dur.get(fid, 0.0), ref_dur[fid])
            rows.append((fid, "SID IER (%)", 100.0 * value))
    total_ref = sum(ref_dur.values())
    summary = {
        "fn_duration": sum(fn_dur.values()),
        "fp_duration": sum(fp_dur.values()),
        "total_ref_duration": total_ref,
        "unmatched_segments": unmatched,
    }
    if total_ref > 0:
        overall = metrics.ier(sum(fn_dur.values()), sum(fp_dur.values()), total_ref)
        rows.append(("Overall", "SID IER (%)", 100.0 * overall))
        summary["ier"] = overall
    return rows, summary


def _cmd_lid_train(args, cfg: RunConfig) -> _Run:
    embeddings = formats.read_embeddings(args.embeddings.read_bytes())
    labels_csv = formats.parse_segments_csv(_read_text(args.labels), "LID", strict=True)
    by_key = {}
    for r in labels_csv:
        by_key[(r.file_id, repr(r.span.start), repr(r.span.end))] = r.language
    y = []
    for m in embeddings.meta:
        key = (m.file_id, repr(m.span.start), repr(m.span.end))
        if key not in by_key or by_key[key] is None:
            raise formats.FormatError(f"no language label for chunk {key}")
        y.append(by_key[key])
    allowed = set(cfg.languages) | {"other"}
    unknown = sorted(set(y) - allowed)
    if unknown:
        raise formats.FormatError(
            f"labels {unknown} are outside the configured language set {sorted(allowed)}; "
            "extend 'languages' in the config to train on them"
        )
    model = lid.train(embeddings, y, l2=args.l2, tol=args.tol, max_iter=args.max_iter, seed=cfg.seed)

    run = _Run(Path(cfg.out), "lid-train")
    run.add("model.lrm", lid.save_model(model))
    run.add(
        "summary.json",
        json.dumps(
            {
                "classes": list(model.classes),
                "n_train": len(embeddings),
                "final_loss": model.losses[-1],
                "iterations": len(model.losses) - 1,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    return run


def _cmd_lid_predict(args, cfg: RunConfig) -> _Run:
    embeddings = formats.read_embeddings(args.embeddings.read_bytes())
    model = lid.load_model(args.model.read_bytes())
    predictions = lid.predict_segments(model, embeddings)
    run = _Run(Path(cfg.out), "lid-predict")
    run.add(
        "predictions.csv",
        formats.write_segments_csv(
            predictions,
            "LID",
            extras={"Confidence": [f"{p.confidence:.6f}" for p in predictions]},
        ),
    )
    return run


def _cmd_textprep(args, cfg: RunConfig) -> _Run:
    rows = formats.parse_segments_csv(_read_text(args.asr), "ASR")
    pa_keys = set()
    if args.lid:
        for r in formats.parse_segments_csv(_read_text(args.lid), "LID"):
            if r.language == "pa":
                pa_keys.add((r.file_id, repr(r.span.start), repr(r.span.end)))

    out_rows = []
    langs = []
    routes = []
    beams = []
    n_transliterated = 0
    n_unmapped = 0
    for row in formats.canonical_order(rows):
        text = row.text or ""
        if args.transliterate:
            guided = not args.lid or (row.file_id, repr(row.span.start), repr(row.span.end)) in pa_keys
            if guided and text:
                result = textproc.transliterate_deva_to_guru(text)
                if result.text != text:
                    n_transliterated += 1
                n_unmapped += sum(result.unmapped.values())
                text = result.text
        base = formats.SegmentRecord(
            file_id=row.file_id,
            span=row.span,
            text=text or None,
            language=row.language,
            invalid_reason=row.invalid_reason,
        )
        pieces = textproc.split_code_switched(base) if base.text else [base]
        for piece in pieces:
            out_rows.append(piece)
            lang = piece.language
            if piece.text:
                spans = textproc.detect_script_spans(piece.text)
                if len(spans) == 1:
                    lang = textproc.SCRIPT_TO_LANGUAGE.get(spans[0].script, lang)
            langs.append(lang or "")
            if lang in ("hi", "pa", "en"):
                route = textproc.route_translator(lang)
                routes.append(route.route)
                beams.append(str(route.beam))
            else:
                routes.append("")
                beams.append("")

    run = _Run(Path(cfg.out), "textprep")
    run.add(
        "prep.csv",
        formats.write_segments_csv(
            out_rows, "ASR", extras={"Language": langs, "Route": routes, "Beam": beams}
        ),
    )
    run.add(
        "summary.json",
        json.dumps(
            {
                "rows_in": len(rows),
                "rows_out": len(out_rows),
                "transliterated_rows": n_transliterated,
                "unmapped_codepoints": n_unmapped,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    return run


def _spans_by_file(records: list[formats.SegmentRecord]) -> dict[str, list[formats.TimeSpan]]:
    grouped: dict[str, list[formats.TimeSpan]] = {}
    for r in formats.canonical_order(records):
        grouped.setdefault(r.file_id, []).append(r.span)
    return grouped


def _cmd_score_sad(args, cfg: RunConfig) -> _Run:
    ref = formats.parse_segments_csv(_read_text(args.ref), "SAD", strict=True)
    hyp = formats.parse_segments_csv(_read_text(args.hyp), "SAD", strict=True)
    ref_by_file = _spans_by_file(ref)
    hyp_by_file = _spans_by_file(hyp)

    fids = sorted(set(ref_by_file) | set(hyp_by_file), key=_natural_key)

    def score_one(fid: str) -> metrics.SadReport:
        ref_spans = ref_by_file.get(fid, [])
        hyp_spans = hyp_by_file.get(fid, [])
        total = max((s.end for s in (*ref_spans, *hyp_spans)), default=0.0)
        ref_tl = segmenter.rasterize([(s, "speech") for s in ref_spans], cfg.frame, total)
        hyp_tl = segmenter.rasterize([(s, "speech") for s in hyp_spans], cfg.frame, total)
        return metrics.sad_frame_metrics(ref_tl, hyp_tl)

    reports = _parallel_map(score_one, fids, cfg.jobs)
    rows = [(fid, args.metric_name, 100.0 * rep.accuracy) for fid, rep in zip(fids, reports)]
    pooled = metrics.sad_report_from_counts(
        tp=sum(r.tp for r in reports),
        fp=sum(r.fp for r in reports),
        fn=sum(r.fn for r in reports),
        tn=sum(r.tn for r in reports),
    )
    rows.append(("Overall", args.metric_name, 100.0 * pooled.accuracy))

    header = "File,Precision,Recall,F1,Miss,FA,FAalt,Accuracy"
    detail = [header]
    for fid, rep in [*zip(fids, reports), ("Overall", pooled)] if fids else [("Overall", pooled)]:
        detail.append(
            f"{fid},{rep.precision:.4f},{rep.recall:.4f},{rep.f1:.4f},"
            f"{rep.miss_rate:.4f},{rep.fa_rate:.4f},{rep.fa_rate_alt:.4f},{rep.accuracy:.4f}"
        )

    run = _Run(Path(cfg.out), "score-sad")
    run.add("metrics.csv", _metrics_csv(rows))
    run.add("sad_report.csv", "\n".join(detail) + "\n")
    return run


def _cmd_score_der(args, cfg: RunConfig) -> _Run:
    ref = formats.parse_rttm(_read_text(args.ref))
    hyp = formats.parse_rttm(_read_text(args.hyp))
    ref_by_file: dict[str, list[formats.RttmRecord]] = {}
    hyp_by_file: dict[str, list[formats.RttmRecord]] = {}
    for r in ref:
        ref_by_file.setdefault(r.file_id, []).append(r)
    for r in hyp:
        hyp_by_file.setdefault(r.file_id, []).append(r)

    fids = sorted(ref_by_file, key=_natural_key)
    extra = sorted(set(hyp_by_file) - set(ref_by_file))
    if extra:
        logger.warning("hypothesis files with no reference are not scored: %s", extra)

    def score_one(fid: str) -> metrics.DerBreakdown:
        return metrics.der(ref_by_file[fid], hyp_by_file.get(fid, []), cfg.frame, cfg.collar)

    reports = _parallel_map(score_one, fids, cfg.jobs)
    rows = [(fid, args.metric_name, 100.0 * rep.der) for fid, rep in zip(fids, reports)]
    total_ref = sum(r.total_ref for r in reports)
    if total_ref > 0:
        pooled = (
            sum(r.missed for r in reports)
            + sum(r.false_alarm for r in reports)
            + sum(r.confusion for r in reports)
        ) / total_ref
        rows.append(("Overall", args.metric_name, 100.0 * pooled))

    detail = ["File,Missed,FalseAlarm,Confusion,TotalRef,DER"]
    for fid, rep in zip(fids, reports):
        detail.append(
            f"{fid},{rep.missed:.4f},{rep.false_alarm:.4f},{rep.confusion:.4f},"
            f"{rep.total_ref:.4f},{rep.der:.6f}"
        )

    run = _Run(Path(cfg.out), "score-der")
    run.add("metrics.csv", _metrics_csv(rows))
    run.add("der_breakdown.csv", "\n".join(detail) + "\n")
    return run


def _cmd_score_wer(args, cfg: RunConfig) -> _Run:
    ref = formats.parse_segments_csv(_read_text(args.ref), "ASR")
    hyp = formats.parse_segments_csv(_read_text(args.hyp), "ASR")
    per_file, micro_file = metrics.wer_file_level(ref, hyp)
    micro_seg, n_valid, n_total = metrics.wer_segment_level(ref, hyp)

    rows = []
    for fid in sorted(per_file, key=_natural_key):
        value = per_file[fid]
        if math.isfinite(value):
            rows.append((fid, args.metric_name, 100.0 * value))
    rows.append(("Overall", args.metric_name, 100.0 * micro_file))

    run = _Run(Path(cfg.out), "score-wer")
    run.add("metrics.csv", _metrics_csv(rows))
    run.add(
        "summary.json",
        json.dumps(
            {
                "wer_file_micro": micro_file,
                "wer_segment_micro": micro_seg,
                "segments_valid": n_valid,
                "segments_total": n_total,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    return run


def _cmd_score_bleu(args, cfg: RunConfig) -> _Run:
    ref = formats.parse_segments_csv(_read_text(args.ref), "NMT")
    hyp = formats.parse_segments_csv(_read_text(args.hyp), "NMT")
    hyp_by_key = {(r.file_id, repr(r.span.start), repr(r.span.end)): r for r in hyp}

    refs, hyps, fids = [], [], []
    unmatched = 0
    for r in formats.canonical_order(ref):
        match = hyp_by_key.get((r.file_id, repr(r.span.start), repr(r.span.end)))
        if match is None:
            unmatched += 1
            continue
        refs.append(textproc.tokenize(r.translation or "", "bleu"))
        hyps.append(textproc.tokenize(match.translation or "", "bleu"))
        fids.append(r.file_id)
    if unmatched:
        logger.warning("%d reference rows had no hypothesis row; excluded from BLEU", unmatched)
    if not refs:
        raise formats.FormatError("no aligned reference/hypothesis rows to score")

    corpus = metrics.bleu(refs, hyps, mode="corpus")
    per_file = metrics.bleu(refs, hyps, mode="per_file", file_ids=fids)

    rows = [
        (fid, args.metric_name, report.bleu)
        for fid, report in sorted(per_file.per_file.items(), key=lambda kv: _natural_key(kv[0]))
    ]
    rows.append(("Overall", args.metric_name, corpus.bleu))

    run = _Run(Path(cfg.out), "score-bleu")
    run.add("metrics.csv", _metrics_csv(rows))
    run.add(
        "summary.json",
        json.dumps(
            {
                "corpus_bleu": corpus.bleu,
                "precisions": list(corpus.precisions),
                "brevity_penalty": corpus.bp,
                "ref_len": corpus.ref_len,
                "hyp_len": corpus.hyp_len,
                "mean_file_bleu": per_file.bleu,
                "aligned_rows": len(refs),
            },
            indent=2,
            sort_keys=True,
        )
        + "\n",
    )
    return run


def _cmd_report(args, cfg: RunConfig) -> _Run:
    columns: list[str] = []
    table: dict[str, dict[str, str]] = {}
    for path in args.metrics:
        for lineno, line in enumerate(_read_text(path).splitlines()):
            if lineno == 0:
                if line.strip() != "File,Metric,Value":
                    raise formats.FormatError(f"{path} is not a metrics CSV (File,Metric,Value)")
                continue
            if not line.strip():
                continue
            fid, metric, value = next(iter(_csv_rows(line)))
            if metric not in columns:
                columns.append(metric)
            table.setdefault(fid, {})[metric] = value

    fids = sorted((f for f in table if f != "Overall"), key=_natural_key)
    if "Overall" in table:
        fids.append("Overall")

    csv_lines = ["File," + ",".join(f'"{c}"' for c in columns)]
    for fid in fids:
        csv_lines.append(fid + "," + ",".join(table[fid].get(c, "") for c in columns))

    widths = [max(len("File"), *(len(f) for f in fids))] if fids else [len("File")]
    for c in columns:
        widths.append(max(len(c), *(len(table[f].get(c, "-")) for f in fids)) if fids else len(c))
    header_cells = ["File", *columns]
    txt_lines = ["  ".join(cell.ljust(w) for cell, w in zip(header_cells, widths)).rstrip()]
    txt_lines.append("  ".join("-" * w for w in widths))
    for fid in fids:
        cells = [fid, *(table[fid].get(c, "-") for c in columns)]
        txt_lines.append("  ".join(cell.ljust(w) for cell, w in zip(cells, widths)).rstrip())

    run = _Run(Path(cfg.out), "report")
    run.add("report.csv", "\n".join(csv_lines) + "\n")
    run.add("report.txt", "\n".join(txt_lines) + "\n")
    return run


def _csv_rows(text: str):
    import csv as _csv
    import io as _io

    yield from _csv.reader(_io.StringIO(text))


_COMMANDS = {
    "segment": _cmd_segment,
    "cluster": _cmd_cluster,
    "sid": _cmd_sid,
    "lid-train": _cmd_lid_train,
    "lid-predict": _cmd_lid_predict,
    "textprep": _cmd_textprep,
    "score-sad": _cmd_score_sad,
    "score-der": _cmd_score_der,
    "score-wer": _cmd_score_wer,
    "score-bleu": _cmd_score_bleu,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_VALIDATION
    try:
        cfg = _merge_config(args)
        run = _COMMANDS[args.command](args, cfg)
        out_dir = run.flush()
    except (formats.FormatError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO
    sys.stdout.write(f"{out_dir}\n")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
