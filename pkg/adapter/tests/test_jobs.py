"""Adapter jobs and CLI: backends, format fidelity, error paths."""

import json

import numpy as np
import pytest

from diarkit import formats
from diarkit_adapter import AdapterJob, MissingModelError, run_job
from diarkit_adapter.backends import energy_vad, fbank_stats_embedding, require_available
from diarkit_adapter.cli import main as adapter_main

from conftest import silence_wav, tone_burst_wav


class TestBackendRegistry:
    def test_pretrained_defaults_report_missing(self):
        for task, job in [
            ("vad", AdapterJob(task="vad")),
            ("embed-speaker", AdapterJob(task="embed-speaker")),
            ("asr", AdapterJob(task="asr")),
            ("translate", AdapterJob(task="translate")),
        ]:
            with pytest.raises(MissingModelError, match="not available locally"):
                require_available(task, job.resolved_model)

    def test_local_backends_accepted(self):
        assert require_available("vad", "energy") == "energy"
        assert require_available("embed-lang", "fbank-stats") == "fbank-stats"

    def test_unknown_task(self):
        with pytest.raises(ValueError):
            require_available("diarize", "energy")


class TestEnergyVad:
    def test_silence_has_no_spans(self):
        assert energy_vad(np.zeros(16_000, dtype=np.float32), 16_000) == []

    def test_bursts_found(self, tmp_path):
        rate = 16_000
        t = np.arange(3 * rate) / rate
        samples = np.zeros_like(t, dtype=np.float64)
        for start, end in ((0.2, 1.0), (1.6, 2.4)):
            inside = (t >= start) & (t < end)
            samples[inside] = 0.3 * np.sin(2 * np.pi * 440 * t[inside])
        spans = energy_vad(samples.astype(np.float32), rate)
        assert len(spans) == 2
        assert abs(spans[0][0] - 0.2) < 0.05 and abs(spans[0][1] - 1.0) < 0.05
        assert abs(spans[1][0] - 1.6) < 0.05 and abs(spans[1][1] - 2.4) < 0.05


class TestFbankEmbedding:
    def test_dimension_and_determinism(self, rng):
        samples = rng.normal(0, 0.1, 16_000).astype(np.float32)
        a = fbank_stats_embedding(samples, 16_000)
        b = fbank_stats_embedding(samples, 16_000)
        assert a.shape == (192,)
        assert np.array_equal(a, b)
        assert np.all(np.isfinite(a))

    def test_short_input_padded(self):
        vec = fbank_stats_embedding(np.zeros(10, dtype=np.float32), 16_000)
        assert vec.shape == (192,) and np.all(np.isfinite(vec))

    def test_distinguishes_tones(self):
        rate = 16_000
        t = np.arange(rate) / rate
        low = fbank_stats_embedding(np.sin(2 * np.pi * 200 * t).astype(np.float32), rate)
        high = fbank_stats_embedding(np.sin(2 * np.pi * 3000 * t).astype(np.float32), rate)
        assert np.linalg.norm(low - high) > 1.0


def _manifest(tmp_path, rows):
    path = tmp_path / "windows.csv"
    path.write_text(formats.write_segments_csv(rows, "SAD"))
    return path


class TestVadJob:
    def test_silence_gives_empty_body(self, tmp_path):
        wav = silence_wav(tmp_path / "quiet.wav")
        artifacts = run_job(AdapterJob(task="vad", audio=(wav,), model="energy"))
        rows = formats.parse_segments_csv(artifacts["sad.csv"], "SAD", strict=True)
        assert rows == []
        assert artifacts["sad.csv"].splitlines() == ["AudioFileName,StartTS,EndTS"]

    def test_bursts_give_rows(self, tmp_path):
        wav = tone_burst_wav(tmp_path / "talk.wav")
        artifacts = run_job(AdapterJob(task="vad", audio=(wav,), model="energy"))
        rows = formats.parse_segments_csv(artifacts["sad.csv"], "SAD", strict=True)
        assert len(rows) == 2
        assert all(r.file_id == "talk.wav" and r.valid for r in rows)

    def test_default_model_missing(self, tmp_path):
        wav = silence_wav(tmp_path / "q.wav")
        with pytest.raises(MissingModelError):
            run_job(AdapterJob(task="vad", audio=(wav,)))


class TestEmbedJob:
    def test_count_matches_manifest_and_boundaries_exact(self, tmp_path):
        wav = tone_burst_wav(tmp_path / "talk.wav", rate=44_100)
        rows = [
            formats.SegmentRecord("talk.wav", formats.TimeSpan(0.2 + 0.5 * i, 1.2 + 0.5 * i))
            for i in range(4)
        ]
        manifest = _manifest(tmp_path, rows)
        artifacts = run_job(
            AdapterJob(task="embed-speaker", audio=(wav,), manifest=manifest, model="fbank-stats")
        )
        embeddings = formats.read_embeddings(artifacts["embeddings.semb"])
        assert len(embeddings) == len(rows)
        assert embeddings.dim == 192
        got = [(m.file_id, repr(m.span.start), repr(m.span.end)) for m in embeddings.meta]
        want = [(r.file_id, repr(r.span.start), repr(r.span.end)) for r in rows]
        assert got == want

    def test_missing_audio_named(self, tmp_path):
        wav = tone_burst_wav(tmp_path / "talk.wav")
        manifest = _manifest(
            tmp_path, [formats.SegmentRecord("other.wav", formats.TimeSpan(0.0, 1.0))]
        )
        with pytest.raises(formats.FormatError, match="other.wav"):
            run_job(AdapterJob(task="embed-speaker", audio=(wav,), manifest=manifest, model="fbank-stats"))


DEVA = "सत श्री"
GURU = "ਸਤ ਸ਼੍ਰੀ"


class TestAsrJob:
    def test_silence_backend_empty_transcripts(self, tmp_path):
        wav = tone_burst_wav(tmp_path / "talk.wav")
        rows = [formats.SegmentRecord("talk.wav", formats.TimeSpan(0.0, 3.0))]
        artifacts = run_job(
            AdapterJob(task="asr", audio=(wav,), manifest=_manifest(tmp_path, rows), model="silence")
        )
        parsed = formats.parse_segments_csv(artifacts["asr.csv"], "ASR", strict=True)
        assert len(parsed) == 1 and parsed[0].text is None

    def test_fixture_backend_with_pa_transliteration(self, tmp_path):
        wav = tone_burst_wav(tmp_path / "talk.wav")
        span = formats.TimeSpan(0.0, 3.0)
        manifest = _manifest(tmp_path, [formats.SegmentRecord("talk.wav", span)])
        fixture = tmp_path / "transcripts.csv"
        fixture.write_text(
            formats.write_segments_csv(
                [formats.SegmentRecord("talk.wav", span, text=DEVA)], "ASR"
            )
        )
        lid = tmp_path / "lid.csv"
        lid.write_text(
            formats.write_segments_csv(
                [formats.SegmentRecord("talk.wav", span, language="pa")], "LID"
            )
        )
        artifacts = run_job(
            AdapterJob(
                task="asr", audio=(wav,), manifest=manifest, model="fixture",
                fixture=fixture, lid=lid,
            )
        )
        parsed = formats.parse_segments_csv(artifacts["asr.csv"], "ASR", strict=True)
        assert parsed[0].text == GURU

    def test_fixture_without_lid_keeps_script(self, tmp_path):
        wav = tone_burst_wav(tmp_path / "talk.wav")
        span = formats.TimeSpan(0.0, 3.0)
        manifest = _manifest(tmp_path, [formats.SegmentRecord("talk.wav", span)])
        fixture = tmp_path / "transcripts.csv"
        fixture.write_text(
            formats.write_segments_csv([formats.SegmentRecord("talk.wav", span, text=DEVA)], "ASR")
        )
        artifacts = run_job(
            AdapterJob(task="asr", audio=(wav,), manifest=manifest, model="fixture", fixture=fixture)
        )
        parsed = formats.parse_segments_csv(artifacts["asr.csv"], "ASR")
        assert parsed[0].text == DEVA


class TestTranslateJob:
    def test_english_passthrough_and_identity_route(self, tmp_path):
        rows = [
            formats.SegmentRecord("a.wav", formats.TimeSpan(0.0, 2.0), text="hello there"),
            formats.SegmentRecord("a.wav", formats.TimeSpan(2.0, 4.0), text=DEVA),
            formats.SegmentRecord("a.wav", formats.TimeSpan(4.0, 6.0)),
        ]
        asr = tmp_path / "asr.csv"
        asr.write_text(formats.write_segments_csv(rows, "ASR"))
        artifacts = run_job(AdapterJob(task="translate", asr=asr, model="identity"))
        parsed = formats.parse_segments_csv(artifacts["nmt.csv"], "NMT", strict=True)
        assert len(parsed) == 3
        assert parsed[0].translation == "hello there"
        assert parsed[1].translation == DEVA
        assert parsed[2].translation is None

    def test_mixed_language_rows_split_and_merged(self, tmp_path):
        rows = [
            formats.SegmentRecord("a.wav", formats.TimeSpan(0.0, 4.0), text=f"ok {DEVA}")
        ]
        asr = tmp_path / "asr.csv"
        asr.write_text(formats.write_segments_csv(rows, "ASR"))
        artifacts = run_job(AdapterJob(task="translate", asr=asr, model="identity"))
        parsed = formats.parse_segments_csv(artifacts["nmt.csv"], "NMT", strict=True)
        assert len(parsed) == 1  # merged back to one row per input row
        assert "ok" in parsed[0].translation and "स" in parsed[0].translation


class TestCli:
    def test_vad_layout_and_manifest(self, tmp_path):
        wav = tone_burst_wav(tmp_path / "talk.wav")
        code = adapter_main(["vad", "--audio", str(wav), "--model", "energy", "--out", str(tmp_path / "o")])
        assert code == 0
        out = tmp_path / "o" / "vad"
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest == {"artifacts": ["sad.csv"], "command": "vad", "model": "energy"}
        assert (out / "sad.csv").exists()

    def test_missing_model_exit_code(self, tmp_path):
        wav = silence_wav(tmp_path / "q.wav")
        code = adapter_main(["vad", "--audio", str(wav), "--out", str(tmp_path / "o")])
        assert code == 3

    def test_undecodable_audio_exit_code(self, tmp_path):
        bogus = tmp_path / "x.ogg"
        bogus.write_bytes(b"OggS")
        code = adapter_main(["vad", "--audio", str(bogus), "--model", "energy", "--out", str(tmp_path / "o")])
        assert code == 1

    def test_missing_file_exit_code(self, tmp_path):
        code = adapter_main(
            ["vad", "--audio", str(tmp_path / "none.wav"), "--model", "energy", "--out", str(tmp_path / "o")]
        )
        assert code == 2

    def test_unknown_task_exits_one(self):
        with pytest.raises(SystemExit) as exc:
            adapter_main(["frobnicate"])
        assert exc.value.code == 1
