"""Encoder resolution, export guarantees, CLI, and cross-package interop."""

from __future__ import annotations

import hashlib
import json
import os
import subprocess
import sys
import textwrap
from importlib.util import find_spec
from pathlib import Path

import numpy as np
import pytest

from clap_exporter import (
    EncoderShapeError,
    ExportJob,
    ExporterError,
    HashEncoder,
    MissingCheckpointError,
    export,
    load_clip,
    load_split,
    resolve_checksum,
    resolve_encoder,
)
from clap_exporter.cli import main
from clap_exporter.export import _group_ids


class TestHashEncoder:
    def test_text_rows_are_deterministic_and_distinct(self):
        captions = ["a dog barks", "rain on a tin roof"]
        first = HashEncoder(8).encode_text(captions)
        second = HashEncoder(8).encode_text(captions)
        np.testing.assert_array_equal(first, second)
        assert first.shape == (2, 8)
        assert np.linalg.norm(first[0] - first[1]) > 0.1

    def test_audio_rows_keyed_on_content_and_rate(self):
        encoder = HashEncoder(8)
        wave_a = np.linspace(-0.5, 0.5, 100)
        wave_b = wave_a.copy()
        wave_b[3] += 0.01
        rows = encoder.encode_audio([wave_a, wave_a, wave_b], [16000, 8000, 16000])
        np.testing.assert_array_equal(
            rows[0], encoder.encode_audio([wave_a], [16000])[0]
        )
        assert np.linalg.norm(rows[0] - rows[1]) > 0.1  # same wave, other rate
        assert np.linalg.norm(rows[0] - rows[2]) > 0.1  # perturbed wave

    def test_rejects_tiny_width(self):
        with pytest.raises(MissingCheckpointError):
            HashEncoder(1)


class TestResolveEncoder:
    def test_toy_ids(self):
        assert resolve_encoder("toy").embedding_dim == 32
        assert resolve_encoder("toy:512").embedding_dim == 512

    def test_bad_toy_width(self):
        with pytest.raises(MissingCheckpointError):
            resolve_encoder("toy:many")

    def test_unknown_scheme(self):
        with pytest.raises(MissingCheckpointError, match="unknown checkpoint"):
            resolve_encoder("htsat-bert-zs")

    def test_bare_weights_file_needs_a_factory(self, tmp_path):
        weights = tmp_path / "model.pt"
        weights.write_bytes(b"\x00" * 16)
        with pytest.raises(MissingCheckpointError, match="module:"):
            resolve_encoder(str(weights))

    def test_module_factory_round_trip(self, tmp_path, monkeypatch):
        module_file = tmp_path / "adapter_mod.py"
        module_file.write_text(
            textwrap.dedent(
                """
                import numpy as np

                class Fixed:
                    embedding_dim = 4
                    def encode_text(self, captions):
                        return np.ones((len(captions), 4))
                    def encode_audio(self, waveforms, rates):
                        return np.full((len(waveforms), 4), 2.0)

                def build():
                    return Fixed()
                """
            )
        )
        monkeypatch.syspath_prepend(str(tmp_path))
        encoder = resolve_encoder("module:adapter_mod:build")
        assert encoder.embedding_dim == 4
        np.testing.assert_array_equal(encoder.encode_text(["x"]), np.ones((1, 4)))

    def test_module_errors(self, tmp_path, monkeypatch):
        monkeypatch.syspath_prepend(str(tmp_path))
        with pytest.raises(MissingCheckpointError, match="malformed"):
            resolve_encoder("module:only_path")
        with pytest.raises(MissingCheckpointError, match="cannot import"):
            resolve_encoder("module:no_such_mod_xyz:build")
        (tmp_path / "empty_mod.py").write_text("")
        with pytest.raises(MissingCheckpointError, match="no attribute"):
            resolve_encoder("module:empty_mod:build")


class TestResolveChecksum:
    def test_file_checksum(self, tmp_path):
        weights = tmp_path / "w.bin"
        weights.write_bytes(b"weights!")
        expected = hashlib.sha256(b"weights!").hexdigest()
        assert resolve_checksum(str(weights)) == expected
        assert resolve_checksum(f"module:m:f:{weights}") == expected

    def test_no_file_means_none(self):
        assert resolve_checksum("toy:16") is None
        assert resolve_checksum("module:m:f") is None


class TestExport:
    def test_smoke_shapes_order_and_metadata(self, smoke_root, tmp_path):
        out = tmp_path / "out"
        manifest_path = export(
            ExportJob(
                checkpoint="toy:16",
                dataset_root=smoke_root,
                split="development",
                out_dir=out,
            )
        )
        assert manifest_path == out / "manifest.json"
        text = np.load(out / "text.npy")
        audio = np.load(out / "audio.npy")
        assert text.shape == (15, 16) and text.dtype == np.dtype("<f4")
        assert audio.shape == (3, 16) and audio.dtype == np.dtype("<f4")
        # raw encoder outputs: nothing is normalized
        assert np.abs(np.linalg.norm(text, axis=1) - 1.0).min() > 0.1

        manifest = json.loads(manifest_path.read_text())
        assert manifest["group_ids"] == {"captions_per_item": 5, "num_items": 3}
        assert len(manifest["texts"]) == 15
        meta = manifest["export"]
        assert meta["checkpoint"] == "toy:16"
        assert meta["checkpoint_sha256"] is None
        assert meta["embedding_dim"] == 16
        assert meta["n_items"] == 3 and meta["n_captions"] == 15

    def test_rows_match_encoder_outputs_in_dataset_order(self, smoke_root, tmp_path):
        out = tmp_path / "out"
        export(
            ExportJob(
                checkpoint="toy:16",
                dataset_root=smoke_root,
                split="development",
                out_dir=out,
                batch_size=2,  # exercise batching across caption blocks
            )
        )
        clips = load_split(smoke_root, "development")
        encoder = HashEncoder(16)
        captions = [c for clip in clips for c in clip.captions]
        expected_text = encoder.encode_text(captions).astype("<f4")
        np.testing.assert_array_equal(np.load(out / "text.npy"), expected_text)

        waveforms, rates = [], []
        for clip in clips:
            waveform, rate = load_clip(clip.path, 10.0)
            waveforms.append(waveform)
            rates.append(rate)
        expected_audio = encoder.encode_audio(waveforms, rates).astype("<f4")
        np.testing.assert_array_equal(np.load(out / "audio.npy"), expected_audio)

    def test_reexport_is_byte_identical(self, smoke_root, tmp_path):
        job_a = ExportJob("toy:16", smoke_root, "development", tmp_path / "a")
        job_b = ExportJob("toy:16", smoke_root, "development", tmp_path / "b")
        export(job_a)
        export(job_b)
        for name in ("text.npy", "audio.npy", "manifest.json"):
            assert (tmp_path / "a" / name).read_bytes() == (
                tmp_path / "b" / name
            ).read_bytes()

    def test_f64_precision(self, smoke_root, tmp_path):
        out = tmp_path / "out"
        export(ExportJob("toy:8", smoke_root, "development", out, precision="f64"))
        assert np.load(out / "text.npy").dtype == np.dtype("<f8")

    def test_wrong_encoder_width_is_rejected(self, smoke_root, tmp_path, monkeypatch):
        module_file = tmp_path / "liar_mod.py"
        module_file.write_text(
            textwrap.dedent(
                """
                import numpy as np

                class Liar:
                    embedding_dim = 8  # returns width 4 instead
                    def encode_text(self, captions):
                        return np.ones((len(captions), 4))
                    def encode_audio(self, waveforms, rates):
                        return np.ones((len(waveforms), 4))

                def build():
                    return Liar()
                """
            )
        )
        monkeypatch.syspath_prepend(str(tmp_path))
        with pytest.raises(EncoderShapeError, match="advertised width 8"):
            export(
                ExportJob("module:liar_mod:build", smoke_root, "development", tmp_path / "o")
            )

    def test_job_validation(self, smoke_root, tmp_path):
        with pytest.raises(ExporterError):
            ExportJob("toy", smoke_root, "development", tmp_path, crop_seconds=0.0)
        with pytest.raises(ExporterError):
            ExportJob("toy", smoke_root, "development", tmp_path, batch_size=0)
        with pytest.raises(ExporterError):
            ExportJob("toy", smoke_root, "development", tmp_path, precision="f16")

    def test_ragged_caption_counts_expand_to_explicit_ids(self):
        from clap_exporter.dataset import CaptionedClip

        clips = [
            CaptionedClip("a", Path("a"), ("one",)),
            CaptionedClip("b", Path("b"), ("two", "three")),
        ]
        assert _group_ids(clips) == [0, 1, 1]


class TestCli:
    def test_in_process_success(self, smoke_root, tmp_path, capsys):
        code = main(
            [
                "--checkpoint", "toy:16",
                "--dataset", str(smoke_root),
                "--split", "development",
                "--out", str(tmp_path / "out"),
            ]
        )
        assert code == 0
        assert "manifest.json" in capsys.readouterr().out
        assert (tmp_path / "out" / "text.npy").exists()

    def test_domain_error_exit_code(self, tmp_path, capsys):
        code = main(
            [
                "--checkpoint", "toy",
                "--dataset", str(tmp_path / "missing"),
                "--split", "development",
                "--out", str(tmp_path / "out"),
            ]
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error: MissingDatasetError")

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["--checkpoint", "toy"])
        assert excinfo.value.code == 2

    def test_console_script_subprocess(self, smoke_root, tmp_path):
        proc = subprocess.run(
            [
                sys.executable, "-m", "clap_exporter.cli",
                "--checkpoint", "toy:16",
                "--dataset", str(smoke_root),
                "--split", "development",
                "--out", str(tmp_path / "out"),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert (tmp_path / "out" / "manifest.json").exists()


@pytest.mark.skipif(find_spec("comet") is None, reason="comet not installed")
class TestPrimaryInterop:
    """The produced manifest must be consumable through the primary's own
    public surface (CLI + loader), with no code shared between packages."""

    def test_manifest_loads_without_warnings(self, smoke_root, tmp_path):
        out = tmp_path / "out"
        manifest = export(ExportJob("toy:16", smoke_root, "development", out))
        proc = subprocess.run(
            [
                sys.executable,
                "-W", "error",
                "-c",
                "import sys; from comet import load_dataset; "
                "d = load_dataset(sys.argv[1]); "
                "assert d.n == 15 and d.n_groups == 3 and d.dim == 16",
                str(manifest),
            ],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr

    def test_fit_and_retrieve_consume_the_export(self, smoke_root, tmp_path):
        out = tmp_path / "out"
        manifest = export(ExportJob("toy:16", smoke_root, "development", out))
        model = tmp_path / "model"
        fit = subprocess.run(
            [
                sys.executable, "-m", "comet.cli",
                "fit", "--dataset", str(manifest), "--out", str(model),
            ],
            capture_output=True,
            text=True,
        )
        assert fit.returncode == 0, fit.stderr
        metrics = tmp_path / "metrics.json"
        retrieve = subprocess.run(
            [
                sys.executable, "-m", "comet.cli",
                "retrieve", "--dataset", str(manifest),
                "--model", str(model), "--repr", "plshead", "--k", "4",
                "--out", str(metrics),
            ],
            capture_output=True,
            text=True,
        )
        assert retrieve.returncode == 0, retrieve.stderr
        payload = json.loads(metrics.read_text())
        assert payload["metadata"]["n_groups"] == 3


_REAL_DATA_ENV = ("CLAP_CHECKPOINT", "CLOTHO_ROOT")


@pytest.mark.skipif(
    not all(os.environ.get(v) for v in _REAL_DATA_ENV),
    reason="real-data export needs CLAP_CHECKPOINT and CLOTHO_ROOT",
)
def test_real_checkpoint_export(tmp_path):
    """Real encoder over the development split: 1024-wide rows, 5 captions/clip."""
    out = tmp_path / "dev"
    code = main(
        [
            "--checkpoint", os.environ["CLAP_CHECKPOINT"],
            "--dataset", os.environ["CLOTHO_ROOT"],
            "--split", "development",
            "--out", str(out),
        ]
    )
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["export"]["embedding_dim"] == 1024
    assert manifest["group_ids"]["captions_per_item"] == 5
    text = np.load(out / "text.npy")
    assert text.shape[1] == 1024
