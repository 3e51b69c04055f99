"""End-to-end command-line workflows."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from comet import load_model, write_manifest, write_tensor
from comet.cli import main

from helpers import unit_rows


def run(*argv: str) -> int:
    return main(list(argv))


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """synth + fit once; everything downstream reads from here."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    model = root / "model"
    assert run("synth", "--preset", "aligned", "--out", str(data)) == 0
    manifest = data / "manifest.json"
    assert run("fit", "--dataset", str(manifest), "--out", str(model)) == 0
    return {"root": root, "data": data, "manifest": manifest, "model": model}


class TestSynth:
    def test_writes_tensors_truth_and_manifest(self, workspace):
        data = workspace["data"]
        for name in (
            "text.npy",
            "audio.npy",
            "manifest.json",
            "truth_u.npy",
            "truth_v.npy",
            "truth_spectrum.npy",
            "truth_t_mean.npy",
            "truth_a_mean.npy",
            "truth.json",
        ):
            assert (data / name).exists(), name
        truth_meta = json.loads((data / "truth.json").read_text())
        assert truth_meta["preset"] == "aligned"
        u = np.load(data / "truth_u.npy")
        assert np.max(np.abs(u.T @ u - np.eye(u.shape[1]))) <= 1e-10

    def test_manifest_loads_and_pairs(self, workspace):
        from comet import load_dataset

        dataset = load_dataset(workspace["manifest"])
        assert dataset.n == 2000 and dataset.dim == 64

    def test_unknown_preset_is_usage_error(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            run("synth", "--preset", "nope", "--out", str(tmp_path / "x"))
        assert excinfo.value.code == 2


class TestFit:
    def test_model_directory_passes_invariants(self, workspace):
        model = load_model(workspace["model"])
        C = model.dim
        assert np.max(np.abs(model.U.T @ model.U - np.eye(C))) <= 1e-10
        assert np.max(np.abs(model.V.T @ model.V - np.eye(C))) <= 1e-10
        assert np.all(np.diff(model.sigma) <= 1e-12) and np.all(model.sigma >= 0)
        assert model.n_train == 2000
        assert model.source_manifest == str(workspace["manifest"])

    def test_refit_is_byte_identical(self, workspace, tmp_path):
        again = tmp_path / "model2"
        assert run("fit", "--dataset", str(workspace["manifest"]), "--out", str(again)) == 0
        for name in ("t_mean.npy", "a_mean.npy", "U.npy", "V.npy", "sigma.npy", "model.json"):
            assert (again / name).read_bytes() == (workspace["model"] / name).read_bytes()

    def test_missing_dataset_fails_cleanly(self, tmp_path, capsys):
        code = run("fit", "--dataset", str(tmp_path / "no.json"), "--out", str(tmp_path / "m"))
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")


class TestDiagnose:
    def test_csv_schema_and_summary(self, workspace, tmp_path):
        out = tmp_path / "diag"
        assert (
            run(
                "diagnose",
                "--model",
                str(workspace["model"]),
                "--dataset",
                str(workspace["manifest"]),
                "--k",
                "8",
                "--out",
                str(out),
            )
            == 0
        )
        with open(out / "diagnostics.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "index",
            "sigma",
            "uv",
            "sqrt_cov",
            "std_t",
            "std_a",
            "corr",
            "net_useful",
        ]
        assert len(rows) == 1 + 64  # header + one row per direction
        assert [r[0] for r in rows[1:]] == [str(i) for i in range(64)]
        sigma = [float(r[1]) for r in rows[1:]]
        assert sigma == sorted(sigma, reverse=True)

        summary = json.loads((out / "summary.json").read_text())
        assert summary["dim"] == 64
        assert summary["k"] == 8
        assert summary["consistent_with_model"] is True
        assert summary["contributions"]["negative_sampling"].startswith("exact")
        assert len(summary["subspace_norms"]) == 3

    def test_rerun_is_byte_identical(self, workspace, tmp_path):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / tag
            assert (
                run(
                    "diagnose",
                    "--model",
                    str(workspace["model"]),
                    "--dataset",
                    str(workspace["manifest"]),
                    "--k",
                    "8",
                    "--out",
                    str(out),
                )
                == 0
            )
            outs.append(out)
        for name in ("diagnostics.csv", "summary.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


class TestCompress:
    def test_head_coefficients_shape(self, workspace, tmp_path):
        out = tmp_path / "coeffs.npy"
        assert (
            run(
                "compress",
                "--model",
                str(workspace["model"]),
                "--input",
                str(workspace["data"] / "text.npy"),
                "--modality",
                "text",
                "--k",
                "8",
                "--out",
                str(out),
            )
            == 0
        )
        coeffs = np.load(out)
        assert coeffs.shape == (2000, 8)

    def test_reconstruction_matches_input_shape(self, workspace, tmp_path):
        out = tmp_path / "recon.npy"
        assert (
            run(
                "compress",
                "--model",
                str(workspace["model"]),
                "--input",
                str(workspace["data"] / "audio.npy"),
                "--modality",
                "audio",
                "--k",
                "8",
                "--reconstruct",
                "--out",
                str(out),
            )
            == 0
        )
        recon = np.load(out)
        assert recon.shape == (2000, 64)

    def test_weighted_reconstruction_is_rejected(self, workspace, tmp_path, capsys):
        code = run(
            "compress",
            "--model",
            str(workspace["model"]),
            "--input",
            str(workspace["data"] / "audio.npy"),
            "--modality",
            "audio",
            "--k",
            "8",
            "--weighted",
            "--reconstruct",
            "--out",
            str(tmp_path / "x.npy"),
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")


class TestMap:
    @pytest.mark.parametrize(
        "method,needs",
        [
            ("es", "model"),
            ("ni", None),
            ("nnd", "bank"),
            ("pd", "bank"),
            ("linear-pd", "both"),
        ],
    )
    def test_each_method_emits_rows(self, workspace, tmp_path, method, needs):
        out = tmp_path / f"{method}.npy"
        argv = [
            "map",
            "--method",
            method,
            "--input",
            str(workspace["data"] / "audio.npy"),
            "--out",
            str(out),
        ]
        if needs in ("model", "both"):
            argv += ["--model", str(workspace["model"])]
        if needs in ("bank", "both"):
            argv += ["--bank", str(workspace["data"] / "text.npy")]
        assert run(*argv) == 0
        mapped = np.load(out)
        assert mapped.shape == (2000, 64)
        assert np.all(np.isfinite(mapped))
        if method != "ni":  # noise injection perturbs rows off the sphere
            np.testing.assert_allclose(
                np.linalg.norm(mapped, axis=1), np.ones(2000), atol=1e-9
            )

    def test_missing_bank_fails_cleanly(self, workspace, tmp_path, capsys):
        code = run(
            "map",
            "--method",
            "nnd",
            "--input",
            str(workspace["data"] / "audio.npy"),
            "--out",
            str(tmp_path / "x.npy"),
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")


class TestRetrieve:
    def test_identical_query_and_gallery_score_perfectly(self, tmp_path):
        rng = np.random.default_rng(44)
        rows = unit_rows(rng, 12, 6)
        write_tensor(tmp_path / "text.npy", rows)
        write_tensor(tmp_path / "audio.npy", rows)
        write_manifest(
            tmp_path / "m.json",
            name="identical",
            text="text.npy",
            audio="audio.npy",
            group_ids=list(range(12)),
        )
        out = tmp_path / "metrics.json"
        assert (
            run(
                "retrieve",
                "--dataset",
                str(tmp_path / "m.json"),
                "--repr",
                "raw",
                "--direction",
                "both",
                "--out",
                str(out),
            )
            == 0
        )
        payload = json.loads(out.read_text())
        for direction in ("text_to_audio", "audio_to_text"):
            result = payload["results"][direction]
            assert result["r_at_1"] == 100.0
            assert result["mean_rank"] == 1.0
            assert result["map_at_10"] == 100.0
        assert payload["k"] is None
        assert payload["metadata"]["map_at_10_denominator"] == "min(n_relevant, 10)"

    def test_head_representation_beats_chance_on_planted_data(
        self, workspace, tmp_path
    ):
        out = tmp_path / "metrics.json"
        assert (
            run(
                "retrieve",
                "--dataset",
                str(workspace["manifest"]),
                "--model",
                str(workspace["model"]),
                "--repr",
                "plshead",
                "--k",
                "8",
                "--direction",
                "t2a",
                "--out",
                str(out),
            )
            == 0
        )
        payload = json.loads(out.read_text())
        assert payload["results"]["text_to_audio"]["r_at_1"] > 50.0
        assert payload["k"] == 8

    def test_head_without_model_fails_cleanly(self, workspace, tmp_path, capsys):
        code = run(
            "retrieve",
            "--dataset",
            str(workspace["manifest"]),
            "--repr",
            "plshead",
            "--out",
            str(tmp_path / "x.json"),
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("error:")

    def test_pca_representation_roundtrip(self, workspace, tmp_path):
        pca_dir = tmp_path / "pca"
        assert (
            run("pca", "--dataset", str(workspace["manifest"]), "--out", str(pca_dir))
            == 0
        )
        assert (pca_dir / "text" / "pca.json").exists()
        assert (pca_dir / "audio" / "pca.json").exists()
        out = tmp_path / "metrics.json"
        assert (
            run(
                "retrieve",
                "--dataset",
                str(workspace["manifest"]),
                "--repr",
                "pcahead",
                "--pca",
                str(pca_dir),
                "--k",
                "8",
                "--direction",
                "t2a",
                "--out",
                str(out),
            )
            == 0
        )
        payload = json.loads(out.read_text())
        assert payload["representation"] == "pcahead"


class TestPdVerify:
    def test_report_shape_and_directionality(self, workspace, tmp_path):
        out = tmp_path / "pd.json"
        assert (
            run(
                "pd-verify",
                "--model",
                str(workspace["model"]),
                "--dataset",
                str(workspace["manifest"]),
                "--bank",
                str(workspace["data"] / "text.npy"),
                "--k",
                "8",
                "--out",
                str(out),
            )
            == 0
        )
        payload = json.loads(out.read_text())
        for key in (
            "cos_mean_before",
            "cos_mean_after",
            "dist_mean_before",
            "dist_mean_after",
            "head_cos_mean",
            "tail_cos_mean",
            "head_cos_mean_nnd",
            "bank_size",
        ):
            assert key in payload, key
        assert payload["cos_mean_after"] > payload["cos_mean_before"]
        assert payload["k"] == 8


class TestTopLevel:
    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run("--version")
        assert excinfo.value.code == 0
        assert "comet" in capsys.readouterr().out

    def test_unknown_subcommand_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            run("frobnicate")
        assert excinfo.value.code == 2

    def test_threads_flag_is_accepted(self, workspace, tmp_path):
        assert (
            run(
                "--threads",
                "1",
                "fit",
                "--dataset",
                str(workspace["manifest"]),
                "--out",
                str(tmp_path / "m"),
            )
            == 0
        )

    def test_reference_defaults_pin_tau(self, workspace, tmp_path):
        pinned = tmp_path / "pinned.npy"
        explicit = tmp_path / "explicit.npy"
        base = [
            "map",
            "--method",
            "pd",
            "--input",
            str(workspace["data"] / "audio.npy"),
            "--bank",
            str(workspace["data"] / "text.npy"),
        ]
        assert run(*base, "--reference-defaults", "--out", str(pinned)) == 0
        assert run(*base, "--tau", "0.01", "--out", str(explicit)) == 0
        assert pinned.read_bytes() == explicit.read_bytes()
