"""Command-line interface.

One executable, ``comet``, with focused subcommands:

* ``fit`` — fit the paired-direction model from a dataset manifest.
* ``diagnose`` — per-direction table (CSV) plus a summary report (JSON).
* ``compress`` — project embeddings to head coefficients (or reconstruct).
* ``map`` — apply a training-free audio-to-text gap mapper.
* ``retrieve`` — retrieval metrics under a chosen representation.
* ``pd-verify`` — measure how projection decoding moves an audio set.
* ``synth`` — generate a seeded synthetic dataset with planted structure.
* ``pca`` — fit per-modality PCA baselines for ``retrieve --repr pcahead``.

Exit codes: 0 on success, 1 on domain errors (bad data, shape mismatches,
I/O problems; a single explanatory line goes to stderr), 2 on usage errors.
All file outputs are written atomically and are byte-identical across reruns
of the same command on the same inputs.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io as _stdio
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .decomposition import (
    DEFAULT_HEAD_K,
    fit,
    fit_pca,
    load_model,
    load_pca,
    project,
    project_pca,
    reconstruct,
    reweight_head,
    save_model,
    save_pca,
    truncate_head,
)
from .diagnostics import (
    contribution_report,
    covariance_decomposition,
    per_direction_table,
    subspace_norms,
    top_items_by_direction,
)
from .errors import CometError
from .io import (
    EmbeddingMatrix,
    Modality,
    atomic_write_bytes,
    atomic_write_json,
    l2_normalize_rows,
    load_dataset,
    write_manifest,
    write_tensor,
)
from .io import _atomic_npy_write
from .mappers import (
    DEFAULT_NOISE_VARIANCE,
    DEFAULT_TAU,
    MemoryBank,
    embedding_shift,
    linear_pd,
    nnd_batch,
    noise_inject,
    pd_characterize,
    projection_decode,
)
from .retrieval import (
    MAP_DENOMINATOR,
    Direction,
    RetrievalMetrics,
    evaluate,
    protocol_from_arrays,
    similarity_matrix,
)
from .synthetic import PRESET_NAMES, generate, preset

# Pinned configuration of the published reference setup.
REFERENCE_K = 100
REFERENCE_TAU = 0.01
REFERENCE_NOISE_VARIANCE = 0.013


def _float_repr(x: float) -> str:
    """Shortest round-trip decimal form (deterministic across runs)."""
    return repr(float(x))


def _write_csv(path: Path, columns: dict[str, np.ndarray]) -> None:
    buf = _stdio.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    names = list(columns)
    writer.writerow(names)
    n = len(next(iter(columns.values())))
    for i in range(n):
        row = []
        for name in names:
            value = columns[name][i]
            if name == "index":
                row.append(str(int(value)))
            else:
                row.append(_float_repr(value))
        writer.writerow(row)
    atomic_write_bytes(path, buf.getvalue().encode("utf-8"))


def _metrics_dict(metrics: RetrievalMetrics) -> dict:
    return {
        "r_at_1": metrics.r_at[1],
        "r_at_5": metrics.r_at[5],
        "r_at_10": metrics.r_at[10],
        "r_at_50": metrics.r_at[50],
        "mean_rank": metrics.mean_rank,
        "median_rank": metrics.median_rank,
        "map_at_10": metrics.map_at_10,
        "n_queries": metrics.n_queries,
        "n_gallery": metrics.n_gallery,
    }


def _apply_reference_defaults(args: argparse.Namespace) -> None:
    if getattr(args, "reference_defaults", False):
        if hasattr(args, "k"):
            args.k = REFERENCE_K
        if hasattr(args, "tau"):
            args.tau = REFERENCE_TAU
        if hasattr(args, "variance"):
            args.variance = REFERENCE_NOISE_VARIANCE


def cmd_fit(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    model = fit(dataset)
    model = dataclasses.replace(model, source_manifest=str(args.dataset))
    save_model(model, args.out)
    print(f"fitted {model.dim}-direction model on {model.n_train} pairs -> {args.out}")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    _apply_reference_defaults(args)
    model = load_model(args.model)
    dataset = load_dataset(args.dataset)
    k = args.k
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    table = per_direction_table(model, dataset)
    _write_csv(out / "diagnostics.csv", table)

    decomp = covariance_decomposition(model, dataset)
    text_coeffs = project(model, dataset.text)
    audio_coeffs = project(model, dataset.audio)
    ranges = [(1, k), (1, model.dim)]
    if k < model.dim:
        ranges.insert(1, (k + 1, model.dim))
    norms = subspace_norms(ranges, text=text_coeffs, audio=audio_coeffs)
    report = contribution_report(model, dataset, k, seed=args.neg_seed)

    gap = model.a_mean - model.t_mean
    summary = {
        "dim": model.dim,
        "n_train": model.n_train,
        "n_rows": dataset.n,
        "n_groups": dataset.n_groups,
        "k": k,
        "consistent_with_model": decomp.consistent_with_model,
        "mean_gap_norm": float(np.linalg.norm(gap)),
        "subspace_norms": [
            {
                "range": list(s.index_range),
                "text": s.mean_norm_text,
                "audio": s.mean_norm_audio,
            }
            for s in norms
        ],
        "contributions": dataclasses.asdict(report),
        "net_useful_sum": float((model.sigma * table["uv"]).sum()),
        "reference_defaults": bool(args.reference_defaults),
        "tool_version": __version__,
    }
    if args.top_directions > 0:
        if dataset.texts is None:
            raise CometError(
                "dataset manifest has no caption strings; cannot attribute directions"
            )
        summary["top_items"] = {
            str(j): [
                {"text": text, "value": value}
                for text, value in top_items_by_direction(
                    model,
                    text_coeffs,
                    dataset.texts,
                    j,
                    top_k=args.top_k_items,
                    dedup_threshold=args.dedup_threshold,
                )
            ]
            for j in range(min(args.top_directions, model.dim))
        }
    atomic_write_json(out / "summary.json", summary)
    print(f"wrote {out / 'diagnostics.csv'} and {out / 'summary.json'}")
    return 0


def cmd_compress(args: argparse.Namespace) -> int:
    _apply_reference_defaults(args)
    model = load_model(args.model)
    modality = Modality(args.modality)
    matrix_in = _read_embeddings(args.input, modality)
    coeffs = project(model, matrix_in)
    if args.reconstruct:
        if args.weighted:
            raise CometError("--weighted cannot be combined with --reconstruct")
        out_matrix = reconstruct(model, coeffs, keep=args.k)
        write_tensor(args.out, out_matrix, precision=args.precision)
        print(f"reconstructed {out_matrix.n} x {out_matrix.dim} -> {args.out}")
        return 0
    head = truncate_head(coeffs, args.k)
    if args.weighted:
        head = reweight_head(model, head)
    _atomic_npy_write(Path(args.out), _as_precision(head.values, args.precision))
    print(f"wrote {head.n} x {head.width} coefficients -> {args.out}")
    return 0


def _as_precision(array: np.ndarray, precision: str) -> np.ndarray:
    dtype = {"f32": "<f4", "f64": "<f8"}[precision]
    return np.ascontiguousarray(array.astype(dtype))


def _read_embeddings(path: str, modality: Modality) -> EmbeddingMatrix:
    from .io import read_tensor

    return read_tensor(path, modality)


def cmd_map(args: argparse.Namespace) -> int:
    _apply_reference_defaults(args)
    batch = _read_embeddings(args.input, Modality.AUDIO)
    method = args.method
    if method in ("es", "linear-pd") and not args.model:
        raise CometError(f"--method {method} requires --model")
    if method in ("nnd", "pd", "linear-pd") and not args.bank:
        raise CometError(f"--method {method} requires --bank")

    if method == "es":
        model = load_model(args.model)
        out = embedding_shift(model.t_mean, model.a_mean, batch)
        data = out.data
    elif method == "ni":
        out = noise_inject(batch, variance=args.variance, seed=args.seed)
        data = out.data
    elif method == "nnd":
        bank = MemoryBank.from_matrix(
            _read_embeddings(args.bank, Modality.TEXT), source=str(args.bank)
        )
        data, _ = nnd_batch(bank, batch.data)
    elif method == "pd":
        bank = MemoryBank.from_matrix(
            _read_embeddings(args.bank, Modality.TEXT), source=str(args.bank)
        )
        queries = l2_normalize_rows(batch.data)
        data = projection_decode(bank, queries, tau=args.tau)
    elif method == "linear-pd":
        model = load_model(args.model)
        bank_rows = _read_embeddings(args.bank, Modality.TEXT).data
        centered_bank = bank_rows - model.t_mean
        outputs = np.empty_like(batch.data)
        for i in range(batch.n):
            raw, _ = linear_pd(model, centered_bank, batch.data[i] - model.a_mean)
            outputs[i] = raw
        data = l2_normalize_rows(outputs + model.t_mean)
    else:  # pragma: no cover - argparse restricts choices
        raise CometError(f"unknown method {method!r}")
    _atomic_npy_write(Path(args.out), _as_precision(data, args.precision))
    print(f"mapped {batch.n} rows with {method} -> {args.out}")
    return 0


_REPRESENTATIONS = ("raw", "plshead", "plsheadw", "recon", "pcahead")


def _representation_rows(
    args: argparse.Namespace, dataset
) -> tuple[np.ndarray, np.ndarray]:
    """Text/audio row stacks under the requested representation."""
    repr_name = args.representation
    if repr_name == "raw":
        return dataset.text.data, dataset.audio.data
    if repr_name == "pcahead":
        if not args.pca:
            raise CometError("--repr pcahead requires --pca (directory from `comet pca`)")
        pca_root = Path(args.pca)
        pca_text = load_pca(pca_root / "text")
        pca_audio = load_pca(pca_root / "audio")
        return (
            project_pca(pca_text, dataset.text, args.k).values,
            project_pca(pca_audio, dataset.audio, args.k).values,
        )
    model = load_model(args.model) if args.model else None
    if model is None:
        raise CometError(f"--repr {repr_name} requires --model")
    text_coeffs = truncate_head(project(model, dataset.text), args.k)
    audio_coeffs = truncate_head(project(model, dataset.audio), args.k)
    if repr_name == "plshead":
        return text_coeffs.values, audio_coeffs.values
    if repr_name == "plsheadw":
        return text_coeffs.values, reweight_head(model, audio_coeffs).values
    if repr_name == "recon":
        return (
            reconstruct(model, project(model, dataset.text), keep=args.k).data,
            reconstruct(model, project(model, dataset.audio), keep=args.k).data,
        )
    raise CometError(f"unknown representation {repr_name!r}")  # pragma: no cover


def cmd_retrieve(args: argparse.Namespace) -> int:
    _apply_reference_defaults(args)
    dataset = load_dataset(args.dataset)
    text_rows, audio_rows = _representation_rows(args, dataset)
    directions = {
        "t2a": [Direction.TEXT_TO_AUDIO],
        "a2t": [Direction.AUDIO_TO_TEXT],
        "both": [Direction.TEXT_TO_AUDIO, Direction.AUDIO_TO_TEXT],
    }[args.direction]
    results = {}
    for direction in directions:
        queries, gallery, relevance = protocol_from_arrays(
            text_rows, audio_rows, dataset.groups, direction
        )
        metrics = evaluate(similarity_matrix(queries, gallery), relevance, direction)
        results[direction.value] = _metrics_dict(metrics)
    payload = {
        "representation": args.representation,
        "k": args.k if args.representation != "raw" else None,
        "results": results,
        "metadata": {
            "map_at_10_denominator": MAP_DENOMINATOR,
            "n_rows": dataset.n,
            "n_groups": dataset.n_groups,
            "reference_defaults": bool(args.reference_defaults),
            "tool_version": __version__,
        },
    }
    atomic_write_json(args.out, payload)
    print(f"wrote retrieval metrics -> {args.out}")
    return 0


def cmd_pd_verify(args: argparse.Namespace) -> int:
    _apply_reference_defaults(args)
    model = load_model(args.model)
    dataset = load_dataset(args.dataset)
    bank = MemoryBank.from_matrix(
        _read_embeddings(args.bank, Modality.TEXT), source=str(args.bank)
    )
    starts = dataset.group_run_starts()
    eval_audio = EmbeddingMatrix(dataset.audio.data[starts], Modality.AUDIO)
    result = pd_characterize(model, eval_audio, bank, tau=args.tau, k=args.k)
    payload = dataclasses.asdict(result)
    payload["bank_size"] = bank.n
    payload["reference_defaults"] = bool(args.reference_defaults)
    payload["tool_version"] = __version__
    atomic_write_json(args.out, payload)
    print(f"wrote projection-decode report -> {args.out}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = preset(args.preset, seed=args.seed)
    dataset, truth = generate(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_tensor(out / "text.npy", dataset.text, precision=args.precision)
    write_tensor(out / "audio.npy", dataset.audio, precision=args.precision)
    write_manifest(
        out / "manifest.json",
        name=f"{args.preset}(seed={spec.seed})",
        text="text.npy",
        audio="audio.npy",
        group_ids={"captions_per_item": 1, "num_items": spec.n},
    )
    for name, value in (
        ("truth_u.npy", truth.u_head),
        ("truth_v.npy", truth.v_head),
        ("truth_spectrum.npy", truth.spectrum),
        ("truth_t_mean.npy", truth.t_mean),
        ("truth_a_mean.npy", truth.a_mean),
    ):
        _atomic_npy_write(out / name, value)
    atomic_write_json(
        out / "truth.json",
        {
            "preset": args.preset,
            "seed": spec.seed,
            "n": spec.n,
            "dim": spec.dim,
            "k_shared": spec.k_shared,
            "uv_alignment": truth.uv_alignment,
            "mean_gap_norm": truth.mean_gap_norm,
            "tail_energy_text": spec.tail_energy_text,
            "tail_energy_audio": spec.tail_energy_audio,
            "files": {
                "manifest": "manifest.json",
                "u_head": "truth_u.npy",
                "v_head": "truth_v.npy",
                "spectrum": "truth_spectrum.npy",
                "t_mean": "truth_t_mean.npy",
                "a_mean": "truth_a_mean.npy",
            },
            "tool_version": __version__,
        },
    )
    print(f"wrote synthetic dataset ({spec.n} x {spec.dim}) -> {out}")
    return 0


def cmd_pca(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    out = Path(args.out)
    save_pca(fit_pca(dataset.text), out / "text")
    save_pca(fit_pca(dataset.audio), out / "audio")
    print(f"wrote PCA models -> {out / 'text'} and {out / 'audio'}")
    return 0


def _add_reference_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--reference-defaults",
        action="store_true",
        help="pin k=100, tau=0.01, noise variance=0.013 "
        "(the published reference configuration)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comet",
        description="Cross-modal embedding dissection toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"comet {__version__}")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="cap BLAS thread pools (default: COMET_THREADS env var, else library default)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the paired-direction model")
    p.add_argument("--dataset", required=True, help="dataset manifest JSON")
    p.add_argument("--out", required=True, help="output model directory")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="per-direction diagnostics table + summary")
    p.add_argument("--model", required=True, help="model directory from `comet fit`")
    p.add_argument("--dataset", required=True, help="dataset manifest JSON")
    p.add_argument("--k", type=int, default=DEFAULT_HEAD_K, help="head size")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--neg-seed", type=int, default=0, help="seed for sampled negatives")
    p.add_argument(
        "--top-directions",
        type=int,
        default=0,
        help="also attribute the first N directions to captions",
    )
    p.add_argument("--top-k-items", type=int, default=4, help="captions per direction")
    p.add_argument(
        "--dedup-threshold",
        type=float,
        default=0.95,
        help="cosine above which two captions count as near-duplicates",
    )
    _add_reference_flag(p)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("compress", help="project embeddings to head coefficients")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="embedding tensor (NPY)")
    p.add_argument("--modality", required=True, choices=("text", "audio"))
    p.add_argument("--k", type=int, default=DEFAULT_HEAD_K)
    p.add_argument(
        "--weighted",
        action="store_true",
        help="rescale audio coefficients by per-direction basis alignments",
    )
    p.add_argument(
        "--reconstruct",
        action="store_true",
        help="write the rank-k reconstruction in embedding space instead",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    _add_reference_flag(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("map", help="apply a training-free audio-to-text mapper")
    p.add_argument(
        "--method", required=True, choices=("es", "ni", "nnd", "pd", "linear-pd")
    )
    p.add_argument("--input", required=True, help="audio embedding tensor (NPY)")
    p.add_argument("--model", help="model directory (es, linear-pd)")
    p.add_argument("--bank", help="text memory bank tensor (nnd, pd, linear-pd)")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU, help="softmax temperature")
    p.add_argument(
        "--variance", type=float, default=DEFAULT_NOISE_VARIANCE, help="noise variance (ni)"
    )
    p.add_argument("--seed", type=int, default=0, help="noise seed (ni)")
    p.add_argument("--out", required=True)
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    _add_reference_flag(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("retrieve", help="cross-modal retrieval metrics")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", help="model directory (plshead/plsheadw/recon)")
    p.add_argument(
        "--repr",
        dest="representation",
        default="raw",
        choices=_REPRESENTATIONS,
    )
    p.add_argument("--k", type=int, default=DEFAULT_HEAD_K)
    p.add_argument("--direction", choices=("t2a", "a2t", "both"), default="both")
    p.add_argument("--pca", help="directory from `comet pca` (for --repr pcahead)")
    p.add_argument("--out", required=True, help="metrics JSON path")
    _add_reference_flag(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser(
        "pd-verify", help="characterize projection decoding on an audio set"
    )
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--bank", required=True, help="text memory bank tensor (NPY)")
    p.add_argument("--tau", type=float, default=DEFAULT_TAU)
    p.add_argument("--k", type=int, default=DEFAULT_HEAD_K)
    p.add_argument("--out", required=True, help="report JSON path")
    _add_reference_flag(p)
    p.set_defaults(func=cmd_pd_verify)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--preset", required=True, choices=PRESET_NAMES)
    p.add_argument("--seed", type=int, default=None, help="override the preset seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--precision", choices=("f32", "f64"), default="f64")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pca", help="fit per-modality PCA baselines")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory (text/ and audio/)")
    p.set_defaults(func=cmd_pca)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None:
        env = os.environ.get("COMET_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                print(f"error: COMET_THREADS must be an integer, got {env!r}", file=sys.stderr)
                return 1
    if threads is not None and threads < 1:
        print(f"error: thread count must be >= 1, got {threads}", file=sys.stderr)
        return 1
    try:
        if threads is not None:
            with threadpool_limits(limits=threads):
                return args.func(args)
        return args.func(args)
    except (CometError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
