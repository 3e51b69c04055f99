"""``export_embeddings`` command-line entry point.

Exit codes: 0 success, 1 domain error (single ``error: ...`` line on
stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ExporterError
from .export import ExportJob, export
from . import __version__


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="export_embeddings",
        description=(
            "Run a pretrained audio-text contrastive encoder over a captioned "
            "audio dataset and write text/audio embedding tensors plus a "
            "manifest."
        ),
    )
    parser.add_argument(
        "--version", action="version", version=f"export_embeddings {__version__}"
    )
    parser.add_argument(
        "--checkpoint",
        required=True,
        help="encoder id: 'toy[:<dim>]' or 'module:<import.path>:<factory>[:<arg>]'",
    )
    parser.add_argument(
        "--dataset", required=True, help="dataset root with split dirs + captions CSVs"
    )
    parser.add_argument("--split", required=True, help="split name (directory + CSV)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--crop-seconds",
        type=float,
        default=10.0,
        help="fixed clip duration; longer audio is cropped, shorter zero-padded",
    )
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--precision", choices=("f32", "f64"), default="f32")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job_kwargs = dict(
        checkpoint=args.checkpoint,
        dataset_root=Path(args.dataset),
        split=args.split,
        out_dir=Path(args.out),
        crop_seconds=args.crop_seconds,
        batch_size=args.batch_size,
        precision=args.precision,
    )
    try:
        manifest_path = export(ExportJob(**job_kwargs))
    except (ExporterError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {manifest_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
