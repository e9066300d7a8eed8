"""CLI: extract --manifest m.csv --checkpoint <id-or-path> --out X.emb"""

from __future__ import annotations

import argparse
import sys

from .errors import ExtractError
from .extract import extract
from .manifest import TARGET_SAMPLE_RATE, ExtractionManifest, read_manifest_rows


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="extract",
        description="Pool per-layer hidden states of a speech checkpoint into an EMB1 file",
    )
    parser.add_argument("--manifest", required=True, help="CSV of `path,label` rows")
    parser.add_argument("--checkpoint", required=True, help="model id or local path")
    parser.add_argument("--out", required=True, help="output EMB1 file")
    parser.add_argument(
        "--sample-rate", type=int, default=TARGET_SAMPLE_RATE,
        help="rate audio is resampled to before inference",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    try:
        import transformers

        transformers.logging.set_verbosity_error()
        transformers.logging.disable_progress_bar()
    except Exception:
        pass
    try:
        rows = read_manifest_rows(args.manifest)
        summary = extract(
            ExtractionManifest(
                rows=rows,
                checkpoint=args.checkpoint,
                out_path=args.out,
                sample_rate=args.sample_rate,
            )
        )
    except ExtractError as exc:
        sys.stderr.write(f"error: {exc.__class__.__name__}: {exc}\n")
        return 2
    sys.stderr.write(
        f"wrote {args.out}: n={summary.n} k_layers={summary.k_layers} "
        f"dim={summary.dim} logits={'yes' if summary.has_logits else 'no'}\n"
    )
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
