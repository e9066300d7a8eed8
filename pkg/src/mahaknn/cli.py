"""Command-line entry point: fit, score, eval, synth, and compare.

Thin client over the pipeline layer. Exit codes: 0 success, 1 usage error,
2 data/format error, 3 numerical failure. All outputs are byte-stable:
JSON reports use sorted keys and 9-significant-digit floats, CSVs print
scores with 9 significant digits.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict
from pathlib import Path

from . import pipeline
from .detector import DEFAULT_CONTAMINATION, DEFAULT_K_NEIGHBORS
from .errors import MahaknnError
from .joint import decide_batch, format_decisions_csv
from .jsonutil import canonical_json
from .linalg import DEFAULT_RIDGE0
from .metrics import format_metric_table, format_report_table
from .synth import SynthConfig, generate
from .tensorio import load_model, read_embeddings, save_model, write_embeddings

USAGE_EXIT = 1


def _add_threads_flag(parser: argparse.ArgumentParser) -> None:
    # SUPPRESS so a subcommand-position flag does not clobber one given
    # before the subcommand with the default.
    parser.add_argument(
        "--threads", type=int, default=argparse.SUPPRESS,
        help="worker hint; outputs are identical for any value",
    )


def _add_fit_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=int, default=DEFAULT_K_NEIGHBORS,
                        help="neighbor count for the rejection scorer")
    parser.add_argument("--contamination", type=float, default=DEFAULT_CONTAMINATION,
                        help="assumed training outlier fraction for threshold calibration")
    parser.add_argument("--no-tanh", dest="tanh", action="store_false",
                        help="skip the tanh squash before the per-layer statistics")
    parser.add_argument("--no-calibrate", dest="calibrate_w", action="store_false",
                        help="keep raw per-layer scores instead of mean-1 calibration")
    parser.add_argument("--ridge0", type=float, default=DEFAULT_RIDGE0,
                        help="base of the covariance ridge ladder")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mahaknn",
        description="Multi-layer Mahalanobis + KNN open-set rejection pipeline",
    )
    parser.add_argument(
        "--threads", type=int, default=1,
        help="worker hint; outputs are identical for any value (all kernels "
             "are deterministic and vectorized)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model on a training EMB1 file")
    _add_threads_flag(p)
    p.add_argument("--train", required=True, help="training EMB1 file")
    p.add_argument("--out", required=True, help="output MDL1 model file")
    _add_fit_flags(p)

    p = sub.add_parser("score", help="score a data file against a fitted model")
    _add_threads_flag(p)
    p.add_argument("--model", required=True, help="MDL1 model file")
    p.add_argument("--data", required=True, help="EMB1 file to score")
    p.add_argument("--out", required=True, help="output CSV")

    p = sub.add_parser("eval", help="evaluate a fitted model on a labeled test file")
    _add_threads_flag(p)
    p.add_argument("--model", required=True, help="MDL1 model file")
    p.add_argument("--test", required=True, help="labeled EMB1 test file")
    p.add_argument("--report", required=True, help="output JSON report")
    p.add_argument("--table", action="store_true", help="also print an aligned table")

    p = sub.add_parser("synth", help="generate synthetic train/test EMB1 files")
    _add_threads_flag(p)
    p.add_argument("--config", help="JSON config with SynthConfig field names")
    p.add_argument("--out-train", required=True, help="output training EMB1 file")
    p.add_argument("--out-test", required=True, help="output test EMB1 file")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test-id", type=int)
    p.add_argument("--n-test-ood", type=int)
    p.add_argument("--classes", type=int, help="number of known classes (M)")
    p.add_argument("--layers", type=int, help="number of layers (K)")
    p.add_argument("--dim", type=int, help="embedding dimensionality (d)")
    p.add_argument("--class-sep", type=float)
    p.add_argument("--ood-shift", type=float)
    p.add_argument("--logit-noise", type=float)
    p.add_argument("--ood-layers", help="comma-separated layer indices carrying the shift")

    p = sub.add_parser("compare", help="run the method plus reference detectors on one split")
    _add_threads_flag(p)
    p.add_argument("--train", required=True, help="labeled training EMB1 file")
    p.add_argument("--test", required=True, help="labeled EMB1 test file")
    p.add_argument("--report", required=True, help="output JSON report")
    p.add_argument("--table", action="store_true", help="also print an aligned table")
    _add_fit_flags(p)

    return parser


def _cmd_fit(args: argparse.Namespace) -> int:
    train = read_embeddings(args.train)
    artifact = pipeline.fit_model(
        train,
        k_neighbors=args.k,
        contamination=args.contamination,
        tanh=args.tanh,
        calibrate_w=args.calibrate_w,
        ridge0=args.ridge0,
    )
    save_model(artifact, args.out)
    return 0


def _cmd_score(args: argparse.Namespace) -> int:
    artifact = load_model(args.model)
    data = read_embeddings(args.data)
    if data.logits is not None:
        text = format_decisions_csv(decide_batch(data, artifact))
    else:
        scores = pipeline.rejection_scores(artifact, data)
        lines = ["index,rejection_score"]
        lines += [f"{i},{s:.9g}" for i, s in enumerate(scores)]
        text = "\n".join(lines) + "\n"
    Path(args.out).write_text(text)
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    artifact = load_model(args.model)
    test = read_embeddings(args.test)
    report = pipeline.evaluate_artifact(artifact, test)
    Path(args.report).write_text(canonical_json(report.to_dict()))
    if args.table:
        sys.stdout.write(format_report_table(report))
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if args.config:
        config = SynthConfig.from_json(args.config)
    else:
        config = SynthConfig()
    overrides = {
        "seed": args.seed,
        "n_train": args.n_train,
        "n_test_id": args.n_test_id,
        "n_test_ood": args.n_test_ood,
        "M": args.classes,
        "K": args.layers,
        "d": args.dim,
        "class_sep": args.class_sep,
        "ood_shift": args.ood_shift,
        "logit_noise": args.logit_noise,
    }
    if args.ood_layers is not None:
        overrides["ood_layers"] = tuple(
            int(k) for k in args.ood_layers.split(",") if k.strip()
        )
    merged = {**asdict(config), **{k: v for k, v in overrides.items() if v is not None}}
    config = SynthConfig.from_dict(merged)
    train, test = generate(config)
    write_embeddings(train, args.out_train)
    write_embeddings(test, args.out_test)
    return 0


def _cmd_compare(args: argparse.Namespace) -> int:
    train = read_embeddings(args.train)
    test = read_embeddings(args.test)
    report = pipeline.compare_methods(
        train,
        test,
        k_neighbors=args.k,
        contamination=args.contamination,
        tanh=args.tanh,
        calibrate_w=args.calibrate_w,
        ridge0=args.ridge0,
    )
    Path(args.report).write_text(canonical_json(report))
    if args.table:
        rows = [
            (m["method"], m["eer"], m["auroc"], m["aupr_in"], m["aupr_out"])
            for m in report["methods"]
        ]
        sys.stdout.write(format_metric_table(rows))
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "score": _cmd_score,
    "eval": _cmd_eval,
    "synth": _cmd_synth,
    "compare": _cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage problems; usage maps to 1.
        return 0 if exc.code == 0 else USAGE_EXIT
    if args.threads < 1:
        sys.stderr.write("error: --threads must be >= 1\n")
        return USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except MahaknnError as exc:
        sys.stderr.write(f"error: {exc.__class__.__name__}: {exc}\n")
        return exc.exit_code


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
