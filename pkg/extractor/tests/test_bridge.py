"""Pipeline bridge: extractor output must drive the core fit/eval directly."""

import json
import subprocess
import sys

import numpy as np
from scipy.io import wavfile

from embextract import ExtractionManifest, extract, read_manifest_rows

from conftest import write_manifest, write_tone


def make_clips(root, count, seed):
    rng = np.random.default_rng(seed)
    paths = []
    for i in range(count):
        freq = float(rng.uniform(150, 1200))
        path = write_tone(root / f"clip{seed}_{i}.wav", freq, seconds=0.4)
        paths.append(path)
    return paths


def noise_clip(root, name, seed):
    rng = np.random.default_rng(seed)
    wave = (rng.uniform(-0.5, 0.5, 8_000)).astype(np.float32)
    path = root / name
    wavfile.write(path, 16_000, (wave * 32767).astype(np.int16))
    return path


def test_extract_then_fit_then_eval(tmp_path, classifier_checkpoint):
    train_clips = make_clips(tmp_path, 8, seed=1)
    train_rows = [(c, i % 2) for i, c in enumerate(train_clips)]
    train_manifest = write_manifest(tmp_path / "train.csv", train_rows)
    train_emb = tmp_path / "train.emb"
    extract(ExtractionManifest(
        rows=read_manifest_rows(train_manifest),
        checkpoint=classifier_checkpoint,
        out_path=train_emb,
    ))

    test_clips = make_clips(tmp_path, 4, seed=2)
    test_rows = [(c, i % 2) for i, c in enumerate(test_clips)]
    test_rows += [(noise_clip(tmp_path, f"ood{i}.wav", seed=40 + i), -1) for i in range(3)]
    test_manifest = write_manifest(tmp_path / "test.csv", test_rows)
    test_emb = tmp_path / "test.emb"
    extract(ExtractionManifest(
        rows=read_manifest_rows(test_manifest),
        checkpoint=classifier_checkpoint,
        out_path=test_emb,
    ))

    def cli(*args):
        proc = subprocess.run(
            [sys.executable, "-m", "mahaknn", *args], capture_output=True, text=True
        )
        assert proc.returncode == 0, proc.stderr

    model = tmp_path / "model.mdl"
    report = tmp_path / "report.json"
    cli("fit", "--train", str(train_emb), "--out", str(model), "--k", "2")
    cli("eval", "--model", str(model), "--test", str(test_emb), "--report", str(report))

    # well-formed report; no quality bar on arbitrary audio
    data = json.loads(report.read_text())
    assert set(data) >= {"auroc", "aupr_in", "aupr_out", "eer", "closed_f1", "counts"}
    assert 0.0 <= data["auroc"] <= 1.0
    counts = data["counts"]
    assert counts["tp"] + counts["tn"] + counts["fp"] + counts["fn"] == 7


def test_cli_extract_roundtrip(tmp_path, base_checkpoint, clips):
    manifest = write_manifest(tmp_path / "m.csv", [(c, 0) for c in clips])
    out = tmp_path / "cli.emb"
    proc = subprocess.run(
        [sys.executable, "-m", "embextract", "--manifest", str(manifest),
         "--checkpoint", base_checkpoint, "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "k_layers=12" in proc.stderr

    from mahaknn import read_embeddings

    assert read_embeddings(out).n == 3

    proc = subprocess.run(
        [sys.executable, "-m", "embextract", "--manifest", str(tmp_path / "missing.csv"),
         "--checkpoint", base_checkpoint, "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
