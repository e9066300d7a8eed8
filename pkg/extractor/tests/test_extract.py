import numpy as np
import pytest
from scipy.io import wavfile

from embextract import ExtractionManifest, extract, read_manifest_rows
from embextract.audio import load_wav_mono
from embextract.errors import AudioDecodeError, EmptyAudio, ManifestError
from mahaknn import read_embeddings

from conftest import write_manifest, write_tone


class TestManifest:
    def test_rows_resolve_relative_to_manifest(self, tmp_path, clips):
        manifest = write_manifest(tmp_path / "m.csv", [(clips[0].name, 0)])
        rows = read_manifest_rows(manifest)
        assert rows[0] == (tmp_path / clips[0].name, 0)

    def test_bad_label_rejected(self, tmp_path, clips):
        path = tmp_path / "m.csv"
        path.write_text(f"{clips[0]},zero\n")
        with pytest.raises(ManifestError):
            read_manifest_rows(path)

    def test_empty_manifest_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("path,label\n")
        with pytest.raises(ManifestError):
            read_manifest_rows(path)


class TestAudio:
    def test_resamples_to_target(self, tmp_path):
        clip = write_tone(tmp_path / "hi.wav", 440.0, rate=44_100)
        wave = load_wav_mono(clip, 16_000)
        assert wave.dtype == np.float32
        assert abs(wave.shape[0] - 0.6 * 16_000) < 32

    def test_stereo_downmix(self, tmp_path):
        t = np.arange(8_000) / 16_000
        left = np.sin(2 * np.pi * 220 * t)
        stereo = np.stack([left, -left], axis=1)
        path = tmp_path / "st.wav"
        wavfile.write(path, 16_000, (stereo * 32767).astype(np.int16))
        wave = load_wav_mono(path, 16_000)
        assert np.abs(wave).max() < 1e-4  # channels cancel

    def test_too_short_rejected(self, tmp_path):
        path = tmp_path / "blip.wav"
        wavfile.write(path, 16_000, np.zeros(100, dtype=np.int16))
        with pytest.raises(EmptyAudio):
            load_wav_mono(path, 16_000)

    def test_missing_file(self, tmp_path):
        with pytest.raises(AudioDecodeError):
            load_wav_mono(tmp_path / "nope.wav", 16_000)


class TestExtractSmoke:
    def test_three_clips_shapes_and_validation(self, tmp_path, clips, base_checkpoint):
        from transformers import AutoConfig

        manifest = write_manifest(
            tmp_path / "m.csv", [(c, i) for i, c in enumerate(clips)]
        )
        out = tmp_path / "clips.emb"
        summary = extract(ExtractionManifest(
            rows=read_manifest_rows(manifest),
            checkpoint=base_checkpoint,
            out_path=out,
        ))
        config = AutoConfig.from_pretrained(base_checkpoint)
        assert summary.k_layers == 12
        assert summary.dim == config.hidden_size
        # the file must pass the primary reader's full validation
        dataset = read_embeddings(out)
        assert (dataset.n, dataset.k_layers, dataset.dim) == (3, 12, config.hidden_size)
        assert dataset.num_classes == 0
        assert dataset.labels.tolist() == [0, 1, 2]

    def test_reextraction_agrees(self, tmp_path, clips, base_checkpoint):
        rows = read_manifest_rows(
            write_manifest(tmp_path / "m.csv", [(c, 0) for c in clips])
        )
        outs = []
        for tag in ("1", "2"):
            out = tmp_path / f"run{tag}.emb"
            extract(ExtractionManifest(rows=rows, checkpoint=base_checkpoint, out_path=out))
            outs.append(read_embeddings(out).embeddings)
        assert np.allclose(outs[0], outs[1], atol=1e-5)

    def test_zero_audio_stays_finite(self, tmp_path, base_checkpoint):
        clip = tmp_path / "silence.wav"
        wavfile.write(clip, 16_000, np.zeros(8_000, dtype=np.int16))
        out = tmp_path / "silence.emb"
        extract(ExtractionManifest(
            rows=((clip, -1),), checkpoint=base_checkpoint, out_path=out,
        ))
        dataset = read_embeddings(out)  # reader rejects non-finite payloads
        assert np.isfinite(dataset.embeddings).all()

    def test_manifest_permutation_permutes_rows(self, tmp_path, clips, base_checkpoint):
        fwd = read_manifest_rows(
            write_manifest(tmp_path / "f.csv", [(c, 0) for c in clips])
        )
        rev = tuple(reversed(fwd))
        out_f, out_r = tmp_path / "f.emb", tmp_path / "r.emb"
        extract(ExtractionManifest(rows=fwd, checkpoint=base_checkpoint, out_path=out_f))
        extract(ExtractionManifest(rows=rev, checkpoint=base_checkpoint, out_path=out_r))
        a = read_embeddings(out_f).embeddings
        b = read_embeddings(out_r).embeddings
        assert np.allclose(a, b[::-1], atol=1e-5)

    def test_missing_row_names_the_file(self, tmp_path, clips, base_checkpoint):
        manifest = write_manifest(
            tmp_path / "m.csv", [(clips[0], 0), (tmp_path / "gone.wav", 1)]
        )
        with pytest.raises(AudioDecodeError, match="gone.wav"):
            extract(ExtractionManifest(
                rows=read_manifest_rows(manifest),
                checkpoint=base_checkpoint,
                out_path=tmp_path / "x.emb",
            ))

    def test_classifier_checkpoint_emits_logits(self, tmp_path, clips, classifier_checkpoint):
        manifest = write_manifest(
            tmp_path / "m.csv", [(clips[0], 0), (clips[1], 1), (clips[2], -1)]
        )
        out = tmp_path / "logits.emb"
        summary = extract(ExtractionManifest(
            rows=read_manifest_rows(manifest),
            checkpoint=classifier_checkpoint,
            out_path=out,
        ))
        assert summary.has_logits
        dataset = read_embeddings(out)
        assert dataset.num_classes == 2
        assert dataset.logits.shape == (3, 2)
        assert dataset.labels.tolist() == [0, 1, -1]

    def test_label_outside_head_rejected(self, tmp_path, clips, classifier_checkpoint):
        manifest = write_manifest(tmp_path / "m.csv", [(clips[0], 5)])
        with pytest.raises(ManifestError):
            extract(ExtractionManifest(
                rows=read_manifest_rows(manifest),
                checkpoint=classifier_checkpoint,
                out_path=tmp_path / "x.emb",
            ))
