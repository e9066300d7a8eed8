import os

os.environ.setdefault("HF_HUB_OFFLINE", "1")
os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")

import numpy as np
import pytest
import torch
from scipy.io import wavfile


def _tiny_config(num_labels=None):
    from transformers import Wav2Vec2Config

    kwargs = dict(
        hidden_size=32,
        num_hidden_layers=12,
        num_attention_heads=2,
        intermediate_size=64,
        conv_dim=[32] * 7,
    )
    if num_labels is not None:
        kwargs.update(num_labels=num_labels, classifier_proj_size=16)
    return Wav2Vec2Config(**kwargs)


@pytest.fixture(scope="session")
def base_checkpoint(tmp_path_factory):
    """Reduced-width 12-layer checkpoint without a classification head."""
    from transformers import Wav2Vec2Model

    torch.manual_seed(7)
    model = Wav2Vec2Model(_tiny_config())
    path = tmp_path_factory.mktemp("ckpt") / "base"
    model.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def classifier_checkpoint(tmp_path_factory):
    """Same backbone with a 2-class sequence-classification head."""
    from transformers import Wav2Vec2ForSequenceClassification

    torch.manual_seed(8)
    model = Wav2Vec2ForSequenceClassification(_tiny_config(num_labels=2))
    path = tmp_path_factory.mktemp("ckpt") / "classifier"
    model.save_pretrained(path)
    return str(path)


def write_tone(path, freq, seconds=0.6, rate=16_000, amplitude=0.3):
    t = np.arange(int(seconds * rate)) / rate
    wave = (amplitude * np.sin(2 * np.pi * freq * t)).astype(np.float32)
    wavfile.write(path, rate, (wave * 32767).astype(np.int16))
    return path


@pytest.fixture(scope="session")
def clips(tmp_path_factory):
    """Three short distinct WAV clips."""
    root = tmp_path_factory.mktemp("audio")
    return [
        write_tone(root / "a.wav", 220.0),
        write_tone(root / "b.wav", 440.0, seconds=0.5),
        write_tone(root / "c.wav", 880.0, seconds=0.7),
    ]


def write_manifest(path, rows):
    lines = ["path,label"] + [f"{p},{label}" for p, label in rows]
    path.write_text("\n".join(lines) + "\n")
    return path
