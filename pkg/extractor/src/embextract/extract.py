"""Run a wav2vec2-style checkpoint over a manifest and write EMB1.

Each utterance yields K vectors of dimension d, where K is the checkpoint's
transformer layer count and d its hidden size — both read from the
checkpoint configuration at run time, never hard-coded. Layer k is the
time-mean of that transformer block's output hidden states; the
convolutional feature-encoder output (hidden state 0) is excluded. Values
are written raw: the downstream pipeline owns any squashing transform, so
there is no train/serve skew. Logits are included when the checkpoint
carries a sequence-classification head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .audio import load_wav_mono
from .emb1 import write_emb1
from .errors import CheckpointLoadError, ManifestError
from .manifest import ExtractionManifest


@dataclass(frozen=True)
class ExtractionSummary:
    n: int
    k_layers: int
    dim: int
    has_logits: bool


def _load_checkpoint(checkpoint: str):
    """Load (model, feature_extractor, has_head) from an id or local path."""
    from transformers import (
        AutoConfig,
        AutoModel,
        AutoModelForAudioClassification,
        Wav2Vec2FeatureExtractor,
    )

    try:
        config = AutoConfig.from_pretrained(checkpoint)
        architectures = config.architectures or []
        has_head = any("ForSequenceClassification" in a for a in architectures)
        if has_head:
            model = AutoModelForAudioClassification.from_pretrained(checkpoint)
        else:
            model = AutoModel.from_pretrained(checkpoint)
    except Exception as exc:
        raise CheckpointLoadError(f"cannot load checkpoint {checkpoint}: {exc}") from exc
    try:
        feature_extractor = Wav2Vec2FeatureExtractor.from_pretrained(checkpoint)
    except Exception:
        # checkpoints without a bundled preprocessor config use the defaults
        feature_extractor = Wav2Vec2FeatureExtractor()
    model.eval()
    return model, feature_extractor, has_head


def extract(manifest: ExtractionManifest) -> ExtractionSummary:
    """Extract pooled per-layer embeddings for every manifest row.

    Output rows follow manifest order; each row is processed independently,
    so permuting the manifest permutes the output identically.

    Raises:
        CheckpointLoadError, AudioDecodeError, EmptyAudio, ManifestError.
    """
    model, feature_extractor, has_head = _load_checkpoint(manifest.checkpoint)
    config = model.config
    k_layers = int(config.num_hidden_layers)
    dim = int(config.hidden_size)
    num_classes = int(getattr(config, "num_labels", 0)) if has_head else 0
    if has_head and num_classes < 2:
        raise CheckpointLoadError(
            f"{manifest.checkpoint}: classification head with {num_classes} labels"
        )

    labels = np.asarray([label for _, label in manifest.rows], dtype=np.int32)
    if has_head and ((labels < -1) | (labels >= num_classes)).any():
        raise ManifestError(
            f"manifest labels must be -1 or in [0, {num_classes}) for this checkpoint"
        )

    n = len(manifest.rows)
    embeddings = np.empty((n, k_layers, dim), dtype=np.float32)
    logits = np.empty((n, num_classes), dtype=np.float32) if has_head else None

    for i, (audio_path, _) in enumerate(manifest.rows):
        wave = load_wav_mono(audio_path, manifest.sample_rate)
        inputs = feature_extractor(
            [wave], sampling_rate=manifest.sample_rate, return_tensors="pt"
        )
        with torch.no_grad():
            out = model(inputs.input_values, output_hidden_states=True)
        hidden = out.hidden_states
        # hidden[0] is the conv-encoder projection; blocks are hidden[1:]
        if len(hidden) != k_layers + 1:
            raise CheckpointLoadError(
                f"{manifest.checkpoint}: expected {k_layers + 1} hidden states, got {len(hidden)}"
            )
        for k in range(k_layers):
            embeddings[i, k, :] = hidden[k + 1][0].mean(dim=0).numpy()
        if logits is not None:
            logits[i, :] = out.logits[0].numpy()

    write_emb1(manifest.out_path, embeddings, logits, labels)
    return ExtractionSummary(n=n, k_layers=k_layers, dim=dim, has_logits=has_head)
