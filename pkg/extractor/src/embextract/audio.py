"""WAV decoding and resampling to the model's expected 16 kHz mono."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

from .errors import AudioDecodeError, EmptyAudio

# One conv-encoder frame needs ~400 samples; anything shorter cannot
# produce a single hidden-state frame.
MIN_SAMPLES = 512

_INT_SCALES = {
    np.dtype(np.int16): 32768.0,
    np.dtype(np.int32): 2147483648.0,
}


def load_wav_mono(path: str | Path, target_rate: int) -> np.ndarray:
    """Decode a WAV file to float32 mono in [-1, 1] at target_rate.

    Raises:
        AudioDecodeError: Missing file or undecodable payload.
        EmptyAudio: Decoded signal too short for a single model frame.
    """
    try:
        rate, data = wavfile.read(Path(path))
    except (OSError, ValueError) as exc:
        raise AudioDecodeError(f"cannot decode {path}: {exc}") from exc

    data = np.asarray(data)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype in _INT_SCALES:
        wave = data.astype(np.float64) / _INT_SCALES[data.dtype]
    elif data.dtype == np.uint8:
        wave = (data.astype(np.float64) - 128.0) / 128.0
    else:
        wave = data.astype(np.float64)

    if rate != target_rate:
        if rate <= 0:
            raise AudioDecodeError(f"{path}: invalid sample rate {rate}")
        g = math.gcd(int(rate), int(target_rate))
        wave = resample_poly(wave, target_rate // g, rate // g)

    if wave.shape[0] < MIN_SAMPLES:
        raise EmptyAudio(
            f"{path}: {wave.shape[0]} samples after resampling; need >= {MIN_SAMPLES}"
        )
    return wave.astype(np.float32)
