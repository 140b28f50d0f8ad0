"""16-bit PCM WAV I/O at the fixed 8 kHz mono format (no resampling)."""

from __future__ import annotations

import numpy as np
from scipy.io import wavfile

from .errors import FormatError

SAMPLE_RATE = 8000
_SCALE = 32768.0


def read_wav(path) -> np.ndarray:
    """Float samples in [-1, 1) from an 8 kHz mono 16-bit PCM file."""
    rate, data = wavfile.read(path)
    if rate != SAMPLE_RATE:
        raise FormatError(f"{path}: expected {SAMPLE_RATE} Hz input, got {rate} Hz")
    if data.ndim != 1:
        raise FormatError(f"{path}: expected mono audio, got {data.ndim} channels")
    if data.dtype != np.int16:
        raise FormatError(f"{path}: expected 16-bit PCM samples, got {data.dtype}")
    return data.astype(np.float64) / _SCALE


def write_wav(path, samples) -> None:
    """Write float samples as 16-bit PCM, clipping at full scale."""
    x = np.asarray(samples, dtype=np.float64)
    pcm = np.clip(np.round(x * _SCALE), -32768, 32767).astype(np.int16)
    wavfile.write(path, SAMPLE_RATE, pcm)
