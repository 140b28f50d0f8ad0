"""STFT analysis/synthesis with square-root Hann windows and 50% overlap."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FrameParams:
    """Frame geometry: 32 ms segments with 16 ms shift at 8 kHz.

    Only the upper half of the mirror spectrum is dropped, leaving
    fft_bins_kept = frame_len/2 + 1 complex bins per frame.
    """

    sample_rate: int = 8000
    frame_len: int = 256
    frame_shift: int = 128
    fft_bins_kept: int = 129

    def __post_init__(self):
        if self.frame_shift * 2 != self.frame_len:
            raise ValueError("frame_shift must be half of frame_len")
        if self.fft_bins_kept != self.frame_len // 2 + 1:
            raise ValueError("fft_bins_kept must be frame_len/2 + 1")
        if self.frame_len != round(self.sample_rate * 0.032):
            raise ValueError("frame_len must cover 32 ms at the given sample rate")

    def num_frames(self, num_samples: int) -> int:
        """Number of full analysis frames that fit into num_samples."""
        if num_samples < self.frame_len:
            return 0
        return (num_samples - self.frame_len) // self.frame_shift + 1

    def num_samples(self, num_frames: int) -> int:
        """Length of the overlap-add output for num_frames frames."""
        return (num_frames - 1) * self.frame_shift + self.frame_len


@dataclass
class ComplexSpectrogram:
    """Complex STFT coefficients, frames x kept bins."""

    frames: np.ndarray
    params: FrameParams = field(default_factory=FrameParams)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.complex128)
        if self.frames.ndim != 2 or self.frames.shape[1] != self.params.fft_bins_kept:
            raise ValueError(
                f"expected an L x {self.params.fft_bins_kept} matrix, "
                f"got shape {self.frames.shape}"
            )

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def power(self) -> np.ndarray:
        """Per-bin squared magnitudes (periodogram)."""
        return self.frames.real**2 + self.frames.imag**2


def sqrt_hann(length: int) -> np.ndarray:
    """Square root of the periodic Hann window.

    The squared window sums to one over 50%-overlapped shifts, so using it
    for both analysis and synthesis reconstructs the signal exactly in the
    steady state.
    """
    if length < 2 or length % 2 != 0:
        raise ValueError("window length must be even and >= 2")
    n = np.arange(length)
    return np.sqrt(0.5 * (1.0 - np.cos(2.0 * np.pi * n / length)))


def stft(signal, params: FrameParams | None = None) -> ComplexSpectrogram:
    """Windowed DFT analysis of a mono signal.

    Trailing samples that do not fill a complete frame are dropped.
    """
    params = params or FrameParams()
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("expected a mono sample vector")
    if x.size < params.frame_len:
        raise ValueError("signal shorter than one frame")
    window = sqrt_hann(params.frame_len)
    n_frames = params.num_frames(x.size)
    idx = (
        np.arange(params.frame_len)[None, :]
        + params.frame_shift * np.arange(n_frames)[:, None]
    )
    frames = np.fft.rfft(x[idx] * window, axis=1)
    return ComplexSpectrogram(frames, params)


def istft(spec: ComplexSpectrogram) -> np.ndarray:
    """Overlap-add synthesis from the kept half spectrum.

    The mirror spectrum is restored by conjugate symmetry before the inverse
    DFT; the synthesis window matches the analysis window.
    """
    if spec.num_frames == 0:
        raise ValueError("empty spectrogram")
    p = spec.params
    window = sqrt_hann(p.frame_len)
    full = np.empty((spec.num_frames, p.frame_len), dtype=np.complex128)
    full[:, : p.fft_bins_kept] = spec.frames
    full[:, p.fft_bins_kept :] = np.conj(spec.frames[:, -2:0:-1])
    segments = np.fft.ifft(full, axis=1).real * window
    out = np.zeros(p.num_samples(spec.num_frames))
    for l in range(spec.num_frames):
        start = l * p.frame_shift
        out[start : start + p.frame_len] += segments[l]
    return out
