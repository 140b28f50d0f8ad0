"""Segmental speech-SNR and noise reduction via shadow filtering.

The gains computed from a mixture are applied separately to the isolated
speech and noise components; the speech measure compares the component
against its filtered copy over speech-active frames, the noise measure is
the per-frame attenuation over all frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .enhance import apply_gain
from .errors import NumericError
from .stft import ComplexSpectrogram, FrameParams


@dataclass(frozen=True)
class SegConfig:
    """Clipping range for the speech measure and the activity threshold.

    A frame counts as speech-active when its clean-speech energy is within
    activity_range_db of the loudest frame.
    """

    clip_lo: float = -10.0
    clip_hi: float = 35.0
    activity_range_db: float = 40.0
    frame: FrameParams = field(default_factory=FrameParams)

    def __post_init__(self):
        if self.clip_lo >= self.clip_hi:
            raise ValueError("clip_lo must be below clip_hi")


def shadow_filter(component_spec: ComplexSpectrogram, gains, floor: float) -> ComplexSpectrogram:
    """Apply mixture-derived floored gains to an isolated component."""
    return apply_gain(component_spec, gains, floor)


def _frame_energies(x, params: FrameParams) -> np.ndarray:
    n_frames = params.num_frames(x.size)
    if n_frames == 0:
        raise ValueError("signal shorter than one metric frame")
    idx = (
        np.arange(params.frame_len)[None, :]
        + params.frame_shift * np.arange(n_frames)[:, None]
    )
    return np.sum(x[idx] ** 2, axis=1)


def _aligned(a, b):
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("expected two aligned time signals")
    return x, y


def seg_ssnr(clean, filtered_clean, config: SegConfig | None = None) -> float:
    """Mean clipped per-frame SNR of the speech component vs its filtered copy.

    Only speech-active frames contribute; zero distortion clips to clip_hi.
    """
    cfg = config or SegConfig()
    s, s_filt = _aligned(clean, filtered_clean)
    energy = _frame_energies(s, cfg.frame)
    active = energy >= energy.max() * 10.0 ** (-cfg.activity_range_db / 10.0)
    active &= energy > 0.0
    if not np.any(active):
        raise NumericError("no speech-active frames to evaluate")
    distortion = _frame_energies(s - s_filt, cfg.frame)
    with np.errstate(divide="ignore"):
        ratios = 10.0 * np.log10(energy[active] / distortion[active])
    return float(np.mean(np.clip(ratios, cfg.clip_lo, cfg.clip_hi)))


def seg_nr(noise, filtered_noise, config: SegConfig | None = None) -> float:
    """Mean per-frame attenuation of the noise component, in dB.

    Frames where either energy vanishes are skipped.
    """
    cfg = config or SegConfig()
    n, n_filt = _aligned(noise, filtered_noise)
    energy = _frame_energies(n, cfg.frame)
    filtered = _frame_energies(n_filt, cfg.frame)
    usable = (energy > 0.0) & (filtered > 0.0)
    if not np.any(usable):
        raise NumericError("no usable noise frames to evaluate")
    return float(np.mean(10.0 * np.log10(energy[usable] / filtered[usable])))
