"""Speech PSD estimation by temporal smoothing in the cepstral domain.

The limited maximum-likelihood estimate of each frame is logged, transformed
to the cepstrum, smoothed recursively with a quefrency-dependent constant
(weak smoothing for the spectral envelope and the pitch peak, strong
smoothing elsewhere) and transformed back with a bias correction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TcsConfig:
    """Smoothing constants; quefrency indices assume 8 kHz audio.

    env_cutoff bounds the spectral-envelope region (2.5 ms), pitch_search is
    the inclusive index range scanned for the pitch peak (2 ms to 16 ms).
    A frame counts as voiced when the peak exceeds voicing_ratio times the
    median absolute cepstral value inside the search range.
    """

    snr_floor: float = 1e-3
    alpha_env: float = 0.2
    alpha_rest: float = 0.96
    alpha_pitch: float = 0.2
    env_cutoff: int = 20
    pitch_search: tuple[int, int] = (16, 128)
    pitch_halfwidth: int = 1
    voicing_ratio: float = 5.0
    euler_gamma: float = float(np.euler_gamma)

    def __post_init__(self):
        for name in ("alpha_env", "alpha_rest", "alpha_pitch"):
            if not 0.0 <= getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie in [0, 1)")
        if self.snr_floor <= 0.0:
            raise ValueError("snr_floor must be positive")
        if not 0 <= self.pitch_search[0] <= self.pitch_search[1]:
            raise ValueError("pitch_search must be a nonnegative index range")
        if self.pitch_halfwidth < 0:
            raise ValueError("pitch_halfwidth must be nonnegative")


def ml_speech_psd(noisy_power, noise_psd, snr_floor: float = 1e-3) -> np.ndarray:
    """Limited maximum-likelihood speech PSD: noise_psd * max(snr - 1, floor)."""
    power = np.asarray(noisy_power, dtype=np.float64)
    psd = np.asarray(noise_psd, dtype=np.float64)
    if np.any(psd <= 0.0):
        raise ValueError("noise PSD must be strictly positive")
    return psd * np.maximum(power / psd - 1.0, snr_floor)


def log_to_cepstrum(log_half_spectrum) -> np.ndarray:
    """Inverse DFT of a half log spectrum, mirrored to the full frame length."""
    half = np.asarray(log_half_spectrum, dtype=np.float64)
    return np.fft.irfft(half, 2 * (half.size - 1))


def cepstrum_to_log(cepstrum) -> np.ndarray:
    """Forward DFT of a (symmetric) cepstrum back to the half log spectrum."""
    return np.fft.rfft(np.asarray(cepstrum, dtype=np.float64)).real


def detect_pitch_peak(cepstrum, config: TcsConfig | None = None):
    """Index of the cepstral pitch peak, or None when the frame looks unvoiced.

    Ties are broken toward the lower quefrency.
    """
    cfg = config or TcsConfig()
    lo, hi = cfg.pitch_search
    region = np.asarray(cepstrum, dtype=np.float64)[lo : hi + 1]
    if region.size == 0:
        return None
    peak = int(np.argmax(region))
    scale = float(np.median(np.abs(region)))
    if region[peak] <= cfg.voicing_ratio * scale:
        return None
    return lo + peak


class SpeechPsdEstimator:
    """Per-stream speech PSD tracker.

    State is the previous smoothed cepstrum; the first frame initializes it
    directly (no smoothing is applied to that frame).
    """

    def __init__(self, config: TcsConfig | None = None):
        self.config = config or TcsConfig()
        self.cepstrum = None

    @property
    def initialized(self) -> bool:
        return self.cepstrum is not None

    def estimate(self, noisy_power, noise_psd, voiced=None) -> np.ndarray:
        """Smoothed speech PSD for one frame (K values).

        voiced=None lets the pitch detector decide; True forces pitch
        protection at the cepstral argmax, False disables it.
        """
        cfg = self.config
        ml = ml_speech_psd(noisy_power, noise_psd, cfg.snr_floor)
        ceps = log_to_cepstrum(np.log(ml))
        if self.cepstrum is None:
            self.cepstrum = ceps
        else:
            alpha = self._smoothing_profile(ceps, voiced)
            self.cepstrum = (1.0 - alpha) * ceps + alpha * self.cepstrum
        return np.exp(cepstrum_to_log(self.cepstrum) + 0.5 * cfg.euler_gamma)

    def _smoothing_profile(self, ceps, voiced) -> np.ndarray:
        cfg = self.config
        n = ceps.size
        half = n // 2
        profile = np.full(half + 1, cfg.alpha_rest)
        profile[: min(cfg.env_cutoff, half + 1)] = cfg.alpha_env
        pitch = self._pitch_index(ceps, voiced)
        if pitch is not None:
            lo = max(pitch - cfg.pitch_halfwidth, 0)
            hi = min(pitch + cfg.pitch_halfwidth, half)
            profile[lo : hi + 1] = cfg.alpha_pitch
        # mirror onto the upper quefrencies so the smoothed spectrum stays real
        alpha = np.empty(n)
        alpha[: half + 1] = profile
        alpha[half + 1 :] = profile[half - 1 : 0 : -1]
        return alpha

    def _pitch_index(self, ceps, voiced):
        cfg = self.config
        if voiced is False:
            return None
        pitch = detect_pitch_peak(ceps, cfg)
        if pitch is None and voiced:
            lo, hi = cfg.pitch_search
            pitch = lo + int(np.argmax(ceps[lo : hi + 1]))
        return pitch
