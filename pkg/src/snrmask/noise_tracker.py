"""Recursive noise PSD tracking driven by the speech presence probability."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseTrackerConfig:
    """Constants of the SPP noise tracker.

    snr_opt is the fixed local SNR assumed when speech is present (-15 dB,
    linear).  psd_smooth is the recursive smoothing constant of the noise
    PSD update.  The presence probability is kept at or below spp_ceiling;
    spp_smooth and stagnation_window parameterize the detector that records
    where the probability has been stuck near one.  floor is the minimum
    PSD relative to the mean power of the initialization region.
    """

    snr_opt: float = 10.0 ** (-15.0 / 10.0)
    psd_smooth: float = 0.8
    spp_ceiling: float = 0.99
    spp_smooth: float = 0.9
    stagnation_window: int = 8
    floor: float = 1e-12

    def __post_init__(self):
        if not 0.0 < self.psd_smooth < 1.0:
            raise ValueError("psd_smooth must lie in (0, 1)")
        if not 0.0 < self.spp_ceiling <= 1.0:
            raise ValueError("spp_ceiling must lie in (0, 1]")
        if not 0.0 <= self.spp_smooth < 1.0:
            raise ValueError("spp_smooth must lie in [0, 1)")
        if self.snr_opt <= 0.0:
            raise ValueError("snr_opt must be positive")
        if self.stagnation_window < 1:
            raise ValueError("stagnation_window must be >= 1")
        if self.floor <= 0.0:
            raise ValueError("floor must be positive")


class NoiseTracker:
    """Per-stream recursive estimator of the noise PSD.

    The tracker is seeded from a noise-only preamble and then advanced one
    frame at a time.  Each update estimates the noise periodogram as a
    probability-weighted mix of the current noisy periodogram and the
    previous PSD, then smooths it recursively.  The presence probability is
    clamped at spp_ceiling so the update can never freeze completely; a
    smoothed copy of the probability plus per-bin counters record where the
    clamp has been persistently active.
    """

    def __init__(self, config: NoiseTrackerConfig | None = None):
        self.config = config or NoiseTrackerConfig()
        self.noise_psd = None
        self.smoothed_spp = None
        self.stagnation_count = None
        self._floor = None

    @property
    def initialized(self) -> bool:
        return self.noise_psd is not None

    def initialize(self, noisy_power_frames) -> None:
        """Seed the PSD with the per-bin mean over noise-only frames (M x K)."""
        frames = np.atleast_2d(np.asarray(noisy_power_frames, dtype=np.float64))
        if frames.size == 0:
            raise ValueError("initialization region is empty")
        if np.any(frames < 0.0):
            raise ValueError("power values must be nonnegative")
        reference = float(frames.mean())
        # silent preamble: fall back to an absolute floor so ratios stay defined
        self._floor = self.config.floor * reference if reference > 0.0 else self.config.floor
        self.noise_psd = np.maximum(frames.mean(axis=0), self._floor)
        self.smoothed_spp = np.full(self.noise_psd.shape, 0.5)
        self.stagnation_count = np.zeros(self.noise_psd.shape, dtype=np.int64)

    def spp(self, noisy_power) -> np.ndarray:
        """Posterior speech presence probability of one frame.

        Evaluated against the tracked PSD with equal priors and the fixed
        presence SNR; strictly increasing in the noisy power.
        """
        self._require_initialized()
        power = self._check_power(noisy_power)
        snr_opt = self.config.snr_opt
        ratio = power / self.noise_psd
        return 1.0 / (1.0 + (1.0 + snr_opt) * np.exp(-ratio * snr_opt / (1.0 + snr_opt)))

    def update(self, noisy_power, spp=None):
        """Advance the tracker by one frame.

        Returns (noise_psd, spp_used).  spp may be forced by the caller
        (e.g. 0 everywhere reduces the tracker to plain exponential
        smoothing of the noisy periodogram).
        """
        self._require_initialized()
        power = self._check_power(noisy_power)
        cfg = self.config
        if spp is None:
            p = self.spp(power)
            self.smoothed_spp = (1.0 - cfg.spp_smooth) * p + cfg.spp_smooth * self.smoothed_spp
            stuck = self.smoothed_spp > cfg.spp_ceiling
            self.stagnation_count = np.where(stuck, self.stagnation_count + 1, 0)
            p = np.minimum(p, cfg.spp_ceiling)
        else:
            p = np.asarray(spp, dtype=np.float64)
            if p.shape != self.noise_psd.shape:
                raise ValueError("forced spp has the wrong shape")
        noise_periodogram = (1.0 - p) * power + p * self.noise_psd
        self.noise_psd = np.maximum(
            (1.0 - cfg.psd_smooth) * noise_periodogram + cfg.psd_smooth * self.noise_psd,
            self._floor,
        )
        return self.noise_psd.copy(), p

    def _require_initialized(self):
        if not self.initialized:
            raise RuntimeError("noise tracker has not been initialized from a preamble")

    def _check_power(self, noisy_power) -> np.ndarray:
        power = np.asarray(noisy_power, dtype=np.float64)
        if power.shape != self.noise_psd.shape:
            raise ValueError(
                f"expected {self.noise_psd.shape[0]} power values, got shape {power.shape}"
            )
        if np.any(power < 0.0):
            raise ValueError("power values must be nonnegative")
        return power
