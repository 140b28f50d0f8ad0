"""Input feature families, context stacking, and the oracle ratio mask."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .noise_tracker import NoiseTracker, NoiseTrackerConfig
from .speech_psd import SpeechPsdEstimator, TcsConfig
from .stft import ComplexSpectrogram

# arguments of every feature log are floored here to keep silent bins finite
LOG_FLOOR = 1e-12


class FeatureKind(Enum):
    """The five per-frame feature layouts."""

    LOG_PERIODOGRAM = "per"
    NAT = "nat"
    PRIOR = "prior"
    POST = "post"
    SNR_NAT = "snrnat"

    def base_dim(self, bins: int = 129) -> int:
        """Feature dimensionality for one frame before context stacking."""
        if self in (FeatureKind.NAT, FeatureKind.SNR_NAT):
            return 2 * bins
        return bins

    @property
    def needs_speech_psd(self) -> bool:
        return self in (FeatureKind.PRIOR, FeatureKind.SNR_NAT)


# stable ids shared by the record and model file formats (0 = no kind)
KIND_IDS = {
    None: 0,
    FeatureKind.LOG_PERIODOGRAM: 1,
    FeatureKind.NAT: 2,
    FeatureKind.PRIOR: 3,
    FeatureKind.POST: 4,
    FeatureKind.SNR_NAT: 5,
}
KINDS_BY_ID = {v: k for k, v in KIND_IDS.items()}


@dataclass
class FeatureMatrix:
    """Per-frame feature rows of one utterance (L x base_dim*context)."""

    rows: np.ndarray
    kind: FeatureKind
    context: int = 1

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.float64)
        if self.rows.ndim != 2:
            raise ValueError("feature rows must form an L x D matrix")
        if self.context < 1:
            raise ValueError("context must be >= 1")
        if self.rows.shape[1] % (self.kind.base_dim() * self.context) != 0:
            raise ValueError(
                f"row width {self.rows.shape[1]} does not match kind "
                f"{self.kind.value} with context {self.context}"
            )
        if not np.all(np.isfinite(self.rows)):
            raise ValueError("feature values must be finite")

    @property
    def num_frames(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class Trackers:
    """The two recursive PSD estimators threaded through one utterance."""

    noise: NoiseTracker
    speech: SpeechPsdEstimator

    @classmethod
    def from_preamble(
        cls,
        init_power,
        noise_config: NoiseTrackerConfig | None = None,
        tcs_config: TcsConfig | None = None,
    ) -> "Trackers":
        """Build trackers with the noise PSD seeded from noise-only frames."""
        tracker = NoiseTracker(noise_config)
        tracker.initialize(init_power)
        return cls(tracker, SpeechPsdEstimator(tcs_config))

    def run(self, power, need_speech: bool = True):
        """Track the PSDs over an L x K power matrix, frame by frame.

        Returns (noise_psd, speech_psd) matrices; speech_psd is None when
        not requested.
        """
        power = np.asarray(power, dtype=np.float64)
        noise = np.empty_like(power)
        speech = np.empty_like(power) if need_speech else None
        for l in range(power.shape[0]):
            psd, _ = self.noise.update(power[l])
            noise[l] = psd
            if need_speech:
                speech[l] = self.speech.estimate(power[l], psd)
        return noise, speech


def _log(values) -> np.ndarray:
    return np.log(np.maximum(values, LOG_FLOOR))


def assemble(kind: FeatureKind, noisy_power, noise_psd=None, speech_psd=None) -> np.ndarray:
    """Compose feature rows from per-frame power and tracked PSDs.

    Accepts single frames or L x K matrices; all ratios are formed before
    the log so the SNR-based kinds stay level-independent.
    """
    power = np.asarray(noisy_power, dtype=np.float64)
    if kind is FeatureKind.LOG_PERIODOGRAM:
        return _log(power)
    if noise_psd is None:
        raise ValueError(f"{kind.value} features require a noise PSD estimate")
    noise = np.asarray(noise_psd, dtype=np.float64)
    if kind is FeatureKind.NAT:
        return np.concatenate([_log(power), _log(noise)], axis=-1)
    if kind is FeatureKind.POST:
        return _log(power / noise)
    if speech_psd is None:
        raise ValueError(f"{kind.value} features require a speech PSD estimate")
    speech = np.asarray(speech_psd, dtype=np.float64)
    prior = _log(speech / noise)
    if kind is FeatureKind.PRIOR:
        return prior
    return np.concatenate([prior, _log(power / noise)], axis=-1)


def extract(
    noisy_spec: ComplexSpectrogram,
    kind: FeatureKind,
    trackers: Trackers,
    context: int = 1,
) -> FeatureMatrix:
    """Feature matrix for one utterance.

    The trackers must already be initialized on the utterance's noise-only
    preamble; they are advanced over every frame of the spectrogram.
    """
    if not trackers.noise.initialized:
        raise RuntimeError("trackers must be initialized on the noise preamble")
    power = noisy_spec.power()
    noise, speech = trackers.run(power, need_speech=kind.needs_speech_psd)
    features = FeatureMatrix(assemble(kind, power, noise, speech), kind)
    if context > 1:
        features = stack_context(features, context)
    return features


def stack_context(features: FeatureMatrix, depth: int = 4) -> FeatureMatrix:
    """Stack each frame with the depth-1 previous frames.

    Frames before the start of the utterance are substituted by the first
    frame (zeros would be far off the log-feature manifold).
    """
    if depth < 1:
        raise ValueError("context depth must be >= 1")
    rows = features.rows
    if depth == 1:
        return FeatureMatrix(rows.copy(), features.kind, features.context)
    idx = np.maximum(np.arange(rows.shape[0])[:, None] - np.arange(depth)[None, :], 0)
    stacked = rows[idx].reshape(rows.shape[0], depth * rows.shape[1])
    return FeatureMatrix(stacked, features.kind, features.context * depth)


def irm(clean_spec: ComplexSpectrogram, noise_spec: ComplexSpectrogram) -> np.ndarray:
    """Oracle ratio mask |S|^2 / (|S|^2 + |N|^2), zero where both vanish."""
    if clean_spec.frames.shape != noise_spec.frames.shape:
        raise ValueError("clean and noise spectrograms must have the same shape")
    clean_power = clean_spec.power()
    total = clean_power + noise_spec.power()
    mask = np.zeros_like(clean_power)
    np.divide(clean_power, total, out=mask, where=total > 0.0)
    return mask
