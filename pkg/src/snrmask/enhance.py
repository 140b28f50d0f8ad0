"""End-to-end enhancement: estimator-driven Wiener gains or network masks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FeatureKind, Trackers, extract
from .network import NetworkParams, forward
from .noise_tracker import NoiseTrackerConfig
from .speech_psd import TcsConfig
from .stft import ComplexSpectrogram, FrameParams, istft, stft

MODE_CONVENTIONAL = "conventional"
MODE_DNN = "dnn"


@dataclass(frozen=True)
class EnhanceConfig:
    """Gain floor (-20 dB default), processing mode, and preamble length."""

    gain_floor: float = 10.0 ** (-20.0 / 20.0)
    mode: str = MODE_CONVENTIONAL
    feature_kind: FeatureKind | None = None
    init_seconds: float = 2.0

    def __post_init__(self):
        if not 0.0 <= self.gain_floor < 1.0:
            raise ValueError("gain_floor must lie in [0, 1)")
        if self.mode not in (MODE_CONVENTIONAL, MODE_DNN):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.init_seconds < 0.0:
            raise ValueError("init_seconds must be nonnegative")


def wiener_gain(speech_psd, noise_psd) -> np.ndarray:
    """speech / (speech + noise) per bin; zero where both PSDs vanish."""
    speech = np.asarray(speech_psd, dtype=np.float64)
    total = speech + np.asarray(noise_psd, dtype=np.float64)
    gain = np.zeros_like(speech)
    np.divide(speech, total, out=gain, where=total > 0.0)
    return gain


def apply_gain(spec: ComplexSpectrogram, gains, floor: float = 0.1) -> ComplexSpectrogram:
    """Scale each complex bin by max(gain, floor)."""
    g = np.asarray(gains, dtype=np.float64)
    if g.shape != spec.frames.shape:
        raise ValueError("gain matrix shape does not match the spectrogram")
    return ComplexSpectrogram(spec.frames * np.maximum(g, floor), spec.params)


def _init_frame_count(config: EnhanceConfig, params: FrameParams) -> int:
    return params.num_frames(round(config.init_seconds * params.sample_rate))


def gain_field(
    samples,
    config: EnhanceConfig | None = None,
    model: NetworkParams | None = None,
    noise_config: NoiseTrackerConfig | None = None,
    tcs_config: TcsConfig | None = None,
    params: FrameParams | None = None,
):
    """Per-frame gains for a noisy utterance, before the floor is applied.

    Returns (spectrogram, gains).  The leading init_seconds must contain
    noise only; the trackers are seeded there and then run over every frame,
    so the gain of frame l depends only on frames <= l.
    """
    config = config or EnhanceConfig()
    params = params or FrameParams()
    x = np.asarray(samples, dtype=np.float64)
    init_frames = _init_frame_count(config, params)
    if init_frames < 1 or params.num_frames(x.size) < init_frames:
        raise ValueError(
            f"input must cover the {config.init_seconds:g} s initialization region"
        )
    spec = stft(x, params)
    power = spec.power()
    trackers = Trackers.from_preamble(power[:init_frames], noise_config, tcs_config)

    if config.mode == MODE_CONVENTIONAL:
        gains = np.empty_like(power)
        for l in range(power.shape[0]):
            noise_psd, _ = trackers.noise.update(power[l])
            speech_psd = trackers.speech.estimate(power[l], noise_psd)
            gains[l] = wiener_gain(speech_psd, noise_psd)
        return spec, gains

    if model is None:
        raise ValueError("dnn mode needs a model")
    kind = config.feature_kind or model.feature_kind
    if kind is None:
        raise ValueError("neither the config nor the model states a feature kind")
    if model.feature_kind is not None and kind is not model.feature_kind:
        raise ValueError(
            f"model was trained on {model.feature_kind.value} features, not {kind.value}"
        )
    features = extract(spec, kind, trackers, context=model.context)
    if features.dim != model.in_dim:
        raise ValueError(
            f"feature dimension {features.dim} does not match model input {model.in_dim}"
        )
    mask, _ = forward(model, features)
    return spec, mask


def enhance(
    samples,
    config: EnhanceConfig | None = None,
    model: NetworkParams | None = None,
    noise_config: NoiseTrackerConfig | None = None,
    tcs_config: TcsConfig | None = None,
    params: FrameParams | None = None,
) -> np.ndarray:
    """Enhanced time signal (overlap-add coverage of the input)."""
    config = config or EnhanceConfig()
    spec, gains = gain_field(samples, config, model, noise_config, tcs_config, params)
    return istft(apply_gain(spec, gains, config.gain_floor))
