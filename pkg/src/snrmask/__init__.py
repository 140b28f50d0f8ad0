"""Single-channel speech enhancement with SNR-normalized mask prediction.

The pipeline: STFT analysis, SPP-based noise PSD tracking, cepstrally
smoothed speech PSD estimation, feature extraction (log periodogram,
noise-aware, SNR-normalized), mask-prediction networks, spectral gain
application, corpus synthesis and segmental metrics.
"""

from .enhance import EnhanceConfig, apply_gain, enhance, gain_field, wiener_gain
from .errors import FormatError, NumericError
from .features import (
    FeatureKind,
    FeatureMatrix,
    Trackers,
    assemble,
    extract,
    irm,
    stack_context,
)
from .metrics import SegConfig, seg_nr, seg_ssnr, shadow_filter
from .network import (
    Activation,
    LayerSpec,
    NetworkParams,
    TrainConfig,
    forward,
    glorot_init,
    gradients,
    loss,
    lr_at,
    preset_layers,
    train,
)
from .noise_tracker import NoiseTracker, NoiseTrackerConfig
from .speech_psd import SpeechPsdEstimator, TcsConfig, detect_pitch_peak, ml_speech_psd
from .stft import ComplexSpectrogram, FrameParams, istft, sqrt_hann, stft

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "ComplexSpectrogram",
    "EnhanceConfig",
    "FeatureKind",
    "FeatureMatrix",
    "FormatError",
    "FrameParams",
    "LayerSpec",
    "NetworkParams",
    "NoiseTracker",
    "NoiseTrackerConfig",
    "NumericError",
    "SegConfig",
    "SpeechPsdEstimator",
    "TcsConfig",
    "TrainConfig",
    "Trackers",
    "apply_gain",
    "assemble",
    "detect_pitch_peak",
    "enhance",
    "extract",
    "forward",
    "gain_field",
    "glorot_init",
    "gradients",
    "irm",
    "istft",
    "loss",
    "lr_at",
    "ml_speech_psd",
    "preset_layers",
    "seg_nr",
    "seg_ssnr",
    "shadow_filter",
    "sqrt_hann",
    "stack_context",
    "stft",
    "train",
    "wiener_gain",
]
